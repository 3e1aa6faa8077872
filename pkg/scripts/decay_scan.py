"""range_profile ratio and C_j(0) peak scaling against the heat-window width.

Usage: python scripts/decay_scan.py [--N 5] [--widths 0.1 0.15 0.2 0.3]
"""

import argparse

from rgflow.decomp import WindowProfile, build_decomposition, range_profile
from rgflow.lattice import TorusSpec


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--N", type=int, default=5)
    p.add_argument("--L", type=int, default=2)
    p.add_argument("--widths", type=float, nargs="+", default=[0.1, 0.15, 0.2, 0.3])
    a = p.parse_args()
    origin = (0,) * 4
    for w in a.widths:
        dec = build_decomposition(TorusSpec(4, a.L, a.N), 0.0, WindowProfile("heat", w))
        ratios = {j: range_profile(dec, j).ratio for j in range(1, dec.N)}
        peaks = [dec.slice(j + 1).at(origin) / dec.slice(j).at(origin) for j in range(1, dec.N - 1)]
        print(f"width={w}: decay ratios {', '.join(f'j={j}:{r:.2e}' for j, r in ratios.items())}; "
              f"C_(j+1)(0)/C_j(0) = {[round(x, 3) for x in peaks]}")


if __name__ == "__main__":
    main()

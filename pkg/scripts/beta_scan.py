"""beta_j at side L^N for m2 = 0 and m2 = L^-2k, with (j_m, j_Omega) per mass.

Usage: python scripts/beta_scan.py [--N 6] [--L 2] [--kmax 5] [--omega 2]
"""

import argparse
import gc
import resource
import time

from rgflow.coeffs import beta_limit, coefficient_table, scales
from rgflow.decomp import build_decomposition
from rgflow.lattice import TorusSpec


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--N", type=int, default=6)
    p.add_argument("--L", type=int, default=2)
    p.add_argument("--kmax", type=int, default=5)
    p.add_argument("--omega", type=float, default=2.0)
    a = p.parse_args()
    spec = TorusSpec(4, a.L, a.N)
    for m2 in [0.0] + [float(a.L) ** (-2 * k) for k in range(2, a.kmax + 1)]:
        t0 = time.perf_counter()
        dec = build_decomposition(spec, m2)
        betas = [s.fc.beta for s in coefficient_table(dec)]
        if m2 == 0:
            bl = beta_limit(dec)
            extra = f"extrapolated={bl.extrapolated:.5f} reference={bl.reference:.6f}"
        else:
            extra = "(j_m, j_Omega)=%s" % (scales(m2, a.L, betas, a.omega),)
        rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 2**20
        print(f"m2={m2:.6g} betas={[round(b, 5) for b in betas]} {extra} "
              f"time={time.perf_counter() - t0:.1f}s peak_rss={rss:.2f}GB", flush=True)
        del dec
        gc.collect()


if __name__ == "__main__":
    main()

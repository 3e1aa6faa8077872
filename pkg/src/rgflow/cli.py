"""Command-line entry point.

Usage::

    rgflow SUBCOMMAND [--config FILE] [--set key=value ...] [--out DIR]

Subcommands: decompose, coeffs, flow, derive, verify, export_plotdata.
Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical error. Errors are also printed to stderr as one JSON record.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

from . import coeffs as C
from . import decomp as D
from . import flow as F
from . import io
from . import lattice
from .config import ConfigError, RunConfig, load_config, parse_config
from .lattice import TorusSpec

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

GREEK = ("beta", "theta", "etap", "xip", "pip", "sigma", "zeta", "omega", "eta", "xi", "pi")


class InputError(ValueError):
    pass


def _mass_tag(m2: float) -> str:
    return "m2_" + io.fmt_float(m2).replace("-", "m").replace("+", "")


def _window(cfg: RunConfig) -> D.WindowProfile:
    return D.WindowProfile(cfg.window_family, cfg.window_width, tuple(cfg.window_support))


def _decomposition(cfg: RunConfig, m2: float) -> D.ScaleDecomposition:
    return D.build_decomposition(TorusSpec(cfg.d, cfg.L, cfg.N), m2, _window(cfg), sign=cfg.laplacian_sign)


def cmd_decompose(cfg: RunConfig, out: str, chash: str) -> int:
    manifest = {"config": cfg.canonical(), "masses": []}
    for m2 in cfg.masses:
        dec = _decomposition(cfg, m2)
        sub = os.path.join(out, "decomp", _mass_tag(m2))
        os.makedirs(sub, exist_ok=True)
        files = []
        for j in range(1, dec.N + 1):
            name = f"C_{j}.rfk" if j < dec.N else "C_NN.rfk"
            lattice.dump_kernel(os.path.join(sub, name), dec.slice(j), m2, {"scale": j, "config_hash": chash})
            files.append(name)
        entry = dec.manifest()
        entry.update(files=files, closure_error=dec.closure_error(),
                     range_ratios={j: D.range_profile(dec, j).ratio for j in range(1, dec.N)})
        io.write_json(os.path.join(sub, "manifest.json"), entry, chash)
        manifest["masses"].append({"m2": m2, "dir": os.path.relpath(sub, out)})
    io.write_json(os.path.join(out, "decomp", "manifest.json"), manifest, chash)
    print(f"wrote decomposition for {len(cfg.masses)} mass value(s) under {os.path.join(out, 'decomp')}")
    return EXIT_OK


def cmd_coeffs(cfg: RunConfig, out: str, chash: str) -> int:
    for m2 in cfg.masses:
        dec = _decomposition(cfg, m2)
        table = C.coefficient_table(dec, cfg.ab_offset, range(1, dec.N))
        path = os.path.join(out, f"coeffs_{_mass_tag(m2)}.csv")
        io.write_csv(path, C.CSV_COLUMNS, [C.csv_row(s) for s in table], chash)
        print(f"wrote {path}")
    return EXIT_OK


def _bulk_vs_full(traj: F.Trajectory, table, L: int) -> list:
    """Per step, the full map's (g, mu, y + z) against the bulk map's (g, mu, z0)."""
    by_j = {s.fc.j: s for s in table}
    rows = list(traj.rows)
    out = []
    for r, nxt in zip(rows, rows[1:]):
        sd = by_j.get(r.j)
        if sd is None:
            continue
        bulk = F.phi_pt_bulk(r.B, sd.fc)
        full = F.BulkVector.from_coupling(nxt.V, nxt.j, L)
        out.append({"j": r.j, "d_g": full.g - bulk.g, "d_mu": full.mu - bulk.mu, "d_z0": full.z0 - bulk.z0})
    return out


def cmd_flow(cfg: RunConfig, out: str, chash: str) -> int:
    status = EXIT_OK
    V0 = F.CouplingVector(cfg.g, cfg.nu, cfg.y, cfg.z, cfg.lam_a, cfg.lam_b, cfg.q_a, cfg.q_b)
    for m2 in cfg.masses:
        dec = _decomposition(cfg, m2)
        table = C.coefficient_table(dec, cfg.ab_offset, cfg.scale_range)
        j_ab = C.coalescence_scale(cfg.ab_offset, cfg.L)
        traj = F.iterate_flow(V0, table=table, j_ab=j_ab, threshold=cfg.divergence_threshold, raise_on_divergence=False)
        tag = _mass_tag(m2)
        io.write_csv(os.path.join(out, f"trajectory_{tag}.csv"), F.TRAJECTORY_COLUMNS, [r.as_dict() for r in traj.rows], chash)
        summary = traj.summary()
        summary.update(m2=m2, bulk_vs_full=_bulk_vs_full(traj, table, cfg.L))
        io.write_json(os.path.join(out, f"trajectory_{tag}.json"), summary, chash)
        print(f"wrote trajectory_{tag}.csv ({len(traj.rows)} rows, diverged={traj.diverged})")
        if traj.diverged:
            _error("PerturbativeRegimeError", traj.message, EXIT_NUMERIC)
            status = EXIT_NUMERIC
    return status


def cmd_derive(cfg: RunConfig, out: str, chash: str) -> int:
    from .symbolic import compare_tables, derive_flow_table, format_table, hardcoded_flow_table, table_to_terms

    derived = derive_flow_table(cfg.phase, cfg.laplacian_sign)
    cmp = compare_tables(derived, hardcoded_flow_table(cfg.phase), cfg.phase, cfg.laplacian_sign)
    text = format_table(derived) + "\n\n" + cmp.report() + "\n"
    io.write_text(os.path.join(out, f"derive_{cfg.phase}.txt"), text, chash)
    io.write_json(os.path.join(out, f"derive_{cfg.phase}.json"),
                  {"phase": cfg.phase, "laplacian_sign": cfg.laplacian_sign, "table": table_to_terms(derived),
                   "matches_closed_form": cmp.equal, "difference": {k: str(v) for k, v in cmp.diff.items()}}, chash)
    print(text, end="")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: str, chash: str) -> int:
    from .verify import run_all

    results = run_all(cfg, skip_side64=not cfg.acceptance_side64)
    for r in results:
        print(r.line())
    io.write_json(os.path.join(out, "verify.json"),
                  {"results": [dataclasses.asdict(r) for r in results], "all_passed": all(r.passed for r in results)}, chash)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def export_plotdata(in_path: str, out_path: str) -> str:
    """Long-format (series, j, value) CSV from a coefficients or trajectory CSV."""
    if not os.path.exists(in_path):
        raise InputError(f"input artifact {in_path} does not exist")
    chash, cols, rows = io.read_csv(in_path)
    if cols and "beta" in cols:
        series = [c for c in GREEK if c in cols]
    elif cols and "gbar" in cols:
        series = [c for c in cols if c != "j"]
    elif not cols:
        series = []
    else:
        raise InputError(f"{in_path} is neither a coefficients nor a trajectory CSV")
    long_rows = []
    for name in series:
        for r in sorted(rows, key=lambda r: int(r["j"])):
            long_rows.append({"series": name, "j": int(r["j"]), "value": float(r[name])})
    return io.write_csv(out_path, ("series", "j", "value"), long_rows, chash or "unknown")


def _error(kind: str, message: str, code: int):
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)


COMMANDS = {"decompose": cmd_decompose, "coeffs": cmd_coeffs, "flow": cmd_flow, "derive": cmd_derive, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rgflow", description="Scale decomposition, flow coefficients and flow equations.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="key = value config file")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        s.add_argument("--out", help="output directory (overrides output_dir)")
    e = sub.add_parser("export_plotdata")
    e.add_argument("input", help="coefficients or trajectory CSV")
    e.add_argument("output", help="long-format CSV to write")
    return p


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.set:
        cfg = parse_config("\n".join(args.set), base=cfg)
    return cfg


def run(command: str, cfg: RunConfig, out: str | None = None) -> int:
    out = out or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    return COMMANDS[command](cfg, out, io.config_hash(cfg))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export_plotdata":
            print(export_plotdata(args.input, args.output))
            return EXIT_OK
        cfg = resolve_config(args)
        lattice.set_laplacian_sign(cfg.laplacian_sign)
        return run(args.command, cfg, args.out)
    except (ConfigError, InputError) as exc:
        _error(type(exc).__name__, str(exc), EXIT_CONFIG)
        return EXIT_CONFIG
    except (ArithmeticError, ValueError, MemoryError) as exc:
        _error(type(exc).__name__, str(exc), EXIT_NUMERIC)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

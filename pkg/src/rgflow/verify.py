"""Acceptance checks tying the modules together, one function per criterion."""

from __future__ import annotations

import functools
import gc
import math
import random
import resource
import time
from dataclasses import dataclass, field

import numpy as np

from . import coeffs as C
from . import decomp as D
from . import flow as F
from .config import RunConfig
from .lattice import TorusSpec


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d}. {self.name} ({self.seconds:.1f}s)"


def window_of(cfg: RunConfig) -> D.WindowProfile:
    return D.WindowProfile(cfg.window_family, cfg.window_width, tuple(cfg.window_support))


@functools.lru_cache(maxsize=1)
def _cached_decomposition(d, L, N, m2, family, width, support, sign):
    return D.build_decomposition(TorusSpec(d, L, N), m2, D.WindowProfile(family, width, support), sign=sign)


def decomposition(cfg: RunConfig, N: int | None = None, m2: float = 0.0, d: int | None = None) -> D.ScaleDecomposition:
    """Decomposition for cfg at side L^N; only the most recent one is kept in memory."""
    return _cached_decomposition(d or cfg.d, cfg.L, N or cfg.N, float(m2), cfg.window_family,
                                 cfg.window_width, tuple(cfg.window_support), cfg.laplacian_sign)


def clear_cache():
    _cached_decomposition.cache_clear()
    gc.collect()


def _timed(fn):
    @functools.wraps(fn)
    def wrapper(cfg: RunConfig) -> CheckResult:
        t0 = time.perf_counter()
        res = fn(cfg)
        res.seconds = time.perf_counter() - t0
        return res
    return wrapper


def _rel(a, ref):
    return abs(a - ref) / abs(ref)


@_timed
def check_symbolic(cfg: RunConfig) -> CheckResult:
    from .symbolic import compare_tables, derive_flow_table, hardcoded_flow_table, numeric_cross_check, perturbative_map

    t0 = time.perf_counter()
    detail = {}
    equal = True
    worst = 0.0
    worst_ref = 0.0
    for phase in ("below_jab", "at_or_above_jab"):
        res = perturbative_map(phase, cfg.laplacian_sign)
        derived = derive_flow_table(phase, cfg.laplacian_sign, res)
        ref = hardcoded_flow_table(phase)
        cmp = compare_tables(derived, ref, phase, cfg.laplacian_sign)
        equal &= cmp.equal
        detail[phase] = {k: str(v) for k, v in cmp.diff.items()}
        worst = max(worst, numeric_cross_check(derived, phase, seed=cfg.seed))
        worst_ref = max(worst_ref, numeric_cross_check(ref, phase, seed=cfg.seed))
    elapsed = time.perf_counter() - t0
    detail.update(derived_vs_phi_pt=worst, closed_form_vs_phi_pt=worst_ref, runtime=elapsed)
    ok = equal and worst <= cfg.tol.symbolic and worst_ref <= cfg.tol.symbolic and elapsed < 10
    return CheckResult(1, "symbolic-numeric equivalence of the flow table", ok, detail)


def _peak_rss_gb() -> float:
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 2**20


@_timed
def check_beta_limit(cfg: RunConfig) -> CheckResult:
    t0 = time.perf_counter()
    dec = decomposition(cfg, N=6, d=4, m2=0.0)
    bl = C.beta_limit(dec)
    elapsed = time.perf_counter() - t0
    ref = bl.reference
    last2 = bl.betas[-2:]
    errs = [_rel(b, ref) for b in last2]
    ext = _rel(bl.extrapolated, ref)
    trend = abs(bl.betas[-1] - ref) < abs(bl.betas[-3] - ref)
    ok = all(e <= cfg.tol.beta_last for e in errs) and ext <= cfg.tol.beta_extrapolated and elapsed < 300 and _peak_rss_gb() < 8
    detail = {"betas": list(bl.betas), "reference": ref, "last_two_rel_err": errs, "extrapolated": bl.extrapolated,
              "extrapolated_rel_err": ext, "trending": trend, "runtime": elapsed, "peak_rss_gb": _peak_rss_gb()}
    return CheckResult(2, "beta_j approaches log L / pi^2", ok, detail)


@_timed
def check_closure(cfg: RunConfig) -> CheckResult:
    errs = {}
    for m2 in (0.0, 0.01, 1.0):
        dec = D.build_decomposition(TorusSpec(4, cfg.L, 5 if cfg.L == 2 else cfg.N), m2, window_of(cfg), sign=cfg.laplacian_sign)
        errs[m2] = dec.closure_error()
        del dec
    gc.collect()
    ok = all(e <= cfg.tol.closure for e in errs.values())
    return CheckResult(3, "slices plus remainder reproduce the Green function", ok, {"closure_error": errs})


@_timed
def check_decay(cfg: RunConfig) -> CheckResult:
    dec = decomposition(cfg, N=6, d=4, m2=0.0)
    ratios = {j: D.range_profile(dec, j).ratio for j in (2, 3, 4)}
    ok = all(r <= cfg.tol.decay for r in ratios.values())
    return CheckResult(4, "slice decay beyond half the scale length", ok, {"ratios": ratios})


@_timed
def check_bounds(cfg: RunConfig) -> CheckResult:
    dec = decomposition(cfg, N=6, d=4, m2=0.0)
    table = C.coefficient_table(dec, cfg.ab_offset if len(cfg.ab_offset) == 4 else None, range(2, 5))
    prof = C.bound_profiles(table)
    bad = [k for k, v in prof.items() if not (v[1] <= cfg.tol.bound_factor * v[2])]
    detail = {k: {"values": list(v[0]), "max": v[1], "median": v[2]} for k, v in prof.items()}
    detail["violations"] = bad
    return CheckResult(5, "normalised coefficient sequences stay bounded", not bad, detail)


def _small_table(cfg: RunConfig):
    dec = D.build_decomposition(TorusSpec(4, cfg.L, 5), 0.0, window_of(cfg), sign=cfg.laplacian_sign)
    return C.coefficient_table(dec)


def _unit_vectors(rng: np.random.Generator, n: int, dim: int = 3):
    v = rng.normal(size=(n, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@_timed
def check_cubic_residual(cfg: RunConfig) -> CheckResult:
    table = _small_table(cfg)
    rng = np.random.default_rng(cfg.seed)
    eps = (1e-1, 1e-2, 1e-3)
    spreads = []
    for sd in table[1:4]:
        for u in _unit_vectors(rng, 10):
            B = F.BulkVector(*u)
            r = [np.linalg.norm(F.conjugacy_residual(B.scaled(e), sd.fc).as_array()) / e**3 for e in eps]
            spreads.append(max(r) / min(r) if min(r) > 0 else math.inf)
    worst = max(spreads)
    return CheckResult(6, "conjugacy remainder is cubic", worst <= cfg.tol.cubic_factor, {"worst_ratio_spread": worst, "cases": len(spreads)})


@_timed
def check_roundtrip(cfg: RunConfig) -> CheckResult:
    table = _small_table(cfg)
    rng = np.random.default_rng(cfg.seed + 1)
    worst = 0.0
    for i in range(1000):
        sd = table[i % len(table)]
        u = _unit_vectors(rng, 1)[0] * rng.uniform(0, 0.05)
        B = F.BulkVector(*u)
        back = F.invert_T(F.transform_T(B, sd.fc), sd.fc)
        scale = max(np.linalg.norm(B.as_array()), 1e-300)
        worst = max(worst, np.linalg.norm((back - B).as_array()) / scale)
    return CheckResult(7, "inverse change of variables round trip", worst <= cfg.tol.roundtrip, {"worst_relative_error": worst})


@_timed
def check_gbar(cfg: RunConfig) -> CheckResult:
    beta_inf = C.beta_reference(cfg.L)
    orbit = F.constant_beta_orbit(0.1, beta_inf, 500)
    asym = orbit[500] * beta_inf * 500
    table = _small_table(cfg)
    traj = F.iterate_flow(F.CouplingVector(g=cfg.g), table=table, j_ab=math.inf)
    gbar = [float(v) for v in traj.column("gbar")]
    ok = abs(asym - 1) <= cfg.tol.asymptotic and traj.comparable and traj.monotone
    return CheckResult(8, "gbar asymptotics and comparability", ok,
                       {"gbar_beta_j_at_500": asym, "gbar": gbar, "comparable": traj.comparable, "decreasing": traj.monotone})


@_timed
def check_scale_relation(cfg: RunConfig) -> CheckResult:
    out = {}
    for k in range(2, 6):
        m2 = float(cfg.L) ** (-2 * k)
        dec = decomposition(cfg, N=6, d=4, m2=m2)
        betas = [s.fc.beta for s in C.coefficient_table(dec)]
        jm, jo = C.scales(m2, cfg.L, betas, cfg.Omega)
        out[k] = {"j_m": jm, "j_Omega": jo, "gap": abs(jo - jm)}
    clear_cache()
    ok = all(v["gap"] <= cfg.tol.scale_gap for v in out.values())
    return CheckResult(9, "j_Omega tracks j_m", ok, out)


def random_polynomial(rng: random.Random, n_terms: int = 6, degree: int = 4):
    """Random polynomial of field degree <= degree built from tau-type atoms at x and y."""
    from .symbolic.algebra import LAP, FieldAtom, LocalPolynomial, grad

    out = LocalPolynomial()
    for _ in range(n_terms):
        atoms = []
        for _ in range(degree // 2):
            a, b = rng.choice([("phi", "phibar"), ("psi", "psibar")])
            deco = rng.choice([(), (), LAP])
            atoms.append(FieldAtom(a, rng.choice("xy"), deco))
            atoms.append(FieldAtom(b, rng.choice("xy")))
        out.add_term(tuple(atoms), (), (), rng.randint(-5, 5))
    return out


@_timed
def check_structure(cfg: RunConfig) -> CheckResult:
    from .symbolic import apply_Q, laplacian, perturbative_map, tau, tau2, tau_delta, tau_nabla, wick_exp
    from .symbolic.derive import COUPLING_NAMES, derive_flow_table, symbols

    detail = {}
    s = cfg.laplacian_sign
    detail["Q_annihilates_basis"] = all(apply_Q(p).is_zero() for p in (tau(), tau2(), tau_nabla(), tau_delta("x", s)))
    rng = random.Random(cfg.seed)
    comm = True
    for _ in range(5):
        p = random_polynomial(rng)
        comm &= (apply_Q(laplacian(p, "C")) - laplacian(apply_Q(p), "C")).is_zero()
        comm &= (apply_Q(wick_exp(p, "C", -1)) - wick_exp(apply_Q(p), "C", -1)).is_zero()
    detail["Q_commutes_with_L"] = comm
    res = perturbative_map(cfg.phase, s)
    bulk_rem = res.remainder.is_zero()
    detail["bulk_closure"] = bulk_rem and res.coefficients["one"] == 0
    table = derive_flow_table(cfg.phase, s, res)
    sy = symbols()
    obs_syms = {sy[k] for k in ("lam_a", "lam_b", "q_a", "q_b")}
    detail["block_triangular_symbolic"] = all(not (table[k].free_symbols & obs_syms) for k in ("g", "nu", "y", "z"))
    # numeric block triangularity and q activation on a real decomposition
    dec = D.build_decomposition(TorusSpec(4, cfg.L, 5), 0.0, window_of(cfg), sign=s)
    tab = C.coefficient_table(dec, (4, 0, 0, 0))
    sd = tab[1]
    V1 = F.CouplingVector(0.05, 0.01, 0.002, -0.001, 0.3, -0.2, 0.1, 0.4)
    V2 = F.CouplingVector(0.05, 0.01, 0.002, -0.001, -1.0, 2.0, -3.0, 0.0)
    o1, o2 = F.phi_pt(V1, sd.fc, sd.raw, sd.raw_next), F.phi_pt(V2, sd.fc, sd.raw, sd.raw_next)
    detail["block_triangular_numeric"] = o1.as_tuple()[:4] == o2.as_tuple()[:4]
    j_ab = C.coalescence_scale((4, 0, 0, 0), cfg.L)
    traj = F.iterate_flow(F.CouplingVector(lam_a=1.0, lam_b=1.0), table=tab, j_ab=j_ab)
    q = [float(v) for v in traj.column("q_a")]
    # increment of q at step j is C_{j+1}(a - b); compare with the slice peak C_{j+1}(0)
    rel = [t.raw.Cab / t.raw.C00 for t in tab]
    before = max(abs(v) for v in rel[: j_ab - 1])
    jump = abs(q[j_ab]) / max(abs(q[j_ab - 1]), 1e-300)
    detail["q_activation"] = {"j_ab": j_ab, "q": q, "relative_increments": rel,
                              "max_relative_before": before, "relative_at_coalescence": rel[j_ab - 1],
                              "jump_at_coalescence": jump}
    detail["q_activation_ok"] = before <= cfg.tol.decay and jump >= 10.0
    keys = ("Q_annihilates_basis", "Q_commutes_with_L", "bulk_closure", "block_triangular_symbolic",
            "block_triangular_numeric", "q_activation_ok")
    return CheckResult(10, "supersymmetry and structure suite", all(detail[k] for k in keys), detail)


CHECKS = (check_symbolic, check_beta_limit, check_closure, check_decay, check_bounds, check_cubic_residual,
          check_roundtrip, check_gbar, check_scale_relation, check_structure)


def run_all(cfg: RunConfig, only=None, skip_side64: bool = False) -> list:
    out = []
    side64 = {2, 4, 5, 9}
    for i, fn in enumerate(CHECKS, 1):
        if only is not None and i not in only:
            continue
        if skip_side64 and i in side64:
            continue
        out.append(fn(cfg))
    clear_cache()
    return out

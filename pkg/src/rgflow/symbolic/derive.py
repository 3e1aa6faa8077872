"""Second-order coupling map from the contraction calculus, and its comparison
with the closed-form flow table."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import sympy as sp

from .algebra import LocalPolynomial, coupling_symbols, symbolic_V
from .contraction import truncated_pair, wick_exp
from .loc import PHASES, LocError, decompose, loc_local, loc_reduce, moment_symbol, scalarize

COUPLING_NAMES = ("g", "nu", "y", "z", "lam_a", "lam_b", "q_a", "q_b")
W_NAMES = ("w1", "w2", "w3", "wss", "w2ss", "w3ss", "wdw1", "wdwss", "gwss")


def symbols() -> dict:
    """All symbols of the flow table, keyed by name."""
    out = dict(coupling_symbols())
    for n in W_NAMES:
        out[n] = moment_symbol(n, "w")
        out[n + "_plus"] = moment_symbol(n, "wp")
    out["C00"] = sp.Symbol("C00")
    out["Cab"] = sp.Symbol("Cab")
    return out


@dataclass
class PerturbativeResult:
    W: LocalPolynomial
    P: LocalPolynomial
    V_pt: LocalPolynomial
    coefficients: dict = field(default_factory=dict)
    remainder: LocalPolynomial = field(default_factory=LocalPolynomial)


def _check_phase(phase: str):
    if phase not in PHASES:
        raise ValueError(f"unknown phase {phase!r}; expected one of {PHASES}")


def perturbative_map(phase: str = "below_jab", sign: int = -1, V: LocalPolynomial | None = None,
                     with_W: bool = False, dim: int = 4) -> PerturbativeResult:
    """(W, P, V_pt) for a symbolic V.

    P = 1/2 [Loc F_{pi, w+C}(e^{L_C} V_x, e^{L_C} V_y) - e^{L_C} Loc F_{pi, w}(V_x, V_y)]
    and V_pt = e^{L_C} V - P, where C is the next slice and w + C is family "wp".
    """
    _check_phase(phase)
    Vx = V if V is not None else symbolic_V("x", sign)
    Vy = Vx.at("y")
    eVx = scalarize(wick_exp(Vx, "C"))
    eVy = eVx.at("y")
    F_plus = truncated_pair(eVx, eVy, "wp", observable_mode=True, max_degree=4)
    F_w = truncated_pair(Vx, Vy, "w", observable_mode=True, max_degree=4)
    loc_plus = loc_reduce(F_plus, phase, sign, dim)
    loc_w = loc_reduce(F_w, phase, sign, dim)
    P = (loc_plus - scalarize(wick_exp(loc_w, "C"))).scale(sp.Rational(1, 2)).expand()
    P = loc_local(P, phase)
    V_pt = (eVx - P).expand()
    W = LocalPolynomial()
    if with_W:
        F_full = truncated_pair(Vx, Vy, "w", observable_mode=True)
        W = (F_full - loc_w).scale(sp.Rational(1, 2)).expand()
    coeffs, rem = decompose(V_pt, sign)
    return PerturbativeResult(W, P, V_pt, coeffs, rem)


def _finalize(expr) -> sp.Expr:
    s = symbols()
    return sp.expand(expr.subs({sp.Symbol("wp_ab"): sp.Symbol("w_ab") + s["Cab"]}))


def derive_flow_table(phase: str = "below_jab", sign: int = -1, result: PerturbativeResult | None = None) -> dict:
    """The eight coupling updates read off V_pt."""
    res = result or perturbative_map(phase, sign)
    if not res.remainder.is_zero():
        raise LocError(f"V_pt is not closed in the local basis; remainder {res.remainder}")
    c = res.coefficients
    if sp.expand(c["one"]) != 0:
        raise LocError(f"nonzero constant term {c['one']}")
    table = {
        "g": c["tau2"], "nu": c["tau"], "y": c["tau_nabla"], "z": c["tau_delta"],
        "lam_a": -c["obs_a"], "lam_b": -c["obs_b"], "q_a": -2 * c["ss_a"], "q_b": -2 * c["ss_b"],
    }
    return {k: _finalize(v) for k, v in table.items()}


def hardcoded_flow_table(phase: str = "below_jab") -> dict:
    """Closed-form flow equations with delta[f(nu, w)] = f(nu_+, w_+) - f(nu, w), nu_+ = nu + eta' g."""
    _check_phase(phase)
    s = symbols()
    g, nu, y, z = s["g"], s["nu"], s["y"], s["z"]
    C00, Cab = s["C00"], s["Cab"]
    W = {n: s[n] for n in W_NAMES}
    Wp = {n: s[n + "_plus"] for n in W_NAMES}
    etap = 2 * C00
    nup = nu + etap * g
    beta = 8 * (Wp["w2"] - W["w2"])
    theta = 2 * (Wp["w3ss"] - W["w3ss"])
    xip = 4 * ((Wp["w3"] - W["w3"]) - 3 * W["w2"] * C00) + beta * etap / 4
    pip = 2 * (Wp["wdw1"] - W["wdw1"])
    sigma = Wp["wdwss"] - W["wdwss"]
    zeta = Wp["gwss"] - W["gwss"]
    d_nu_w1 = nup * Wp["w1"] - nu * W["w1"]
    d_nu2_w1 = nup**2 * Wp["w1"] - nu**2 * W["w1"]
    d_nu_w2ss = nup * Wp["w2ss"] - nu * W["w2ss"]
    d_nu2_wss = nup**2 * Wp["wss"] - nu**2 * W["wss"]
    g_pt = g - beta * g**2 - 4 * g * d_nu_w1
    nu_pt = nu + etap * (g + 4 * g * nu * W["w1"]) - xip * g**2 - beta * g * nu / 4 - pip * g * (z + y) - d_nu2_w1
    y_pt = y + sigma * g * z - zeta * g * y - g * d_nu_w2ss
    z_pt = z - theta * g**2 - d_nu2_wss / 2 - 2 * z * d_nu_w1 - (y_pt - y)
    factor = (1 - d_nu_w1) if phase == "below_jab" else 1
    lam_a, lam_b = factor * s["lam_a"], factor * s["lam_b"]
    q_add = s["lam_a"] * s["lam_b"] * Cab
    table = {"g": g_pt, "nu": nu_pt, "y": y_pt, "z": z_pt, "lam_a": lam_a, "lam_b": lam_b,
             "q_a": s["q_a"] + q_add, "q_b": s["q_b"] + q_add}
    return {k: sp.expand(v) for k, v in table.items()}


@dataclass
class TableComparison:
    phase: str
    sign: int
    equal: bool
    diff: dict

    def report(self) -> str:
        lines = [f"phase={self.phase} sign={self.sign}: {'identical' if self.equal else 'MISMATCH'}"]
        for k, v in self.diff.items():
            lines.append(f"  {k}: derived - closed form = {sp.sstr(v)}")
        return "\n".join(lines)


def compare_tables(derived: dict, reference: dict, phase: str = "below_jab", sign: int = -1) -> TableComparison:
    """Structured difference, per coupling, of canonical expanded polynomials."""
    diff = {}
    for k in COUPLING_NAMES:
        d = sp.expand(derived[k] - reference[k])
        if d != 0:
            diff[k] = d
    return TableComparison(phase, sign, not diff, diff)


def table_to_terms(table: dict) -> dict:
    """JSON-ready {coupling: [[coefficient, {symbol: power}], ...]} in canonical order."""
    out = {}
    for k in COUPLING_NAMES:
        expr = sp.expand(table[k])
        gens = sorted(expr.free_symbols, key=lambda s: s.name)
        terms = []
        if gens:
            poly = sp.Poly(expr, *gens)
            for mon, c in sorted(poly.terms(), key=lambda t: (tuple(-e for e in t[0]))):
                terms.append([str(c), {g.name: e for g, e in zip(gens, mon) if e}])
        elif expr != 0:
            terms.append([str(expr), {}])
        out[k] = terms
    return out


def format_table(table: dict) -> str:
    return "\n".join(f"{k}_pt = {sp.sstr(table[k])}" for k in COUPLING_NAMES)


def numeric_cross_check(table: dict, phase: str = "below_jab", n: int = 20, bound: float = 0.1, seed: int = 0) -> float:
    """Max |table - flow.phi_pt| over n random bindings with |value| <= bound."""
    from ..coeffs import RawMoments, greek_coefficients
    from ..flow import CouplingVector, phi_pt

    s = symbols()
    rng = random.Random(seed)
    fns = {k: sp.lambdify(list(s.values()), table[k], "math") for k in COUPLING_NAMES}
    worst = 0.0
    for _ in range(n):
        vals = {k: rng.uniform(-bound, bound) for k in s}
        raw = RawMoments(j=1, C00=vals["C00"], Cab=vals["Cab"], **{w: vals[w] for w in W_NAMES})
        raw_next = RawMoments(j=2, C00=math.nan, Cab=math.nan, **{w: vals[w + "_plus"] for w in W_NAMES})
        fc = greek_coefficients(raw, raw_next, L=2)
        V = CouplingVector(*[vals[k] for k in COUPLING_NAMES])
        j_ab = math.inf if phase == "below_jab" else 2
        out = phi_pt(V, fc, raw, raw_next, j=1, j_ab=j_ab)
        args = [vals[k] for k in s]
        for k in COUPLING_NAMES:
            worst = max(worst, abs(fns[k](*args) - getattr(out, k)))
    return worst

"""Localisation of kernel-weighted sums over y onto the local basis at x.

Rules applied to each term of sum_y K(x - y) M(x, y):

- monomials of field degree above 4, and field-free bulk constants, are dropped;
- degree 4: all atoms moved to x, coefficient sum_y K (decorated atoms give 0);
- degree 2, both atoms at y: q^(1) X_x Y_x + q^(**) (tau_nabla - tau_delta) components;
- degree 2, one atom at x, one at y: q^(1) X_x Y_x + 1/2 q^(**) tau_delta component;
- gradients on y atoms are moved onto the kernel by summation by parts;
- a gradient on the x atom paired with a kernel difference is Taylor expanded
  to first order and lands on the tau_nabla component;
- observable monomials sigma phibar / sigmabar phi keep only their value at x,
  and vanish at or above the coalescence scale.

Sums of kernel products are reduced to named moment symbols. Anything else
raises LocError("no Loc rule: ...").
"""

from __future__ import annotations

from itertools import product

import sympy as sp

from .algebra import (
    LAP,
    FieldAtom,
    KernelFactor,
    LocalPolynomial,
    field_degree,
    grad,
    obs_a,
    obs_b,
    obs_ss,
    tau,
    tau2,
    tau_delta,
    tau_nabla,
)

PHASES = ("below_jab", "at_or_above_jab")
_SUFFIX = {"w": "", "wp": "_plus", "C": "_C"}


class LocError(ValueError):
    pass


def moment_symbol(name: str, family: str = "w") -> sp.Symbol:
    return sp.Symbol(name + _SUFFIX[family])


def _deco_name(decos) -> str:
    return "".join("L" if d[0] == "lap" else ("G+" if d[2] > 0 else "G-") for d in decos)


def scalar_symbol(f: KernelFactor) -> sp.Symbol | None:
    """Symbol for a kernel factor with no summed position, or None."""
    if f.p == f.q:
        if not f.dp and not f.dq:
            return sp.Symbol({"C": "C00", "w": "w00", "wp": "wp00"}[f.family])
        return sp.Symbol(f"{f.family}00[{_deco_name(f.dp)}|{_deco_name(f.dq)}]")
    if {f.p, f.q} == {"a", "b"} and not f.dp and not f.dq:
        return sp.Symbol({"C": "Cab", "w": "w_ab", "wp": "wp_ab"}[f.family])
    return None


def scalarize(p: LocalPolynomial) -> LocalPolynomial:
    """Replace coincident and (a, b) kernel factors by scalar symbols."""
    def fn(atoms, kernels, ind, c):
        keep = []
        for f in kernels:
            s = scalar_symbol(f)
            if s is None:
                keep.append(f)
            else:
                c = c * s
        yield atoms, tuple(keep), ind, c
    return p.map_terms(fn)


# kernel moments

def _d_ops(f: KernelFactor) -> list:
    """Operators on d = x - y for a factor K(p, q) with p, q in {x, y}."""
    ops = []
    for pos, decos in ((f.p, f.dp), (f.q, f.dq)):
        for d in decos:
            if d[0] == "lap":
                ops.append(LAP)
            else:
                ops.append(grad(d[1], d[2] if pos == "x" else -d[2]))
    return ops


def _units(dim: int):
    for ax in range(dim):
        for s in (1, -1):
            v = [0] * dim
            v[ax] = s
            yield tuple(v)


def _single_moment(ops, weight: str, family: str, dim: int, sign: int):
    """sum_d (Ops K)(d) P(d) with P = 1 or d_1^2, via adjoint differences on P."""
    labels = sorted({o[1] for o in ops if o[0] == "grad"})
    for lab in labels:
        if sum(1 for o in ops if o[0] == "grad" and o[1] == lab) != 2:
            raise LocError(f"no Loc rule: unpaired gradient label in kernel ops {ops}")
    ds = sp.symbols(f"d1:{dim + 1}")
    P0 = sp.Integer(1) if weight == "1" else ds[0] ** 2
    units = list(_units(dim))
    total = sp.Integer(0)
    for choice in product(units, repeat=len(labels)):
        vec = dict(zip(labels, choice))
        Q = P0
        for o in ops:
            if o[0] == "lap":
                Q = sum(Q.subs({ds[i]: ds[i] + u[i] for i in range(dim)}, simultaneous=True) for u in units) - 2 * dim * Q
            else:
                v = vec[o[1]]
                Q = Q.subs({ds[i]: ds[i] - o[2] * v[i] for i in range(dim)}, simultaneous=True) - Q
            Q = sp.expand(Q)
        total += Q
    total = sp.Poly(sp.expand(total * sp.Rational(1, 2) ** len(labels)), *ds)
    m1 = sm = sp.Integer(0)
    for mon, c in total.terms():
        deg = sum(mon)
        if deg == 0:
            m1 += c
        elif deg == 2 and max(mon) == 2:
            sm += c
        elif deg > 2:
            raise LocError(f"no Loc rule: moment of degree {deg} from ops {ops}")
    return m1 * moment_symbol("w1", family) + sm * moment_symbol("wss", family)


def kernel_moment(kernels, weight: str = "1", dim: int = 4, sign: int = -1, extra_ops=()):
    """sum_d prod_f (Ops_f K_f)(d) * (1 or d_1^2) as a combination of moment symbols.

    extra_ops act on the single factor (only allowed when there is one factor).
    """
    if not kernels:
        raise LocError("no Loc rule: no kernel to sum against")
    fams = {f.family for f in kernels}
    if len(fams) != 1:
        raise LocError(f"no Loc rule: mixed kernel families {sorted(fams)}")
    family = fams.pop()
    opsets = [_d_ops(f) for f in kernels]
    if len(kernels) == 1:
        return _single_moment(opsets[0] + list(extra_ops), weight, family, dim, sign)
    if extra_ops:
        raise LocError("no Loc rule: summation by parts onto a kernel product")
    n = len(kernels)
    ss = weight != "1"
    nonempty = [o for o in opsets if o]
    if not nonempty:
        name = f"w{n}ss" if ss else f"w{n}"
        if n == 1:
            name = "wss" if ss else "w1"
        return moment_symbol(name, family)
    if n == 2 and len(nonempty) == 1 and nonempty[0] == [LAP]:
        return sign * moment_symbol("wdwss" if ss else "wdw1", family)
    if n == 2 and all(len(o) == 1 and o[0][0] == "grad" for o in opsets):
        (a,), (b,) = opsets
        if a[1] == b[1] and a[2] == b[2]:
            if ss:
                return moment_symbol("gwss", family)
            return -sign * moment_symbol("wdw1", family)
    raise LocError(f"no Loc rule: kernel product pattern {[str(f) for f in kernels]}")


# local basis pieces for a species pair

def _pair_monomial(X: FieldAtom, Y: FieldAtom, c) -> LocalPolynomial:
    return LocalPolynomial.monomial((X, Y), c)


def _part_nabla(X: FieldAtom, Y: FieldAtom) -> LocalPolynomial:
    """Component of tau_nabla with the species of X, Y."""
    return LocalPolynomial.monomial((FieldAtom(X.species, "x", grad(0)), FieldAtom(Y.species, "x", grad(0))), sp.Rational(1, 2))


def _part_delta(X: FieldAtom, Y: FieldAtom, sign: int) -> LocalPolynomial:
    """Component of tau_delta with the species of X, Y."""
    c = sp.Rational(-sign, 2)
    return (LocalPolynomial.monomial((FieldAtom(X.species, "x", LAP), FieldAtom(Y.species, "x")), c)
            + LocalPolynomial.monomial((FieldAtom(X.species, "x"), FieldAtom(Y.species, "x", LAP)), c))


def _substitute_indicators(atoms, kernels, ind):
    """Collapse sum over y on y-indicators; evaluate kernel slots on x-indicators."""
    ymap = {pos: pt for pos, pt in ind if pos == "y"}
    xmap = {pos: pt for pos, pt in ind if pos == "x"}
    collapsed = bool(ymap)
    if ymap:
        pt = ymap["y"]
        if any(t.pos == "y" and t.is_field for t in atoms):
            raise LocError("no Loc rule: field at an observable point under the y sum")
        kernels = tuple(KernelFactor.make(f.family, pt if f.p == "y" else f.p, f.dp, pt if f.q == "y" else f.q, f.dq) for f in kernels)
        if xmap:
            px = xmap["x"]
            kernels = tuple(KernelFactor.make(f.family, px if f.p == "x" else f.p, f.dp, px if f.q == "x" else f.q, f.dq) for f in kernels)
    ind = frozenset((pos, pt) for pos, pt in ind if pos == "x")
    return atoms, kernels, ind, collapsed


def _loc_term(atoms, kernels, ind, c, phase: str, sign: int, dim: int) -> LocalPolynomial:
    atoms, kernels, ind, collapsed = _substitute_indicators(atoms, kernels, ind)
    scalar = sp.Integer(1)
    rest = []
    for f in kernels:
        s = scalar_symbol(f)
        if s is None:
            rest.append(f)
        else:
            scalar *= s
    kernels = tuple(rest)
    c = c * scalar
    fields = [t for t in atoms if t.is_field]
    obs = [t for t in atoms if not t.is_field]
    depends_on_y = any(t.pos == "y" for t in fields) or any("y" in (f.p, f.q) for f in kernels)
    if not collapsed and not depends_on_y:
        raise LocError("no Loc rule: term does not depend on the summation point")
    if collapsed and depends_on_y:
        raise LocError("no Loc rule: y dependence left after indicator substitution")

    def moment(weight="1", extra=()):
        if collapsed:
            if extra or weight != "1":
                return sp.Integer(0)
            return sp.Integer(1)
        return kernel_moment(kernels, weight, dim, sign, extra)

    n = len(fields)
    if n > 4:
        return LocalPolynomial()
    if obs:
        if n == 0:
            return LocalPolynomial.monomial(tuple(obs), c * moment(), (), ind)
        if n > 1 or phase == "at_or_above_jab" or fields[0].deco:
            return LocalPolynomial()
        return LocalPolynomial.monomial(tuple(obs) + (fields[0].moved("x"),), c * moment(), (), ind)
    if ind:
        raise LocError("no Loc rule: bulk monomial with an observable indicator")
    if n == 0:
        return LocalPolynomial()
    if n == 4:
        if any(t.deco for t in fields):
            return LocalPolynomial()
        return LocalPolynomial.monomial(tuple(t.moved("x") for t in fields), c * moment())
    if n != 2:
        raise LocError(f"no Loc rule: field degree {n}")
    X, Y = fields
    if collapsed:
        raise LocError("no Loc rule: collapsed bulk term")
    # summation by parts for decorated y atoms
    extra = []
    plain = []
    for t in (X, Y):
        if t.pos == "y" and t.deco:
            extra.append(t.deco)
            t = t.with_deco(())
        plain.append(t)
    X, Y = plain
    if X.pos == "x" and Y.pos == "x":
        return LocalPolynomial.monomial((X, Y), c * moment("1", extra))
    if X.pos == "y" and Y.pos == "y":
        q1, qss = moment("1", extra), moment("ss", extra)
        out = LocalPolynomial.monomial((X.moved("x"), Y.moved("x")), c * q1)
        return out + (_part_nabla(X, Y) - _part_delta(X, Y, sign)).scale(c * qss)
    xa, ya = (X, Y) if X.pos == "x" else (Y, X)
    if not xa.deco:
        q1, qss = moment("1", extra), moment("ss", extra)
        out = LocalPolynomial.monomial((X.moved("x"), Y.moved("x")), c * q1)
        return out + _part_delta(X, Y, sign).scale(c * qss / 2)
    if xa.deco[0] == "lap":
        return LocalPolynomial.monomial((X.moved("x"), Y.moved("x")), c * moment("1", extra))
    # gradient on the x atom paired with a kernel difference
    label, s_atom = xa.deco[1], xa.deco[2]
    if len(kernels) != 1:
        raise LocError("no Loc rule: gradient at x paired into a kernel product")
    ops = _d_ops(kernels[0]) + extra
    hit = [o for o in ops if o[0] == "grad" and o[1] == label]
    if len(hit) != 1:
        raise LocError(f"no Loc rule: gradient label {label} not matched in kernel ops {ops}")
    rest_ops = [o for o in ops if o is not hit[0]]
    base = _single_moment(rest_ops, "1", kernels[0].family, dim, sign)
    return _part_nabla(X, Y).scale(c * s_atom * hit[0][2] * base)


def loc_reduce(expr: LocalPolynomial, phase: str = "below_jab", sign: int = -1, dim: int = 4) -> LocalPolynomial:
    """Loc_x of sum_y expr, as a polynomial in raw monomials at x."""
    if phase not in PHASES:
        raise ValueError(f"unknown phase {phase!r}")
    out = LocalPolynomial()
    for (atoms, kernels, ind), c in expr.items():
        for key, v in _loc_term(atoms, kernels, ind, c, phase, sign, dim).items():
            out._add_key(key, v)
    return out


def loc_local(expr: LocalPolynomial, phase: str = "below_jab") -> LocalPolynomial:
    """Loc_x of an already local polynomial at x: drops degree > 4, field-free bulk
    constants and, at or above the coalescence scale, sigma phibar / sigmabar phi."""
    def keep(a, k, i):
        if k:
            raise LocError("no Loc rule: kernel factor in a local polynomial")
        n = field_degree(a)
        obs = any(not t.is_field for t in a)
        if n > 4 or (n == 0 and not obs):
            return False
        if obs and n == 1 and (phase == "at_or_above_jab" or any(t.deco for t in a)):
            return False
        return True
    return expr.filter(keep)


BASIS = ("tau2", "tau", "tau_nabla", "tau_delta", "obs_a", "obs_b", "ss_a", "ss_b", "one")


def basis_polynomials(sign: int = -1) -> dict:
    return {
        "tau2": tau2(), "tau": tau(), "tau_nabla": tau_nabla(), "tau_delta": tau_delta("x", sign),
        "obs_a": obs_a(), "obs_b": obs_b(), "ss_a": obs_ss("a"), "ss_b": obs_ss("b"),
        "one": LocalPolynomial.constant(1),
    }


def decompose(p: LocalPolynomial, sign: int = -1):
    """Coefficients of p in the local basis and the (ideally zero) remainder."""
    p = p.expand()
    coeffs = {}
    for name, b in basis_polynomials(sign).items():
        pivot, bc = next(iter(sorted(b.items(), key=lambda kv: str(kv[0]))))
        c = sp.expand(p.terms.get(pivot, 0) / bc)
        coeffs[name] = c
        if c != 0:
            p = (p - b.scale(c)).expand()
    return coeffs, p

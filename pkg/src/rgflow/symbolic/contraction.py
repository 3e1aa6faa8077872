"""Wick contractions: the Laplacian L_C, e^{+-L_C} and the truncated pair F."""

from __future__ import annotations

import math

import sympy as sp

from .algebra import KernelFactor, LocalPolynomial, field_degree, max_label, shift_labels

# (phi-type, conjugate) species pairs contracted by L = sum C_{uv}(d/dphi_u d/dphibar_v + d/dpsi_u d/dpsibar_v)
_PAIRS = {("phi", "phibar"), ("psi", "psibar")}


def _compatible(s, t) -> bool:
    return (s.species, t.species) in _PAIRS


def _contract(atoms, i: int, k: int, family: str):
    """Apply d/d(atoms[i]) d/d(atoms[k]) (conjugate derivative first); returns (sign, atoms, factor)."""
    sign = 1
    if atoms[k].fermionic:
        if sum(1 for t in atoms[:k] if t.fermionic) % 2:
            sign = -sign
    rest = atoms[:k] + atoms[k + 1:]
    ii = i if i < k else i - 1
    if rest[ii].fermionic:
        if sum(1 for t in rest[:ii] if t.fermionic) % 2:
            sign = -sign
    rest = rest[:ii] + rest[ii + 1:]
    a, b = atoms[i], atoms[k]
    factor = KernelFactor.make(family, a.pos, (a.deco,) if a.deco else (), b.pos, (b.deco,) if b.deco else ())
    return sign, rest, factor


def laplacian(p: LocalPolynomial, family: str = "C") -> LocalPolynomial:
    """L_C applied to p, contracting every compatible pair once."""
    def fn(atoms, kernels, ind, c):
        for i, s in enumerate(atoms):
            for k, t in enumerate(atoms):
                if _compatible(s, t):
                    sign, rest, f = _contract(atoms, i, k, family)
                    yield rest, kernels + (f,), ind, sign * c
    return p.map_terms(fn)


def wick_exp(p: LocalPolynomial, family: str = "C", sign: int = 1) -> LocalPolynomial:
    """e^{sign L_C} p; the series terminates after degree/2 applications."""
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    out = p.copy()
    term = p
    n = 0
    while True:
        n += 1
        term = laplacian(term, family)
        if not term.terms:
            return out
        out = out + term.scale(sp.Rational(sign**n, math.factorial(n)))


def _matchings(atoms, n_left: int, start: int, used: frozenset):
    """Yield lists of cross pairs (i, k) between atoms[:n_left] and atoms[n_left:], each matching once."""
    for i in range(start, n_left):
        for k in range(n_left, len(atoms)):
            if k in used:
                continue
            if _compatible(atoms[i], atoms[k]):
                pair = (i, k)
            elif _compatible(atoms[k], atoms[i]):
                pair = (k, i)
            else:
                continue
            yield [pair]
            for rest in _matchings(atoms, n_left, i + 1, used | {k}):
                yield [pair] + rest


def _apply_matching(atoms, matching, family: str):
    """Contract all pairs of a matching; pairs are given by original indices."""
    live = list(range(len(atoms)))
    cur = tuple(atoms)
    sign = 1
    factors = []
    for i, k in matching:
        ii, kk = live.index(i), live.index(k)
        s, cur, f = _contract(cur, ii, kk, family)
        sign *= s
        factors.append(f)
        live = [v for v in live if v not in (i, k)]
    return sign, cur, tuple(factors)


def laplacian_cross(A: LocalPolynomial, B: LocalPolynomial, family: str = "w") -> LocalPolynomial:
    """A <-L-> B: single contractions with one leg in A and one in B."""
    return _cross(A, B, family, max_pairs=1)


def _cross(A: LocalPolynomial, B: LocalPolynomial, family: str, max_pairs=None, max_degree=None) -> LocalPolynomial:
    out = LocalPolynomial()
    for (a1, k1, i1), c1 in A.items():
        off = max_label(a1, k1)
        for (a2, k2, i2), c2 in B.items():
            a2s, k2s = shift_labels(a2, k2, off)
            atoms = a1 + a2s
            for m in _matchings(atoms, len(a1), 0, frozenset()):
                if max_pairs is not None and len(m) != max_pairs:
                    continue
                if max_degree is not None and field_degree(atoms) - 2 * len(m) > max_degree:
                    continue
                sign, rest, fs = _apply_matching(atoms, m, family)
                out.add_term(rest, k1 + k2s + fs, i1 | i2, sign * c1 * c2)
    return out


def truncated_pair(Vx: LocalPolynomial, Vy: LocalPolynomial, family: str = "w",
                   observable_mode: bool = False, max_degree=None) -> LocalPolynomial:
    """F(Vx, Vy) = e^{L}(e^{-L}Vx e^{-L}Vy) - Vx Vy, as a sum over nonempty cross matchings.

    With observable_mode the pi-variant F(Vx, pi_0 Vy) + F(pi_* Vx, Vy) is returned.
    max_degree drops output monomials of higher field degree (used ahead of Loc).
    """
    if observable_mode:
        return (_cross(Vx, Vy.bulk(), family, max_degree=max_degree)
                + _cross(Vx.observable(), Vy, family, max_degree=max_degree))
    return _cross(Vx, Vy, family, max_degree=max_degree)

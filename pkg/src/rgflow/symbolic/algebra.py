"""Field atoms, monomials and local polynomials with exact coefficients.

A term is a product of field atoms, kernel factors and position indicators,
with a sympy coefficient. Gradient decorations carry an integer label; a
label shared by two decorations in one term stands for 1/2 sum over the 2d
unit vectors e, with the sign of each decoration selecting e or -e.
Laplacian decorations denote the standard lattice Laplacian
Delta_std f(x) = sum_e (f(x+e) - f(x)).
"""

from __future__ import annotations

from dataclasses import dataclass

import sympy as sp

SPECIES = ("phi", "phibar", "sigma", "sigmabar", "psi", "psibar")
FERMIONS = frozenset({"psi", "psibar"})
FIELDS = frozenset({"phi", "phibar", "psi", "psibar"})
POSITIONS = ("x", "y", "a", "b")
_SPECIES_ORDER = {s: i for i, s in enumerate(SPECIES)}
_POS_ORDER = {p: i for i, p in enumerate(POSITIONS)}

LAP = ("lap",)


def grad(label: int, sign: int = 1) -> tuple:
    return ("grad", int(label), int(sign))


def _deco_key(deco: tuple) -> tuple:
    if not deco:
        return (0,)
    if deco[0] == "lap":
        return (1,)
    return (2, deco[2])


@dataclass(frozen=True)
class FieldAtom:
    species: str
    pos: str = "x"
    deco: tuple = ()

    def __post_init__(self):
        if self.species not in _SPECIES_ORDER:
            raise ValueError(f"unknown species {self.species!r}")
        if self.pos not in _POS_ORDER:
            raise ValueError(f"unknown position tag {self.pos!r}")

    @property
    def fermionic(self) -> bool:
        return self.species in FERMIONS

    @property
    def is_field(self) -> bool:
        return self.species in FIELDS

    def key(self) -> tuple:
        return (self.fermionic, _SPECIES_ORDER[self.species], _POS_ORDER[self.pos], _deco_key(self.deco))

    def moved(self, pos: str) -> "FieldAtom":
        return FieldAtom(self.species, pos, self.deco)

    def with_deco(self, deco: tuple) -> "FieldAtom":
        return FieldAtom(self.species, self.pos, deco)

    def __str__(self):
        base = {"phi": "φ", "phibar": "φ̄", "psi": "ψ", "psibar": "ψ̄", "sigma": "σ", "sigmabar": "σ̄"}[self.species]
        if not self.deco:
            return f"{base}_{self.pos}"
        if self.deco[0] == "lap":
            return f"(Δ{base})_{self.pos}"
        sgn = "" if self.deco[2] > 0 else "-"
        return f"(∇^{sgn}e{self.deco[1]}{base})_{self.pos}"


@dataclass(frozen=True)
class KernelFactor:
    """Kernel value K(p, q) of a covariance family with slot decorations.

    family is "w" (scale j), "wp" (w + C) or "C" (the next slice).
    """

    family: str
    p: str
    dp: tuple
    q: str
    dq: tuple

    @staticmethod
    def make(family, p, dp, q, dq) -> "KernelFactor":
        dp = tuple(sorted(dp, key=_deco_key))
        dq = tuple(sorted(dq, key=_deco_key))
        a = (_POS_ORDER[p], tuple(_deco_key(d) for d in dp))
        b = (_POS_ORDER[q], tuple(_deco_key(d) for d in dq))
        if b < a:
            p, dp, q, dq = q, dq, p, dp
        return KernelFactor(family, p, dp, q, dq)

    def key(self) -> tuple:
        return (self.family, _POS_ORDER[self.p], tuple(_deco_key(d) for d in self.dp),
                _POS_ORDER[self.q], tuple(_deco_key(d) for d in self.dq))

    def __str__(self):
        def slot(pos, decos):
            ops = "".join("Δ" if d[0] == "lap" else f"∇^{'' if d[2] > 0 else '-'}e{d[1]}" for d in decos)
            return f"{ops}{pos}"
        return f"{self.family}({slot(self.p, self.dp)},{slot(self.q, self.dq)})"


def _labels_in(deco_seq):
    for d in deco_seq:
        if d and d[0] == "grad":
            yield d[1]


def _relabel_deco(deco, mapping):
    if deco and deco[0] == "grad":
        return ("grad", mapping[deco[1]], deco[2])
    return deco


def canonical_term(atoms, kernels, indicators=frozenset()):
    """Return (sign, key) with atoms sorted, fermion sign tracked and labels renumbered.

    sign is 0 when the monomial vanishes (repeated identical fermion atom).
    """
    atoms = list(atoms)
    order = sorted(range(len(atoms)), key=lambda i: atoms[i].key())
    ferm_positions = [i for i in order if atoms[i].fermionic]
    # parity of the permutation restricted to fermionic atoms
    sign = 1
    seq = ferm_positions
    for i in range(len(seq)):
        for k in range(i + 1, len(seq)):
            if seq[i] > seq[k]:
                sign = -sign
    sorted_atoms = [atoms[i] for i in order]
    ferm = [a for a in sorted_atoms if a.fermionic]
    for i in range(len(ferm) - 1):
        if ferm[i] == ferm[i + 1]:
            return 0, None
    kernels = sorted((KernelFactor.make(k.family, k.p, k.dp, k.q, k.dq) for k in kernels), key=lambda k: k.key())
    mapping = {}
    for a in sorted_atoms:
        for lab in _labels_in([a.deco]):
            mapping.setdefault(lab, len(mapping))
    for k in kernels:
        for lab in _labels_in(k.dp + k.dq):
            mapping.setdefault(lab, len(mapping))
    new_atoms = tuple(a.with_deco(_relabel_deco(a.deco, mapping)) for a in sorted_atoms)
    new_kernels = tuple(
        KernelFactor.make(k.family, k.p, tuple(_relabel_deco(d, mapping) for d in k.dp),
                          k.q, tuple(_relabel_deco(d, mapping) for d in k.dq))
        for k in kernels
    )
    new_kernels = tuple(sorted(new_kernels, key=lambda k: (k.key(), str(k))))
    return sign, (new_atoms, new_kernels, frozenset(indicators))


def max_label(atoms, kernels) -> int:
    labs = list(_labels_in(a.deco for a in atoms))
    for k in kernels:
        labs.extend(_labels_in(k.dp + k.dq))
    return max(labs) + 1 if labs else 0


def shift_labels(atoms, kernels, offset: int):
    m = lambda d: ("grad", d[1] + offset, d[2]) if d and d[0] == "grad" else d
    atoms = tuple(a.with_deco(m(a.deco)) for a in atoms)
    kernels = tuple(KernelFactor(k.family, k.p, tuple(m(d) for d in k.dp), k.q, tuple(m(d) for d in k.dq)) for k in kernels)
    return atoms, kernels


class LocalPolynomial:
    """Linear combination of canonical terms with sympy coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {}
        if terms:
            for key, c in terms.items():
                self._add_key(key, c)

    @classmethod
    def monomial(cls, atoms, coeff=1, kernels=(), indicators=()) -> "LocalPolynomial":
        out = cls()
        out.add_term(atoms, kernels, indicators, coeff)
        return out

    @classmethod
    def constant(cls, coeff) -> "LocalPolynomial":
        return cls.monomial((), coeff)

    def _add_key(self, key, c):
        c = sp.sympify(c)
        if c == 0:
            return
        new = self.terms.get(key, 0) + c
        if new == 0:
            self.terms.pop(key, None)
        else:
            self.terms[key] = new

    def add_term(self, atoms, kernels, indicators, coeff):
        sign, key = canonical_term(atoms, kernels, indicators)
        if sign:
            self._add_key(key, sign * sp.sympify(coeff))

    def copy(self) -> "LocalPolynomial":
        out = LocalPolynomial()
        out.terms = dict(self.terms)
        return out

    def __add__(self, other: "LocalPolynomial") -> "LocalPolynomial":
        out = self.copy()
        for key, c in other.terms.items():
            out._add_key(key, c)
        return out

    def __neg__(self) -> "LocalPolynomial":
        return self.scale(-1)

    def __sub__(self, other: "LocalPolynomial") -> "LocalPolynomial":
        return self + (-other)

    def scale(self, c) -> "LocalPolynomial":
        c = sp.sympify(c)
        out = LocalPolynomial()
        if c != 0:
            out.terms = {k: v * c for k, v in self.terms.items()}
        return out

    def __mul__(self, other):
        if not isinstance(other, LocalPolynomial):
            return self.scale(other)
        out = LocalPolynomial()
        for (a1, k1, i1), c1 in self.terms.items():
            off = max_label(a1, k1)
            for (a2, k2, i2), c2 in other.terms.items():
                a2s, k2s = shift_labels(a2, k2, off)
                out.add_term(a1 + a2s, k1 + k2s, i1 | i2, c1 * c2)
        return out

    __rmul__ = scale

    def expand(self) -> "LocalPolynomial":
        out = LocalPolynomial()
        for k, c in self.terms.items():
            out._add_key(k, sp.expand(c))
        return out

    def is_zero(self) -> bool:
        return all(sp.expand(c) == 0 for c in self.terms.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, LocalPolynomial):
            return NotImplemented
        return (self - other).is_zero()

    def __hash__(self):
        return id(self)

    def __len__(self):
        return len(self.terms)

    def items(self):
        return self.terms.items()

    def map_terms(self, fn) -> "LocalPolynomial":
        """fn(atoms, kernels, indicators, coeff) -> iterable of (atoms, kernels, indicators, coeff)."""
        out = LocalPolynomial()
        for (a, k, i), c in self.terms.items():
            for na, nk, ni, nc in fn(a, k, i, c):
                out.add_term(na, nk, ni, nc)
        return out

    def at(self, pos: str) -> "LocalPolynomial":
        """Move every x-tagged atom, kernel slot and indicator to position pos."""
        def fn(a, k, i, c):
            na = tuple(t.moved(pos) if t.pos == "x" else t for t in a)
            nk = tuple(KernelFactor(f.family, pos if f.p == "x" else f.p, f.dp, pos if f.q == "x" else f.q, f.dq) for f in k)
            ni = frozenset((pos if p == "x" else p, pt) for p, pt in i)
            yield na, nk, ni, c
        return self.map_terms(fn)

    def filter(self, pred) -> "LocalPolynomial":
        out = LocalPolynomial()
        out.terms = {k: c for k, c in self.terms.items() if pred(*k)}
        return out

    def bulk(self) -> "LocalPolynomial":
        """pi_empty: terms without observable fields."""
        return self.filter(lambda a, k, i: not any(t.species in ("sigma", "sigmabar") for t in a))

    def observable(self) -> "LocalPolynomial":
        """pi_*: terms containing an observable field."""
        return self.filter(lambda a, k, i: any(t.species in ("sigma", "sigmabar") for t in a))

    def degree_part(self, n: int) -> "LocalPolynomial":
        return self.filter(lambda a, k, i: field_degree(a) == n)

    def max_degree(self) -> int:
        return max((field_degree(a) for a, _, _ in self.terms), default=0)

    def grading(self) -> set:
        return {sum(t.fermionic for t in a) % 2 for a, _, _ in self.terms}

    def subs(self, mapping) -> "LocalPolynomial":
        out = LocalPolynomial()
        for k, c in self.terms.items():
            out._add_key(k, c.subs(mapping))
        return out

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for (a, k, i), c in sorted(self.terms.items(), key=lambda kv: str(kv[0])):
            fac = " ".join([str(t) for t in a] + [str(f) for f in k] + [f"1[{p}={q}]" for p, q in sorted(i)])
            parts.append(f"({sp.sstr(sp.expand(c))}) {fac}".rstrip())
        return " + ".join(parts)

    __repr__ = __str__


def field_degree(atoms) -> int:
    return sum(1 for t in atoms if t.is_field)


def atom(species, pos="x", deco=()) -> FieldAtom:
    return FieldAtom(species, pos, deco)


# basis polynomials

def tau_ab(p: str, q: str) -> LocalPolynomial:
    """tau_{pq} = phi_p phibar_q + psi_p psibar_q."""
    return (LocalPolynomial.monomial((atom("phi", p), atom("phibar", q)))
            + LocalPolynomial.monomial((atom("psi", p), atom("psibar", q))))


def tau(pos: str = "x") -> LocalPolynomial:
    return tau_ab(pos, pos)


def tau2(pos: str = "x") -> LocalPolynomial:
    t = tau(pos)
    return t * t


def tau_nabla(pos: str = "x") -> LocalPolynomial:
    """1/2 sum_e (grad^e phi grad^e phibar + grad^e psi grad^e psibar)."""
    half = sp.Rational(1, 2)
    return (LocalPolynomial.monomial((atom("phi", pos, grad(0)), atom("phibar", pos, grad(0))), half)
            + LocalPolynomial.monomial((atom("psi", pos, grad(0)), atom("psibar", pos, grad(0))), half))


def tau_delta(pos: str = "x", sign: int = -1) -> LocalPolynomial:
    """1/2 ((-Delta phi) phibar + phi (-Delta phibar) + same for psi), Delta = sign * Delta_std."""
    c = sp.Rational(-sign, 2)
    out = LocalPolynomial()
    for f, fb in (("phi", "phibar"), ("psi", "psibar")):
        out = out + LocalPolynomial.monomial((atom(f, pos, LAP), atom(fb, pos)), c)
        out = out + LocalPolynomial.monomial((atom(f, pos), atom(fb, pos, LAP)), c)
    return out


def boson_part(p: LocalPolynomial) -> LocalPolynomial:
    return p.filter(lambda a, k, i: not any(t.fermionic for t in a))


def fermion_part(p: LocalPolynomial) -> LocalPolynomial:
    return p.filter(lambda a, k, i: any(t.fermionic for t in a))


def obs_a(pos: str = "x") -> LocalPolynomial:
    """sigma phibar_x 1_{x=a}."""
    return LocalPolynomial.monomial((atom("sigma", "a"), atom("phibar", pos)), 1, (), {(pos, "a")})


def obs_b(pos: str = "x") -> LocalPolynomial:
    """sigmabar phi_x 1_{x=b}."""
    return LocalPolynomial.monomial((atom("sigmabar", "b"), atom("phi", pos)), 1, (), {(pos, "b")})


def obs_ss(point: str, pos: str = "x") -> LocalPolynomial:
    """sigma sigmabar 1_{x=point}."""
    return LocalPolynomial.monomial((atom("sigma", "a"), atom("sigmabar", "b")), 1, (), {(pos, point)})


COUPLINGS = sp.symbols("g nu y z lam_a lam_b q_a q_b")


def coupling_symbols() -> dict:
    return {s.name: s for s in COUPLINGS}


def symbolic_V(pos: str = "x", sign: int = -1, couplings=None) -> LocalPolynomial:
    """g tau^2 + nu tau + y tau_nabla + z tau_delta - lam_a sigma phibar 1_a - lam_b sigmabar phi 1_b
    - 1/2 (q_a 1_a + q_b 1_b) sigma sigmabar."""
    s = couplings or coupling_symbols()
    half = sp.Rational(1, 2)
    return (tau2(pos).scale(s["g"]) + tau(pos).scale(s["nu"]) + tau_nabla(pos).scale(s["y"])
            + tau_delta(pos, sign).scale(s["z"])
            + obs_a(pos).scale(-s["lam_a"]) + obs_b(pos).scale(-s["lam_b"])
            + obs_ss("a", pos).scale(-half * s["q_a"]) + obs_ss("b", pos).scale(-half * s["q_b"]))


def apply_Q(p: LocalPolynomial) -> LocalPolynomial:
    """Antiderivation phi -> psi, phibar -> psibar, psi -> -phi, psibar -> phibar."""
    rule = {"phi": ("psi", 1), "phibar": ("psibar", 1), "psi": ("phi", -1), "psibar": ("phibar", 1)}

    def fn(a, k, i, c):
        nferm = 0
        for idx, t in enumerate(a):
            if t.species in rule:
                sp_new, sgn = rule[t.species]
                new = a[:idx] + (FieldAtom(sp_new, t.pos, t.deco),) + a[idx + 1:]
                yield new, k, i, c * sgn * (-1) ** nferm
            if t.fermionic:
                nferm += 1

    return p.map_terms(fn)

"""Coupling-constant maps, the change of variables T_j, and trajectory iteration."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .coeffs import FlowCoefficients, RawMoments, ScaleData, coefficient_table, coalescence_scale

DIVERGENCE_THRESHOLD = 1e3
TRAJECTORY_COLUMNS = (
    "j", "g", "nu", "y", "z", "lam_a", "lam_b", "q_a", "q_b", "mu", "z0",
    "gbar", "zbar", "mubar", "residual_g", "residual_z", "residual_mu",
)


class PerturbativeRegimeError(ArithmeticError):
    pass


class InvertibilityError(ArithmeticError):
    pass


class _Vec:
    def as_tuple(self) -> tuple:
        return astuple(self)

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, a):
        return cls(*[float(v) for v in a])

    def scaled(self, eps: float):
        return type(self)(*[eps * v for v in astuple(self)])

    def __sub__(self, other):
        return type(self)(*[a - b for a, b in zip(astuple(self), astuple(other))])


@dataclass(frozen=True)
class CouplingVector(_Vec):
    g: float = 0.0
    nu: float = 0.0
    y: float = 0.0
    z: float = 0.0
    lam_a: float = 0.0
    lam_b: float = 0.0
    q_a: float = 0.0
    q_b: float = 0.0


@dataclass(frozen=True)
class BulkVector(_Vec):
    g: float = 0.0
    mu: float = 0.0
    z0: float = 0.0

    @classmethod
    def from_coupling(cls, V: CouplingVector, j: int, L: int) -> "BulkVector":
        return cls(V.g, float(L) ** (2 * j) * V.nu, V.y + V.z)


@dataclass(frozen=True)
class TransformedVector(_Vec):
    gbar: float = 0.0
    zbar: float = 0.0
    mubar: float = 0.0


@dataclass(frozen=True)
class CheckedVector(_Vec):
    gchk: float = 0.0
    zchk: float = 0.0
    muchk: float = 0.0


@dataclass(frozen=True)
class FullDeltas:
    """The nu-dependent differences delta[f(nu, w)] = f(nu+, w_{j+1}) - f(nu, w_j)."""

    nu_plus: float
    nu_w1: float
    nu2_w1: float
    nu_w2ss: float
    nu2_wss: float


def full_deltas(nu: float, g: float, fc: FlowCoefficients, raw: RawMoments, raw_next: RawMoments) -> FullDeltas:
    nup = nu + fc.etap * g
    return FullDeltas(
        nu_plus=nup,
        nu_w1=nup * raw_next.w1 - nu * raw.w1,
        nu2_w1=nup * nup * raw_next.w1 - nu * nu * raw.w1,
        nu_w2ss=nup * raw_next.w2ss - nu * raw.w2ss,
        nu2_wss=nup * nup * raw_next.wss - nu * nu * raw.wss,
    )


def phi_pt(V: CouplingVector, fc: FlowCoefficients, raw: RawMoments, raw_next: RawMoments,
           j: int | None = None, j_ab: float = math.inf) -> CouplingVector:
    """One second-order step of the full coupling map at scale j."""
    j = fc.j if j is None else j
    g, nu, y, z = V.g, V.nu, V.y, V.z
    D = full_deltas(nu, g, fc, raw, raw_next)
    g_pt = g - fc.beta * g * g - 4.0 * g * D.nu_w1
    nu_pt = (nu + fc.etap * (g + 4.0 * g * nu * raw.w1) - fc.xip * g * g
             - 0.25 * fc.beta * g * nu - fc.pip * g * (z + y) - D.nu2_w1)
    y_pt = y + fc.sigma * g * z - fc.zeta * g * y - g * D.nu_w2ss
    z_pt = z - fc.theta * g * g - 0.5 * D.nu2_wss - 2.0 * z * D.nu_w1 - (y_pt - y)
    if j + 1 < j_ab:
        factor = 1.0 - D.nu_w1
        lam_a, lam_b = factor * V.lam_a, factor * V.lam_b
    else:
        lam_a, lam_b = V.lam_a, V.lam_b
    q_add = V.lam_a * V.lam_b * raw.Cab
    return CouplingVector(g_pt, nu_pt, y_pt, z_pt, lam_a, lam_b, V.q_a + q_add, V.q_b + q_add)


@dataclass(frozen=True)
class BulkDeltas:
    mu_plus: float
    mu_w1: float
    mu2_w1: float
    mu2_wss: float


def bulk_deltas(mu: float, g: float, nc: FlowCoefficients) -> BulkDeltas:
    """Normalised differences; delta[mu^2 wbar^(1)] carries the L^2 of the rescaled mu."""
    L2 = float(nc.L) ** 2
    mup = L2 * mu + nc.eta * g
    return BulkDeltas(
        mu_plus=mup,
        mu_w1=mup * nc.wbar1_next - mu * nc.wbar1,
        mu2_w1=mup * mup * nc.wbar1_next - L2 * mu * mu * nc.wbar1,
        mu2_wss=mup * mup * nc.wbarss_next - mu * mu * nc.wbarss,
    )


def phi_pt_bulk(B: BulkVector, nc: FlowCoefficients) -> BulkVector:
    g, mu, z0 = B.g, B.mu, B.z0
    D = bulk_deltas(mu, g, nc)
    g_pt = g - nc.beta * g * g - 4.0 * g * D.mu_w1
    z_pt = z0 - nc.theta * g * g - 0.5 * D.mu2_wss - 2.0 * z0 * D.mu_w1
    mu_pt = (float(nc.L) ** 2 * mu + nc.eta * (g + 4.0 * g * mu * nc.wbar1) - nc.xi * g * g
             - nc.omega * g * mu - nc.pi * g * z0 - D.mu2_w1)
    return BulkVector(g_pt, mu_pt, z_pt)


def phibar(T: TransformedVector, nc: FlowCoefficients) -> TransformedVector:
    g, z, mu = T.gbar, T.zbar, T.mubar
    return TransformedVector(
        g - nc.beta * g * g,
        z - nc.theta * g * g,
        float(nc.L) ** 2 * mu + nc.eta * g - nc.xi * g * g - nc.omega * g * mu - nc.pi * g * z,
    )


def _transform(B: BulkVector, w1: float, wss: float) -> CheckedVector:
    g, mu, z = B.g, B.mu, B.z0
    return CheckedVector(
        g + 4.0 * g * mu * w1,
        z + 2.0 * z * mu * w1 + 0.5 * mu * mu * wss,
        mu + mu * mu * w1,
    )


def transform_T(B: BulkVector, nc: FlowCoefficients) -> CheckedVector:
    return _transform(B, nc.wbar1, nc.wbarss)


def transform_T_next(B: BulkVector, nc: FlowCoefficients) -> CheckedVector:
    """T_{j+1}, using the scale-(j+1) normalised moments carried by nc."""
    return _transform(B, nc.wbar1_next, nc.wbarss_next)


def _invert(C: CheckedVector, w1: float, wss: float) -> BulkVector:
    muc = C.muchk
    if w1 == 0:
        mu = muc
    else:
        disc = 1.0 + 4.0 * w1 * muc
        if disc <= 0:
            raise InvertibilityError("outside invertibility ball")
        mu = 2.0 * muc / (1.0 + math.sqrt(disc))
    den_g = 1.0 + 4.0 * mu * w1
    den_z = 1.0 + 2.0 * mu * w1
    if abs(den_g) < 1e-8 or abs(den_z) < 1e-8:
        raise InvertibilityError("outside invertibility ball")
    return BulkVector(C.gchk / den_g, mu, (C.zchk - 0.5 * mu * mu * wss) / den_z)


def invert_T(C: CheckedVector, nc: FlowCoefficients) -> BulkVector:
    return _invert(C, nc.wbar1, nc.wbarss)


def checked_to_transformed(C: CheckedVector) -> TransformedVector:
    return TransformedVector(C.gchk, C.zchk, C.muchk)


def conjugacy_residual(B: BulkVector, nc: FlowCoefficients) -> TransformedVector:
    """T_{j+1}(phi_pt^(0)(B)) - phibar_j(T_j(B))."""
    lhs = checked_to_transformed(transform_T_next(phi_pt_bulk(B, nc), nc))
    rhs = phibar(checked_to_transformed(transform_T(B, nc)), nc)
    return lhs - rhs


@dataclass(frozen=True)
class TrajectoryRow:
    j: int
    V: CouplingVector
    B: BulkVector
    T: TransformedVector
    residual: TransformedVector

    def as_dict(self) -> dict:
        out = {"j": self.j}
        out.update({f.name: getattr(self.V, f.name) for f in fields(self.V)})
        out.update(mu=self.B.mu, z0=self.B.z0)
        out.update(gbar=self.T.gbar, zbar=self.T.zbar, mubar=self.T.mubar)
        out.update(residual_g=self.residual.gbar, residual_z=self.residual.zbar, residual_mu=self.residual.mubar)
        return {k: out[k] for k in TRAJECTORY_COLUMNS}


@dataclass(frozen=True)
class Trajectory:
    rows: tuple
    j_ab: float
    diverged: bool
    monotone: bool
    comparable: bool
    message: str = ""

    def column(self, name: str) -> np.ndarray:
        return np.array([r.as_dict()[name] for r in self.rows])

    def summary(self) -> dict:
        return {
            "steps": len(self.rows),
            "j_ab": None if math.isinf(self.j_ab) else self.j_ab,
            "diverged": self.diverged,
            "gbar_strictly_decreasing": self.monotone,
            "gbar_comparable": self.comparable,
            "message": self.message,
        }


def _check_regime(V: CouplingVector, threshold: float):
    if not all(math.isfinite(v) and abs(v) <= threshold for v in V.as_tuple()):
        raise PerturbativeRegimeError("flow left perturbative regime")


def _monotonicity(gbar) -> tuple:
    gbar = list(gbar)
    mono = all(b < a for a, b in zip(gbar, gbar[1:]))
    comp = all(0.5 * b <= a <= 2.0 * b for a, b in zip(gbar, gbar[1:]))
    return mono, comp


def iterate_flow(V0: CouplingVector, dec=None, j_range=None, j_ab: float | None = None,
                 ab_offset=None, table=None, threshold: float = DIVERGENCE_THRESHOLD,
                 raise_on_divergence: bool = True) -> Trajectory:
    """Iterate phi_pt over j_range (default 0..N-1), recording bulk and transformed views.

    The last step j = N-1 uses C_{N,N} in place of C_N. Row j holds V_j and
    the diagnostics at scale j; a final row holds V at the end of the range.
    """
    if table is None:
        table = coefficient_table(dec, ab_offset, j_range)
    table = list(table)
    L = table[0].fc.L if table else (dec.L if dec is not None else 2)
    if j_ab is None:
        d = dec.spec.d if dec is not None else 4
        offset = ab_offset if ab_offset is not None else (4,) + (0,) * (d - 1)
        j_ab = coalescence_scale(offset, L)
    rows = []
    V = V0
    message = ""
    diverged = False
    try:
        for sd in table:
            j = sd.fc.j
            _check_regime(V, threshold)
            B = BulkVector.from_coupling(V, j, L)
            T = checked_to_transformed(transform_T(B, sd.fc))
            rows.append(TrajectoryRow(j, V, B, T, conjugacy_residual(B, sd.fc)))
            V = phi_pt(V, sd.fc, sd.raw, sd.raw_next, j, j_ab)
        if table:
            _check_regime(V, threshold)
            last = table[-1]
            j = last.fc.j + 1
            B = BulkVector.from_coupling(V, j, L)
            T = TransformedVector(B.g + 4 * B.g * B.mu * last.fc.wbar1_next,
                                  B.z0 + 2 * B.z0 * B.mu * last.fc.wbar1_next + 0.5 * B.mu**2 * last.fc.wbarss_next,
                                  B.mu + B.mu**2 * last.fc.wbar1_next)
            rows.append(TrajectoryRow(j, V, B, T, TransformedVector(math.nan, math.nan, math.nan)))
    except PerturbativeRegimeError as exc:
        diverged = True
        message = str(exc)
        if raise_on_divergence:
            raise
    mono, comp = _monotonicity(r.T.gbar for r in rows)
    return Trajectory(tuple(rows), j_ab, diverged, mono, comp, message)


def iterate_phibar(T0: TransformedVector, coefficients, steps: int | None = None) -> list:
    """Iterate the transformed map; coefficients is a sequence of FlowCoefficients."""
    out = [T0]
    T = T0
    seq = list(coefficients)
    for i in range(steps if steps is not None else len(seq)):
        T = phibar(T, seq[min(i, len(seq) - 1)])
        out.append(T)
    return out


def constant_beta_orbit(g0: float, beta: float, steps: int) -> np.ndarray:
    g = np.empty(steps + 1)
    g[0] = g0
    for n in range(steps):
        g[n + 1] = g[n] - beta * g[n] ** 2
    return g

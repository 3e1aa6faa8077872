"""Flow-equation coefficients and scale diagnostics from a decomposition."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import lattice
from .decomp import ScaleDecomposition
from .lattice import Kernel

W_FIELDS = ("w1", "w2", "w3", "wss", "w2ss", "w3ss", "wdw1", "wdwss", "gwss")

CSV_COLUMNS = (
    "j", "beta", "theta", "etap", "xip", "pip", "sigma", "zeta", "omega", "eta", "xi", "pi",
    "w1", "w2", "w3", "wss", "w2ss", "w3ss", "wdw1", "wdwss", "gwss", "wbar1", "wbarss", "C00", "Cab",
)


@dataclass(frozen=True)
class RawMoments:
    """Moments of w_j plus C_{j+1} at the origin and at the offset a - b."""

    j: int
    w1: float
    w2: float
    w3: float
    wss: float
    w2ss: float
    w3ss: float
    wdw1: float
    wdwss: float
    gwss: float
    C00: float
    Cab: float

    def w(self) -> dict:
        return {k: getattr(self, k) for k in W_FIELDS}


@dataclass(frozen=True)
class FlowCoefficients:
    """Coefficients of the scale-j flow step, with their normalised forms."""

    j: int
    L: int
    beta: float
    theta: float
    etap: float
    xip: float
    pip: float
    sigma: float
    zeta: float
    d_w2: float
    d_w3: float
    d_w3ss: float
    d_wdw1: float
    d_wdwss: float
    d_gwss: float
    d_w2ss: float
    omega: float
    eta: float
    xi: float
    pi: float
    wbar1: float
    wbarss: float
    wbar1_next: float
    wbarss_next: float

    def as_dict(self) -> dict:
        return asdict(self)


def default_offset(d: int, r: int = 4) -> tuple:
    return (int(r),) + (0,) * (d - 1)


def coalescence_scale(offset, L: int) -> int:
    """j_ab = floor(log_L(2|a - b|)), with the Euclidean norm of the offset."""
    dist = math.sqrt(sum(float(v) ** 2 for v in offset))
    if dist <= 0:
        raise ValueError("observable points must be distinct")
    val = math.log(2 * dist) / math.log(L)
    k = math.floor(val + 1e-12)
    return int(k)


def kernel_w_moments(w: Kernel, sign: int | None = None) -> dict:
    """The nine w-moments of a single kernel."""
    spec = w.spec
    m = lattice.moments(w)
    w2 = w**2
    w3 = w2 * w
    lap = lattice.apply_difference(w, "laplacian", sign=sign)
    wdw = w * lap
    return {
        "w1": m.q1,
        "w2": m.q2,
        "w3": m.q3,
        "wss": m.qss,
        "w2ss": lattice.second_moment(w2),
        "w3ss": lattice.second_moment(w3),
        "wdw1": float(wdw.values.sum()),
        "wdwss": lattice.second_moment(wdw),
        "gwss": lattice.second_moment(lattice.grad_square(w)),
    }


def raw_moments(dec: ScaleDecomposition, j: int, ab_offset=None, allow_last: bool = False) -> RawMoments:
    """Moments of w_j together with C_{j+1}(0) and C_{j+1}(a - b).

    Regular use needs 0 <= j <= N-2. With allow_last, j = N-1 takes C_{N,N}
    for C_{j+1}, and j = N gives the full-covariance moments with NaN C fields.
    """
    top = dec.N if allow_last else dec.N - 2
    if not 0 <= j <= top:
        raise ValueError(f"scale {j} out of range 0..{top} for N={dec.N}")
    ab_offset = tuple(ab_offset) if ab_offset is not None else default_offset(dec.spec.d)
    if j == 0:
        wm = {k: 0.0 for k in W_FIELDS}
    else:
        wm = kernel_w_moments(dec.w(j), dec.sign)
    if j + 1 <= dec.N:
        nxt = dec.slice(j + 1)
        c00, cab = nxt.at((0,) * dec.spec.d), nxt.at(ab_offset)
    else:
        c00 = cab = math.nan
    return RawMoments(j=j, C00=c00, Cab=cab, **wm)


def greek_coefficients(m: RawMoments, m_next: RawMoments, L: int) -> FlowCoefficients:
    """Coefficients at scale j = m.j from the w-moments at j and j+1."""
    if m_next.j != m.j + 1:
        raise ValueError(f"inconsistent scales {m.j} and {m_next.j}")
    j = m.j
    d = {k: getattr(m_next, k) - getattr(m, k) for k in W_FIELDS}
    beta = 8.0 * d["w2"]
    etap = 2.0 * m.C00
    xip = 4.0 * (d["w3"] - 3.0 * m.w2 * m.C00) + 0.25 * beta * etap
    pip = 2.0 * d["wdw1"]
    scale = float(L) ** (2 * (j + 1))
    return FlowCoefficients(
        j=j,
        L=L,
        beta=beta,
        theta=2.0 * d["w3ss"],
        etap=etap,
        xip=xip,
        pip=pip,
        sigma=d["wdwss"],
        zeta=d["gwss"],
        d_w2=d["w2"],
        d_w3=d["w3"],
        d_w3ss=d["w3ss"],
        d_wdw1=d["wdw1"],
        d_wdwss=d["wdwss"],
        d_gwss=d["gwss"],
        d_w2ss=d["w2ss"],
        omega=float(L) ** 2 * 0.25 * beta,
        eta=scale * etap,
        xi=scale * xip,
        pi=scale * pip,
        wbar1=float(L) ** (-2 * j) * m.w1,
        wbarss=float(L) ** (-4 * j) * m.wss,
        wbar1_next=float(L) ** (-2 * (j + 1)) * m_next.w1,
        wbarss_next=float(L) ** (-4 * (j + 1)) * m_next.wss,
    )


@dataclass(frozen=True)
class ScaleData:
    """Everything the flow step at scale j consumes."""

    raw: RawMoments
    raw_next: RawMoments
    fc: FlowCoefficients


def coefficient_table(dec: ScaleDecomposition, ab_offset=None, scales=None) -> list:
    """ScaleData for each j in scales (default 0..N-1; j = N-1 uses C_{N,N})."""
    scales = range(dec.N) if scales is None else scales
    raws = {}

    def get(j):
        if j not in raws:
            raws[j] = raw_moments(dec, j, ab_offset, allow_last=True)
        return raws[j]

    out = []
    for j in scales:
        if not 0 <= j <= dec.N - 1:
            raise ValueError(f"scale {j} out of range 0..{dec.N - 1}")
        m, mn = get(j), get(j + 1)
        out.append(ScaleData(m, mn, greek_coefficients(m, mn, dec.L)))
    return out


def csv_row(sd: ScaleData) -> dict:
    fc, m = sd.fc, sd.raw
    row = {k: getattr(fc, k) for k in ("j", "beta", "theta", "etap", "xip", "pip", "sigma", "zeta", "omega", "eta", "xi", "pi")}
    row.update(m.w())
    row.update(wbar1=fc.wbar1, wbarss=fc.wbarss, C00=m.C00, Cab=m.Cab)
    return {k: row[k] for k in CSV_COLUMNS}


def scales(m2: float, L: int, beta_seq, Omega: float) -> tuple:
    """(j_m, j_Omega); math.inf stands for an infinite scale.

    beta_seq[i] is beta at scale j = i. For m2 = 0 both scales are infinite.
    """
    if not Omega > 1:
        raise ValueError(f"Omega must exceed 1, got {Omega}")
    if m2 < 0:
        raise ValueError(f"mass squared must be nonnegative, got {m2}")
    if m2 == 0:
        return math.inf, math.inf
    val = math.log(1.0 / m2) / math.log(L**2)
    j_m = math.floor(val + 1e-12)
    return j_m, j_omega(beta_seq, Omega)


def j_omega(beta_seq, Omega: float):
    """Least k >= 0 with |beta_j| <= Omega^{-(j-k)} max|beta| for all j."""
    b = np.abs(np.asarray(beta_seq, dtype=float))
    if b.size == 0:
        return math.inf
    norm = float(b.max())
    if norm == 0:
        return 0
    j = np.arange(b.size)
    for k in range(b.size + 1):
        if np.all(b <= Omega ** (-(j - k).astype(float)) * norm * (1 + 1e-12)):
            return k
    return math.inf


@dataclass(frozen=True)
class AssumptionReport:
    j_omega: float
    a1_exceptions: int
    a1_scales: tuple
    a2: dict


def check_assumptions(fcs, Omega: float, c: float, m2: float | None = None) -> AssumptionReport:
    """Counts beta_j < c for j <= j_Omega, and max |gamma_j| Omega^{(j - j_Omega)_+}."""
    fcs = sorted(fcs, key=lambda f: f.j)
    betas = [f.beta for f in fcs]
    jo = math.inf if m2 == 0 else j_omega(betas, Omega)
    low = tuple(f.j for f in fcs if f.j <= jo and f.beta < c)
    a2 = {}
    for name in ("theta", "eta", "xi", "omega", "pi"):
        stat = 0.0
        for f in fcs:
            excess = 0.0 if math.isinf(jo) else max(f.j - jo, 0)
            stat = max(stat, abs(getattr(f, name)) * Omega**excess)
        a2[name] = stat
    return AssumptionReport(jo, len(low), low, a2)


@dataclass(frozen=True)
class BetaLimit:
    betas: tuple
    extrapolated: float
    reference: float


def beta_reference(L: int) -> float:
    return math.log(L) / math.pi**2


def beta_limit(dec: ScaleDecomposition) -> BetaLimit:
    """beta_j over regular slices, plus (L^2 beta_J - beta_{J-1}) / (L^2 - 1)."""
    if dec.m2 != 0:
        raise ValueError("beta limit needs a massless decomposition")
    if dec.N - 1 < 3:
        raise ValueError(f"need at least 3 usable scales, have {dec.N - 1}")
    w2 = [0.0] + [float(np.sum(dec.w(j).values ** 2)) for j in range(1, dec.N)]
    betas = tuple(8.0 * (w2[j + 1] - w2[j]) for j in range(dec.N - 1))
    L2 = dec.L**2
    extrap = (L2 * betas[-1] - betas[-2]) / (L2 - 1)
    return BetaLimit(betas, extrap, beta_reference(dec.L))


NORMALISED_PROFILES = {
    "beta": lambda s: s.fc.beta,
    "theta": lambda s: s.fc.theta,
    "sigma": lambda s: s.fc.sigma,
    "zeta": lambda s: s.fc.zeta,
    "etap_L2j": lambda s: s.fc.etap * s.fc.L ** (2 * s.fc.j),
    "pip_L2j": lambda s: s.fc.pip * s.fc.L ** (2 * s.fc.j),
    "xip_L2j": lambda s: s.fc.xip * s.fc.L ** (2 * s.fc.j),
    "w1_Lm2j": lambda s: s.raw.w1 * s.fc.L ** (-2 * s.fc.j),
    "wss_Lm4j": lambda s: s.raw.wss * s.fc.L ** (-4 * s.fc.j),
    "w2ss_Lm2j": lambda s: s.raw.w2ss * s.fc.L ** (-2 * s.fc.j),
}


def bound_profiles(table, scales=None) -> dict:
    """For each normalised sequence: (values, max |v|, median |v|, max <= 10 median)."""
    rows = [s for s in table if scales is None or s.fc.j in scales]
    out = {}
    for name, fn in NORMALISED_PROFILES.items():
        vals = np.array([fn(s) for s in rows])
        mx = float(np.max(np.abs(vals)))
        med = float(np.median(np.abs(vals)))
        out[name] = (tuple(vals.tolist()), mx, med, bool(mx <= 10 * med))
    return out

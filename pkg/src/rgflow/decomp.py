"""Scale decomposition of the torus Green function by a spectral window."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import lattice
from .lattice import Kernel, TorusSpec

MAX_BYTES = 4 * 2**30


@dataclass(frozen=True)
class WindowProfile:
    """Window density rho on [0, inf) with tail Phi(s) = int_s^inf rho.

    Slice j of the decomposition has symbol [Phi(L^{j-1} u) - Phi(L^j u)] / u^2
    with u^2 = lambda(xi) + m^2.

    family "heat": rho(t) = width^2 t exp(-(width t)^2 / 2), so Phi is Gaussian
    and each slice is a heat-kernel time integral.
    family "bump": rho proportional to exp(-1 / ((t - a)(b - t))) on (a, b).
    """

    family: str = "heat"
    width: float = 0.15
    support: tuple = (0.5, 1.0)
    grid: int = 20001

    def __post_init__(self):
        if self.family not in ("heat", "bump"):
            raise ValueError(f"unknown window family {self.family!r}")
        if self.family == "heat" and not self.width > 0:
            raise ValueError(f"heat window width must be positive, got {self.width}")
        if self.family == "bump":
            a, b = self.support
            if not 0 < a < b:
                raise ValueError(f"bump support must satisfy 0 < a < b, got {self.support}")
        if self.grid < 101:
            raise ValueError("window grid resolution must be at least 101")
        if self.family == "bump":
            a, b = self.support
            t = np.linspace(a, b, self.grid)
            dens = self._raw_bump(t)
            cum = integrate.cumulative_simpson(dens, x=t, initial=0.0)
            object.__setattr__(self, "_t", t)
            object.__setattr__(self, "_cum", cum / cum[-1])
            object.__setattr__(self, "_norm", float(integrate.quad(self._raw_bump, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)[0]))

    def _raw_bump(self, t):
        a, b = self.support
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        inside = (t > a) & (t < b)
        ti = t[inside]
        out[inside] = np.exp(-1.0 / ((ti - a) * (b - ti)))
        return out if out.ndim else float(out)

    def density(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "heat":
            s2 = self.width**2
            return np.where(t >= 0, s2 * t * np.exp(-0.5 * s2 * t * t), 0.0)
        return self._raw_bump(t) / self._norm

    def tail(self, s):
        """Phi(s) = int_s^inf rho(t) dt."""
        s = np.asarray(s, dtype=float)
        if self.family == "heat":
            return np.exp(-0.5 * (self.width * s) ** 2)
        return 1.0 - np.interp(s, self._t, self._cum, left=0.0, right=1.0)

    @property
    def small_s_coefficient(self) -> float:
        """lim_{s->0} (1 - Phi(s)) / s^2, the massless zero-mode weight per unit s^2."""
        if self.family == "heat":
            return 0.5 * self.width**2
        return 0.0

    def total_mass(self) -> float:
        if self.family == "heat":
            f = lambda t: float(self.density(t))
            return float(integrate.quad(f, 0.0, np.inf, epsabs=1e-14, epsrel=1e-13)[0])
        return float(integrate.quad(lambda t: float(self.density(t)), *self.support, epsabs=1e-14, epsrel=1e-13, limit=200)[0])

    def validate(self, tol: float = 1e-10) -> None:
        mass = self.total_mass()
        if abs(mass - 1.0) > tol:
            raise ValueError(f"window density integrates to {mass!r}, not 1")
        t = np.linspace(0, (self.support[1] if self.family == "bump" else 50.0 / self.width), 4001)
        if np.min(self.density(t)) < 0:
            raise ValueError("window density is negative somewhere")

    def slice_symbol(self, u2: np.ndarray, lo: float, hi: float) -> np.ndarray:
        """[Phi(lo u) - Phi(hi u)] / u^2 with its limit at u = 0."""
        u2 = np.asarray(u2, dtype=float)
        zero = u2 <= 0
        safe = np.where(zero, 1.0, u2)
        if self.family == "heat":
            a = 0.5 * (self.width * lo) ** 2
            b = 0.5 * (self.width * hi) ** 2
            v = np.exp(-a * safe) * (-np.expm1(-(b - a) * safe)) / safe
        else:
            u = np.sqrt(safe)
            v = (self.tail(lo * u) - self.tail(hi * u)) / safe
        limit = self.small_s_coefficient * (hi * hi - lo * lo)
        return np.where(zero, limit, v)

    def params(self) -> dict:
        out = {"family": self.family, "grid": self.grid}
        if self.family == "heat":
            out["width"] = self.width
        else:
            out["support"] = list(self.support)
        return out


@dataclass(frozen=True, eq=False)
class ScaleDecomposition:
    """Slices C_1..C_{N-1}, remainder C_{N,N} and partial sums w_j."""

    spec: TorusSpec
    m2: float
    window: WindowProfile
    slices: tuple
    remainder: Kernel
    sign: int = -1
    meta: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def N(self) -> int:
        return self.spec.N

    @property
    def L(self) -> int:
        return self.spec.L

    def slice(self, j: int) -> Kernel:
        """C_j for 1 <= j <= N-1, and C_{N,N} for j = N."""
        if 1 <= j <= self.N - 1:
            return self.slices[j - 1]
        if j == self.N:
            return self.remainder
        raise ValueError(f"scale {j} outside 1..{self.N}")

    def w(self, j: int) -> Kernel:
        """w_j = C_1 + ... + C_j, with w_0 = 0 and w_N including C_{N,N}."""
        if not 0 <= j <= self.N:
            raise ValueError(f"partial sum index {j} outside 0..{self.N}")
        if j not in self._cache:
            if j == 0:
                self._cache[j] = Kernel.zeros(self.spec)
            else:
                self._cache[j] = self.w(j - 1) + self.slice(j)
        return self._cache[j]

    def total(self) -> Kernel:
        return self.w(self.N)

    def green(self) -> Kernel:
        return lattice.green_kernel(self.spec, self.m2, zero_mode="drop" if self.m2 == 0 else None)

    def closure_error(self) -> float:
        g = self.green().values
        return float(np.max(np.abs(self.total().values - g)) / np.max(np.abs(g)))

    def manifest(self) -> dict:
        return {
            "spec": {"d": self.spec.d, "L": self.spec.L, "N": self.spec.N, "M": self.spec.M},
            "m2": self.m2,
            "window": self.window.params(),
            "laplacian_sign": self.sign,
            "scales": list(range(1, self.N + 1)),
            **self.meta,
        }


def _band(L: int, j: int) -> tuple:
    return (0.0 if j == 1 else float(L) ** (j - 1), float(L) ** j)


def build_decomposition(spec: TorusSpec, m2: float = 0.0, window: WindowProfile | None = None,
                        zero_mode: str = "drop", sign: int | None = None) -> ScaleDecomposition:
    """Build C_1..C_{N-1} from the window and close with C_{N,N} = G - sum of slices."""
    window = window or WindowProfile()
    m2 = float(m2)
    if m2 < 0:
        raise ValueError(f"mass squared must be nonnegative, got {m2}")
    if m2 == 0 and zero_mode != "drop":
        raise ValueError("massless Green function undefined on torus")
    if (spec.N + 3) * spec.sites * 8 > MAX_BYTES:
        raise MemoryError(f"decomposition of {spec.M}^{spec.d} torus exceeds memory budget")
    sign = lattice.LAPLACIAN_SIGN if sign is None else sign

    u2 = spec.symbol(half=True) + m2
    origin = (0,) * spec.d
    ghat = np.where(u2 > 0, 1.0 / np.where(u2 > 0, u2, 1.0), 0.0)
    rest = ghat.copy()
    slices = []
    min_symbol = []
    zero_modes = []
    for j in range(1, spec.N):
        lo, hi = _band(spec.L, j)
        v = window.slice_symbol(u2, lo, hi)
        if m2 == 0:
            zero_modes.append(float(v[origin]))
        if not np.any(np.abs(v) > 1e-300):
            warnings.warn(f"window band for scale {j} lies outside the resolvable frequencies; slice is empty")
            v = np.zeros_like(v)
        min_symbol.append(float(v.min()))
        rest -= v
        slices.append(Kernel(spec, np.fft.irfftn(v, s=spec.shape, axes=spec.axes), {"scale": j}))
    offset = float(rest[origin]) / spec.sites if m2 == 0 else 0.0
    remainder = Kernel(spec, np.fft.irfftn(rest, s=spec.shape, axes=spec.axes), {"scale": spec.N, "zero_mode_offset": offset})
    meta = {
        "zero_mode": "drop" if m2 == 0 else "none",
        "zero_mode_offset": offset,
        "slice_zero_modes": zero_modes,
        "min_slice_symbol": min_symbol,
        "min_remainder_symbol": float(rest.min()),
    }
    return ScaleDecomposition(spec, m2, window, tuple(slices), remainder, sign, meta)


def decomposition_from_slices(slices, remainder: Kernel | None = None, m2: float = 0.0,
                              window: WindowProfile | None = None) -> ScaleDecomposition:
    """Wrap given slice kernels, e.g. synthetic test slices."""
    slices = tuple(slices)
    spec = slices[0].spec if slices else remainder.spec
    if len(slices) != spec.N - 1:
        raise ValueError(f"expected {spec.N - 1} slices for N={spec.N}, got {len(slices)}")
    remainder = remainder if remainder is not None else Kernel.zeros(spec)
    return ScaleDecomposition(spec, float(m2), window or WindowProfile(), slices, remainder, lattice.LAPLACIAN_SIGN, {"synthetic": True})


@dataclass(frozen=True)
class RangeReport:
    j: int
    radius: float
    outside_max: float
    peak: float
    ratio: float


def kernel_range_profile(k: Kernel, radius: float, j: int = 0) -> RangeReport:
    far = k.spec.sup_norm() >= radius
    outside = float(np.max(np.abs(k.values[far]))) if np.any(far) else 0.0
    peak = abs(float(k.values[(0,) * k.spec.d]))
    ratio = outside / peak if peak > 0 else (0.0 if outside == 0 else math.inf)
    return RangeReport(j, radius, outside, peak, ratio)


def range_profile(dec: ScaleDecomposition, j: int) -> RangeReport:
    """Max |C_j(x)| over |x|_inf >= L^j / 2 against the peak |C_j(0)|."""
    if not 1 <= j <= dec.N:
        raise ValueError(f"scale {j} outside 1..{dec.N}")
    return kernel_range_profile(dec.slice(j), 0.5 * dec.L**j, j)


@dataclass(frozen=True)
class EstimateReport:
    """Fitted constants c_j per derivative order, and their spread across scales."""

    p: int
    k: int
    constants: dict
    spread: dict
    scales: tuple
    mass_derivative: dict | None = None


def _derivative_sup(k: Kernel, order: int) -> float:
    v = k.values
    for _ in range(order):
        v = lattice.forward_grad(v, k.spec, 1)
    return float(np.max(np.abs(v)))


def verify_estimates(dec: ScaleDecomposition, p: int = 0, k: int = 0, scales=None,
                     mass_step: float | None = None) -> EstimateReport:
    """Fit c_j = |grad^n C_j|_inf (1 + m^2 L^{2(j-1)})^k L^{(j-1)(2[phi] + n)} for n <= p.

    Derivatives are taken along e_1. The spread is max/min of c_j over the
    requested scales (default 2..N-1).
    """
    if not 0 <= p <= 2:
        raise ValueError(f"derivative order p must be in 0..2, got {p}")
    L, d = dec.L, dec.spec.d
    dim = 0.5 * (d - 2)
    scales = tuple(scales) if scales is not None else tuple(range(2, dec.N))
    constants, spread = {}, {}
    for n in range(p + 1):
        row = {}
        for j in range(1, dec.N):
            sup = _derivative_sup(dec.slice(j), n)
            row[j] = sup * (1 + dec.m2 * L ** (2 * (j - 1))) ** k * float(L) ** ((j - 1) * (2 * dim + n))
        constants[n] = row
        vals = [row[j] for j in scales if j in row]
        spread[n] = (max(vals) / min(vals)) if vals and min(vals) > 0 else math.inf
    mass_derivative = None
    if mass_step:
        shifted = build_decomposition(dec.spec, dec.m2 + mass_step, dec.window, sign=dec.sign)
        profile = math.log(L) if d == 4 else (float(L) if d == 3 else 1.0)
        mass_derivative = {}
        for j in range(2, dec.N):
            deriv = float(np.max(np.abs(shifted.slice(j).values - dec.slice(j).values))) / mass_step
            if d == 3:
                profile = float(L) ** j
            elif d > 4:
                profile = float(L) ** (-(d - 4) * (j - 1))
            mass_derivative[j] = deriv * (1 + dec.m2 * L ** (2 * (j - 1))) ** k / profile
    return EstimateReport(p, k, constants, spread, scales, mass_derivative)

"""Torus geometry, translation-invariant kernels and moment functionals."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Sign s in Delta = s * Delta_std, where Delta_std f(x) = sum_e (f(x+e) - f(x)).
# s = -1 gives sum_x (Delta q)_x x_1^2 = -2 q^(1); s = +1 is the literal
# -1/2 sum_e grad^{-e} grad^e, which gives +2 q^(1).
LAPLACIAN_SIGN = -1

MAX_SITES = 2**28


def set_laplacian_sign(sign: int) -> None:
    global LAPLACIAN_SIGN
    if sign not in (1, -1):
        raise ValueError(f"laplacian sign must be +1 or -1, got {sign!r}")
    LAPLACIAN_SIGN = sign


def _resolve_sign(sign):
    if sign is None:
        return LAPLACIAN_SIGN
    if sign not in (1, -1):
        raise ValueError(f"laplacian sign must be +1 or -1, got {sign!r}")
    return sign


@dataclass(frozen=True)
class TorusSpec:
    """Discrete torus of side M = L**N in d dimensions."""

    d: int = 4
    L: int = 2
    N: int = 5

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        if int(self.L) != self.L or self.L < 2:
            raise ValueError(f"L must be an integer >= 2, got {self.L!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if self.M % 2:
            raise ValueError(f"side M = {self.M} must be even")
        if self.M**self.d > MAX_SITES:
            raise MemoryError(f"torus with {self.M}^{self.d} sites exceeds the site budget {MAX_SITES}")

    @property
    def M(self) -> int:
        return self.L**self.N

    @property
    def shape(self) -> tuple:
        return (self.M,) * self.d

    @property
    def sites(self) -> int:
        return self.M**self.d

    @property
    def axes(self) -> tuple:
        return tuple(range(self.d))

    def centered(self) -> np.ndarray:
        """Centered coordinates in (-M/2, M/2] along one axis."""
        c = np.arange(self.M)
        c[c > self.M // 2] -= self.M
        return c

    def coordinate(self, axis: int = 0) -> np.ndarray:
        """Centered coordinate x_axis broadcast to the full torus shape."""
        shape = [1] * self.d
        shape[axis] = self.M
        return self.centered().reshape(shape)

    def index(self, x) -> tuple:
        """Array index of a displacement vector (wrapped onto the torus)."""
        x = tuple(int(v) for v in x)
        if len(x) != self.d:
            raise ValueError(f"displacement {x} has wrong dimension for d={self.d}")
        return tuple(v % self.M for v in x)

    def sup_norm(self) -> np.ndarray:
        """|x|_inf of the centered representative, as a full array."""
        out = np.zeros(self.shape, dtype=np.int64)
        for i in range(self.d):
            out = np.maximum(out, np.abs(self.coordinate(i)))
        return out

    def symbol(self, half: bool = False) -> np.ndarray:
        """lambda(xi) = 4 sum_i sin^2(pi k_i / M), the symbol of -Delta_std.

        With half=True the last axis is truncated to the rfftn half-spectrum.
        """
        s = 4.0 * np.sin(np.pi * np.arange(self.M) / self.M) ** 2
        out = np.zeros(self.shape[:-1] + ((self.M // 2 + 1) if half else self.M,))
        for i in range(self.d):
            shape = [1] * self.d
            if half and i == self.d - 1:
                v = s[: self.M // 2 + 1]
            else:
                v = s
            shape[i] = v.size
            out = out + v.reshape(shape)
        return out


@dataclass(frozen=True, eq=False)
class Kernel:
    """Translation-invariant kernel q_{0,x} on the torus."""

    spec: TorusSpec
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.spec.shape:
            raise ValueError(f"kernel shape {v.shape} does not match torus shape {self.spec.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("kernel contains non-finite values")
        v = v.copy() if v is self.values and v.flags.writeable else v
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, spec: TorusSpec) -> "Kernel":
        return cls(spec, np.zeros(spec.shape))

    @classmethod
    def delta(cls, spec: TorusSpec, x=None) -> "Kernel":
        v = np.zeros(spec.shape)
        v[spec.index(x if x is not None else (0,) * spec.d)] = 1.0
        return cls(spec, v)

    def _check(self, other: "Kernel"):
        if self.spec != other.spec:
            raise ValueError(f"kernel specs differ: {self.spec} vs {other.spec}")

    def __add__(self, other: "Kernel") -> "Kernel":
        self._check(other)
        return Kernel(self.spec, self.values + other.values)

    def __sub__(self, other: "Kernel") -> "Kernel":
        self._check(other)
        return Kernel(self.spec, self.values - other.values)

    def __mul__(self, other) -> "Kernel":
        if isinstance(other, Kernel):
            self._check(other)
            return Kernel(self.spec, self.values * other.values)
        return Kernel(self.spec, self.values * float(other))

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Kernel":
        return Kernel(self.spec, self.values**n)

    def at(self, x) -> float:
        return float(self.values[self.spec.index(x)])

    def reflected(self) -> np.ndarray:
        """Values of q(-x)."""
        v = self.values
        for ax in self.spec.axes:
            v = np.roll(np.flip(v, axis=ax), 1, axis=ax)
        return v

    def evenness_error(self) -> float:
        scale = max(float(np.max(np.abs(self.values))), 1e-300)
        return float(np.max(np.abs(self.values - self.reflected()))) / scale

    def is_even(self, rtol: float = 1e-12) -> bool:
        return self.evenness_error() <= rtol

    def rotation_error(self, samples: int = 256, seed: int = 0) -> float:
        """Max relative deviation of q under random coordinate permutations and reflections."""
        spec = self.spec
        rng = np.random.default_rng(seed)
        pts = rng.integers(0, spec.M, size=(samples, spec.d))
        scale = max(float(np.max(np.abs(self.values))), 1e-300)
        err = 0.0
        for p in pts:
            perm = rng.permutation(spec.d)
            flips = rng.choice([-1, 1], size=spec.d)
            q = (p[perm] * flips) % spec.M
            err = max(err, abs(self.values[tuple(p)] - self.values[tuple(q)]) / scale)
        return err

    def is_rotation_invariant(self, rtol: float = 1e-10, samples: int = 256) -> bool:
        return self.rotation_error(samples) <= rtol


@dataclass(frozen=True)
class Moments:
    """Plain sums q^(1), q^(2), q^(3) and the x_1^2-weighted sum q^(**)."""

    q1: float
    q2: float
    q3: float
    qss: float


def green_kernel(spec: TorusSpec, m2: float, zero_mode: str | None = None) -> Kernel:
    """Green function [-Delta_std + m2]^{-1} on the torus via inverse FFT.

    For m2 = 0 the caller must pass zero_mode="drop", which sets the xi = 0
    Fourier mode to zero.
    """
    m2 = float(m2)
    if m2 < 0:
        raise ValueError(f"mass squared must be nonnegative, got {m2}")
    lam = spec.symbol(half=True) + m2
    policy = "none"
    if m2 == 0:
        if zero_mode != "drop":
            raise ValueError("massless Green function undefined on torus")
        policy = "drop"
        lam[(0,) * spec.d] = np.inf
    g = np.fft.irfftn(1.0 / lam, s=spec.shape, axes=spec.axes)
    return Kernel(spec, g, {"kind": "green", "m2": m2, "zero_mode": policy})


def convolve(a: Kernel, b: Kernel) -> Kernel:
    """(a*b)(x) = sum_y a(y) b(x-y) via FFT."""
    a._check(b)
    spec = a.spec
    fa = np.fft.rfftn(a.values, axes=spec.axes)
    fb = np.fft.rfftn(b.values, axes=spec.axes)
    return Kernel(spec, np.fft.irfftn(fa * fb, s=spec.shape, axes=spec.axes))


def _direction(spec: TorusSpec, e) -> tuple:
    """Normalise a unit direction to (axis, +-1).

    Accepts a signed 1-based integer (+1 = e_1, -2 = -e_2) or an (axis, sign) pair.
    """
    if isinstance(e, (tuple, list)):
        axis, sgn = int(e[0]), int(e[1])
    else:
        e = int(e)
        if e == 0:
            raise ValueError("direction 0 is not a unit vector")
        axis, sgn = abs(e) - 1, (1 if e > 0 else -1)
    if not 0 <= axis < spec.d or sgn not in (1, -1):
        raise ValueError(f"invalid unit direction {e!r} for d={spec.d}")
    return axis, sgn


def forward_grad(values: np.ndarray, spec: TorusSpec, e) -> np.ndarray:
    axis, sgn = _direction(spec, e)
    return np.roll(values, -sgn, axis=axis) - values


def laplacian_values(values: np.ndarray, spec: TorusSpec, sign=None) -> np.ndarray:
    s = _resolve_sign(sign)
    out = -2.0 * spec.d * values
    for ax in spec.axes:
        out = out + np.roll(values, 1, axis=ax) + np.roll(values, -1, axis=ax)
    return s * out


def apply_difference(k: Kernel, op: str, e=None, sign=None) -> Kernel:
    """Apply forward_grad along e, or the Laplacian with the global sign convention."""
    if op == "forward_grad":
        if e is None:
            raise ValueError("forward_grad needs a direction")
        return Kernel(k.spec, forward_grad(k.values, k.spec, e))
    if op == "laplacian":
        return Kernel(k.spec, laplacian_values(k.values, k.spec, sign))
    raise ValueError(f"unknown difference operator {op!r}")


def grad_square(k: Kernel) -> Kernel:
    """Pointwise (grad q)^2 = 1/2 sum over the 2d unit vectors of (grad^e q)^2."""
    spec = k.spec
    out = np.zeros(spec.shape)
    for ax in spec.axes:
        for sgn in (1, -1):
            out += forward_grad(k.values, spec, (ax, sgn)) ** 2
    return Kernel(spec, 0.5 * out)


def second_moment(k: Kernel, axis: int = 0) -> float:
    """sum_x x_axis^2 q(x) with centered coordinates."""
    c = k.spec.centered().astype(np.float64) ** 2
    other = tuple(a for a in k.spec.axes if a != axis)
    marginal = k.values.sum(axis=other) if other else k.values
    return float(np.dot(marginal, c))


def moments(k: Kernel) -> Moments:
    v = k.values
    return Moments(
        q1=float(v.sum()),
        q2=float(np.sum(v * v)),
        q3=float(np.sum(v * v * v)),
        qss=second_moment(k, 0),
    )


def spectral_square_sum(k: Kernel) -> float:
    """sum_x q(x)^2 computed from the Fourier coefficients (Parseval)."""
    f = np.fft.fftn(k.values, axes=k.spec.axes)
    return float(np.sum(np.abs(f) ** 2)) / k.spec.sites


def dump_kernel(path, k: Kernel, mass: float = 0.0, meta: dict | None = None) -> tuple:
    """Write the binary kernel dump and its JSON metadata; return both paths."""
    path = Path(path)
    spec = k.spec
    header = f"RFK1 {spec.d} {spec.L} {spec.N} {float(mass)!r}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(k.values, dtype="<f8").tobytes(order="C"))
    record = {
        "spec": {"d": spec.d, "L": spec.L, "N": spec.N, "M": spec.M},
        "mass": float(mass),
        "zero_mode": k.meta.get("zero_mode", "none"),
        "laplacian_sign": LAPLACIAN_SIGN,
    }
    record.update(meta or {})
    meta_path = path.with_name(path.name + ".json")
    meta_path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return path, meta_path


def load_kernel(path) -> tuple:
    """Read a kernel dump; returns (Kernel, mass)."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 5 or header[0] != "RFK1":
            raise ValueError(f"{path}: not a kernel dump")
        d, L, N = (int(v) for v in header[1:4])
        mass = float(header[4])
        spec = TorusSpec(d, L, N)
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != spec.sites:
        raise ValueError(f"{path}: expected {spec.sites} values, found {data.size}")
    return Kernel(spec, data.reshape(spec.shape).astype(np.float64)), mass


def log_base(x: float, base: float) -> float:
    return math.log(x) / math.log(base)

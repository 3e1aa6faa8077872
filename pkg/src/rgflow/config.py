"""Run configuration: a dataclass plus a flat key = value text format.

Grammar, one entry per line::

    # comment
    key = value
    list_key = v1, v2, v3

Blank lines and text after '#' are ignored. Keys are the RunConfig field
names; unknown keys and repeated keys are errors. Booleans accept
true/false/yes/no/1/0. Lists are comma separated.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Tolerances:
    closure: float = 1e-9
    decay: float = 1e-2
    symbolic: float = 1e-12
    roundtrip: float = 1e-12
    beta_last: float = 0.25
    beta_extrapolated: float = 0.10
    bound_factor: float = 10.0
    cubic_factor: float = 2.0
    asymptotic: float = 0.30
    scale_gap: int = 3


@dataclass(frozen=True)
class RunConfig:
    d: int = 4
    L: int = 2
    N: int = 5
    masses: tuple = (0.0,)
    window_family: str = "heat"
    window_width: float = 0.15
    window_support: tuple = (0.5, 1.0)
    ab_offset: tuple = (4, 0, 0, 0)
    g: float = 0.05
    nu: float = 0.0
    y: float = 0.0
    z: float = 0.0
    lam_a: float = 0.0
    lam_b: float = 0.0
    q_a: float = 0.0
    q_b: float = 0.0
    j_min: int = 0
    j_max: int = -1
    Omega: float = 2.0
    c_threshold: float = 0.01
    laplacian_sign: int = -1
    divergence_threshold: float = 1e3
    phase: str = "below_jab"
    seed: int = 0
    output_dir: str = "out"
    acceptance_side64: bool = True
    tol: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if self.L < 2:
            raise ConfigError(f"L must be >= 2, got {self.L}")
        if self.N < 1:
            raise ConfigError(f"N must be >= 1, got {self.N}")
        if (self.L**self.N) % 2:
            raise ConfigError("side L^N must be even")
        if not self.masses or any((not math.isfinite(m)) or m < 0 for m in self.masses):
            raise ConfigError(f"masses must be a nonempty list of nonnegative numbers, got {self.masses}")
        if self.window_family not in ("heat", "bump"):
            raise ConfigError(f"window_family must be heat or bump, got {self.window_family!r}")
        if not self.window_width > 0:
            raise ConfigError("window_width must be positive")
        if len(self.window_support) != 2 or not 0 < self.window_support[0] < self.window_support[1]:
            raise ConfigError(f"window_support must be two numbers 0 < a < b, got {self.window_support}")
        if len(self.ab_offset) != self.d:
            raise ConfigError(f"ab_offset needs {self.d} components, got {len(self.ab_offset)}")
        if all(v == 0 for v in self.ab_offset):
            raise ConfigError("ab_offset must be nonzero")
        if not self.Omega > 1:
            raise ConfigError(f"Omega must exceed 1, got {self.Omega}")
        if self.laplacian_sign not in (-1, 1):
            raise ConfigError(f"laplacian_sign must be -1 or 1, got {self.laplacian_sign}")
        if self.phase not in ("below_jab", "at_or_above_jab"):
            raise ConfigError(f"phase must be below_jab or at_or_above_jab, got {self.phase!r}")
        if not self.divergence_threshold > 0:
            raise ConfigError("divergence_threshold must be positive")
        top = self.N - 1
        jmax = top if self.j_max < 0 else self.j_max
        if not 0 <= self.j_min <= jmax <= top:
            raise ConfigError(f"scale range {self.j_min}..{jmax} not within 0..{top}")

    @property
    def scale_range(self) -> range:
        jmax = self.N - 1 if self.j_max < 0 else self.j_max
        return range(self.j_min, jmax + 1)

    def canonical(self) -> dict:
        """Plain dict with every key, in field order."""
        return _to_plain(self)

    def to_text(self) -> str:
        lines = []
        for k, v in _flatten(self.canonical()).items():
            lines.append(f"{k} = {_fmt(v)}")
        return "\n".join(lines) + "\n"


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_to_plain(v) for v in obj]
    return obj


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update(_flatten(v, f"{prefix}{k}."))
        else:
            out[prefix + k] = v
    return out


def _fmt(v) -> str:
    if isinstance(v, list):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _convert(raw: str, default, key: str):
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low not in _BOOL:
                raise ValueError(raw)
            return _BOOL[low]
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            kind = type(default[0]) if default else float
            return tuple(kind(s) for s in items)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def _field_defaults(cls) -> dict:
    inst = cls()
    return {f.name: getattr(inst, f.name) for f in dataclasses.fields(cls)}


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse key = value text over the defaults (or over base)."""
    base = base or RunConfig()
    top = {f.name: getattr(base, f.name) for f in dataclasses.fields(RunConfig) if f.name != "tol"}
    tol = {f.name: getattr(base.tol, f.name) for f in dataclasses.fields(Tolerances)}
    seen = set()
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value, got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"line {n}: repeated key {key!r}")
        seen.add(key)
        if key.startswith("tol."):
            sub = key[4:]
            if sub not in tol:
                raise ConfigError(f"line {n}: unknown key {key!r}")
            tol[sub] = _convert(val, tol[sub], key)
        elif key in top:
            top[key] = _convert(val, top[key], key)
        else:
            raise ConfigError(f"line {n}: unknown key {key!r}")
    if "ab_offset" in seen:
        top["ab_offset"] = tuple(int(v) for v in top["ab_offset"])
    elif "d" in seen and len(top["ab_offset"]) != top["d"]:
        top["ab_offset"] = (4,) + (0,) * (top["d"] - 1)
    top["masses"] = tuple(float(m) for m in top["masses"])
    top["window_support"] = tuple(float(v) for v in top["window_support"])
    try:
        return RunConfig(**top, tol=Tolerances(**tol))
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def config_json(cfg: RunConfig) -> str:
    return json.dumps(cfg.canonical(), sort_keys=True, separators=(",", ":"))

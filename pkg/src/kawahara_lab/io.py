# src/kawahara_lab/io.py
from __future__ import annotations

import hashlib
import json
import math
import os
import re
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, Mapping, Optional, Tuple

import pandas as pd
import yaml

from .convergence import PROFILES, RoughDataSpec
from .dynamics import SolverConfig
from .errors import InvalidParameters
from .norms import NormParams
from .spectral import DispersionParams, GridSpec, SpaceTimeLattice

KINDS = (
    "solve",
    "verify-bilinear",
    "counterexample",
    "converge-pointwise",
    "converge-uniform",
    "truncate",
    "strichartz-check",
)
INITIAL_KINDS = ("zero", "bump", "rough")

DATA_FORMAT = "%.12e"
SLOPE_FORMAT = "%.6e"

_PI_RE = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]*(?:[eE][-+]?[0-9]+)?)\s*\*?\s*(?:pi|π)\s*$", re.IGNORECASE)


# -------------------------
# Value coercion
# -------------------------
def _coerce_float(x: Any, name: str) -> float:
    if isinstance(x, bool):
        raise InvalidParameters(f"Expected a float for `{name}`, got {x!r}")
    try:
        return float(x)
    except Exception as e:
        raise InvalidParameters(f"Expected a float for `{name}`, got {x!r}") from e


def _coerce_int(x: Any, name: str) -> int:
    if isinstance(x, bool):
        raise InvalidParameters(f"Expected an int for `{name}`, got {x!r}")
    try:
        v = float(x)
    except Exception as e:
        raise InvalidParameters(f"Expected an int for `{name}`, got {x!r}") from e
    if not v.is_integer():
        raise InvalidParameters(f"Expected an int for `{name}`, got {x!r}")
    return int(v)


def _coerce_bool(x: Any, name: str) -> bool:
    if isinstance(x, bool):
        return x
    if isinstance(x, str) and x.strip().lower() in ("true", "yes", "on", "1", "false", "no", "off", "0"):
        return x.strip().lower() in ("true", "yes", "on", "1")
    raise InvalidParameters(f"Expected true/false for `{name}`, got {x!r}")


def _coerce_length(x: Any, name: str) -> float:
    """Accepts plain numbers and multiples of pi such as `64*pi` or `64pi`."""
    if isinstance(x, str):
        m = _PI_RE.match(x)
        if m:
            coeff = m.group(1)
            return (float(coeff) if coeff not in ("", "+", "-") else float(coeff + "1")) * math.pi
    return _coerce_float(x, name)


def _coerce_float_list(x: Any, name: str) -> Tuple[float, ...]:
    items = x if isinstance(x, (list, tuple)) else [x]
    return tuple(_coerce_float(v, name) for v in items)


def _coerce_choice(x: Any, name: str, choices: Tuple[str, ...]) -> str:
    v = str(x).strip()
    if v not in choices:
        raise InvalidParameters(f"`{name}` must be one of {list(choices)}, got {x!r}")
    return v


# -------------------------
# Experiment configuration
# -------------------------
def _default_s_values() -> Tuple[float, ...]:
    return tuple(-1.0 + 0.125 * j for j in range(9))


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Flat experiment configuration; one field per config key.

    Physical groups: dispersion (alpha, beta), grid (L, M), solver (dt, T, ...),
    norms (s, b, epsilon, s2), data (initial, amplitude, k_max, delta, profile),
    ladders (N_values, s_values, t_max/t_levels, lambdas), space-time windows
    (t_window, n_t) and test families (band for bump data, band_fraction of the
    max frequency for estimate families).
    """
    kind: str = "solve"
    alpha: float = 1.0
    beta: float = 0.0
    L: float = 64.0 * math.pi
    M: int = 4096
    dt: float = 1e-4
    T: float = 0.1
    dealias: bool = True
    nonlinear: bool = True
    save_every: int = 0
    s: float = 0.25
    b: Optional[float] = None
    epsilon: float = 0.1
    s2: Optional[float] = None
    seed: int = 0
    samples: int = 30
    initial: str = "rough"
    amplitude: float = 0.1
    k_max: float = 4.0
    delta: float = 0.05
    profile: str = "power-law-random-phase"
    N_values: Tuple[float, ...] = (16.0, 32.0, 64.0, 128.0, 256.0)
    s_values: Tuple[float, ...] = field(default_factory=_default_s_values)
    lattice_density: int = 16
    t_max: float = 0.1
    t_levels: int = 7
    lambdas: Optional[Tuple[float, ...]] = None
    picard: bool = False
    picard_max_iters: int = 40
    picard_tol: float = 1e-10
    t_window: float = 2.0
    n_t: int = 512
    band: float = 2.0
    band_fraction: float = 0.25
    refine_check: bool = False
    refine_tolerance: float = 0.1

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InvalidParameters(f"Unknown experiment kind: {self.kind}. Known: {list(KINDS)}")
        if int(self.samples) < 1:
            raise InvalidParameters(f"samples must be >= 1, got {self.samples!r}")
        if not self.amplitude >= 0.0:
            raise InvalidParameters(f"amplitude must be >= 0, got {self.amplitude!r}")
        if not self.t_max > 0.0:
            raise InvalidParameters(f"t_max must be > 0, got {self.t_max!r}")
        if not self.band > 0.0:
            raise InvalidParameters(f"band must be > 0, got {self.band!r}")
        if not 0.0 < self.band_fraction < 1.0:
            raise InvalidParameters(f"band_fraction must lie in (0, 1), got {self.band_fraction!r}")
        if not self.refine_tolerance >= 0.0:
            raise InvalidParameters(f"refine_tolerance must be >= 0, got {self.refine_tolerance!r}")
        if not self.N_values:
            raise InvalidParameters("N_values is empty")
        if not self.s_values:
            raise InvalidParameters("s_values is empty")
        if self.lambdas is not None and any(v <= 0.0 for v in self.lambdas):
            raise InvalidParameters("lambdas must be > 0")

    # ---- module parameter objects ----
    def dispersion(self) -> DispersionParams:
        return DispersionParams(self.alpha, self.beta)

    def grid(self) -> GridSpec:
        return GridSpec(self.L, self.M)

    def solver(self) -> SolverConfig:
        return SolverConfig(
            dt=self.dt,
            T=self.T,
            picard_max_iters=self.picard_max_iters,
            picard_tol=self.picard_tol,
            dealias=self.dealias,
            nonlinear=self.nonlinear,
            s=self.s,
            epsilon=self.epsilon,
            save_every=self.save_every,
        )

    def norm_params(self) -> NormParams:
        return NormParams.for_dispersion(self.dispersion(), s=self.s, epsilon=self.epsilon, b=self.b, s2=self.s2)

    def lattice(self) -> SpaceTimeLattice:
        return SpaceTimeLattice(self.grid(), self.t_window, self.n_t)

    def rough_spec(self) -> RoughDataSpec:
        return RoughDataSpec(
            s=self.s,
            delta=self.delta,
            seed=self.seed,
            profile=self.profile,
            k_max=self.k_max,
            amplitude=self.amplitude,
        )

    def validate(self) -> None:
        """Build every parameter object once so invalid values fail before any computation."""
        self.dispersion()
        self.grid()
        cfg = self.solver()
        _ = cfg.n_steps
        self.norm_params()
        self.lattice()
        self.rough_spec()

    def derived(self) -> Dict[str, float]:
        out = self.norm_params().derived()
        out["a"] = self.dispersion().a
        return out

    def snapshot(self) -> Dict[str, Any]:
        """JSON-ready key/value copy (tuples become lists)."""
        snap = asdict(self)
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in snap.items()}


_COERCERS = {
    "kind": lambda v, n: _coerce_choice(v, n, KINDS),
    "alpha": _coerce_float,
    "beta": _coerce_float,
    "L": _coerce_length,
    "M": _coerce_int,
    "dt": _coerce_float,
    "T": _coerce_float,
    "dealias": _coerce_bool,
    "nonlinear": _coerce_bool,
    "save_every": _coerce_int,
    "s": _coerce_float,
    "b": _coerce_float,
    "epsilon": _coerce_float,
    "s2": _coerce_float,
    "seed": _coerce_int,
    "samples": _coerce_int,
    "initial": lambda v, n: _coerce_choice(v, n, INITIAL_KINDS),
    "amplitude": _coerce_float,
    "k_max": _coerce_float,
    "delta": _coerce_float,
    "profile": lambda v, n: _coerce_choice(v, n, PROFILES),
    "N_values": _coerce_float_list,
    "s_values": _coerce_float_list,
    "lattice_density": _coerce_int,
    "t_max": _coerce_float,
    "t_levels": _coerce_int,
    "lambdas": _coerce_float_list,
    "picard": _coerce_bool,
    "picard_max_iters": _coerce_int,
    "picard_tol": _coerce_float,
    "t_window": _coerce_float,
    "n_t": _coerce_int,
    "band": _coerce_float,
    "band_fraction": _coerce_float,
    "refine_check": _coerce_bool,
    "refine_tolerance": _coerce_float,
}
CONFIG_KEYS = tuple(f.name for f in fields(ExperimentConfig))


def config_from_mapping(raw: Mapping[str, Any], *, kind: Optional[str] = None) -> ExperimentConfig:
    """Coerce a flat mapping into a validated ExperimentConfig; unknown keys are errors."""
    values: Dict[str, Any] = {}
    for key, value in raw.items():
        if key not in _COERCERS:
            raise InvalidParameters(f"unknown config key: {key}")
        if value is None:
            continue
        values[key] = _COERCERS[key](value, key)
    if kind is not None:
        kind = _coerce_choice(kind, "kind", KINDS)
        if "kind" in values and values["kind"] != kind:
            raise InvalidParameters(f"config kind {values['kind']!r} does not match command kind {kind!r}")
        values["kind"] = kind
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def parse_flat_config(text: str) -> Dict[str, Any]:
    """`key = value` per line, `#` comments; values typed with yaml.safe_load."""
    out: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise InvalidParameters(f"line {lineno}: expected `key = value`, got {line.strip()!r}")
        key, _, raw = body.partition("=")
        key = key.strip()
        if not key:
            raise InvalidParameters(f"line {lineno}: missing key")
        if key in out:
            raise InvalidParameters(f"line {lineno}: duplicate key {key}")
        raw = raw.strip()
        try:
            out[key] = yaml.safe_load(raw) if raw else None
        except yaml.YAMLError as e:
            raise InvalidParameters(f"line {lineno}: cannot parse value for {key}: {raw!r}") from e
    return out


def load_config(path: str, *, kind: Optional[str] = None) -> ExperimentConfig:
    """Load a flat key-value (or flat YAML) config and fill defaults."""
    if not os.path.exists(path):
        raise InvalidParameters(f"config not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    if path.endswith((".yaml", ".yml")):
        raw = yaml.safe_load(text) or {}
        if not isinstance(raw, dict):
            raise InvalidParameters("Config YAML must map to a dict at the top level.")
    else:
        raw = parse_flat_config(text)
    return config_from_mapping(raw, kind=kind)


def config_hash(snapshot: Mapping[str, Any]) -> str:
    payload = json.dumps(dict(snapshot), sort_keys=True, separators=(",", ":"))
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:8]


# -------------------------
# CSV artifacts
# -------------------------
def write_csv(df: pd.DataFrame, path: str, *, float_format: str = DATA_FORMAT) -> str:
    """Locale-independent CSV: `.` decimals, `\\n` line endings, UTF-8."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    df.to_csv(path, index=False, float_format=float_format, lineterminator="\n", encoding="utf-8")
    return path


__all__ = [
    "KINDS",
    "INITIAL_KINDS",
    "DATA_FORMAT",
    "SLOPE_FORMAT",
    "ExperimentConfig",
    "CONFIG_KEYS",
    "config_from_mapping",
    "parse_flat_config",
    "load_config",
    "config_hash",
    "write_csv",
]

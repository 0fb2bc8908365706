# src/kawahara_lab/norms.py
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import InvalidInput, InvalidParameters
from .spectral import (
    SQRT_2PI,
    CutoffEta,
    DispersionParams,
    GridSpec,
    SpaceTimeFunction,
    SpaceTimeLattice,
    SpectralField1D,
    bracket,
    phi,
    to_physical_rows,
    to_spectral_rows,
)

logger = logging.getLogger(__name__)

Exponent = Union[int, float, str]
SUPPORTED_EXPONENTS = (2.0, 4.0, 12.0, math.inf)
ORDERS = ("x-outer", "t-outer")
PAD_FACTOR = 2
STABILITY_TOLERANCE = 0.15
MAX_TIME_REFINEMENT = 1024


# -------------------------
# Norm parameters
# -------------------------
@dataclass(frozen=True)
class NormParams:
    """
    Exponents of the bilinear estimates.

      - s:        Sobolev index of the data
      - epsilon:  the small parameter; b' = -1/2 + 2 eps, s1 = 1/2 + 2 eps
      - b:        modulation index (default 1/2 + eps)
      - s2:       input index of the s1/s2 estimate (default -1/2 + eps, never below)
      - D:        high-frequency threshold (>= 4a, checked against a DispersionParams)
    """
    s: float = 0.25
    epsilon: float = 0.1
    b: Optional[float] = None
    s2: Optional[float] = None
    D: float = 4.0

    def __post_init__(self) -> None:
        eps = float(self.epsilon)
        if not (0.0 < eps < 0.25):
            raise InvalidParameters(f"epsilon must lie in (0, 1/4), got {self.epsilon!r}")
        b = 0.5 + eps if self.b is None else float(self.b)
        s2 = -0.5 + eps if self.s2 is None else float(self.s2)
        if not b > 0.0:
            raise InvalidParameters(f"b must be > 0, got {b!r}")
        if s2 < -0.5 + eps - 1e-12:
            raise InvalidParameters(f"s2 must be >= -1/2 + epsilon = {-0.5 + eps:.6g}, got {s2!r}")
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "s2", s2)
        object.__setattr__(self, "D", float(self.D))

    @classmethod
    def for_dispersion(cls, params: DispersionParams, **kwargs: Any) -> "NormParams":
        kwargs.setdefault("D", 4.0 * params.a)
        np_ = cls(**kwargs)
        np_.check_threshold(params)
        return np_

    @property
    def b_prime(self) -> float:
        return -0.5 + 2.0 * self.epsilon

    @property
    def s1(self) -> float:
        return 0.5 + 2.0 * self.epsilon

    def check_threshold(self, params: DispersionParams) -> None:
        if self.D < 4.0 * params.a:
            raise InvalidParameters(f"D must be >= 4a = {4.0 * params.a:.6g}, got {self.D:.6g}")

    def derived(self) -> Dict[str, float]:
        return {"b": float(self.b), "b_prime": self.b_prime, "s1": self.s1, "s2": float(self.s2), "D": self.D}


# -------------------------
# Space-time spectrum
# -------------------------
def time_taper(lattice: SpaceTimeLattice) -> np.ndarray:
    """eta(t / (t_half/2)); equals eta(t) on the default window t_half = 2."""
    return np.asarray(CutoffEta(lattice.t_half / 2.0)(lattice.times))


def _time_phase(lattice: SpaceTimeLattice) -> np.ndarray:
    """dt/sqrt(2 pi) * e^{-i t_0 tau_n} on the padded tau lattice, t_0 the first lattice time."""
    n_pad = PAD_FACTOR * lattice.n_t
    n = np.rint(np.fft.fftfreq(n_pad, d=1.0 / n_pad)).astype(np.int64)
    turns = ((lattice.zero_index * n) % n_pad) / n_pad
    return (lattice.dt / SQRT_2PI) * np.exp(2j * np.pi * turns)


@dataclass(frozen=True, eq=False)
class SpaceTimeSpectrum:
    """
    Fourier transform in (x, t) of a function sampled on a lattice, zero-padded
    to twice the window so that tau_j = (2 pi / T_pad) * j with T_pad = 4 t_half.

    coeffs has shape (M, 2 n_t) and is indexed (k, j) in FFT order on both axes.
    """
    lattice: SpaceTimeLattice
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=np.complex128)
        expected = (self.lattice.grid.points, PAD_FACTOR * self.lattice.n_t)
        if c.shape != expected:
            raise InvalidInput(f"expected spectrum of shape {expected}, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # ---- construction ----
    @classmethod
    def _from_padded_rows(cls, rows: np.ndarray, lattice: SpaceTimeLattice) -> "SpaceTimeSpectrum":
        dft = np.fft.fft(rows, axis=0)
        return cls(lattice, (_time_phase(lattice)[:, None] * dft).T)

    @classmethod
    def from_function(cls, fn: SpaceTimeFunction, *, taper: bool = True) -> "SpaceTimeSpectrum":
        lattice = fn.lattice
        rows = fn.rows * time_taper(lattice)[:, None] if taper else fn.rows
        padded = np.zeros((PAD_FACTOR * lattice.n_t, lattice.grid.points), dtype=np.complex128)
        padded[: lattice.n_t] = rows
        return cls._from_padded_rows(padded, lattice)

    @classmethod
    def from_samples(
        cls, samples: np.ndarray, lattice: SpaceTimeLattice, *, taper: bool = True
    ) -> "SpaceTimeSpectrum":
        arr = np.asarray(samples)
        if arr.shape != lattice.shape:
            raise InvalidInput(f"expected samples of shape {lattice.shape}, got {arr.shape}")
        return cls.from_function(SpaceTimeFunction(lattice, to_spectral_rows(arr, lattice.grid)), taper=taper)

    # ---- lattice ----
    @property
    def grid(self) -> GridSpec:
        return self.lattice.grid

    @property
    def n_pad(self) -> int:
        return PAD_FACTOR * self.lattice.n_t

    @property
    def xi(self) -> np.ndarray:
        return self.grid.xi

    @property
    def dtau(self) -> float:
        return 2.0 * math.pi / (self.n_pad * self.lattice.dt)

    @property
    def tau(self) -> np.ndarray:
        return self.dtau * np.rint(np.fft.fftfreq(self.n_pad, d=1.0 / self.n_pad))

    def sigma(self, params: DispersionParams) -> np.ndarray:
        """Modulation tau + phi(xi), shape (M, n_pad)."""
        return self.tau[None, :] + phi(self.xi, params)[:, None]

    # ---- algebra ----
    def with_coeffs(self, coeffs: np.ndarray) -> "SpaceTimeSpectrum":
        return SpaceTimeSpectrum(self.lattice, coeffs)

    def padded_rows(self) -> np.ndarray:
        """Spatial coefficients per padded time, shape (n_pad, M)."""
        return np.fft.ifft(self.coeffs.T / _time_phase(self.lattice)[:, None], axis=0)

    def padded_samples(self) -> np.ndarray:
        return to_physical_rows(self.padded_rows(), self.grid)

    def multiply(self, other: "SpaceTimeSpectrum") -> "SpaceTimeSpectrum":
        """Spectrum of the pointwise product, formed in physical space-time."""
        if other.lattice != self.lattice:
            raise InvalidInput("spectra live on different lattices")
        product = self.padded_samples() * other.padded_samples()
        return SpaceTimeSpectrum._from_padded_rows(to_spectral_rows(product, self.grid), self.lattice)

    def derivative(self) -> "SpaceTimeSpectrum":
        return self.with_coeffs(self.coeffs * (1j * self.xi)[:, None])

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2) * self.grid.dxi * self.dtau))


# -------------------------
# Sobolev and Bourgain norms
# -------------------------
def sobolev_norm(u: SpectralField1D, s: float) -> float:
    """(sum_k <xi_k>^{2s} |c_k|^2 dxi)^{1/2}."""
    w = bracket(u.grid.xi) ** (2.0 * float(s))
    return float(np.sqrt(np.sum(w * np.abs(u.coeffs) ** 2) * u.grid.dxi))


def xsb_weight(F: SpaceTimeSpectrum, s: float, b: float, params: DispersionParams) -> np.ndarray:
    return (bracket(F.xi) ** (2.0 * float(s)))[:, None] * bracket(F.sigma(params)) ** (2.0 * float(b))


def xsb_norm(F: SpaceTimeSpectrum, s: float, b: float, params: DispersionParams) -> float:
    """(sum <xi>^{2s} <tau + phi(xi)>^{2b} |F|^2 dxi dtau)^{1/2}."""
    w = xsb_weight(F, s, b, params)
    return float(np.sqrt(np.sum(w * np.abs(F.coeffs) ** 2) * F.grid.dxi * F.dtau))


# -------------------------
# Resonance
# -------------------------
def resonance_gap(xi1: Any, xi2: Any, params: DispersionParams) -> Any:
    """5|alpha||xi||xi1||xi2| |xi^2 + xi1^2 - xi xi1 - 3 beta/(5 alpha)|, xi = xi1 + xi2."""
    x1 = np.asarray(xi1, dtype=float)
    x2 = np.asarray(xi2, dtype=float)
    x = x1 + x2
    quad = x * x + x1 * x1 - x * x1 - 3.0 * params.beta / (5.0 * params.alpha)
    out = 5.0 * abs(params.alpha) * np.abs(x) * np.abs(x1) * np.abs(x2) * np.abs(quad)
    return float(out) if out.ndim == 0 else out


def dominant_modulation(xi1: float, tau1: float, xi: float, tau: float, params: DispersionParams) -> str:
    """Which of sigma, sigma1, sigma2 has the largest modulus (first wins on ties)."""
    xi2, tau2 = xi - xi1, tau - tau1
    values = {
        "sigma": abs(tau + phi(xi, params)),
        "sigma1": abs(tau1 + phi(xi1, params)),
        "sigma2": abs(tau2 + phi(xi2, params)),
    }
    return max(values, key=lambda name: values[name])


# -------------------------
# Mixed Lebesgue norms
# -------------------------
def _exponent(p: Exponent, name: str) -> float:
    if isinstance(p, str):
        key = p.strip().lower()
        p = math.inf if key in ("inf", "infinity") else p
    try:
        value = float(p)
    except (TypeError, ValueError) as e:
        raise InvalidInput(f"unsupported {name} exponent {p!r}") from e
    if value not in SUPPORTED_EXPONENTS:
        raise InvalidInput(f"unsupported {name} exponent {p!r}; choose from 2, 4, 12, inf")
    return value


def _lp(values: np.ndarray, weight: Union[float, np.ndarray], p: float, axis: int) -> np.ndarray:
    if math.isinf(p):
        return np.max(values, axis=axis)
    if np.ndim(weight) == 1:
        shape = [1, 1]
        shape[axis] = -1
        weight = np.reshape(weight, shape)
    return np.sum(weight * values**p, axis=axis) ** (1.0 / p)


def mixed_norm(
    u: np.ndarray,
    *,
    dx: float,
    dt: Union[float, np.ndarray],
    spatial: Exponent,
    temporal: Exponent,
    order: str = "x-outer",
) -> float:
    """
    Discrete mixed norm of samples u[t, x] with left-endpoint weights.

    order = "x-outer" computes L^p_x L^q_t (time inside); "t-outer" computes
    L^q_t L^p_x. `dt` is a scalar step or one weight per time row.
    """
    p_x = _exponent(spatial, "spatial")
    p_t = _exponent(temporal, "temporal")
    if order not in ORDERS:
        raise InvalidInput(f"order must be one of {ORDERS}, got {order!r}")
    a = np.abs(np.asarray(u))
    if a.ndim != 2 or a.size == 0:
        raise InvalidInput(f"expected a nonempty 2-D (t, x) array, got shape {a.shape}")
    if np.ndim(dt) == 1 and len(dt) != a.shape[0]:
        raise InvalidInput(f"expected {a.shape[0]} time weights, got {len(dt)}")
    if order == "x-outer":
        inner = _lp(a, dt, p_t, axis=0)
        return float(_lp(inner[None, :], dx, p_x, axis=1)[0])
    inner = _lp(a, dx, p_x, axis=1)
    return float(_lp(inner[:, None], dt, p_t, axis=0)[0])


# -------------------------
# Test samples
# -------------------------
@dataclass(frozen=True, eq=False)
class SpaceTimeSample:
    """
    One member of a test family on a given lattice.

    `function` is untapered; estimates see the tapered function through
    `spectrum` and `tapered_samples`. `initial` is the data of a free wave.
    """
    function: SpaceTimeFunction
    initial: Optional[SpectralField1D] = None

    @property
    def lattice(self) -> SpaceTimeLattice:
        return self.function.lattice

    @cached_property
    def spectrum(self) -> SpaceTimeSpectrum:
        return SpaceTimeSpectrum.from_function(self.function, taper=True)

    @cached_property
    def tapered_samples(self) -> np.ndarray:
        rows = self.function.rows * time_taper(self.lattice)[:, None]
        return to_physical_rows(rows, self.lattice.grid)


# -------------------------
# Estimate ratios
# -------------------------
Member = Callable[[SpaceTimeLattice], Any]
NormFn = Callable[[Any], float]


@dataclass(frozen=True)
class RatioRow:
    sample_id: int
    lhs: float
    rhs: float
    ratio: float
    resolution: int


@dataclass(frozen=True)
class RatioReport:
    """Per-sample ratios at two resolutions and the log2 growth of the max ratio."""
    rows: Tuple[RatioRow, ...]
    max_ratio: float
    slope: float
    skipped: int
    resolutions: Tuple[int, int]
    label: str = ""
    max_by_resolution: Dict[int, float] = field(default_factory=dict)

    COLUMNS = ("sample_id", "lhs", "rhs", "ratio", "resolution")

    def is_stable(self, tolerance: float = STABILITY_TOLERANCE) -> bool:
        """An upper bound survives refinement when the max ratio grows by at most 2^tolerance."""
        return math.isfinite(self.slope) and self.slope <= tolerance

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.__dict__ for r in self.rows], columns=list(self.COLUMNS))


def phase_step(lattice: SpaceTimeLattice, params: DispersionParams, band: float) -> float:
    """dt * max |phi(xi_k)| over the modes with |xi_k| <= band."""
    xi = lattice.grid.xi
    live = np.abs(xi) <= band * (1.0 + 1e-12)
    if not np.any(live):
        return 0.0
    return float(lattice.dt * np.max(np.abs(phi(xi[live], params))))


def resolved_refinement(lattice: SpaceTimeLattice, params: DispersionParams, band_fraction: float) -> SpaceTimeLattice:
    """
    Twice the points in x, and n_t doubled until the phase step over
    band_fraction * max_frequency is no coarser than on `lattice`.

    Families whose band is a fraction of the max frequency reach twice the
    frequency on the refined grid; the time lattice has to follow phi there.
    """
    if not 0.0 < band_fraction <= 1.0:
        raise InvalidParameters(f"band_fraction must lie in (0, 1], got {band_fraction!r}")
    target = phase_step(lattice, params, band_fraction * lattice.grid.max_frequency)
    if target == 0.0:
        return lattice.refined()
    grid = lattice.grid.refined()
    factor = 2
    while factor <= MAX_TIME_REFINEMENT:
        fine = SpaceTimeLattice(grid, lattice.t_half, factor * lattice.n_t)
        if phase_step(fine, params, band_fraction * grid.max_frequency) <= target * (1.0 + 1e-9):
            return fine
        factor *= 2
    raise InvalidParameters(
        f"no time refinement up to {MAX_TIME_REFINEMENT}x keeps the phase step at {target:.3g}"
    )


def _evaluate(member: Member, lattice: SpaceTimeLattice, lhs_norm: NormFn, rhs_norm: NormFn) -> Tuple[float, float]:
    X = member(lattice)
    return float(lhs_norm(X)), float(rhs_norm(X))


def estimate_ratio(
    family: Sequence[Member],
    lhs_norm: NormFn,
    rhs_norm: NormFn,
    *,
    lattice: SpaceTimeLattice,
    fine: Optional[SpaceTimeLattice] = None,
    threads: int = 1,
    label: str = "",
) -> RatioReport:
    """
    lhs/rhs per family member on `lattice` and on `fine` (default `lattice.refined()`).

    A member is a callable lattice -> X; the norms act on X. Members with
    rhs == 0 are skipped and counted. slope = log2(max_fine / max_coarse).
    """
    if len(family) == 0:
        raise InvalidInput("estimate family is empty")
    fine = lattice.refined() if fine is None else fine
    if fine.grid.points <= lattice.grid.points:
        raise InvalidInput(f"fine lattice needs more than {lattice.grid.points} points, got {fine.grid.points}")
    lattices = (lattice, fine)
    tasks = [(r, i) for r in range(2) for i in range(len(family))]
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        futures = {key: pool.submit(_evaluate, family[key[1]], lattices[key[0]], lhs_norm, rhs_norm) for key in tasks}
        results = {key: fut.result() for key, fut in futures.items()}

    rows: List[RatioRow] = []
    skipped = 0
    best: Dict[int, float] = {}
    for r, i in sorted(results):
        lhs, rhs = results[(r, i)]
        M = lattices[r].grid.points
        if rhs == 0.0:
            skipped += 1
            continue
        ratio = lhs / rhs
        rows.append(RatioRow(i, lhs, rhs, ratio, M))
        best[M] = max(best.get(M, -math.inf), ratio)

    coarse, fine = (lat.grid.points for lat in lattices)
    if skipped:
        logger.warning("%s: skipped %d samples with zero rhs", label or "estimate", skipped)
    if coarse in best and fine in best and best[coarse] > 0.0 and best[fine] > 0.0:
        slope = math.log2(best[fine] / best[coarse])
    else:
        slope = math.nan
    max_ratio = max(best.values()) if best else math.nan
    logger.debug("%s: max_ratio=%.6e slope=%.4f", label or "estimate", max_ratio, slope)
    return RatioReport(tuple(rows), max_ratio, slope, skipped, (coarse, fine), label, best)


__all__ = [
    "SUPPORTED_EXPONENTS",
    "NormParams",
    "time_taper",
    "SpaceTimeSpectrum",
    "sobolev_norm",
    "xsb_weight",
    "xsb_norm",
    "resonance_gap",
    "dominant_modulation",
    "mixed_norm",
    "SpaceTimeSample",
    "RatioRow",
    "STABILITY_TOLERANCE",
    "RatioReport",
    "phase_step",
    "resolved_refinement",
    "estimate_ratio",
]

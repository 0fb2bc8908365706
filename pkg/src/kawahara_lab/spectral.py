# src/kawahara_lab/spectral.py
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Union

import numpy as np

from .errors import InvalidInput, InvalidParameters

ArrayLike = Union[float, np.ndarray]

SQRT_2PI = math.sqrt(2.0 * math.pi)


# -------------------------
# Dispersion
# -------------------------
@dataclass(frozen=True)
class DispersionParams:
    """
    Coefficients of u_t + alpha*u_xxxxx + beta*u_xxx + (u^2)_x = 0.

      - alpha: coefficient of the fifth derivative (nonzero)
      - beta:  coefficient of the third derivative
      - a:     derived frequency threshold max{1, (2|3 beta / (5 alpha)|)^(1/2)}
    """
    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self) -> None:
        alpha = float(self.alpha)
        beta = float(self.beta)
        if alpha == 0.0:
            raise InvalidParameters("alpha must be nonzero")
        if not (math.isfinite(alpha) and math.isfinite(beta)):
            raise InvalidParameters(f"alpha and beta must be finite, got {alpha!r}, {beta!r}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def a(self) -> float:
        return threshold_a(self)


def threshold_a(params: DispersionParams) -> float:
    if params.alpha == 0.0:
        raise InvalidParameters("alpha must be nonzero")
    return max(1.0, math.sqrt(2.0 * abs(3.0 * params.beta / (5.0 * params.alpha))))


def phi(xi: ArrayLike, params: DispersionParams) -> ArrayLike:
    """Dispersion relation alpha*xi^5 - beta*xi^3 (odd in xi)."""
    x = np.asarray(xi, dtype=float)
    out = params.alpha * x**5 - params.beta * x**3
    return float(out) if out.ndim == 0 else out


def phi_prime(xi: ArrayLike, params: DispersionParams) -> ArrayLike:
    x = np.asarray(xi, dtype=float)
    out = 5.0 * params.alpha * x**4 - 3.0 * params.beta * x**2
    return float(out) if out.ndim == 0 else out


def bracket(x: ArrayLike) -> ArrayLike:
    """Japanese bracket <x> = (1 + x^2)^(1/2)."""
    v = np.sqrt(1.0 + np.square(np.asarray(x, dtype=float)))
    return float(v) if v.ndim == 0 else v


# -------------------------
# Smooth cutoff
# -------------------------
def _bump(x: np.ndarray) -> np.ndarray:
    r = np.abs(x) - 1.0
    out = np.where(r <= 0.0, 1.0, 0.0)
    glue = (r > 0.0) & (r < 1.0)
    rr = r[glue]
    out[glue] = np.exp(1.0 - 1.0 / (1.0 - rr * rr))
    return out


@dataclass(frozen=True)
class CutoffEta:
    """
    Even C^inf bump: 1 on |x| <= scale, 0 on |x| >= 2*scale,
    exp(1 - 1/(1 - r^2)) with r = |x|/scale - 1 in between.
    """
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not (float(self.scale) > 0.0):
            raise InvalidParameters(f"cutoff scale must be > 0, got {self.scale!r}")

    def __call__(self, x: ArrayLike) -> ArrayLike:
        arr = np.asarray(x, dtype=float)
        out = _bump(np.atleast_1d(arr) / float(self.scale))
        return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


ETA = CutoffEta()


def eta(x: ArrayLike, cutoff: CutoffEta = ETA) -> ArrayLike:
    return cutoff(x)


# -------------------------
# Periodic grid
# -------------------------
@dataclass(frozen=True)
class GridSpec:
    """
    Periodic grid on [-L, L) with M points.

    Coefficient arrays are stored in FFT order: position j holds the mode
    k = fftfreq index (0, 1, ..., M/2-1, -M/2, ..., -1), xi_k = (pi/L)*k.
    """
    half_length: float
    points: int

    def __post_init__(self) -> None:
        L = float(self.half_length)
        if not (math.isfinite(L) and L > 0.0):
            raise InvalidParameters(f"L must be > 0, got {self.half_length!r}")
        M = self.points
        if isinstance(M, bool) or int(M) != M:
            raise InvalidParameters(f"M must be an integer, got {M!r}")
        M = int(M)
        if M < 8 or (M & (M - 1)) != 0:
            raise InvalidParameters(f"M must be a power of two >= 8, got {M}")
        object.__setattr__(self, "half_length", L)
        object.__setattr__(self, "points", M)

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.points

    @property
    def dxi(self) -> float:
        return math.pi / self.half_length

    @property
    def max_frequency(self) -> float:
        """|xi| of the unpaired mode k = -M/2; every retained |xi_k| is <= this."""
        return self.dxi * (self.points // 2)

    @property
    def nyquist_index(self) -> int:
        return self.points // 2

    @cached_property
    def k(self) -> np.ndarray:
        k = np.rint(np.fft.fftfreq(self.points, d=1.0 / self.points)).astype(np.int64)
        k.setflags(write=False)
        return k

    @cached_property
    def xi(self) -> np.ndarray:
        xi = self.dxi * self.k.astype(float)
        xi.setflags(write=False)
        return xi

    @cached_property
    def x(self) -> np.ndarray:
        x = -self.half_length + self.dx * np.arange(self.points)
        x.setflags(write=False)
        return x

    @cached_property
    def sign(self) -> np.ndarray:
        """(-1)^k, the phase e^{i L xi_k} from the left endpoint -L."""
        s = np.where(self.k % 2 == 0, 1.0, -1.0)
        s.setflags(write=False)
        return s

    @cached_property
    def mirror(self) -> np.ndarray:
        """Position of -k for every position k."""
        m = (-np.arange(self.points)) % self.points
        m.setflags(write=False)
        return m

    def index_of(self, k: int) -> int:
        half = self.points // 2
        if not (-half <= int(k) < half):
            raise InvalidInput(f"mode {k} outside [-{half}, {half})")
        return int(k) % self.points

    def refined(self) -> "GridSpec":
        return GridSpec(self.half_length, 2 * self.points)


def _conjugate_symmetric(coeffs: np.ndarray, grid: GridSpec) -> bool:
    """Exact check of c(-k) == conj(c(k)) over paired modes, plus a zero unpaired mode."""
    mirrored = np.conj(coeffs[..., grid.mirror])
    if np.any(coeffs[..., grid.nyquist_index] != 0):
        return False
    return bool(np.array_equal(coeffs, mirrored))


# -------------------------
# Spectral field
# -------------------------
@dataclass(frozen=True, eq=False)
class SpectralField1D:
    """A function on the grid stored as the values of its Fourier transform at xi_k."""
    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.shape != (self.grid.points,):
            raise InvalidInput(
                f"expected {self.grid.points} coefficients, got shape {c.shape}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "SpectralField1D":
        return cls(grid, np.zeros(grid.points, dtype=np.complex128))

    @classmethod
    def single_mode(cls, grid: GridSpec, k: int, amplitude: complex = 1.0) -> "SpectralField1D":
        c = np.zeros(grid.points, dtype=np.complex128)
        c[grid.index_of(k)] = amplitude
        return cls(grid, c)

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField1D":
        return SpectralField1D(self.grid, coeffs)

    def is_real(self) -> bool:
        return _conjugate_symmetric(self.coeffs, self.grid)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2) * self.grid.dxi))

    @property
    def mean_mode(self) -> complex:
        return complex(self.coeffs[0])

    def _check(self, other: "SpectralField1D") -> None:
        if other.grid != self.grid:
            raise InvalidInput("fields live on different grids")

    def __add__(self, other: "SpectralField1D") -> "SpectralField1D":
        self._check(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField1D") -> "SpectralField1D":
        self._check(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __neg__(self) -> "SpectralField1D":
        return self.with_coeffs(-self.coeffs)

    def __mul__(self, scalar: complex) -> "SpectralField1D":
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__


# -------------------------
# Transforms
# -------------------------
def to_spectral_rows(samples: np.ndarray, grid: GridSpec) -> np.ndarray:
    """
    Forward transform along the last axis.

    c_k = dx/sqrt(2 pi) * sum_j e^{-i x_j xi_k} u_j, x_j = -L + j*dx.
    Real input gets exact conjugate symmetry and a zero unpaired mode.
    """
    arr = np.asarray(samples)
    if arr.ndim == 0 or arr.shape[-1] != grid.points:
        raise InvalidInput(
            f"expected {grid.points} samples along the last axis, got shape {arr.shape}"
        )
    M = grid.points
    half = M // 2
    scale = grid.dx / SQRT_2PI
    if np.isrealobj(arr):
        pos = np.fft.rfft(arr.astype(float), axis=-1)
        full = np.empty(arr.shape[:-1] + (M,), dtype=np.complex128)
        full[..., :half] = pos[..., :half]
        full[..., 0] = full[..., 0].real
        full[..., half] = 0.0
        full[..., half + 1:] = np.conj(pos[..., 1:half][..., ::-1])
        return scale * grid.sign * full
    return scale * grid.sign * np.fft.fft(arr.astype(np.complex128), axis=-1)


def to_physical_rows(coeffs: np.ndarray, grid: GridSpec, *, real: Optional[bool] = None) -> np.ndarray:
    """
    Inverse of to_spectral_rows along the last axis.

    Returns real samples when `real` is True, or when it is None and the
    coefficients are conjugate symmetric with a zero unpaired mode.
    """
    c = np.asarray(coeffs, dtype=np.complex128)
    if c.ndim == 0 or c.shape[-1] != grid.points:
        raise InvalidInput(
            f"expected {grid.points} coefficients along the last axis, got shape {c.shape}"
        )
    samples = (grid.dxi / SQRT_2PI) * grid.points * np.fft.ifft(c * grid.sign, axis=-1)
    if real is None:
        real = _conjugate_symmetric(c, grid)
    return np.ascontiguousarray(samples.real) if real else samples


def to_physical(u: SpectralField1D) -> np.ndarray:
    return to_physical_rows(u.coeffs, u.grid)


def to_spectral(samples: np.ndarray, grid: GridSpec) -> SpectralField1D:
    arr = np.asarray(samples)
    if arr.ndim != 1:
        raise InvalidInput(f"expected a 1-D sample array, got shape {arr.shape}")
    return SpectralField1D(grid, to_spectral_rows(arr, grid))


# -------------------------
# Fourier multipliers
# -------------------------
def linear_multiplier(grid: GridSpec, t: float, params: DispersionParams) -> np.ndarray:
    """exp(-i t phi(xi_k)); modulus one, conjugate symmetric in k."""
    return np.exp(-1j * (float(t) * phi(grid.xi, params)))


def propagate(u: SpectralField1D, t: float, params: DispersionParams) -> SpectralField1D:
    """Free Kawahara evolution U(t)u."""
    return u.with_coeffs(u.coeffs * linear_multiplier(u.grid, t, params))


def low_mask(grid: GridSpec, N: float) -> np.ndarray:
    """Modes kept by the low projection; |xi| == N belongs to the low piece."""
    if not (float(N) >= 0.0):
        raise InvalidInput(f"cutoff N must be >= 0, got {N!r}")
    return np.abs(grid.xi) <= float(N)


def project_low(u: SpectralField1D, N: float) -> SpectralField1D:
    return u.with_coeffs(np.where(low_mask(u.grid, N), u.coeffs, 0.0))


def project_high(u: SpectralField1D, N: float) -> SpectralField1D:
    return u.with_coeffs(np.where(low_mask(u.grid, N), 0.0, u.coeffs))


# -------------------------
# Space-time lattice
# -------------------------
@dataclass(frozen=True)
class SpaceTimeLattice:
    """
    Uniform samples of [-L, L) x [-t_half, t_half).

    n_t is even so that t = 0 is a lattice time (index n_t // 2).
    """
    grid: GridSpec
    t_half: float = 2.0
    n_t: int = 512

    def __post_init__(self) -> None:
        if not (math.isfinite(float(self.t_half)) and float(self.t_half) > 0.0):
            raise InvalidParameters(f"t_window must be > 0, got {self.t_half!r}")
        n_t = self.n_t
        if isinstance(n_t, bool) or int(n_t) != n_t or int(n_t) < 2 or int(n_t) % 2:
            raise InvalidParameters(f"n_t must be an even integer >= 2, got {n_t!r}")
        object.__setattr__(self, "t_half", float(self.t_half))
        object.__setattr__(self, "n_t", int(n_t))

    @property
    def dt(self) -> float:
        return 2.0 * self.t_half / self.n_t

    @property
    def zero_index(self) -> int:
        return self.n_t // 2

    @cached_property
    def times(self) -> np.ndarray:
        t = (np.arange(self.n_t) - self.zero_index) * self.dt
        t.setflags(write=False)
        return t

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_t, self.grid.points)

    def refined(self) -> "SpaceTimeLattice":
        """Double both the spatial and the temporal resolution on the same window."""
        return SpaceTimeLattice(self.grid.refined(), self.t_half, 2 * self.n_t)


@dataclass(frozen=True, eq=False)
class SpaceTimeFunction:
    """A function of (x, t): one row of spatial Fourier coefficients per lattice time."""
    lattice: SpaceTimeLattice
    rows: np.ndarray

    def __post_init__(self) -> None:
        r = np.array(self.rows, dtype=np.complex128)
        if r.shape != self.lattice.shape:
            raise InvalidInput(f"expected rows of shape {self.lattice.shape}, got {r.shape}")
        r.setflags(write=False)
        object.__setattr__(self, "rows", r)

    @classmethod
    def zeros(cls, lattice: SpaceTimeLattice) -> "SpaceTimeFunction":
        return cls(lattice, np.zeros(lattice.shape, dtype=np.complex128))

    @classmethod
    def free_wave(
        cls,
        u0: SpectralField1D,
        lattice: SpaceTimeLattice,
        params: DispersionParams,
        *,
        taper: Optional[CutoffEta] = None,
    ) -> "SpaceTimeFunction":
        """U(t)u0 on the lattice, multiplied by taper(t) when given."""
        if u0.grid != lattice.grid:
            raise InvalidInput("initial data and lattice use different grids")
        t = lattice.times[:, None]
        rows = u0.coeffs[None, :] * np.exp(-1j * (t * phi(lattice.grid.xi, params)[None, :]))
        if taper is not None:
            rows = rows * np.asarray(taper(lattice.times))[:, None]
        return cls(lattice, rows)

    def with_rows(self, rows: np.ndarray) -> "SpaceTimeFunction":
        return SpaceTimeFunction(self.lattice, rows)

    def samples(self) -> np.ndarray:
        """Physical values, shape (n_t, M)."""
        return to_physical_rows(self.rows, self.lattice.grid)

    def at(self, j: int) -> SpectralField1D:
        return SpectralField1D(self.lattice.grid, self.rows[j])

    def _check(self, other: "SpaceTimeFunction") -> None:
        if other.lattice != self.lattice:
            raise InvalidInput("space-time functions live on different lattices")

    def __add__(self, other: "SpaceTimeFunction") -> "SpaceTimeFunction":
        self._check(other)
        return self.with_rows(self.rows + other.rows)

    def __sub__(self, other: "SpaceTimeFunction") -> "SpaceTimeFunction":
        self._check(other)
        return self.with_rows(self.rows - other.rows)

    def __mul__(self, scalar: complex) -> "SpaceTimeFunction":
        return self.with_rows(self.rows * scalar)

    __rmul__ = __mul__


__all__ = [
    "SQRT_2PI",
    "DispersionParams",
    "threshold_a",
    "phi",
    "phi_prime",
    "bracket",
    "CutoffEta",
    "ETA",
    "eta",
    "GridSpec",
    "SpectralField1D",
    "to_spectral_rows",
    "to_physical_rows",
    "to_physical",
    "to_spectral",
    "linear_multiplier",
    "propagate",
    "low_mask",
    "project_low",
    "project_high",
    "SpaceTimeLattice",
    "SpaceTimeFunction",
]

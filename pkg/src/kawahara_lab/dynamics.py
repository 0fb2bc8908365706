# src/kawahara_lab/dynamics.py
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import BlowupDetected, InvalidInput, InvalidParameters
from .norms import SpaceTimeSpectrum, sobolev_norm, xsb_norm
from .spectral import (
    ETA,
    SQRT_2PI,
    CutoffEta,
    DispersionParams,
    GridSpec,
    SpaceTimeFunction,
    SpaceTimeLattice,
    SpectralField1D,
    linear_multiplier,
    low_mask,
    phi,
    to_physical_rows,
    to_spectral_rows,
)

logger = logging.getLogger(__name__)


# -------------------------
# Solver configuration
# -------------------------
@dataclass(frozen=True)
class SolverConfig:
    """
    Time stepping and Picard settings.

      - dt, T:               step and horizon; T must be a whole number of steps
      - picard_max_iters:    iteration cap of the Picard driver
      - picard_tol:          stop once ||Phi(u) - u||_{X_{s,b}} <= picard_tol
      - contraction_constant C of the local-existence bound (measured at setup)
      - dealias:             2/3 rule on the quadratic flux
      - nonlinear:           False leaves only the exact linear flow
      - s, epsilon:          X_{s,b} exponents used by the Picard driver, b = 1/2 + epsilon
      - save_every:          store every n-th step; 0 picks about 64 snapshots
    """
    dt: float = 1e-4
    T: float = 0.1
    picard_max_iters: int = 40
    picard_tol: float = 1e-10
    contraction_constant: float = 1.0
    dealias: bool = True
    nonlinear: bool = True
    s: float = 0.25
    epsilon: float = 0.1
    save_every: int = 0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise InvalidParameters(f"dt must be > 0, got {self.dt!r}")
        if not (math.isfinite(self.T) and self.T > 0.0):
            raise InvalidParameters(f"T must be > 0, got {self.T!r}")
        if self.dt > self.T:
            raise InvalidParameters(f"dt must be <= T, got dt={self.dt!r}, T={self.T!r}")
        if int(self.picard_max_iters) < 1:
            raise InvalidParameters("picard_max_iters must be >= 1")
        if not self.picard_tol > 0.0:
            raise InvalidParameters("picard_tol must be > 0")
        if not self.contraction_constant > 0.0:
            raise InvalidParameters("contraction_constant must be > 0")
        if not self.epsilon > 0.0:
            raise InvalidParameters("epsilon must be > 0")
        if int(self.save_every) < 0:
            raise InvalidParameters("save_every must be >= 0")

    @property
    def n_steps(self) -> int:
        n = int(round(self.T / self.dt))
        if abs(n * self.dt - self.T) > 1e-9 * self.T:
            raise InvalidParameters(f"T={self.T!r} is not a whole number of steps dt={self.dt!r}")
        return n

    @property
    def b(self) -> float:
        return 0.5 + self.epsilon


# -------------------------
# Trajectory
# -------------------------
@dataclass(frozen=True, eq=False)
class Trajectory:
    """Stored solver states: coeffs[j] holds the spectral coefficients at times[j]."""
    grid: GridSpec
    times: np.ndarray
    coeffs: np.ndarray
    steps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=np.complex128)
        t = np.array(self.times, dtype=float)
        if c.ndim != 2 or c.shape != (t.shape[0], self.grid.points):
            raise InvalidInput(f"coeffs shape {c.shape} does not match {t.shape[0]} times on M={self.grid.points}")
        if t.size and (t[0] != 0.0 or np.any(np.diff(t) <= 0.0)):
            raise InvalidInput("trajectory times must start at 0 and increase")
        for arr in (c, t):
            arr.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "times", t)

    def __len__(self) -> int:
        return int(self.times.shape[0])

    def state(self, j: int) -> SpectralField1D:
        return SpectralField1D(self.grid, self.coeffs[j])

    @property
    def states(self) -> List[SpectralField1D]:
        return [self.state(j) for j in range(len(self))]

    def physical(self) -> np.ndarray:
        """Samples u(x_i, t_j), shape (n_times, M)."""
        return to_physical_rows(self.coeffs, self.grid)

    def mass(self) -> np.ndarray:
        """Integral of u over the torus per stored time."""
        return SQRT_2PI * self.coeffs[:, 0].real

    def l2_norms(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=1) * self.grid.dxi)

    def time_weights(self) -> np.ndarray:
        """Left-endpoint weights of the stored times (the last time gets the previous gap)."""
        if len(self) < 2:
            return np.ones(len(self))
        gaps = np.diff(self.times)
        return np.append(gaps, gaps[-1])

    def to_frame(self) -> pd.DataFrame:
        """Long table t,k,xi,re,im with modes in increasing k."""
        order = np.argsort(self.grid.k, kind="stable")
        n, M = self.coeffs.shape
        c = self.coeffs[:, order]
        return pd.DataFrame(
            {
                "t": np.repeat(self.times, M),
                "k": np.tile(self.grid.k[order], n),
                "xi": np.tile(self.grid.xi[order], n),
                "re": c.real.ravel(),
                "im": c.imag.ravel(),
            }
        )

    def invariants_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "mass": self.mass(), "l2_norm": self.l2_norms()})


# -------------------------
# Save schedules
# -------------------------
def save_steps(n_steps: int, every: int = 0, *, target: int = 64) -> np.ndarray:
    """Every `every`-th step plus the last one; every = 0 spreads about `target` snapshots."""
    stride = int(every) if every else max(1, n_steps // target)
    steps = set(range(0, n_steps + 1, stride))
    steps.add(n_steps)
    return np.array(sorted(steps), dtype=np.int64)


def dyadic_save_steps(dt: float, t_max: float, levels: int, *, per_window: int = 64) -> np.ndarray:
    """
    Steps covering (0, t_max] so that every window (t_max 2^-(j+1), t_max 2^-j],
    j < levels, holds at least `per_window` samples; (0, t_max 2^-levels] keeps all steps.
    """
    n_steps = int(round(t_max / dt))
    t_min = t_max * 2.0 ** (-levels)
    if t_min < per_window * dt * (1.0 - 1e-9):
        raise InvalidParameters(
            f"dt={dt:.3e} too coarse: need dt <= {t_min / per_window:.3e} "
            f"for {per_window} samples per dyadic window"
        )
    steps = set(range(0, int(math.floor(t_min / dt)) + 1))
    for j in range(levels):
        lo = int(math.floor(t_max * 2.0 ** (-(j + 1)) / dt))
        hi = min(n_steps, int(round(t_max * 2.0 ** (-j) / dt)))
        stride = max(1, (hi - lo) // (2 * per_window))
        steps.update(range(hi, lo, -stride))
    steps.add(n_steps)
    return np.array(sorted(steps), dtype=np.int64)


# -------------------------
# Nonlinear flux
# -------------------------
def dealias_mask(grid: GridSpec) -> np.ndarray:
    """2/3 rule: keep |k| <= M // 3."""
    return np.abs(grid.k) <= grid.points // 3


def _flux_rows(coeffs: np.ndarray, grid: GridSpec, mask: Optional[np.ndarray]) -> np.ndarray:
    c = coeffs if mask is None else np.where(mask, coeffs, 0.0)
    samples = to_physical_rows(c, grid)
    out = (1j * grid.xi) * to_spectral_rows(samples * samples, grid)
    return out if mask is None else np.where(mask, out, 0.0)


def nonlinearity(u: SpectralField1D, *, dealias: bool = True) -> SpectralField1D:
    """Spectral coefficients of (u^2)_x: square in x, differentiate in xi."""
    mask = dealias_mask(u.grid) if dealias else None
    return u.with_coeffs(_flux_rows(u.coeffs, u.grid, mask))


# -------------------------
# Stepping solver
# -------------------------
def phase_resolution(u0: SpectralField1D, cfg: SolverConfig, params: DispersionParams) -> float:
    """dt * max |phi(xi_k)| over the modes carrying data (|c_k| > 1e-12 max |c|)."""
    mag = np.abs(u0.coeffs)
    if mag.max(initial=0.0) == 0.0:
        return 0.0
    live = mag > 1e-12 * mag.max()
    return float(cfg.dt * np.max(np.abs(phi(u0.grid.xi[live], params))))


def _integrate(
    c0: np.ndarray,
    grid: GridSpec,
    cfg: SolverConfig,
    params: DispersionParams,
    *,
    flux_mask: Optional[np.ndarray],
    support: Optional[np.ndarray],
    steps: Optional[Iterable[int]],
) -> Trajectory:
    n_steps = cfg.n_steps
    wanted = save_steps(n_steps, cfg.save_every) if steps is None else np.unique(np.asarray(list(steps), dtype=np.int64))
    if wanted.size == 0 or wanted[0] != 0 or wanted[-1] > n_steps:
        raise InvalidParameters(f"save steps must start at 0 and stay within {n_steps}")
    half = linear_multiplier(grid, 0.5 * cfg.dt, params)
    dt = cfg.dt

    def flux(c: np.ndarray) -> np.ndarray:
        out = -_flux_rows(c, grid, flux_mask)
        return out if support is None else np.where(support, out, 0.0)

    c = np.array(c0, dtype=np.complex128)
    saved = [c.copy()]
    save_set = set(int(s) for s in wanted[1:])
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, n_steps + 1):
            c = half * c
            if cfg.nonlinear:
                k1 = flux(c)
                c = c + dt * flux(c + (0.5 * dt) * k1)
            c = half * c
            if not np.all(np.isfinite(c)):
                raise BlowupDetected(n * dt)
            if n in save_set:
                saved.append(c.copy())
    times = wanted.astype(float) * dt
    return Trajectory(grid, times, np.array(saved), wanted)


def _check_initial(u0: SpectralField1D, cfg: SolverConfig, params: DispersionParams) -> None:
    if not u0.is_real():
        raise InvalidInput("initial data must be conjugate symmetric (real-valued u0)")
    phase = phase_resolution(u0, cfg, params)
    if phase > math.pi:
        logger.warning("dt*max|phi| = %.3g over the data band exceeds pi; expect phase error", phase)


def solve(
    u0: SpectralField1D,
    cfg: SolverConfig,
    params: DispersionParams,
    *,
    steps: Optional[Iterable[int]] = None,
) -> Trajectory:
    """
    Integrating-factor Strang splitting: exact half linear step, midpoint
    step on -(u^2)_x, exact half linear step.
    """
    _check_initial(u0, cfg, params)
    mask = dealias_mask(u0.grid) if cfg.dealias else None
    logger.debug("solve: M=%d dt=%.3e T=%.3e", u0.grid.points, cfg.dt, cfg.T)
    return _integrate(u0.coeffs, u0.grid, cfg, params, flux_mask=mask, support=None, steps=steps)


def solve_truncated(
    u0: SpectralField1D,
    N: float,
    cfg: SolverConfig,
    params: DispersionParams,
    *,
    steps: Optional[Iterable[int]] = None,
) -> Trajectory:
    """Same scheme for u_N: data P_N u0 and flux P_N (u_N^2)_x."""
    _check_initial(u0, cfg, params)
    grid = u0.grid
    keep = low_mask(grid, N)
    support = None if bool(np.all(keep)) else keep
    c0 = u0.coeffs if support is None else np.where(support, u0.coeffs, 0.0)
    mask = dealias_mask(grid) if cfg.dealias else None
    logger.debug("solve_truncated: N=%.4g retained=%d/%d", N, int(keep.sum()), grid.points)
    return _integrate(c0, grid, cfg, params, flux_mask=mask, support=support, steps=steps)


# -------------------------
# Picard iteration
# -------------------------
def picard_map(
    u: SpaceTimeFunction,
    u0: SpectralField1D,
    cfg: SolverConfig,
    params: DispersionParams,
) -> SpaceTimeFunction:
    """
    Phi(u)(t) = eta(t) U(t) u0 - eta(t/T) int_0^t U(t - t') (u^2)_x(t') dt'.

    The integral is a composite trapezoid over the lattice times, accumulated
    from t = 0 in both directions (negative t gives -int_t^0).
    """
    lattice = u.lattice
    if u0.grid != lattice.grid:
        raise InvalidInput("initial data and Picard window use different grids")
    if cfg.T > lattice.t_half / 2.0:
        raise InvalidParameters(f"T={cfg.T!r} must be <= t_window/2 = {lattice.t_half / 2.0!r}")
    grid = lattice.grid
    t = lattice.times[:, None]
    phase = phi(grid.xi, params)[None, :]
    back = np.exp(-1j * (t * phase))
    rows = np.asarray(ETA(lattice.times))[:, None] * back * u0.coeffs[None, :]
    if cfg.nonlinear:
        mask = dealias_mask(grid) if cfg.dealias else None
        G = np.exp(1j * (t * phase)) * _flux_rows(u.rows, grid, mask)
        acc = np.zeros_like(G)
        acc[1:] = np.cumsum(0.5 * lattice.dt * (G[1:] + G[:-1]), axis=0)
        acc = acc - acc[lattice.zero_index]
        window = np.asarray(CutoffEta(cfg.T)(lattice.times))[:, None]
        rows = rows - window * back * acc
    return SpaceTimeFunction(lattice, rows)


@dataclass(frozen=True, eq=False)
class PicardResult:
    """
    X_{s,b} step sizes ||u^{n+1} - u^n|| of the Picard driver.

    ratios[n] = differences[n] / differences[n-1], NaN where either sits
    below the round-off floor (and for the first iteration).
    """
    fixed_point: SpaceTimeFunction
    differences: Tuple[float, ...]
    ratios: Tuple[float, ...]
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.differences)

    @property
    def measured_ratios(self) -> List[float]:
        return [r for r in self.ratios if math.isfinite(r)]

    @property
    def max_ratio(self) -> float:
        measured = self.measured_ratios
        return max(measured) if measured else math.nan

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "iteration": np.arange(1, self.iterations + 1),
                "difference": self.differences,
                "ratio": self.ratios,
            }
        )


def _window_norm(fn: SpaceTimeFunction, s: float, b: float, params: DispersionParams) -> float:
    return xsb_norm(SpaceTimeSpectrum.from_function(fn, taper=False), s, b, params)


def picard_iterate(
    u0: SpectralField1D,
    cfg: SolverConfig,
    params: DispersionParams,
    lattice: SpaceTimeLattice,
    *,
    floor: float = 1e-12,
) -> PicardResult:
    """Iterate Phi from eta(t) U(t) u0 until the X_{s,b} step drops below picard_tol."""
    s, b = cfg.s, cfg.b
    u = SpaceTimeFunction.free_wave(u0, lattice, params, taper=ETA)
    diffs: List[float] = []
    ratios: List[float] = []
    converged = False
    for n in range(int(cfg.picard_max_iters)):
        nxt = picard_map(u, u0, cfg, params)
        d = _window_norm(nxt - u, s, b, params)
        level = floor * _window_norm(nxt, s, b, params)
        if diffs and diffs[-1] > level and d > level:
            ratios.append(d / diffs[-1])
        else:
            ratios.append(math.nan)
        diffs.append(d)
        u = nxt
        logger.debug("picard %d: diff=%.3e", n + 1, d)
        if d <= cfg.picard_tol:
            converged = True
            break
    if not converged:
        logger.warning("Picard iteration stopped after %d steps at diff=%.3e", len(diffs), diffs[-1])
    return PicardResult(u, tuple(diffs), tuple(ratios), converged)


def picard_agreement(result: PicardResult, trajectory: Trajectory, s: float) -> float:
    """H^s distance between the Picard fixed point and the stepping solution at the final stored time."""
    lattice = result.fixed_point.lattice
    t_end = float(trajectory.times[-1])
    j = lattice.zero_index + int(round(t_end / lattice.dt))
    if j >= lattice.n_t or abs(lattice.times[j] - t_end) > 1e-9 * max(t_end, 1.0):
        raise InvalidInput(f"t={t_end!r} is not a time of the Picard window")
    return sobolev_norm(result.fixed_point.at(j) - trajectory.state(len(trajectory) - 1), s)


# -------------------------
# Local existence window
# -------------------------
def measure_linear_constant(
    data: Sequence[SpectralField1D],
    lattice: SpaceTimeLattice,
    s: float,
    b: float,
    params: DispersionParams,
) -> float:
    """Largest measured ||eta(t) U(t) f||_{X_{s,b}} / ||f||_{H^s} over the sample data."""
    best = 0.0
    for f in data:
        rhs = sobolev_norm(f, s)
        if rhs == 0.0:
            continue
        fn = SpaceTimeFunction.free_wave(f, lattice, params, taper=ETA)
        best = max(best, _window_norm(fn, s, b, params) / rhs)
    if best == 0.0:
        raise InvalidInput("no nonzero data to measure the linear constant")
    return best


def local_time_bound(C: float, data_norm: float, epsilon: float) -> float:
    """(1 / (4 C^2 ||u0||_{H^s}))^{2/(3 epsilon)}."""
    if data_norm <= 0.0:
        return math.inf
    log_bound = -(2.0 / (3.0 * epsilon)) * math.log(4.0 * C * C * data_norm)
    return math.exp(log_bound) if log_bound < 700.0 else math.inf


def check_time_window(T: float, bound: float) -> bool:
    ok = T <= bound
    if not ok:
        logger.warning("T=%.4g exceeds the local-existence bound %.4g", T, bound)
    return ok


__all__ = [
    "SolverConfig",
    "Trajectory",
    "save_steps",
    "dyadic_save_steps",
    "dealias_mask",
    "nonlinearity",
    "phase_resolution",
    "solve",
    "solve_truncated",
    "picard_map",
    "PicardResult",
    "picard_iterate",
    "picard_agreement",
    "measure_linear_constant",
    "local_time_bound",
    "check_time_window",
]

# src/kawahara_lab/convergence.py
from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .dynamics import SolverConfig, Trajectory, dyadic_save_steps, solve, solve_truncated
from .errors import InvalidInput, InvalidParameters
from .norms import NormParams, RatioReport, estimate_ratio, mixed_norm, sobolev_norm
from .spectral import (
    DispersionParams,
    GridSpec,
    SpaceTimeFunction,
    SpaceTimeLattice,
    SpectralField1D,
    bracket,
    low_mask,
    phi,
    project_high,
    propagate,
    to_physical,
    to_physical_rows,
)

logger = logging.getLogger(__name__)

PROFILES = ("power-law-random-phase", "deterministic-power-law")
POINTWISE_THRESHOLD = 0.25
DEFAULT_LAMBDA_FRACTIONS = (0.05, 0.1, 0.2, 0.4)


# -------------------------
# Rough data
# -------------------------
@dataclass(frozen=True)
class RoughDataSpec:
    """
    Data c_k = amplitude * <xi_k>^(-s - 1/2 - delta) * e^{i theta_k} on 0 < |xi_k| <= k_max.

      - s:         target regularity (in H^s, not in H^{s + 2 delta} uniformly in k_max)
      - delta:     margin > 0
      - seed:      phase RNG seed
      - profile:   random phases, or all phases 0 (even real data)
      - k_max:     frequency cutoff
      - amplitude: overall scale; also the zero mode
    """
    s: float = 0.25
    delta: float = 0.05
    seed: int = 0
    profile: str = "power-law-random-phase"
    k_max: float = 4.0
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if not self.delta > 0.0:
            raise InvalidParameters(f"delta must be > 0, got {self.delta!r}")
        if self.profile not in PROFILES:
            raise InvalidParameters(f"Unknown profile: {self.profile}. Known: {list(PROFILES)}")
        if not self.k_max > 0.0:
            raise InvalidParameters(f"k_max must be > 0, got {self.k_max!r}")


def rough_data(spec: RoughDataSpec, grid: GridSpec) -> SpectralField1D:
    if spec.k_max > grid.max_frequency:
        raise InvalidParameters(
            f"k_max={spec.k_max:.6g} exceeds the grid's max frequency {grid.max_frequency:.6g}"
        )
    top = min(int(math.floor(spec.k_max / grid.dxi + 1e-9)), grid.points // 2 - 1)
    k = np.arange(1, top + 1)
    if spec.profile == "power-law-random-phase":
        theta = np.random.default_rng(spec.seed).uniform(0.0, 2.0 * math.pi, size=top)
    else:
        theta = np.zeros(top)
    values = spec.amplitude * bracket(k * grid.dxi) ** (-spec.s - 0.5 - spec.delta) * np.exp(1j * theta)
    c = np.zeros(grid.points, dtype=np.complex128)
    c[0] = spec.amplitude
    c[k] = values
    c[grid.points - k] = np.conj(values)
    return SpectralField1D(grid, c)


def rough_family(
    n: int, spec: RoughDataSpec, *, k_fraction: Optional[float] = None
) -> List[Callable[[SpaceTimeLattice], SpectralField1D]]:
    """
    n rough data with seeds spec.seed, spec.seed + 1, ...

    With k_fraction set, k_max is that fraction of each lattice's max frequency
    instead of spec.k_max.
    """
    if k_fraction is not None and not 0.0 < k_fraction <= 1.0:
        raise InvalidParameters(f"k_fraction must lie in (0, 1], got {k_fraction!r}")
    specs = [dataclasses.replace(spec, seed=spec.seed + i) for i in range(n)]

    def member(lattice: SpaceTimeLattice, sp: RoughDataSpec) -> SpectralField1D:
        if k_fraction is not None:
            sp = dataclasses.replace(sp, k_max=k_fraction * lattice.grid.max_frequency)
        return rough_data(sp, lattice.grid)

    return [lambda lattice, sp=sp: member(lattice, sp) for sp in specs]


def default_lambdas(u0: SpectralField1D, fractions: Sequence[float] = DEFAULT_LAMBDA_FRACTIONS) -> Tuple[float, ...]:
    peak = float(np.max(np.abs(to_physical(u0)))) if u0.grid.points else 0.0
    scale = peak if peak > 0.0 else 1.0
    return tuple(f * scale for f in fractions)


# -------------------------
# Shared trajectories
# -------------------------
def _solve_ladder(
    u0: SpectralField1D,
    N_values: Sequence[float],
    cfg: SolverConfig,
    params: DispersionParams,
    steps: np.ndarray,
    threads: int,
) -> Tuple[Trajectory, List[Trajectory]]:
    """Full flow and one truncated flow per N on the same stored steps."""
    jobs: List[Callable[[], Trajectory]] = [lambda: solve(u0, cfg, params, steps=steps)]
    jobs += [lambda N=N: solve_truncated(u0, N, cfg, params, steps=steps) for N in N_values]
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        results = list(pool.map(lambda job: job(), jobs))
    return results[0], results[1:]


def _l4_linf(diff: np.ndarray, dx: float) -> float:
    return mixed_norm(diff, dx=dx, dt=1.0, spatial=4, temporal="inf", order="x-outer")


# -------------------------
# Truncation convergence
# -------------------------
@dataclass(frozen=True)
class TruncationReport:
    """||u - u_N||_{L^4_x L^inf_t} over the stored times, per N."""
    N_values: Tuple[float, ...]
    errors: Tuple[float, ...]

    COLUMNS = ("N", "error")

    def is_monotone(self, tolerance: float = 0.05) -> bool:
        return all(b <= a * (1.0 + tolerance) for a, b in zip(self.errors, self.errors[1:]))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"N": list(self.N_values), "error": list(self.errors)})


def truncation_error(
    u0: SpectralField1D,
    N_values: Sequence[float],
    cfg: SolverConfig,
    params: DispersionParams,
    *,
    steps: Optional[np.ndarray] = None,
    threads: int = 1,
) -> TruncationReport:
    ns = [float(n) for n in N_values]
    if not ns:
        raise InvalidParameters("N_values is empty")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise InvalidParameters(f"N_values must be increasing, got {ns}")
    if steps is None and cfg.save_every == 0:
        steps = np.arange(cfg.n_steps + 1)
    full, truncated = _solve_ladder(u0, ns, cfg, params, steps, threads)
    u = full.physical()
    errors = tuple(_l4_linf(u - tr.physical(), u0.grid.dx) for tr in truncated)
    for N, err in zip(ns, errors):
        logger.debug("truncation N=%.4g error=%.3e", N, err)
    return TruncationReport(tuple(ns), errors)


# -------------------------
# Pointwise convergence
# -------------------------
@dataclass(frozen=True)
class ExceedanceRow:
    t_max: float
    lam: float
    measure: float
    chebyshev_bound: float
    bound_l2: float
    bound_hs: float
    best_N: float


@dataclass(frozen=True)
class ExceedanceReport:
    """
    Measure of {x : sup_{0 < t <= t_max} |u(x,t) - u0(x)| > lambda} and its
    Chebyshev bound, per (t_max, lambda). `exploratory` marks data below s = 1/4.
    """
    rows: Tuple[ExceedanceRow, ...]
    s: float
    exploratory: bool = False

    COLUMNS = ("t_max", "lambda", "measure", "chebyshev_bound")

    @property
    def lambdas(self) -> Tuple[float, ...]:
        return tuple(sorted({r.lam for r in self.rows}))

    @property
    def t_max_values(self) -> Tuple[float, ...]:
        return tuple(sorted({r.t_max for r in self.rows}, reverse=True))

    def measures(self, t_max: float) -> List[float]:
        return [r.measure for r in self.rows if math.isclose(r.t_max, t_max)]

    def violations(self) -> List[ExceedanceRow]:
        return [r for r in self.rows if r.measure > r.chebyshev_bound * (1.0 + 1e-12)]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[r.t_max, r.lam, r.measure, r.chebyshev_bound] for r in self.rows], columns=list(self.COLUMNS)
        )


def _exceedance_rows(
    u0: SpectralField1D,
    full: Trajectory,
    truncated: Sequence[Trajectory],
    N_values: Sequence[float],
    t_max: float,
    lambdas: Sequence[float],
    s: float,
) -> List[ExceedanceRow]:
    grid = u0.grid
    dx = grid.dx
    window = (full.times > 0.0) & (full.times <= t_max * (1.0 + 1e-12))
    if not np.any(window):
        raise InvalidInput(f"no stored times in (0, {t_max!r}]")
    base = to_physical(u0)
    u = full.physical()[window]
    sup_dev = np.max(np.abs(u - base[None, :]), axis=0)

    # per-N norms of the three-way split u - u0 = (u - u_N) + (u_N - P_N u0) - P^N u0
    terms: List[Tuple[float, float, float, float, float]] = []
    for N, tr in zip(N_values, truncated):
        keep = low_mask(grid, N)
        low0 = to_physical_rows(np.where(keep, u0.coeffs, 0.0), grid)
        uN = tr.physical()[window]
        a = _l4_linf(u - uN, dx)
        b = _l4_linf(uN - low0[None, :], dx)
        high0 = project_high(u0, N)
        c_l2 = float(np.sum(np.abs(to_physical(high0)) ** 2) * dx)
        c_hs = sobolev_norm(high0, s) ** 2
        terms.append((N, a, b, c_l2, c_hs))

    rows: List[ExceedanceRow] = []
    for lam in lambdas:
        measure = float(np.count_nonzero(sup_dev > lam) * dx)
        q4, q2 = (3.0 / lam) ** 4, (3.0 / lam) ** 2
        l2 = [(q4 * (a**4 + b**4) + q2 * c_l2, N) for N, a, b, c_l2, _ in terms]
        hs = [(q4 * (a**4 + b**4) + q2 * c_hs, N) for N, a, b, _, c_hs in terms]
        bound_l2, best_N = min(l2)
        bound_hs = min(hs)[0]
        bound = min(bound_l2, bound_hs) if s >= 0.0 else bound_l2
        rows.append(ExceedanceRow(float(t_max), float(lam), measure, bound, bound_l2, bound_hs, best_N))
    return rows


def pointwise_ladder(
    u0: SpectralField1D,
    t_max: float,
    levels: int,
    lambdas: Optional[Sequence[float]],
    cfg: SolverConfig,
    params: DispersionParams,
    *,
    s: float = 0.25,
    N_values: Sequence[float] = (1.0, 2.0, 4.0, 8.0),
    per_window: int = 64,
    threads: int = 1,
) -> ExceedanceReport:
    """Exceedance measures for t_max 2^-j, j = 0..levels-1, from one pair of solves."""
    if int(levels) < 1:
        raise InvalidParameters(f"t_levels must be >= 1, got {levels!r}")
    if t_max > cfg.T * (1.0 + 1e-12):
        raise InvalidParameters(f"t_max={t_max!r} exceeds the solved window T={cfg.T!r}")
    if not N_values:
        raise InvalidParameters("N_values is empty")
    exploratory = s < POINTWISE_THRESHOLD
    if exploratory:
        logger.warning("s=%.3g is below 1/4: exploratory pointwise run", s)
    lams = tuple(default_lambdas(u0) if lambdas is None else (float(v) for v in lambdas))
    if any(v <= 0.0 for v in lams):
        raise InvalidParameters("lambdas must be > 0")
    lams = tuple(sorted(lams))
    run_cfg = dataclasses.replace(cfg, T=t_max)
    steps = dyadic_save_steps(cfg.dt, t_max, int(levels) - 1, per_window=per_window)
    full, truncated = _solve_ladder(u0, N_values, run_cfg, params, steps, threads)
    t_values = [t_max * 2.0 ** (-j) for j in range(int(levels))]
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        per_t = list(
            pool.map(lambda tm: _exceedance_rows(u0, full, truncated, N_values, tm, lams, s), t_values)
        )
    rows = tuple(r for block in per_t for r in block)
    report = ExceedanceReport(rows, float(s), exploratory)
    if report.violations():
        logger.warning("%d exceedance measures exceed their Chebyshev bound", len(report.violations()))
    return report


def pointwise_experiment(
    u0: SpectralField1D,
    t_max: float,
    lambdas: Optional[Sequence[float]],
    cfg: SolverConfig,
    params: DispersionParams,
    *,
    s: float = 0.25,
    N_values: Sequence[float] = (1.0, 2.0, 4.0, 8.0),
    threads: int = 1,
) -> ExceedanceReport:
    """Single-t_max exceedance report; every step up to t_max is stored."""
    return pointwise_ladder(
        u0, t_max, 1, lambdas, cfg, params, s=s, N_values=N_values, per_window=1, threads=threads
    )


# -------------------------
# Uniform convergence
# -------------------------
SMALL_TIME_PHASE = 0.5
REFINEMENT_TOLERANCE = 0.1


def small_time_limit(u0: SpectralField1D, params: DispersionParams, *, dealias: bool = True) -> float:
    """
    SMALL_TIME_PHASE / max |phi| over the band of (u0^2)_x.

    Below this time the Duhamel term u - U(t)u0 grows linearly in t; above it
    the flux has rotated through a sizeable phase and the growth saturates.
    """
    grid = u0.grid
    mag = np.abs(u0.coeffs)
    if mag.max(initial=0.0) == 0.0:
        return math.inf
    top = float(np.max(np.abs(grid.xi[mag > 1e-12 * mag.max()])))
    band = min(2.0 * top, grid.max_frequency)
    if dealias:
        band = min(band, grid.dxi * (grid.points // 3))
    xi = grid.xi[np.abs(grid.xi) <= band * (1.0 + 1e-12)]
    peak = float(np.max(np.abs(phi(xi, params))))
    return SMALL_TIME_PHASE / peak if peak > 0.0 else math.inf


@dataclass(frozen=True)
class UniformReport:
    """
    sup_x |u(x,t) - U(t)u0(x)| per ladder time.

    `slope` is the log-log slope in t over the positive times below
    `small_time`, or over every positive time when fewer than two lie there.
    """
    times: Tuple[float, ...]
    sup_diff: Tuple[float, ...]
    slope: float
    small_time: float = math.inf
    fitted: int = 0

    COLUMNS = ("t", "sup_diff")

    @property
    def terminal(self) -> float:
        positive = [d for t, d in zip(self.times, self.sup_diff) if t > 0.0]
        return positive[-1] if positive else 0.0

    def is_decreasing(self) -> bool:
        return all(b <= a for a, b in zip(self.sup_diff, self.sup_diff[1:]))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": list(self.times), "sup_diff": list(self.sup_diff)})


def _ladder_steps(t_ladder: Sequence[float], dt: float) -> Tuple[List[float], np.ndarray]:
    ts = [float(t) for t in t_ladder]
    if not ts:
        raise InvalidParameters("t ladder is empty")
    if any(t < 0.0 for t in ts) or any(b >= a for a, b in zip(ts, ts[1:])):
        raise InvalidParameters(f"t ladder must be decreasing and >= 0, got {ts}")
    steps = []
    for t in ts:
        n = int(round(t / dt))
        if abs(n * dt - t) > 1e-9 * max(t, dt):
            raise InvalidParameters(f"ladder time {t!r} is not a multiple of dt={dt!r}")
        steps.append(n)
    return ts, np.array(sorted(set(steps) | {0}), dtype=np.int64)


def _sup_differences(
    u0: SpectralField1D, traj: Trajectory, ts: Sequence[float], dt: float, params: DispersionParams
) -> List[float]:
    by_step: Dict[int, int] = {int(s): j for j, s in enumerate(traj.steps)}
    out: List[float] = []
    for t in ts:
        j = by_step[int(round(t / dt))]
        free = propagate(u0, traj.times[j], params)
        diff = to_physical(traj.state(j) - free)
        out.append(float(np.max(np.abs(diff))))
    return out


def _loglog_slope(ts: Sequence[float], values: Sequence[float]) -> float:
    pts = [(math.log(t), math.log(v)) for t, v in zip(ts, values) if t > 0.0 and v > 0.0]
    if len(pts) < 2:
        return math.nan
    x, y = zip(*pts)
    return float(np.polyfit(x, y, 1)[0])


def uniform_experiment(
    u0: SpectralField1D,
    t_ladder: Sequence[float],
    cfg: SolverConfig,
    params: DispersionParams,
) -> UniformReport:
    ts, steps = _ladder_steps(t_ladder, cfg.dt)
    if steps[-1] > cfg.n_steps:
        raise InvalidParameters(f"ladder time {max(ts)!r} exceeds T={cfg.T!r}")
    run_cfg = dataclasses.replace(cfg, T=int(steps[-1]) * cfg.dt) if steps[-1] > 0 else cfg
    traj = solve(u0, run_cfg, params, steps=steps if steps[-1] > 0 else None)
    sups = _sup_differences(u0, traj, ts, cfg.dt, params)

    limit = small_time_limit(u0, params, dealias=cfg.dealias)
    inside = [(t, d) for t, d in zip(ts, sups) if 0.0 < t <= limit * (1.0 + 1e-12)]
    if len(inside) >= 2:
        fit_t, fit_d = zip(*inside)
    else:
        logger.warning("uniform: %d ladder times below the small-time limit %.3e; fitting all", len(inside), limit)
        fit_t, fit_d = ts, sups
    fitted = sum(1 for t, d in zip(fit_t, fit_d) if t > 0.0 and d > 0.0)
    report = UniformReport(tuple(ts), tuple(sups), _loglog_slope(fit_t, fit_d), limit, fitted)
    logger.debug("uniform: slope=%.3f over %d times, terminal=%.3e", report.slope, fitted, report.terminal)
    return report


def refine_field(u: SpectralField1D) -> SpectralField1D:
    """The same function on the grid with twice the points (same L, zero new modes)."""
    fine = u.grid.refined()
    k = u.grid.k
    c = np.zeros(fine.points, dtype=np.complex128)
    c[np.where(k >= 0, k, fine.points + k)] = u.coeffs
    return SpectralField1D(fine, c)


@dataclass(frozen=True)
class RefinementCheck:
    """Largest relative change of sup_diff between M and 2M over the positive ladder times."""
    points: int
    gap: float
    tolerance: float = REFINEMENT_TOLERANCE

    COLUMNS = ("M", "gap", "tolerance", "passed")

    @property
    def passed(self) -> bool:
        return self.gap <= self.tolerance

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([[self.points, self.gap, self.tolerance, int(self.passed)]], columns=list(self.COLUMNS))


def uniform_refinement_gap(
    u0: SpectralField1D,
    t_ladder: Sequence[float],
    cfg: SolverConfig,
    params: DispersionParams,
    *,
    tolerance: float = REFINEMENT_TOLERANCE,
) -> RefinementCheck:
    coarse = uniform_experiment(u0, t_ladder, cfg, params)
    fine = uniform_experiment(refine_field(u0), t_ladder, cfg, params)
    gaps = [abs(a - b) / b for t, a, b in zip(coarse.times, coarse.sup_diff, fine.sup_diff) if t > 0.0 and b > 0.0]
    check = RefinementCheck(u0.grid.points, max(gaps) if gaps else 0.0, float(tolerance))
    if not check.passed:
        logger.warning("sup-x refinement gap %.3f exceeds %.3g", check.gap, check.tolerance)
    return check


# -------------------------
# Maximal function estimate
# -------------------------
def maximal_norm(u0: SpectralField1D, lattice: SpaceTimeLattice, params: DispersionParams) -> float:
    """||U(t) u0||_{L^4_x L^inf_t} over the lattice times."""
    samples = SpaceTimeFunction.free_wave(u0, lattice, params).samples()
    return mixed_norm(samples, dx=lattice.grid.dx, dt=lattice.dt, spatial=4, temporal="inf", order="x-outer")


def maximal_check(
    family: Sequence[Callable[[SpaceTimeLattice], SpectralField1D]],
    norm_params: NormParams,
    *,
    params: DispersionParams,
    lattice: SpaceTimeLattice,
    fine: Optional[SpaceTimeLattice] = None,
    threads: int = 1,
) -> RatioReport:
    if norm_params.s < POINTWISE_THRESHOLD - 1e-12:
        raise InvalidParameters(f"maximal estimate needs s >= 1/4, got {norm_params.s:.6g}")
    s = norm_params.s
    paired = [lambda lat, m=m: (m(lat), lat) for m in family]
    return estimate_ratio(
        paired,
        lambda item: maximal_norm(item[0], item[1], params),
        lambda item: sobolev_norm(item[0], s),
        lattice=lattice,
        fine=fine,
        threads=threads,
        label="maximal",
    )


__all__ = [
    "PROFILES",
    "RoughDataSpec",
    "rough_data",
    "rough_family",
    "default_lambdas",
    "TruncationReport",
    "truncation_error",
    "ExceedanceRow",
    "ExceedanceReport",
    "pointwise_ladder",
    "pointwise_experiment",
    "SMALL_TIME_PHASE",
    "REFINEMENT_TOLERANCE",
    "small_time_limit",
    "UniformReport",
    "uniform_experiment",
    "refine_field",
    "RefinementCheck",
    "uniform_refinement_gap",
    "maximal_norm",
    "maximal_check",
]

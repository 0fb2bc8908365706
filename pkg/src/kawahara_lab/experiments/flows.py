# src/kawahara_lab/experiments/flows.py
from __future__ import annotations

import dataclasses
import logging
import math
from typing import List

import pandas as pd

from ..convergence import (
    pointwise_ladder,
    small_time_limit,
    truncation_error,
    uniform_experiment,
    uniform_refinement_gap,
)
from ..dynamics import (
    check_time_window,
    dyadic_save_steps,
    local_time_bound,
    measure_linear_constant,
    picard_agreement,
    picard_iterate,
    solve,
)
from ..errors import InvalidParameters, ResolutionError
from ..io import ExperimentConfig
from ..norms import sobolev_norm
from .base import Artifacts, initial_data

logger = logging.getLogger(__name__)


def _check_data_band(cfg: ExperimentConfig) -> None:
    if cfg.initial == "rough" and cfg.k_max > cfg.grid().max_frequency:
        raise InvalidParameters(f"k_max={cfg.k_max:.6g} exceeds the grid's max frequency {cfg.grid().max_frequency:.6g}")
    if cfg.initial == "bump" and cfg.band >= cfg.grid().max_frequency:
        raise InvalidParameters(f"band={cfg.band:.6g} must be below the grid's max frequency {cfg.grid().max_frequency:.6g}")


# -------------------------
# solve
# -------------------------
class SolveExperiment:
    """Trajectory and invariants of the stepping solver, optionally checked against Picard iteration."""
    name = "solve"

    def validate(self, cfg: ExperimentConfig) -> None:
        _check_data_band(cfg)
        if cfg.picard:
            lattice = cfg.lattice()
            if cfg.T > lattice.t_half / 2.0:
                raise InvalidParameters(f"picard needs T <= t_window/2 = {lattice.t_half / 2.0:.6g}")
            steps = cfg.T / lattice.dt
            if abs(steps - round(steps)) > 1e-9 * max(steps, 1.0):
                raise InvalidParameters(f"picard needs T to be a multiple of the window step {lattice.dt:.6g}")

    def run(self, cfg: ExperimentConfig, out: Artifacts, *, threads: int = 1) -> None:
        params = cfg.dispersion()
        solver = cfg.solver()
        u0 = initial_data(cfg)
        traj = solve(u0, solver, params)
        out.csv("trajectory.csv", traj.to_frame())
        out.csv("invariants.csv", traj.invariants_frame())
        if not cfg.picard:
            return

        lattice = cfg.lattice()
        data_norm = sobolev_norm(u0, solver.s)
        if data_norm > 0.0:
            C = measure_linear_constant([u0], lattice, solver.s, solver.b, params)
        else:
            C = solver.contraction_constant
        bound = local_time_bound(C, data_norm, solver.epsilon)
        window_ok = check_time_window(solver.T, bound)
        result = picard_iterate(u0, dataclasses.replace(solver, contraction_constant=C), params, lattice)
        agreement = picard_agreement(result, traj, solver.s)
        out.csv("picard.csv", result.to_frame())
        summary = pd.DataFrame(
            {
                "contraction_constant": [C],
                "time_bound": [bound],
                "window_ok": [int(window_ok)],
                "converged": [int(result.converged)],
                "max_ratio": [result.max_ratio],
                "agreement": [agreement],
            }
        )
        out.csv("picard_summary.csv", summary)
        logger.info("picard: %d iterations, max ratio %.3g, H^s agreement %.3e", result.iterations, result.max_ratio, agreement)


# -------------------------
# truncate
# -------------------------
class TruncateExperiment:
    """||u - u_N||_{L^4_x L^inf_t} along the N ladder."""
    name = "truncate"

    def validate(self, cfg: ExperimentConfig) -> None:
        _check_data_band(cfg)
        ns = list(cfg.N_values)
        if any(b <= a for a, b in zip(ns, ns[1:])) or ns[0] < 0.0:
            raise InvalidParameters(f"N_values must be increasing and >= 0, got {ns}")

    def run(self, cfg: ExperimentConfig, out: Artifacts, *, threads: int = 1) -> None:
        report = truncation_error(initial_data(cfg), cfg.N_values, cfg.solver(), cfg.dispersion(), threads=threads)
        out.csv("truncation.csv", report.to_frame())
        if not report.is_monotone():
            logger.warning("truncation errors are not monotone within 5%%")


# -------------------------
# converge-pointwise
# -------------------------
class PointwiseExperiment:
    """Exceedance measures of sup_t |u - u0| on a dyadic t_max ladder."""
    name = "converge-pointwise"

    def validate(self, cfg: ExperimentConfig) -> None:
        _check_data_band(cfg)
        if cfg.t_max > cfg.T * (1.0 + 1e-12):
            raise InvalidParameters(f"t_max={cfg.t_max!r} exceeds T={cfg.T!r}")
        if cfg.t_levels < 1:
            raise InvalidParameters(f"t_levels must be >= 1, got {cfg.t_levels!r}")
        dyadic_save_steps(cfg.dt, cfg.t_max, cfg.t_levels - 1)
        _ = dataclasses.replace(cfg.solver(), T=cfg.t_max).n_steps

    def run(self, cfg: ExperimentConfig, out: Artifacts, *, threads: int = 1) -> None:
        report = pointwise_ladder(
            initial_data(cfg),
            cfg.t_max,
            cfg.t_levels,
            cfg.lambdas,
            cfg.solver(),
            cfg.dispersion(),
            s=cfg.s,
            N_values=cfg.N_values,
            threads=threads,
        )
        out.csv("pointwise.csv", report.to_frame())
        if report.exploratory:
            logger.warning("pointwise results at s=%.3g are exploratory (below 1/4)", cfg.s)


# -------------------------
# converge-uniform
# -------------------------
def uniform_ladder(cfg: ExperimentConfig) -> List[float]:
    """t_max 2^-j, j < t_levels, snapped to the step grid, then t = 0."""
    steps = sorted({int(round(cfg.t_max * 2.0 ** (-j) / cfg.dt)) for j in range(cfg.t_levels)}, reverse=True)
    return [n * cfg.dt for n in steps if n > 0] + [0.0]


class UniformExperiment:
    """sup_x |u(t) - U(t)u0| along a decreasing t ladder."""
    name = "converge-uniform"

    def validate(self, cfg: ExperimentConfig) -> None:
        _check_data_band(cfg)
        if cfg.t_max > cfg.T * (1.0 + 1e-12):
            raise InvalidParameters(f"t_max={cfg.t_max!r} exceeds T={cfg.T!r}")
        if cfg.t_levels < 2:
            raise InvalidParameters(f"t_levels must be >= 2, got {cfg.t_levels!r}")
        ladder = uniform_ladder(cfg)
        if len(ladder) < 3:
            raise InvalidParameters(f"dt={cfg.dt!r} is too coarse for the t ladder")
        limit = small_time_limit(initial_data(cfg), cfg.dispersion(), dealias=cfg.dealias)
        inside = [t for t in ladder if 0.0 < t <= limit * (1.0 + 1e-12)]
        if len(inside) < 2:
            raise InvalidParameters(
                f"{len(inside)} ladder times lie below the small-time limit {limit:.3e}; lower t_max or k_max"
            )

    def run(self, cfg: ExperimentConfig, out: Artifacts, *, threads: int = 1) -> None:
        u0 = initial_data(cfg)
        ladder = uniform_ladder(cfg)
        report = uniform_experiment(u0, ladder, cfg.solver(), cfg.dispersion())
        out.csv("uniform.csv", report.to_frame())
        logger.info("uniform: slope %.3f, terminal %.3e", report.slope, report.terminal)
        if math.isfinite(report.slope) and report.slope < 0.8:
            logger.warning("uniform decay slope %.3f is below 0.8", report.slope)
        if cfg.refine_check:
            check = uniform_refinement_gap(
                u0, ladder, cfg.solver(), cfg.dispersion(), tolerance=cfg.refine_tolerance
            )
            out.csv("refinement.csv", check.to_frame())
            if not check.passed:
                raise ResolutionError(
                    f"sup-x refinement gap {check.gap:.3f} exceeds {check.tolerance:.3g} "
                    f"between M={cfg.M} and M={2 * cfg.M}"
                )


__all__ = ["SolveExperiment", "TruncateExperiment", "PointwiseExperiment", "UniformExperiment", "uniform_ladder"]

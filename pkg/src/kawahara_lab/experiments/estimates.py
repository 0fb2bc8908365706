# src/kawahara_lab/experiments/estimates.py
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, List, Sequence

import numpy as np
import pandas as pd

from ..bilinear import ESTIMATES, check_ladder, counterexample_pair, estimate_indices, sharpness_scan, verify_estimate
from ..convergence import maximal_check, rough_family
from ..errors import InvalidParameters
from ..families import free_wave_family, free_wave_pair_family, traveling_bump_family
from ..io import SLOPE_FORMAT, ExperimentConfig
from ..norms import (
    NormParams,
    RatioReport,
    SpaceTimeSample,
    estimate_ratio,
    mixed_norm,
    phase_step,
    resolved_refinement,
    sobolev_norm,
    time_taper,
    xsb_norm,
)
from ..spectral import DispersionParams, SpaceTimeFunction, SpaceTimeLattice, low_mask, to_physical_rows
from .base import Artifacts

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("estimate", "max_ratio", "slope", "skipped", "stable")
MAX_PHASE_STEP = math.pi / 4.0


def _summary(reports: Sequence[RatioReport]) -> pd.DataFrame:
    return pd.DataFrame(
        [[r.label, r.max_ratio, r.slope, r.skipped, int(r.is_stable())] for r in reports],
        columns=list(SUMMARY_COLUMNS),
    )


def _write_reports(out: Artifacts, reports: Sequence[RatioReport]) -> None:
    for report in reports:
        out.csv(f"ratios_{report.label}.csv", report.to_frame())
        if report.skipped:
            logger.warning("%s: %d zero samples skipped", report.label, report.skipped)
        if not report.is_stable():
            logger.warning("%s: max ratio grows under refinement (slope %.3f)", report.label, report.slope)
    out.csv("summary.csv", _summary(reports))


def _check_band(cfg: ExperimentConfig, limit: float = 1.0) -> None:
    """band_fraction below `limit`, and a time lattice that resolves phi on the band."""
    if cfg.band_fraction >= limit:
        raise InvalidParameters(f"band_fraction={cfg.band_fraction:.6g} must be below {limit:.6g}")
    lattice = cfg.lattice()
    band = cfg.band_fraction * lattice.grid.max_frequency
    step = phase_step(lattice, cfg.dispersion(), band)
    if step > MAX_PHASE_STEP:
        raise InvalidParameters(
            f"phase step {step:.3g} on |xi| <= {band:.6g} exceeds {MAX_PHASE_STEP:.3g}; raise n_t"
        )
    resolved_refinement(lattice, cfg.dispersion(), cfg.band_fraction)


def _fine_lattice(cfg: ExperimentConfig) -> SpaceTimeLattice:
    return resolved_refinement(cfg.lattice(), cfg.dispersion(), cfg.band_fraction)


# -------------------------
# verify-bilinear
# -------------------------
class VerifyBilinearExperiment:
    """Two-resolution ratios of both bilinear estimates over random free-wave pairs."""
    name = "verify-bilinear"

    def validate(self, cfg: ExperimentConfig) -> None:
        _check_band(cfg, 0.5)
        np_ = cfg.norm_params()
        for estimate in ESTIMATES:
            estimate_indices(estimate, np_)

    def run(self, cfg: ExperimentConfig, out: Artifacts, *, threads: int = 1) -> None:
        params = cfg.dispersion()
        family = free_wave_pair_family(cfg.samples, params, seed=cfg.seed, band=cfg.band_fraction, relative=True)
        lattice, fine = cfg.lattice(), _fine_lattice(cfg)
        reports = [
            verify_estimate(
                estimate, family, cfg.norm_params(), params=params, lattice=lattice, fine=fine, threads=threads
            )
            for estimate in ESTIMATES
        ]
        _write_reports(out, reports)


# -------------------------
# counterexample
# -------------------------
class CounterexampleExperiment:
    """Blow-up exponent of the strip-pair ratio against N, per s."""
    name = "counterexample"

    def validate(self, cfg: ExperimentConfig) -> None:
        check_ladder(cfg.N_values)
        cfg.norm_params()
        counterexample_pair(cfg.N_values[0], cfg.dispersion(), cfg.lattice_density)

    def run(self, cfg: ExperimentConfig, out: Artifacts, *, threads: int = 1) -> None:
        table = sharpness_scan(
            cfg.s_values,
            cfg.N_values,
            cfg.norm_params(),
            cfg.dispersion(),
            lattice_density=cfg.lattice_density,
            threads=threads,
        )
        out.csv("slopes.csv", table.to_frame(), float_format=SLOPE_FORMAT)
        out.csv("ratios.csv", table.ratios_frame())
        if table.noisy_count:
            logger.warning("%d of %d slope fits are noisy", table.noisy_count, len(table.rows))


# -------------------------
# strichartz-check catalog
# -------------------------
Member = Callable[[SpaceTimeLattice], Any]


@dataclass(frozen=True)
class CatalogEntry:
    """A linear estimate lhs(X) <= C rhs(X) over a family of members X."""
    name: str
    family: Sequence[Member]
    lhs: Callable[[Any], float]
    rhs: Callable[[Any], float]


def _tapered_rows(sample: SpaceTimeSample) -> np.ndarray:
    return sample.function.rows * time_taper(sample.lattice)[:, None]


def _samples_of(sample: SpaceTimeSample, D: float, power: float = 0.0) -> np.ndarray:
    """Physical samples of |D_x|^power P^D applied to the tapered function."""
    grid = sample.lattice.grid
    rows = np.where(low_mask(grid, D), 0.0, _tapered_rows(sample))
    if power:
        rows = rows * np.abs(grid.xi) ** power
    return to_physical_rows(rows, grid)


def _mixed(values: np.ndarray, lattice: SpaceTimeLattice, spatial: Any, temporal: Any, order: str) -> float:
    return mixed_norm(values, dx=lattice.grid.dx, dt=lattice.dt, spatial=spatial, temporal=temporal, order=order)


def _free_high_samples(item: Any, params: DispersionParams, D: float) -> np.ndarray:
    f, lattice = item
    rows = SpaceTimeFunction.free_wave(f, lattice, params).rows
    return to_physical_rows(np.where(low_mask(lattice.grid, D), 0.0, rows), lattice.grid)


def _space_time_family(cfg: ExperimentConfig, params: DispersionParams) -> List[Member]:
    waves = cfg.samples - cfg.samples // 2
    band = cfg.band_fraction
    return list(free_wave_family(waves, params, seed=cfg.seed, band=band, relative=True)) + list(
        traveling_bump_family(cfg.samples // 2, seed=cfg.seed + 1, band=band, relative=True)
    )


def rough_data_family(cfg: ExperimentConfig) -> List[Callable[[SpaceTimeLattice], Any]]:
    """cfg.samples rough data at regularity s, cut off at band_fraction of each grid's max frequency."""
    return rough_family(cfg.samples, cfg.rough_spec(), k_fraction=cfg.band_fraction)


def estimate_catalog(cfg: ExperimentConfig, norm_params: NormParams, params: DispersionParams) -> List[CatalogEntry]:
    s = norm_params.s
    b = float(norm_params.b)
    D = norm_params.D
    eps = norm_params.epsilon
    waves = free_wave_family(cfg.samples, params, seed=cfg.seed, band=cfg.band_fraction, relative=True)
    mixed = _space_time_family(cfg, params)
    data = [lambda lat, m=m: (m(lat), lat) for m in rough_data_family(cfg)]

    return [
        CatalogEntry(
            "linear-xsb",
            waves,
            lambda x: xsb_norm(x.spectrum, s, 0.5 + eps, params),
            lambda x: sobolev_norm(x.initial, s),
        ),
        CatalogEntry(
            "high-l4l2",
            mixed,
            lambda x: _mixed(_samples_of(x, D), x.lattice, 2, 4, "t-outer"),
            lambda x: xsb_norm(x.spectrum, 0.0, 0.5 * b, params),
        ),
        CatalogEntry(
            "high-smoothing-l4linf",
            mixed,
            lambda x: _mixed(_samples_of(x, D, 0.75), x.lattice, "inf", 4, "t-outer"),
            lambda x: xsb_norm(x.spectrum, 0.0, b, params),
        ),
        CatalogEntry(
            "l12",
            mixed,
            lambda x: _mixed(x.tapered_samples, x.lattice, 12, 12, "x-outer"),
            lambda x: xsb_norm(x.spectrum, 0.0, b, params),
        ),
        CatalogEntry(
            "l4",
            mixed,
            lambda x: _mixed(x.tapered_samples, x.lattice, 4, 4, "x-outer"),
            lambda x: xsb_norm(x.spectrum, 0.0, 0.6 * b, params),
        ),
        CatalogEntry(
            "high-maximal",
            data,
            lambda x: _mixed(_free_high_samples(x, params, D), x[1], 4, "inf", "x-outer"),
            lambda x: sobolev_norm(x[0], 0.25),
        ),
        CatalogEntry(
            "high-l4-smoothing",
            mixed,
            lambda x: _mixed(_samples_of(x, D, 0.375), x.lattice, 4, 4, "x-outer"),
            lambda x: xsb_norm(x.spectrum, 0.0, b, params),
        ),
        CatalogEntry(
            "xsb-maximal",
            mixed,
            lambda x: _mixed(x.tapered_samples, x.lattice, 4, "inf", "x-outer"),
            lambda x: xsb_norm(x.spectrum, s, b, params),
        ),
    ]


class StrichartzCheckExperiment:
    """Every linear estimate of the catalog plus the maximal-function check, at two resolutions."""
    name = "strichartz-check"

    def validate(self, cfg: ExperimentConfig) -> None:
        _check_band(cfg)
        np_ = cfg.norm_params()
        if np_.s < 0.25:
            raise InvalidParameters(f"strichartz-check needs s >= 1/4, got {np_.s:.6g}")
        band = cfg.band_fraction * cfg.grid().max_frequency
        if not band > np_.D:
            raise InvalidParameters(
                f"band_fraction * max frequency = {band:.6g} must exceed D={np_.D:.6g} for the high-frequency estimates"
            )

    def run(self, cfg: ExperimentConfig, out: Artifacts, *, threads: int = 1) -> None:
        params = cfg.dispersion()
        np_ = cfg.norm_params()
        lattice, fine = cfg.lattice(), _fine_lattice(cfg)
        reports: List[RatioReport] = []
        for entry in estimate_catalog(cfg, np_, params):
            reports.append(
                estimate_ratio(
                    entry.family, entry.lhs, entry.rhs, lattice=lattice, fine=fine, threads=threads, label=entry.name
                )
            )
        reports.append(
            maximal_check(rough_data_family(cfg), np_, params=params, lattice=lattice, fine=fine, threads=threads)
        )
        _write_reports(out, reports)


__all__ = [
    "VerifyBilinearExperiment",
    "CounterexampleExperiment",
    "CatalogEntry",
    "rough_data_family",
    "estimate_catalog",
    "StrichartzCheckExperiment",
]

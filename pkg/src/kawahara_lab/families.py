# src/kawahara_lab/families.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from .errors import InvalidParameters
from .norms import SpaceTimeSample
from .spectral import (
    CutoffEta,
    DispersionParams,
    GridSpec,
    SpaceTimeFunction,
    SpaceTimeLattice,
    SpectralField1D,
)

# Members are built per lattice from parameters drawn once. With an absolute
# band the coarse and refined lattices see the same function; with a relative
# band the spectrum stretches to the same fraction of each grid's max frequency.


# -------------------------
# Band-limited bumps
# -------------------------
@dataclass(frozen=True)
class BumpSet:
    """
    Sum of translated bumps a_i psi(x - x_i - v_i t), psi with spectrum eta(2 xi / band).

    With `relative` set, band is a fraction of the grid's max frequency.
    """
    centers: Tuple[float, ...]
    amplitudes: Tuple[float, ...]
    velocities: Tuple[float, ...] = ()
    band: float = 2.0
    relative: bool = False

    def band_on(self, grid: GridSpec) -> float:
        if self.relative:
            if not (0.0 < self.band < 1.0):
                raise InvalidParameters(f"relative band must lie in (0, 1), got {self.band!r}")
            return self.band * grid.max_frequency
        if not (0.0 < self.band < grid.max_frequency):
            raise InvalidParameters(
                f"band must lie in (0, {grid.max_frequency:.6g}) for M={grid.points}, got {self.band!r}"
            )
        return self.band

    def _envelope(self, grid: GridSpec) -> np.ndarray:
        return np.asarray(CutoffEta(self.band_on(grid) / 2.0)(grid.xi))

    def field(self, grid: GridSpec) -> SpectralField1D:
        env = self._envelope(grid)
        c = np.zeros(grid.points, dtype=np.complex128)
        for x0, a in zip(self.centers, self.amplitudes):
            c += a * np.exp(-1j * (x0 * grid.xi))
        c = c * env
        # exact conjugate symmetry, so the field counts as real data
        return SpectralField1D(grid, 0.5 * (c + np.conj(c[grid.mirror])))

    def moving(self, lattice: SpaceTimeLattice) -> SpaceTimeFunction:
        grid = lattice.grid
        env = self._envelope(grid)
        t = lattice.times[:, None]
        rows = np.zeros(lattice.shape, dtype=np.complex128)
        velocities = self.velocities or (0.0,) * len(self.centers)
        for x0, a, v in zip(self.centers, self.amplitudes, velocities):
            rows += a * np.exp(-1j * ((x0 + v * t) * grid.xi[None, :]))
        return SpaceTimeFunction(lattice, rows * env[None, :])


def random_bumps(
    rng: np.random.Generator,
    *,
    count: int = 3,
    spread: float = 4.0,
    band: float = 2.0,
    speed: float = 0.0,
    relative: bool = False,
) -> BumpSet:
    centers = tuple(float(v) for v in rng.uniform(-spread, spread, size=count))
    amplitudes = tuple(float(v) for v in rng.uniform(-1.0, 1.0, size=count))
    velocities = tuple(float(v) for v in rng.uniform(-speed, speed, size=count)) if speed else ()
    return BumpSet(centers, amplitudes, velocities, band, relative)


# -------------------------
# Families
# -------------------------
DataMember = Callable[[SpaceTimeLattice], SpectralField1D]
SampleMember = Callable[[SpaceTimeLattice], SpaceTimeSample]
PairMember = Callable[[SpaceTimeLattice], Tuple[SpaceTimeSample, SpaceTimeSample]]


def _free_wave(bumps: BumpSet, params: DispersionParams) -> SampleMember:
    def member(lattice: SpaceTimeLattice) -> SpaceTimeSample:
        f = bumps.field(lattice.grid)
        return SpaceTimeSample(SpaceTimeFunction.free_wave(f, lattice, params), f)

    return member


def _traveling(bumps: BumpSet) -> SampleMember:
    def member(lattice: SpaceTimeLattice) -> SpaceTimeSample:
        return SpaceTimeSample(bumps.moving(lattice))

    return member


def _data(bumps: BumpSet) -> DataMember:
    def member(lattice: SpaceTimeLattice) -> SpectralField1D:
        return bumps.field(lattice.grid)

    return member


def bump_data_family(
    n: int,
    *,
    seed: int = 0,
    band: float = 2.0,
    count: int = 3,
    spread: float = 4.0,
    relative: bool = False,
) -> List[DataMember]:
    rng = np.random.default_rng(seed)
    return [_data(random_bumps(rng, count=count, spread=spread, band=band, relative=relative)) for _ in range(n)]


def free_wave_family(
    n: int,
    params: DispersionParams,
    *,
    seed: int = 0,
    band: float = 2.0,
    count: int = 3,
    spread: float = 4.0,
    relative: bool = False,
) -> List[SampleMember]:
    """Free waves U(t) f of random bump data f."""
    rng = np.random.default_rng(seed)
    return [
        _free_wave(random_bumps(rng, count=count, spread=spread, band=band, relative=relative), params)
        for _ in range(n)
    ]


def traveling_bump_family(
    n: int,
    *,
    seed: int = 0,
    band: float = 2.0,
    count: int = 3,
    spread: float = 4.0,
    speed: float = 2.0,
    relative: bool = False,
) -> List[SampleMember]:
    """Bumps translating at random speeds: space-time functions off the dispersion surface."""
    rng = np.random.default_rng(seed)
    return [
        _traveling(random_bumps(rng, count=count, spread=spread, band=band, speed=speed, relative=relative))
        for _ in range(n)
    ]


def free_wave_pair_family(
    n: int,
    params: DispersionParams,
    *,
    seed: int = 0,
    band: float = 2.0,
    count: int = 3,
    spread: float = 4.0,
    relative: bool = False,
) -> List[PairMember]:
    rng = np.random.default_rng(seed)
    members: List[PairMember] = []
    for _ in range(n):
        first = _free_wave(random_bumps(rng, count=count, spread=spread, band=band, relative=relative), params)
        second = _free_wave(random_bumps(rng, count=count, spread=spread, band=band, relative=relative), params)
        members.append(lambda lattice, f=first, g=second: (f(lattice), g(lattice)))
    return members


__all__ = [
    "BumpSet",
    "random_bumps",
    "bump_data_family",
    "free_wave_family",
    "traveling_bump_family",
    "free_wave_pair_family",
]

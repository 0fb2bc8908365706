# src/kawahara_lab/experiments/base.py
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import List, Protocol

import pandas as pd

from ..convergence import rough_data
from ..families import BumpSet
from ..io import DATA_FORMAT, ExperimentConfig, write_csv
from ..spectral import SpectralField1D


class Experiment(Protocol):
    """
    One experiment kind of the command line.

      - validate(cfg): check every module precondition the run will hit; raise
        InvalidParameters before any computation
      - run(cfg, out, threads=...): compute and write CSVs through `out`
    """
    name: str

    def validate(self, cfg: ExperimentConfig) -> None:
        ...

    def run(self, cfg: ExperimentConfig, out: "Artifacts", *, threads: int = 1) -> None:
        ...


@dataclass
class Artifacts:
    """Writes CSV artifacts under `root` and remembers their relative paths in write order."""
    root: str
    paths: List[str] = field(default_factory=list)

    def csv(self, name: str, df: pd.DataFrame, *, float_format: str = DATA_FORMAT) -> str:
        path = os.path.join(self.root, name)
        write_csv(df, path, float_format=float_format)
        self.add(path)
        return path

    def add(self, path: str) -> None:
        rel = os.path.relpath(path, self.root)
        if rel not in self.paths:
            self.paths.append(rel)


def initial_data(cfg: ExperimentConfig) -> SpectralField1D:
    """u0 of the flow kinds: zero, one centred band-limited bump scaled by `amplitude`, or rough data."""
    grid = cfg.grid()
    if cfg.initial == "zero":
        return SpectralField1D.zeros(grid)
    if cfg.initial == "bump":
        return BumpSet((0.0,), (cfg.amplitude,), band=cfg.band).field(grid)
    return rough_data(cfg.rough_spec(), grid)


__all__ = ["Experiment", "Artifacts", "initial_data"]

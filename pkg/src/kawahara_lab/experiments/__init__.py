# src/kawahara_lab/experiments/__init__.py
from __future__ import annotations

from typing import Dict

from ..io import KINDS
from .base import Artifacts, Experiment, initial_data
from .estimates import CounterexampleExperiment, StrichartzCheckExperiment, VerifyBilinearExperiment
from .flows import PointwiseExperiment, SolveExperiment, TruncateExperiment, UniformExperiment


REGISTRY: Dict[str, type] = {
    "solve": SolveExperiment,
    "truncate": TruncateExperiment,
    "converge-pointwise": PointwiseExperiment,
    "converge-uniform": UniformExperiment,
    "verify-bilinear": VerifyBilinearExperiment,
    "counterexample": CounterexampleExperiment,
    "strichartz-check": StrichartzCheckExperiment,
}
assert set(REGISTRY) == set(KINDS), "experiment registry out of sync with config kinds"


def make_experiment(kind: str) -> Experiment:
    key = kind.lower()
    if key not in REGISTRY:
        raise ValueError(f"Unknown experiment kind: {kind}. Known: {list(REGISTRY)}")
    return REGISTRY[key]()


__all__ = ["REGISTRY", "make_experiment", "Experiment", "Artifacts", "initial_data"]

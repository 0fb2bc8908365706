# src/kawahara_lab/runtime/session.py
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from ..errors import KawaharaLabError
from ..experiments import Artifacts, make_experiment
from ..io import ExperimentConfig, config_hash
from ..plotting import plot_kind_for, emit_plot

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass
class RunManifest:
    """
    Record of one run: id, config snapshot, derived exponents, artifacts and status.

    status is "completed" or "failed"; `reason` carries the failure message.
    """
    run_id: str
    kind: str
    config: Dict[str, Any]
    derived: Dict[str, float]
    artifacts: List[str] = field(default_factory=list)
    status: str = "completed"
    reason: Optional[str] = None
    wall_time: float = 0.0
    threads: int = 1

    @property
    def ok(self) -> bool:
        return self.status == "completed"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "run_id": self.run_id,
            "kind": self.kind,
            "status": self.status,
            "reason": self.reason,
            "wall_time": self.wall_time,
            "threads": self.threads,
            "config": self.config,
            "derived": self.derived,
            "artifacts": list(self.artifacts),
        }

    def write(self, out_dir: str) -> str:
        path = os.path.join(out_dir, MANIFEST_NAME)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=False)
            f.write("\n")
        return path


class RunSession:
    """
    Thin adapter between the command line and the experiment registry:
    validate, run, collect artifacts (and plots), write the manifest.
    """

    def __init__(self, config: ExperimentConfig, out_dir: str, *, threads: int = 1, plots: bool = False):
        self.config = config
        self.out_dir = out_dir
        self.threads = max(1, int(threads))
        self.plots = bool(plots)
        self.experiment = make_experiment(config.kind)

    def validate(self) -> None:
        self.config.validate()
        self.experiment.validate(self.config)

    def _new_manifest(self) -> RunManifest:
        snap = self.config.snapshot()
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
        return RunManifest(
            run_id=f"{stamp}-{config_hash(snap)}",
            kind=self.config.kind,
            config=snap,
            derived=self.config.derived(),
            threads=self.threads,
        )

    def run(self) -> RunManifest:
        """Run the experiment; module errors give a failed manifest and keep partial artifacts."""
        os.makedirs(self.out_dir, exist_ok=True)
        manifest = self._new_manifest()
        out = Artifacts(self.out_dir)
        t0 = time.perf_counter()
        logger.info("run %s: kind=%s threads=%d", manifest.run_id, manifest.kind, self.threads)
        try:
            self.experiment.run(self.config, out, threads=self.threads)
            if self.plots:
                self._emit_plots(out)
        except (KawaharaLabError, ArithmeticError, MemoryError) as e:
            manifest.status = "failed"
            manifest.reason = f"{e.__class__.__name__}: {e}"
            logger.error("run %s failed: %s", manifest.run_id, manifest.reason)
        manifest.wall_time = time.perf_counter() - t0
        manifest.artifacts = list(out.paths)
        manifest.write(self.out_dir)
        return manifest

    def _emit_plots(self, out: Artifacts) -> None:
        for rel in list(out.paths):
            kind = plot_kind_for(os.path.join(self.out_dir, rel))
            if kind is not None:
                out.add(emit_plot(os.path.join(self.out_dir, rel), kind))


__all__ = ["MANIFEST_NAME", "RunManifest", "RunSession"]

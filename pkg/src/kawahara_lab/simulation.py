# src/kawahara_lab/simulation.py
from __future__ import annotations

import argparse
import logging
import os
from typing import List, Optional

from .errors import InvalidInput, InvalidParameters
from .io import KINDS, ExperimentConfig, load_config
from .runtime import RunManifest, RunSession

logger = logging.getLogger(__name__)

THREADS_ENV = "KAWAHARA_LAB_THREADS"

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILED = 2


def resolve_threads(flag: Optional[int]) -> int:
    """--threads, else $KAWAHARA_LAB_THREADS, else 1."""
    if flag is not None:
        value = flag
    else:
        raw = os.environ.get(THREADS_ENV, "").strip()
        if not raw:
            return 1
        try:
            value = int(raw)
        except ValueError as e:
            raise InvalidParameters(f"{THREADS_ENV} must be an int, got {raw!r}") from e
    if value < 1:
        raise InvalidParameters(f"threads must be >= 1, got {value}")
    return value


def run(config: ExperimentConfig, out_dir: str, *, threads: int = 1, plots: bool = False) -> RunManifest:
    """Validate, dispatch to the experiment kind and write the manifest."""
    session = RunSession(config, out_dir, threads=threads, plots=plots)
    session.validate()
    return session.run()


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kawahara-lab",
        description="Pseudospectral experiments for the periodic Kawahara equation.",
    )
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--config", required=True, type=str, help="Flat key = value config (or flat YAML)")
    parser.add_argument("--out", required=True, type=str, help="Output directory for CSVs and the manifest")
    parser.add_argument("--threads", type=int, default=None, help=f"Worker threads (default ${THREADS_ENV} or 1)")
    parser.add_argument("--plots", action="store_true", help="Also render SVG plots next to the CSVs")
    parser.add_argument("--debug", action="store_true", help="DEBUG logging")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.debug else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        threads = resolve_threads(args.threads)
        cfg = load_config(args.config, kind=args.kind)
        session = RunSession(cfg, args.out, threads=threads, plots=args.plots)
        session.validate()
    except (InvalidParameters, InvalidInput) as e:
        logger.error("invalid run: %s", e)
        return EXIT_INVALID

    manifest = session.run()
    print(f"{manifest.status}: {manifest.kind} -> {os.path.abspath(args.out)} ({len(manifest.artifacts)} artifacts)")
    if not manifest.ok:
        print(f"reason: {manifest.reason}")
        return EXIT_FAILED
    return EXIT_OK


__all__ = ["THREADS_ENV", "resolve_threads", "run", "main"]


if __name__ == "__main__":
    raise SystemExit(main())

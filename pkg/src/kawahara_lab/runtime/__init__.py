# src/kawahara_lab/runtime/__init__.py
from __future__ import annotations

"""
Re-export run types so callers can do:

    from kawahara_lab.runtime import RunSession, RunManifest
"""

from .session import MANIFEST_NAME, RunManifest, RunSession

__all__ = ["MANIFEST_NAME", "RunManifest", "RunSession"]

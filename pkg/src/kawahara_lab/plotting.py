# src/kawahara_lab/plotting.py
from __future__ import annotations

import logging
import math
import os
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .errors import InvalidInput, SchemaError
from .spectral import GridSpec, to_physical_rows

logger = logging.getLogger(__name__)

# Accepted headers per plot kind
SCHEMAS: Dict[str, Tuple[Tuple[str, ...], ...]] = {
    "loglog-slope": (("s", "N", "ratio", "ratio_constant"),),
    "ladder-decay": (
        ("t", "sup_diff"),
        ("N", "error"),
        ("t_max", "lambda", "measure", "chebyshev_bound"),
    ),
    "field-snapshot": (("t", "k", "xi", "re", "im"),),
}


def _header(path: str) -> List[str]:
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline().strip()
    return first.split(",") if first else []


def plot_kind_for(csv_path: str) -> Optional[str]:
    """The plot kind whose schema matches the CSV header, if any."""
    header = tuple(_header(csv_path))
    for kind, schemas in SCHEMAS.items():
        if header in schemas:
            return kind
    return None


def _load(csv_path: str, kind: str) -> pd.DataFrame:
    if kind not in SCHEMAS:
        raise InvalidInput(f"Unknown plot kind: {kind}. Known: {list(SCHEMAS)}")
    if not os.path.exists(csv_path):
        raise InvalidInput(f"CSV not found: {csv_path}")
    header = _header(csv_path)
    expected = SCHEMAS[kind]
    if tuple(header) not in expected:
        raise SchemaError(csv_path, [",".join(e) for e in expected], header)
    df = pd.read_csv(csv_path)
    if df.empty:
        raise InvalidInput(f"{csv_path}: no rows")
    return df


# -------------------------
# Panels
# -------------------------
def _loglog_panels(fig: Figure, df: pd.DataFrame) -> None:
    groups = list(df.groupby("s", sort=True))
    cols = min(3, len(groups))
    rows = int(math.ceil(len(groups) / cols))
    for i, (s, g) in enumerate(groups, start=1):
        ax = fig.add_subplot(rows, cols, i)
        ax.loglog(g["N"], g["ratio"], "o-", label="lattice")
        ax.loglog(g["N"], g["ratio_constant"], "--", label="frozen weights")
        ax.set_title(f"s = {s:g}")
        ax.set_xlabel("N")
        ax.set_ylabel("ratio")
        ax.grid(True, which="both", alpha=0.3)
    fig.axes[0].legend(loc="best")


def _ladder_panel(fig: Figure, df: pd.DataFrame) -> None:
    ax = fig.add_subplot(1, 1, 1)
    if "sup_diff" in df.columns:
        d = df[df["t"] > 0.0]
        ax.loglog(d["t"], d["sup_diff"], "o-")
        ax.set_xlabel("t")
        ax.set_ylabel("sup_x |u - U(t)u0|")
    elif "error" in df.columns:
        d = df[df["error"] > 0.0]
        ax.loglog(d["N"], d["error"], "o-")
        ax.set_xlabel("N")
        ax.set_ylabel("||u - u_N||")
    else:
        for lam, g in df.groupby("lambda", sort=True):
            line = ax.loglog(g["t_max"], g["measure"].clip(lower=1e-300), "o-", label=f"λ = {lam:.3g}")
            ax.loglog(g["t_max"], g["chebyshev_bound"], ":", color=line[0].get_color())
        ax.set_xlabel("t_max")
        ax.set_ylabel("exceedance measure")
        ax.legend(loc="best")
    ax.grid(True, which="both", alpha=0.3)


def _field_panel(fig: Figure, df: pd.DataFrame) -> None:
    times = np.unique(df["t"].to_numpy())
    M = int(df.shape[0] // times.size)
    xi = df["xi"].to_numpy()[:M]
    k = df["k"].to_numpy()[:M].astype(np.int64)
    dxi = float(np.min(np.diff(np.sort(xi)))) if M > 1 else 1.0
    grid = GridSpec(math.pi / dxi, M)
    coeffs = np.zeros((times.size, M), dtype=np.complex128)
    c = (df["re"].to_numpy() + 1j * df["im"].to_numpy()).reshape(times.size, M)
    coeffs[:, np.mod(k, M)] = c
    u = np.abs(to_physical_rows(coeffs, grid))
    ax = fig.add_subplot(1, 1, 1)
    mesh = ax.pcolormesh(grid.x, times, u, shading="auto")
    fig.colorbar(mesh, ax=ax, label="|u|")
    ax.set_xlabel("x")
    ax.set_ylabel("t")


_PANELS = {
    "loglog-slope": _loglog_panels,
    "ladder-decay": _ladder_panel,
    "field-snapshot": _field_panel,
}


def emit_plot(csv_path: str, kind: str) -> str:
    """Render `csv_path` as an SVG next to it; returns the image path."""
    df = _load(csv_path, kind)
    fig = Figure(figsize=(7.5, 5.2), dpi=100)
    FigureCanvasAgg(fig)
    _PANELS[kind](fig, df)
    fig.tight_layout()
    out = os.path.splitext(csv_path)[0] + ".svg"
    fig.savefig(out, format="svg", metadata={"Date": None})
    logger.debug("wrote %s", out)
    return out


__all__ = ["SCHEMAS", "plot_kind_for", "emit_plot"]

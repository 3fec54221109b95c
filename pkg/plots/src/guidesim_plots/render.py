"""Renderers for the three plot kinds.

Inputs are the CSV files written by the simulator CLI; each renderer
validates the expected schema and writes one image.  All plotting is
headless (Agg backend).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("att_compare", "kernel_heatmap", "sweep_surface")


class SchemaError(ValueError):
    """Input CSV does not match the plot kind's expected columns."""


@dataclass(frozen=True)
class PlotJob:
    input_path: str
    output_path: str
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(
                f"unknown plot kind {self.kind!r}; expected one of {KINDS}"
            )


def _read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SchemaError(f"{path}: empty file")
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    if not rows:
        raise SchemaError(f"{path}: no data rows below the header")
    return header, rows


def _require(header: list[str], column: str, path: str) -> int:
    try:
        return header.index(column)
    except ValueError:
        raise SchemaError(f"{path}: missing required column {column!r}")


def _floats(rows: list[list[str]], index: int) -> np.ndarray:
    return np.array([float(row[index]) for row in rows])


def render(job: PlotJob) -> None:
    """Render one image; raises SchemaError on malformed input."""
    header, rows = _read_csv(job.input_path)
    if job.kind == "att_compare":
        _render_att_compare(header, rows, job)
    elif job.kind == "kernel_heatmap":
        _render_kernel_heatmap(header, rows, job)
    else:
        _render_sweep_surface(header, rows, job)


def _render_att_compare(header, rows, job: PlotJob) -> None:
    step_idx = _require(header, "step", job.input_path)
    labels = [col for i, col in enumerate(header) if i != step_idx]
    if not labels:
        raise SchemaError(f"{job.input_path}: no run columns besides 'step'")
    steps = _floats(rows, step_idx)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for label in labels:
        ax.plot(steps, _floats(rows, header.index(label)), label=label, lw=1.2)
    ax.set_xlabel("step")
    ax.set_ylabel("windowed average travel time")
    ax.legend()
    ax.grid(True, alpha=0.3)
    _save(fig, job.output_path)


def _render_kernel_heatmap(header, rows, job: PlotJob) -> None:
    xi = _require(header, "x", job.input_path)
    ti = _require(header, "t", job.input_path)
    pi = _require(header, "p", job.input_path)
    xs = _floats(rows, xi)
    ts = _floats(rows, ti)
    ps = _floats(rows, pi)
    ux = np.unique(xs)
    ut = np.unique(ts)
    grid = np.full((ux.size, ut.size), math.nan)
    x_pos = {v: i for i, v in enumerate(ux)}
    t_pos = {v: i for i, v in enumerate(ut)}
    for x, t, p in zip(xs, ts, ps):
        grid[x_pos[x], t_pos[t]] = p
    fig, ax = plt.subplots(figsize=(6, 5))
    mesh = ax.pcolormesh(ut, ux, grid, shading="nearest", vmin=0.0, vmax=1.0,
                         cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="influence weight p")
    ax.set_xlabel("age (steps)")
    ax.set_ylabel("distance from origin")
    _save(fig, job.output_path)


def _render_sweep_surface(header, rows, job: PlotJob) -> None:
    att_idx = _require(header, "mean_att", job.input_path)
    known = {"mean_att", "std_att", "mean_oscillation"}
    params = [col for col in header if col not in known]
    if len(params) < 2:
        raise SchemaError(
            f"{job.input_path}: sweep surface needs two parameter columns, "
            f"found {params}"
        )
    a = _floats(rows, header.index(params[0]))
    b = _floats(rows, header.index(params[1]))
    eta = _floats(rows, att_idx)
    fig, ax = plt.subplots(figsize=(6, 5))
    scatter = ax.scatter(a, b, c=eta, s=120, cmap="viridis", edgecolors="k")
    fig.colorbar(scatter, ax=ax, label="mean ATT")
    ax.set_xlabel(params[0])
    ax.set_ylabel(params[1])
    _save(fig, job.output_path)


def _save(fig, path: str) -> None:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=120)
    plt.close(fig)

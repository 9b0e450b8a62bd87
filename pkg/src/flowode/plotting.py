"""Deterministic SVG rendering of planar trajectories.

Renders straight to a figure object on the SVG canvas, never through the
pyplot state machine, and pins every source of nondeterminism in the
output: a fixed hash salt for element ids and no date metadata. Rerunning
with identical inputs must reproduce the file byte for byte.
"""

from __future__ import annotations

import re
from pathlib import Path

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .integrate import Trajectory
from .measure import DiscreteMeasure

_HASHSALT = "flowode"

_ID_REF = re.compile(r'id="([^"]+)"|url\(#([^)]+)\)|href="#([^"]+)"')


def _canonicalize_ids(text: str) -> str:
    """Rename every element id to its first-appearance index.

    The SVG backend derives clip-path ids from live object identity, so
    two figures alive at once can name the same clip box differently.
    Draw order is deterministic, so indexing ids by first appearance pins
    the bytes regardless of interpreter memory layout.
    """
    mapping = {}

    def swap(match):
        old = match.group(1) or match.group(2) or match.group(3)
        new = mapping.setdefault(old, f"e{len(mapping)}")
        if match.group(1) is not None:
            return f'id="{new}"'
        if match.group(2) is not None:
            return f"url(#{new})"
        return f'href="#{new}"'

    return _ID_REF.sub(swap, text)


def render_trajectory_svg(measure: DiscreteMeasure, trajectory: Trajectory, path) -> None:
    """Draw the data cloud and one trajectory into an SVG file.

    Planar data only. Atoms are drawn as filled dots scaled by weight,
    the node polyline on top of them, the start as an open circle and the
    terminal snap (when present) as a star.
    """
    if measure.d != 2 or trajectory.d != 2:
        raise ValueError("SVG rendering requires planar data")
    fig = Figure(figsize=(6.0, 6.0))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot(111)
    w = measure.weights / measure.weights.max()
    ax.scatter(
        measure.points[:, 0], measure.points[:, 1],
        s=8.0 + 24.0 * w, c="#9db4c8", edgecolors="none", zorder=1,
    )
    xs, ys = trajectory.states[:, 0], trajectory.states[:, 1]
    ax.plot(xs, ys, "-", color="#b03a2e", linewidth=1.2, zorder=2)
    ax.scatter(xs[1:], ys[1:], s=9.0, c="#b03a2e", edgecolors="none", zorder=3)
    ax.scatter([xs[0]], [ys[0]], s=60.0, facecolors="none", edgecolors="#b03a2e", zorder=4)
    if trajectory.terminal_state is not None:
        ax.scatter(
            [trajectory.terminal_state[0]], [trajectory.terminal_state[1]],
            s=90.0, marker="*", c="#1d6fa5", edgecolors="none", zorder=5,
        )
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x0")
    ax.set_ylabel("x1")
    ax.set_title(f"{len(trajectory)} nodes, {trajectory.method}/{trajectory.substeps}")
    with matplotlib.rc_context({"svg.hashsalt": _HASHSALT}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    out = Path(path)
    out.write_bytes(_canonicalize_ids(out.read_bytes().decode("utf-8")).encode("utf-8"))

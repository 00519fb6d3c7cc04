"""Deterministic SVG rendering of single-edge estimates.

Multi-edge estimates must be linearized first (see the embed command);
output bytes depend only on the inputs.
"""

from __future__ import annotations

import numpy as np

from .density import PiecewiseConstantFn

__all__ = ["render_svg"]

WIDTH, HEIGHT = 800.0, 400.0
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60.0, 20.0, 20.0, 40.0


def _fmt(x: float) -> str:
    return format(x, ".4f")


def _step_points(fn: PiecewiseConstantFn, edge_id: str):
    e = fn.network.edge(edge_id)
    cuts = np.concatenate([[0.0], fn.breakpoints(edge_id), [e.length]])
    return cuts, fn.values(edge_id)


def _single_edge(fn: PiecewiseConstantFn) -> str:
    edges = fn.network.edges
    if len(edges) != 1:
        raise ValueError("plotting needs a single-edge estimate; linearize first")
    return edges[0].id


def render_svg(
    fn: PiecewiseConstantFn,
    observations=None,
    truth: PiecewiseConstantFn | None = None,
) -> str:
    """Step plot of a single-edge estimate with optional rug and truth."""
    edge_id = _single_edge(fn)
    length = fn.network.edges[0].length
    ymax = float(fn.values(edge_id).max(initial=0.0))
    if truth is not None:
        t_edge = _single_edge(truth)
        ymax = max(ymax, float(truth.values(t_edge).max(initial=0.0)))
    ymax = ymax * 1.08 if ymax > 0 else 1.0

    inner_w = WIDTH - MARGIN_L - MARGIN_R
    inner_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(t):
        return MARGIN_L + inner_w * t / length

    def sy(v):
        return MARGIN_T + inner_h * (1.0 - v / ymax)

    def step_path(target, edge):
        cuts, vals = _step_points(target, edge)
        parts = [f"M {_fmt(sx(cuts[0]))} {_fmt(sy(vals[0]))}"]
        for i in range(vals.size):
            parts.append(f"L {_fmt(sx(cuts[i + 1]))} {_fmt(sy(vals[i]))}")
            if i + 1 < vals.size:
                parts.append(f"L {_fmt(sx(cuts[i + 1]))} {_fmt(sy(vals[i + 1]))}")
        return " ".join(parts)

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(WIDTH)}" '
        f'height="{int(HEIGHT)}" viewBox="0 0 {int(WIDTH)} {int(HEIGHT)}">',
        f'<rect width="{int(WIDTH)}" height="{int(HEIGHT)}" fill="white"/>',
        f'<line x1="{_fmt(MARGIN_L)}" y1="{_fmt(HEIGHT - MARGIN_B)}" '
        f'x2="{_fmt(WIDTH - MARGIN_R)}" y2="{_fmt(HEIGHT - MARGIN_B)}" '
        'stroke="black" stroke-width="1"/>',
        f'<line x1="{_fmt(MARGIN_L)}" y1="{_fmt(MARGIN_T)}" '
        f'x2="{_fmt(MARGIN_L)}" y2="{_fmt(HEIGHT - MARGIN_B)}" '
        'stroke="black" stroke-width="1"/>',
    ]
    if truth is not None:
        lines.append(
            f'<path d="{step_path(truth, _single_edge(truth))}" fill="none" '
            'stroke="#cc2222" stroke-width="1.5"/>'
        )
    lines.append(
        f'<path d="{step_path(fn, edge_id)}" fill="none" '
        'stroke="#2255cc" stroke-width="2"/>'
    )
    if observations:
        rug_y0 = HEIGHT - MARGIN_B
        for p in observations:
            x = _fmt(sx(float(p.offset)))
            lines.append(
                f'<line x1="{x}" y1="{_fmt(rug_y0)}" x2="{x}" '
                f'y2="{_fmt(rug_y0 - 8.0)}" stroke="black" stroke-width="0.6"/>'
            )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"

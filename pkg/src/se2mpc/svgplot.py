"""Tiny SVG line charts, enough for tracking plots without a plot library.

Output is a pure function of the input arrays (fixed float formatting), so
regenerating a plot from the same CSV reproduces it byte for byte.
"""

from __future__ import annotations

import math

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _f(v: float) -> str:
    return format(float(v), ".2f")


def _tick_label(v: float) -> str:
    return format(float(v), ".4g")


def _data_range(arrays, pad: float = 0.05):
    lo = min(float(np.min(a)) for a in arrays if len(a))
    hi = max(float(np.max(a)) for a in arrays if len(a))
    if not math.isfinite(lo) or not math.isfinite(hi):
        lo, hi = 0.0, 1.0
    if hi == lo:
        span = abs(hi) if hi != 0 else 1.0
        lo, hi = lo - 0.5 * span, hi + 0.5 * span
    margin = pad * (hi - lo)
    return lo - margin, hi + margin


class Panel:
    """One cartesian panel with axes, ticks, polyline series, and a legend."""

    def __init__(self, title: str, xlabel: str, ylabel: str, equal_aspect: bool = False):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.equal_aspect = equal_aspect
        self.series: list[tuple[str, np.ndarray, np.ndarray, str]] = []

    def add(self, label: str, x, y, dash: str = ""):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self.series.append((label, x, y, dash))

    def _render(self, ox: float, oy: float, w: float, h: float) -> str:
        m_left, m_right, m_top, m_bot = 58, 14, 28, 42
        pw, ph = w - m_left - m_right, h - m_top - m_bot
        x0, x1 = _data_range([s[1] for s in self.series])
        y0, y1 = _data_range([s[2] for s in self.series])
        if self.equal_aspect:
            # widen the smaller span so both axes share one scale
            sx, sy = (x1 - x0) / pw, (y1 - y0) / ph
            s = max(sx, sy)
            cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
            x0, x1 = cx - 0.5 * s * pw, cx + 0.5 * s * pw
            y0, y1 = cy - 0.5 * s * ph, cy + 0.5 * s * ph

        def px(v):
            return ox + m_left + (v - x0) / (x1 - x0) * pw

        def py(v):
            return oy + m_top + ph - (v - y0) / (y1 - y0) * ph

        parts = [
            f'<rect x="{_f(ox + m_left)}" y="{_f(oy + m_top)}" width="{_f(pw)}" '
            f'height="{_f(ph)}" fill="none" stroke="#444" stroke-width="1"/>',
            f'<text x="{_f(ox + m_left + pw / 2)}" y="{_f(oy + 16)}" text-anchor="middle" '
            f'font-size="13" font-family="sans-serif">{self.title}</text>',
            f'<text x="{_f(ox + m_left + pw / 2)}" y="{_f(oy + h - 8)}" text-anchor="middle" '
            f'font-size="11" font-family="sans-serif">{self.xlabel}</text>',
            f'<text x="{_f(ox + 14)}" y="{_f(oy + m_top + ph / 2)}" text-anchor="middle" '
            f'font-size="11" font-family="sans-serif" '
            f'transform="rotate(-90 {_f(ox + 14)} {_f(oy + m_top + ph / 2)})">{self.ylabel}</text>',
        ]
        for tv in np.linspace(x0, x1, 5):
            parts.append(
                f'<line x1="{_f(px(tv))}" y1="{_f(oy + m_top + ph)}" x2="{_f(px(tv))}" '
                f'y2="{_f(oy + m_top + ph + 4)}" stroke="#444"/>'
                f'<text x="{_f(px(tv))}" y="{_f(oy + m_top + ph + 16)}" text-anchor="middle" '
                f'font-size="10" font-family="sans-serif">{_tick_label(tv)}</text>'
            )
        for tv in np.linspace(y0, y1, 5):
            parts.append(
                f'<line x1="{_f(ox + m_left - 4)}" y1="{_f(py(tv))}" x2="{_f(ox + m_left)}" '
                f'y2="{_f(py(tv))}" stroke="#444"/>'
                f'<text x="{_f(ox + m_left - 6)}" y="{_f(py(tv) + 3)}" text-anchor="end" '
                f'font-size="10" font-family="sans-serif">{_tick_label(tv)}</text>'
            )
        for i, (label, xs, ys, dash) in enumerate(self.series):
            color = PALETTE[i % len(PALETTE)]
            pts = " ".join(f"{_f(px(a))},{_f(py(b))}" for a, b in zip(xs, ys))
            dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
            parts.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" '
                f'stroke-width="1.3"{dash_attr}/>'
            )
            ly = oy + m_top + 14 + 14 * i
            lx = ox + m_left + pw - 120
            parts.append(
                f'<line x1="{_f(lx)}" y1="{_f(ly - 4)}" x2="{_f(lx + 22)}" y2="{_f(ly - 4)}" '
                f'stroke="{color}" stroke-width="1.3"{dash_attr}/>'
                f'<text x="{_f(lx + 27)}" y="{_f(ly)}" font-size="10" '
                f'font-family="sans-serif">{label}</text>'
            )
        return "\n".join(parts)


def render(panels: list[Panel], path, panel_size=(430, 330)) -> None:
    pw, ph = panel_size
    width, height = pw * len(panels), ph
    body = "\n".join(p._render(i * pw, 0, pw, ph) for i, p in enumerate(panels))
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n{body}\n</svg>\n'
    )
    with open(path, "w") as f:
        f.write(svg)


def _reference_xy(records) -> np.ndarray:
    # The logged error state determines the reference pose: X = Xd Exp(psi),
    # so Xd = X Exp(psi)^-1. Keeps the plot a pure function of the CSV.
    from .liegroup import Pose, Twist, compose, exp, inverse

    out = np.empty((len(records), 2))
    for i, r in enumerate(records):
        x = Pose.from_xytheta(r.x, r.y, r.theta)
        xd = compose(x, inverse(exp(Twist(r.psix, r.psiy, r.psitheta))))
        out[i] = xd.trans
    return out


def tracking_plot(records, path) -> None:
    """Two panels: xy overlay (reference vs actual) and e_p/e_R vs time."""
    t = np.array([r.t for r in records])
    ref_xy = _reference_xy(records)
    xy = Panel("trajectory", "x [m]", "y [m]", equal_aspect=True)
    xy.add("reference", ref_xy[:, 0], ref_xy[:, 1], dash="5,3")
    xy.add("actual", [r.x for r in records], [r.y for r in records])
    err = Panel("tracking error", "t [s]", "error")
    err.add("e_p [m]", t, [r.ep for r in records])
    err.add("e_R [rad]", t, [r.eR for r in records])
    render([xy, err], path)


def envelope_plot(env, path) -> None:
    """Monte-Carlo error envelopes (min/median/max) for e_p and e_R."""
    ep = Panel("position error envelope", "t [s]", "e_p [m]")
    ep.add("min", env.t, env.ep_min, dash="3,3")
    ep.add("median", env.t, env.ep_median)
    ep.add("max", env.t, env.ep_max, dash="5,3")
    er = Panel("orientation error envelope", "t [s]", "e_R [rad]")
    er.add("min", env.t, env.eR_min, dash="3,3")
    er.add("median", env.t, env.eR_median)
    er.add("max", env.t, env.eR_max, dash="5,3")
    render([ep, er], path)

"""SVG renderings of run metrics: Fiedler trace, velocity magnitudes, leader
timeline, and trajectories over the explored map.

The SVG is emitted directly (no plotting library) so identical metrics always
produce byte-identical files, which the golden-file tests rely on.
"""

from __future__ import annotations

import base64
import io
import math
from pathlib import Path

import numpy as np

ROBOT_COLORS = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Canvas:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        ]

    def polyline(self, pts, stroke, width=1.5, dash=None, opacity=1.0):
        if len(pts) < 2:
            return
        attr = f' stroke-dasharray="{dash}"' if dash else ""
        d = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        self.parts.append(
            f'<polyline points="{d}" fill="none" stroke="{stroke}" stroke-width="{width}" '
            f'opacity="{opacity}"{attr}/>'
        )

    def polygon(self, pts, fill, stroke="none", opacity=1.0):
        d = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        self.parts.append(f'<polygon points="{d}" fill="{fill}" stroke="{stroke}" opacity="{opacity}"/>')

    def line(self, a, b, stroke, width=1.0, opacity=1.0):
        self.parts.append(
            f'<line x1="{_fmt(a[0])}" y1="{_fmt(a[1])}" x2="{_fmt(b[0])}" y2="{_fmt(b[1])}" '
            f'stroke="{stroke}" stroke-width="{width}" opacity="{opacity}"/>'
        )

    def circle(self, c, r, fill, opacity=1.0):
        self.parts.append(f'<circle cx="{_fmt(c[0])}" cy="{_fmt(c[1])}" r="{_fmt(r)}" fill="{fill}" opacity="{opacity}"/>')

    def text(self, p, s, size=12, fill="#333333", anchor="start"):
        self.parts.append(
            f'<text x="{_fmt(p[0])}" y="{_fmt(p[1])}" font-size="{size}" fill="{fill}" '
            f'font-family="sans-serif" text-anchor="{anchor}">{s}</text>'
        )

    def image(self, href, x, y, w, h, opacity=1.0):
        self.parts.append(
            f'<image x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" '
            f'opacity="{opacity}" href="{href}" preserveAspectRatio="none"/>'
        )

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


class _TimeAxes:
    """Maps (tick, value) to pixel coordinates inside a margin box."""

    def __init__(self, canvas, ticks, vmin, vmax, margin=45):
        self.c = canvas
        self.m = margin
        self.t0 = float(ticks[0]) if len(ticks) else 0.0
        self.t1 = float(ticks[-1]) if len(ticks) else 1.0
        if self.t1 <= self.t0:
            self.t1 = self.t0 + 1.0
        span = vmax - vmin
        if span <= 0:
            span = 1.0
        self.v0 = vmin - 0.05 * span
        self.v1 = vmax + 0.05 * span

    def pt(self, t, v):
        x = self.m + (t - self.t0) / (self.t1 - self.t0) * (self.c.width - 2 * self.m)
        y = self.c.height - self.m - (v - self.v0) / (self.v1 - self.v0) * (self.c.height - 2 * self.m)
        return x, y

    def frame(self, title, ylabel):
        m = self.m
        c = self.c
        c.polyline([(m, m), (m, c.height - m), (c.width - m, c.height - m)], "#444444", 1.0)
        c.text((c.width / 2, m - 12), title, size=14, anchor="middle")
        c.text((m - 35, m - 12), ylabel, size=11)
        for frac in (0.0, 0.5, 1.0):
            v = self.v0 + frac * (self.v1 - self.v0)
            x, y = self.pt(self.t0, v)
            c.text((m - 6, y + 4), f"{v:.2f}", size=10, anchor="end")
            t = self.t0 + frac * (self.t1 - self.t0)
            x, _ = self.pt(t, self.v0)
            c.text((x, c.height - m + 16), f"{t:.0f}", size=10, anchor="middle")


def plot_lambda2(metrics, lambda2_min: float | None = None) -> str:
    ticks = metrics.column("tick")
    lam = metrics.column("lambda2")
    c = _Canvas(640, 360)
    hi = float(np.max(lam)) if len(lam) else 1.0
    ax = _TimeAxes(c, ticks, 0.0, hi)
    ax.frame("Fiedler value over time", "lambda2")
    if lambda2_min is not None:
        a = ax.pt(ax.t0, lambda2_min)
        b = ax.pt(ax.t1, lambda2_min)
        c.polyline([a, b], "#d62728", 1.0, dash="6,4")
    c.polyline([ax.pt(t, v) for t, v in zip(ticks, lam)], "#1f77b4", 1.6)
    return c.render()


def plot_velocities(metrics) -> str:
    ticks = metrics.column("tick")
    c = _Canvas(640, 360)
    hi = 0.0
    series = []
    for i in range(metrics.robot_count):
        uc = metrics.column(f"uc{i}")
        un = metrics.column(f"un{i}")
        uc = np.minimum(uc, 5.0)  # barrier spikes would flatten everything else
        series.append((i, uc, un))
        hi = max(hi, float(np.max(uc)) if len(uc) else 0.0, float(np.max(un)) if len(un) else 0.0)
    ax = _TimeAxes(c, ticks, 0.0, hi)
    ax.frame("Velocity magnitudes (uc solid, un dashed; uc clipped at 5)", "speed")
    for i, uc, un in series:
        color = ROBOT_COLORS[i % len(ROBOT_COLORS)]
        c.polyline([ax.pt(t, v) for t, v in zip(ticks, uc)], color, 1.3)
        c.polyline([ax.pt(t, v) for t, v in zip(ticks, un)], color, 1.3, dash="4,3", opacity=0.8)
    return c.render()


def plot_leader(metrics) -> str:
    ticks = metrics.column("tick")
    leader = metrics.column("leader")
    c = _Canvas(640, 240)
    hi = max(float(np.max(leader)) if len(leader) else 0.0, 1.0)
    ax = _TimeAxes(c, ticks, -1.0, hi)
    ax.frame("Leading robot id (-1 = none)", "robot id")
    pts = []
    for t, v in zip(ticks, leader):
        pts.append(ax.pt(t, v))
    c.polyline(pts, "#2ca02c", 1.5)
    return c.render()


def _grid_png_data_uri(grid_meta: dict, grid_bytes: bytes) -> str:
    from PIL import Image

    w, h = grid_meta["width"], grid_meta["height"]
    arr = np.frombuffer(grid_bytes, dtype=np.uint8).reshape(h, w)
    rgb = np.empty((h, w, 3), dtype=np.uint8)
    rgb[arr == 0] = (235, 235, 235)  # free
    rgb[arr == 127] = (180, 190, 205)  # unknown
    rgb[arr == 255] = (60, 60, 70)  # occupied
    img = Image.fromarray(rgb[::-1], "RGB")  # world y-up
    buf = io.BytesIO()
    img.save(buf, format="PNG", compress_level=6)
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode("ascii")


def plot_trajectories(metrics, scenario=None, grid_export=None, edge_sample_every: int = 50) -> str:
    if scenario is not None:
        xmin, ymin, xmax, ymax = scenario.bounds
    else:
        xs = np.concatenate([metrics.column(f"x{i}") for i in range(metrics.robot_count)])
        ys = np.concatenate([metrics.column(f"y{i}") for i in range(metrics.robot_count)])
        xmin, xmax = float(xs.min()) - 2, float(xs.max()) + 2
        ymin, ymax = float(ys.min()) - 2, float(ys.max()) + 2
    world_w, world_h = xmax - xmin, ymax - ymin
    scale = min(760.0 / world_w, 760.0 / world_h)
    pad = 20
    c = _Canvas(int(world_w * scale) + 2 * pad, int(world_h * scale) + 2 * pad)

    def pt(x, y):
        return pad + (x - xmin) * scale, pad + (ymax - y) * scale

    if grid_export is not None:
        meta, data = grid_export
        uri = _grid_png_data_uri(meta, data)
        a = pt(meta["origin"][0], meta["origin"][1] + meta["height"] * meta["resolution"])
        c.image(uri, a[0], a[1], meta["width"] * meta["resolution"] * scale, meta["height"] * meta["resolution"] * scale, opacity=0.85)
    if scenario is not None:
        for poly in scenario.obstacles:
            c.polygon([pt(x, y) for x, y in poly.vertices], fill="#44444f", opacity=0.9)
    # connectivity edges at sampled ticks
    for k in range(0, len(metrics.rows), max(1, edge_sample_every)):
        row = metrics.rows[k]
        hdr = metrics.header
        for i, j in metrics.pairs:
            if row[hdr.index(f"A_{i}_{j}")] > 0:
                a = pt(row[hdr.index(f"x{i}")], row[hdr.index(f"y{i}")])
                b = pt(row[hdr.index(f"x{j}")], row[hdr.index(f"y{j}")])
                c.line(a, b, "#7fd87f", 1.0, opacity=0.5)
    for i in range(metrics.robot_count):
        xs = metrics.column(f"x{i}")
        ys = metrics.column(f"y{i}")
        color = ROBOT_COLORS[i % len(ROBOT_COLORS)]
        c.polyline([pt(x, y) for x, y in zip(xs, ys)], color, 1.8)
        if len(xs):
            c.circle(pt(xs[0], ys[0]), 4, color, opacity=0.6)
            c.circle(pt(xs[-1], ys[-1]), 5, color)
    c.text((pad, 14), "trajectories, connectivity edges at sampled ticks", size=13)
    return c.render()


def emit_plots(metrics, out_dir: str | Path, scenario=None, grid_export=None, lambda2_min: float | None = None):
    """Write the four standard SVGs; returns the file paths.

    Raises:
        OSError: surfaced with the failing path if the directory is not writable.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if lambda2_min is None and scenario is not None:
        lambda2_min = scenario.weights.lambda2_min
    files = {
        "lambda2.svg": plot_lambda2(metrics, lambda2_min),
        "velocities.svg": plot_velocities(metrics),
        "leader.svg": plot_leader(metrics),
        "trajectories.svg": plot_trajectories(metrics, scenario=scenario, grid_export=grid_export),
    }
    paths = []
    for name, content in files.items():
        p = out / name
        p.write_text(content)
        paths.append(p)
    return paths

"""Minimal native SVG plots: line plots, scatters, heat maps.

Self-contained vector output with axes, ticks and labels; enough for the
report plots without pulling in a plotting stack.
"""

import numpy as np

__all__ = ["line_plot", "scatter_plot", "heatmap"]

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 36, 50


def _ticks(lo, hi, n=6):
    if not np.isfinite(lo) or not np.isfinite(hi) or lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** np.floor(np.log10(raw))
    for m in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw / mag <= m:
            step = m * mag
            break
    start = np.ceil(lo / step) * step
    vals = np.arange(start, hi + 0.5 * step, step)
    return vals[(vals >= lo - 1e-12) & (vals <= hi + 1e-12)]


def _fmt(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:.4g}"


class _Canvas:
    def __init__(self, title, xlabel, ylabel):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}" font-family="Helvetica,Arial,sans-serif">',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
            f'<text x="{_W / 2}" y="22" text-anchor="middle" font-size="15">{title}</text>',
            f'<text x="{(_ML + _W - _MR) / 2}" y="{_H - 12}" text-anchor="middle" '
            f'font-size="12">{xlabel}</text>',
            f'<text x="16" y="{(_MT + _H - _MB) / 2}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 16 {(_MT + _H - _MB) / 2})">{ylabel}</text>',
        ]

    def set_limits(self, xlo, xhi, ylo, yhi):
        if xhi == xlo:
            xlo, xhi = xlo - 0.5, xhi + 0.5
        if yhi == ylo:
            ylo, yhi = ylo - 0.5, yhi + 0.5
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi

    def px(self, x):
        return _ML + (x - self.xlo) / (self.xhi - self.xlo) * (_W - _ML - _MR)

    def py(self, y):
        return _H - _MB - (y - self.ylo) / (self.yhi - self.ylo) * (_H - _MT - _MB)

    def axes(self):
        x0, x1 = _ML, _W - _MR
        y0, y1 = _H - _MB, _MT
        self.parts.append(
            f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
            'fill="none" stroke="#444" stroke-width="1"/>'
        )
        for v in _ticks(self.xlo, self.xhi):
            p = self.px(v)
            self.parts.append(
                f'<line x1="{p:.1f}" y1="{y0}" x2="{p:.1f}" y2="{y0 + 5}" stroke="#444"/>'
                f'<text x="{p:.1f}" y="{y0 + 18}" text-anchor="middle" font-size="10">'
                f"{_fmt(v)}</text>"
            )
        for v in _ticks(self.ylo, self.yhi):
            p = self.py(v)
            self.parts.append(
                f'<line x1="{x0 - 5}" y1="{p:.1f}" x2="{x0}" y2="{p:.1f}" stroke="#444"/>'
                f'<text x="{x0 - 8}" y="{p + 3:.1f}" text-anchor="end" font-size="10">'
                f"{_fmt(v)}</text>"
            )

    def polyline(self, xs, ys, color, dash=None, label=None):
        pts = " ".join(
            f"{self.px(x):.2f},{self.py(y):.2f}"
            for x, y in zip(xs, ys)
            if np.isfinite(x) and np.isfinite(y)
        )
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{extra}/>'
        )

    def dots(self, xs, ys, color, r=3.0):
        for x, y in zip(xs, ys):
            if np.isfinite(x) and np.isfinite(y):
                self.parts.append(
                    f'<circle cx="{self.px(x):.2f}" cy="{self.py(y):.2f}" r="{r}" '
                    f'fill="{color}" fill-opacity="0.8"/>'
                )

    def vline(self, x, color, dash="4,3"):
        self.parts.append(
            f'<line x1="{self.px(x):.2f}" y1="{_MT}" x2="{self.px(x):.2f}" '
            f'y2="{_H - _MB}" stroke="{color}" stroke-dasharray="{dash}"/>'
        )

    def legend(self, items):
        y = _MT + 14
        for label, color in items:
            self.parts.append(
                f'<line x1="{_W - _MR - 130}" y1="{y - 4}" x2="{_W - _MR - 108}" '
                f'y2="{y - 4}" stroke="{color}" stroke-width="2"/>'
                f'<text x="{_W - _MR - 102}" y="{y}" font-size="11">{label}</text>'
            )
            y += 16

    def render(self):
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def line_plot(path, series, title="", xlabel="", ylabel="", ref_lines=()):
    """Write a multi-series line plot.

    series: list of (xs, ys, color, label); ref_lines: list of
    (slope, intercept, color, label) drawn as dashed straight lines.
    """
    cv = _Canvas(title, xlabel, ylabel)
    xs_all = np.concatenate([np.asarray(s[0], dtype=float) for s in series])
    ys_all = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    ys_all = ys_all[np.isfinite(ys_all)]
    if ys_all.size == 0:
        ys_all = np.array([0.0, 1.0])
    cv.set_limits(float(np.min(xs_all)), float(np.max(xs_all)),
                  float(np.min(ys_all)), float(np.max(ys_all)))
    cv.axes()
    for slope, intercept, color, _label in ref_lines:
        xs = np.array([cv.xlo, cv.xhi])
        cv.polyline(xs, slope * xs + intercept, color, dash="5,4")
    for xs, ys, color, _label in series:
        cv.polyline(np.asarray(xs, float), np.asarray(ys, float), color)
    cv.legend([(s[3], s[2]) for s in series if s[3]]
              + [(r[3], r[2]) for r in ref_lines if r[3]])
    with open(path, "w", encoding="utf-8") as f:
        f.write(cv.render())


def scatter_plot(path, xs, ys, title="", xlabel="", ylabel="", vlines=()):
    """Scatter with optional dashed vertical reference lines (x, color, label)."""
    cv = _Canvas(title, xlabel, ylabel)
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    pad_x = 0.05 * (np.ptp(xs) if xs.size and np.ptp(xs) > 0 else 1.0)
    pad_y = 0.05 * (np.ptp(ys) if ys.size and np.ptp(ys) > 0 else 1.0)
    lo_x = min(float(np.min(xs, initial=0.0)), min((v[0] for v in vlines), default=np.inf))
    hi_x = max(float(np.max(xs, initial=0.0)), max((v[0] for v in vlines), default=-np.inf))
    cv.set_limits(lo_x - pad_x, hi_x + pad_x,
                  float(np.min(ys, initial=-1.0)) - pad_y,
                  float(np.max(ys, initial=1.0)) + pad_y)
    cv.axes()
    for x, color, _label in vlines:
        cv.vline(x, color)
    cv.dots(xs, ys, "#1f4e9c")
    cv.legend([(v[2], v[1]) for v in vlines if v[2]])
    with open(path, "w", encoding="utf-8") as f:
        f.write(cv.render())


def heatmap(path, matrix, title="", xlabel="", ylabel="", max_cells=160):
    """Signed heat map of a 2-D field (blue negative, red positive)."""
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.size == 0:
        M = np.zeros((1, 1))
    step = max(1, int(np.ceil(max(M.shape) / max_cells)))
    M = M[::step, ::step]
    vmax = np.max(np.abs(M)) or 1.0
    cv = _Canvas(title, xlabel, ylabel)
    ny, nx = M.shape
    cv.set_limits(0, nx, 0, ny)
    w = (_W - _ML - _MR) / nx
    h = (_H - _MT - _MB) / ny
    for i in range(ny):
        for j in range(nx):
            v = M[i, j] / vmax
            if v >= 0:
                r, g, b = 255, int(255 * (1 - v)), int(255 * (1 - v))
            else:
                r, g, b = int(255 * (1 + v)), int(255 * (1 + v)), 255
            x = cv.px(j)
            y = cv.py(i + 1)
            cv.parts.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{w + 0.5:.2f}" '
                f'height="{h + 0.5:.2f}" fill="rgb({r},{g},{b})"/>'
            )
    cv.axes()
    with open(path, "w", encoding="utf-8") as f:
        f.write(cv.render())

"""Minimal standalone SVG line charts."""
import math
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _fmt(x):
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        return [float(e) for e in range(a, b + 1)]
    if hi == lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / 4))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= 6:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12:
        out.append(round(v, 12))
        v += step
    return out


def line_chart(series, title="", xlabel="", ylabel="", logx=False, logy=False,
               width=640, height=420, bands=None):
    """Render ``{label: (xs, ys)}`` as an SVG string.

    ``bands`` optionally maps a label to (lower, upper) y arrays drawn as a
    shaded region.  Non-finite or non-positive (on log axes) points are skipped.
    """
    ml, mr, mt, mb = 64, 150, 36, 48
    pw, ph = width - ml - mr, height - mt - mb

    def tx(x):
        return math.log10(x) if logx else x

    def ty(y):
        return math.log10(y) if logy else y

    def ok(x, y):
        return (math.isfinite(x) and math.isfinite(y) and (not logx or x > 0)
                and (not logy or y > 0))

    pts = {k: [(tx(x), ty(y)) for x, y in zip(*v) if ok(x, y)] for k, v in series.items()}
    allp = [p for v in pts.values() for p in v]
    if not allp:
        allp = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in allp), max(p[0] for p in allp)
    y0, y1 = min(p[1] for p in allp), max(p[1] for p in allp)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13">'
           f'{escape(title)}</text>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1, logx):
        if x0 <= t <= x1:
            X = px(t)
            lab = f"1e{int(t)}" if logx else _fmt(t)
            out.append(f'<line x1="{X:.1f}" y1="{mt + ph}" x2="{X:.1f}" y2="{mt + ph + 4}" '
                       f'stroke="black"/>')
            out.append(f'<text x="{X:.1f}" y="{mt + ph + 16}" text-anchor="middle">'
                       f'{escape(lab)}</text>')
    for t in _ticks(y0, y1, logy):
        if y0 <= t <= y1:
            Y = py(t)
            lab = f"1e{int(t)}" if logy else _fmt(t)
            out.append(f'<line x1="{ml - 4}" y1="{Y:.1f}" x2="{ml}" y2="{Y:.1f}" stroke="black"/>')
            out.append(f'<text x="{ml - 6}" y="{Y + 4:.1f}" text-anchor="end">{escape(lab)}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">'
               f'{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {mt + ph / 2:.1f})">{escape(ylabel)}</text>')
    for i, (label, p) in enumerate(pts.items()):
        color = PALETTE[i % len(PALETTE)]
        if bands and label in bands:
            xs = [tx(x) for x, y in zip(*series[label]) if ok(x, y)]
            lo, hi = bands[label]
            poly = [(px(x), py(ty(max(v, 1e-300) if logy else v))) for x, v in zip(xs, hi)]
            poly += [(px(x), py(ty(max(v, 1e-300) if logy else v)))
                     for x, v in reversed(list(zip(xs, lo)))]
            if poly:
                coords = " ".join(f"{a:.1f},{min(max(b, mt), mt + ph):.1f}" for a, b in poly)
                out.append(f'<polygon points="{coords}" fill="{color}" fill-opacity="0.15" '
                           f'stroke="none"/>')
        if p:
            coords = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in p)
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                       f'stroke-width="1.6"/>')
            for x, y in p:
                out.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="2.2" fill="{color}"/>')
        ly = mt + 12 + 16 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 28}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 32}" y="{ly}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_chart(path, *args, **kwargs):
    with open(path, "w") as fh:
        fh.write(line_chart(*args, **kwargs))

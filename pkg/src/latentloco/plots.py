"""Self-contained SVG emission: line charts for training curves and a radar
chart for the terrain-transfer report.  No plotting dependencies."""

import math

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#17becf", "#7f7f7f")


def _svg_header(width, height, title):
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">\n'
            f'<rect width="100%" height="100%" fill="white"/>\n')
    if title:
        head += (f'<text x="{width / 2}" y="18" font-family="sans-serif" '
                 f'font-size="14" text-anchor="middle">{title}</text>\n')
    return head


def svg_line_chart(series, path, title="", xlabel="iteration", ylabel="",
                   width=640, height=400):
    """Write one polyline per named curve, with axes, ticks, and a legend.

    ``series`` maps label -> sequence of y values (x is the index).
    """
    if not series:
        raise ValueError("svg_line_chart: no curves given")
    pad = 56
    all_y = [float(v) for ys in series.values() for v in ys]
    y_lo, y_hi = min(all_y), max(all_y)
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    x_hi = max(1, max(len(ys) - 1 for ys in series.values()))
    sx = (width - 2 * pad) / x_hi
    sy = (height - 2 * pad) / (y_hi - y_lo)

    parts = [_svg_header(width, height, title)]
    parts.append(f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
                 f'y2="{height - pad}" stroke="black"/>\n')
    parts.append(f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" '
                 f'stroke="black"/>\n')
    for i in range(5):
        yv = y_lo + (y_hi - y_lo) * i / 4
        y = height - pad - (yv - y_lo) * sy
        parts.append(f'<line x1="{pad}" y1="{y:.1f}" x2="{width - pad}" '
                     f'y2="{y:.1f}" stroke="#ddd" stroke-dasharray="4"/>\n')
        parts.append(f'<text x="{pad - 6}" y="{y + 4:.1f}" font-family="sans-serif" '
                     f'font-size="10" text-anchor="end">{yv:.3g}</text>\n')
        xv = x_hi * i / 4
        x = pad + xv * sx
        parts.append(f'<text x="{x:.1f}" y="{height - pad + 14}" '
                     f'font-family="sans-serif" font-size="10" '
                     f'text-anchor="middle">{xv:.0f}</text>\n')
    parts.append(f'<text x="{width / 2}" y="{height - 12}" font-family="sans-serif" '
                 f'font-size="11" text-anchor="middle">{xlabel}</text>\n')
    if ylabel:
        parts.append(f'<text x="14" y="{height / 2}" font-family="sans-serif" '
                     f'font-size="11" text-anchor="middle" '
                     f'transform="rotate(-90 14 {height / 2})">{ylabel}</text>\n')

    for ci, (label, ys) in enumerate(series.items()):
        color = PALETTE[ci % len(PALETTE)]
        pts = " ".join(
            f"{pad + i * sx:.2f},{height - pad - (float(y) - y_lo) * sy:.2f}"
            for i, y in enumerate(ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>\n')
        ly = pad + 14 * ci
        parts.append(f'<line x1="{width - pad - 90}" y1="{ly}" '
                     f'x2="{width - pad - 70}" y2="{ly}" stroke="{color}" '
                     f'stroke-width="2"/>\n')
        parts.append(f'<text x="{width - pad - 64}" y="{ly + 4}" '
                     f'font-family="sans-serif" font-size="10">{label}</text>\n')
    parts.append("</svg>\n")
    with open(path, "w") as f:
        f.write("".join(parts))
    return path


def svg_radar_chart(categories, series, path, title="", max_value=None,
                    size=420):
    """Radar chart: one polygon per series over the category axes.

    ``series`` maps label -> list of values aligned with ``categories``.
    """
    if not categories or not series:
        raise ValueError("svg_radar_chart: need categories and series")
    n = len(categories)
    cx = cy = size / 2
    radius = size / 2 - 70
    if max_value is None:
        max_value = max(max(vs) for vs in series.values())
    max_value = max(float(max_value), 1e-9)

    def point(k, value):
        angle = -math.pi / 2 + 2 * math.pi * k / n
        r = radius * max(0.0, float(value)) / max_value
        return cx + r * math.cos(angle), cy + r * math.sin(angle)

    parts = [_svg_header(size, size + 30, title)]
    for ring in (0.25, 0.5, 0.75, 1.0):
        pts = " ".join(f"{cx + radius * ring * math.cos(-math.pi / 2 + 2 * math.pi * k / n):.1f},"
                       f"{cy + radius * ring * math.sin(-math.pi / 2 + 2 * math.pi * k / n):.1f}"
                       for k in range(n))
        parts.append(f'<polygon points="{pts}" fill="none" stroke="#ddd"/>\n')
    for k, cat in enumerate(categories):
        x, y = point(k, max_value)
        parts.append(f'<line x1="{cx}" y1="{cy}" x2="{x:.1f}" y2="{y:.1f}" '
                     f'stroke="#bbb"/>\n')
        lx = cx + (radius + 26) * math.cos(-math.pi / 2 + 2 * math.pi * k / n)
        ly = cy + (radius + 26) * math.sin(-math.pi / 2 + 2 * math.pi * k / n)
        parts.append(f'<text x="{lx:.1f}" y="{ly:.1f}" font-family="sans-serif" '
                     f'font-size="9" text-anchor="middle">{cat}</text>\n')
    for ci, (label, vals) in enumerate(series.items()):
        color = PALETTE[ci % len(PALETTE)]
        pts = " ".join(f"{point(k, v)[0]:.1f},{point(k, v)[1]:.1f}"
                       for k, v in enumerate(vals))
        parts.append(f'<polygon points="{pts}" fill="{color}" fill-opacity="0.15" '
                     f'stroke="{color}" stroke-width="1.5"/>\n')
        ly = size + 10 + 0 * ci
        lx = 70 + 130 * ci
        parts.append(f'<line x1="{lx - 24}" y1="{ly}" x2="{lx - 6}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>\n')
        parts.append(f'<text x="{lx}" y="{ly + 4}" font-family="sans-serif" '
                     f'font-size="10">{label}</text>\n')
    parts.append("</svg>\n")
    with open(path, "w") as f:
        f.write("".join(parts))
    return path

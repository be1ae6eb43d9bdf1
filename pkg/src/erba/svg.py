"""Minimal SVG 1.1 scatter plot of retained and removed nodes."""

from __future__ import annotations

import numpy as np

PREAMBLE = """\
<?xml version="1.0" standalone="no"?>
<!DOCTYPE svg PUBLIC "-//W3C//DTD SVG 1.1//EN"
"http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd">
<svg width="{size}" height="{size}" viewBox="{lo} {lo} {span} {span}" version="1.1"
    xmlns="http://www.w3.org/2000/svg">
<rect x="{lo}" y="{lo}" width="{span}" height="{span}" style="fill:#ffffff"/>
"""

POSTAMBLE = "</svg>\n"


def node_scatter(retained, removed, box, size=480, radius=0.008) -> str:
    """Render 2-D nodes into the unit square; retained filled, removed hollow.

    Points with ``d > 2`` are projected on their first two coordinates; 1-D
    points are drawn on the horizontal midline.
    """
    a, b = float(box[0]), float(box[1])
    pad = 2 * radius

    def unit(P):
        P = np.asarray(P, dtype=float).reshape(len(P), -1)
        if P.shape[1] == 1:
            P = np.column_stack([P[:, 0], np.full(len(P), 0.5 * (a + b))])
        u = (P[:, :2] - a) / (b - a)
        u[:, 1] = 1.0 - u[:, 1]  # SVG y axis points down
        return u

    lines = [PREAMBLE.format(size=size, lo=-pad, span=1 + 2 * pad)]
    for x, y in unit(removed) if len(removed) else []:
        lines.append(
            f'<circle cx="{x:.6f}" cy="{y:.6f}" r="{radius}" '
            f'style="fill:none;stroke:#000000;stroke-width:{radius / 4}"/>\n'
        )
    for x, y in unit(retained) if len(retained) else []:
        lines.append(
            f'<circle cx="{x:.6f}" cy="{y:.6f}" r="{radius}" '
            'style="fill:#1f4e9c;stroke:none"/>\n'
        )
    lines.append(POSTAMBLE)
    return "".join(lines)

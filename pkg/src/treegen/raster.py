"""Deterministic rendering of spatial graphs to PNG and SVG."""

from __future__ import annotations

from PIL import Image, ImageDraw

from .graph import GraphError, SpatialGraph

__all__ = ["rasterize", "write_svg"]

_SUPERSAMPLE = 4


def rasterize(
    g: SpatialGraph,
    width: int = 512,
    height: int = 512,
    stroke_px: int = 3,
    node_markers: bool = False,
) -> Image.Image:
    """Render edges as black strokes on white, 8-bit grayscale.

    Drawn at 4x resolution and downsampled for anti-aliasing; output bytes
    are identical across runs for the same graph.
    """
    if width <= 0 or height <= 0:
        raise GraphError("raster dimensions must be positive")
    s = _SUPERSAMPLE
    img = Image.new("L", (width * s, height * s), 255)
    draw = ImageDraw.Draw(img)
    scale = (min(width, height) - 1) * s

    def to_px(p):
        # y grows upward in graph space, downward in image space
        return (p[0] * scale, (height * s - 1) - p[1] * scale)

    for i, j in sorted(g.edges):
        draw.line([to_px(g.coords[i]), to_px(g.coords[j])], fill=0, width=stroke_px * s)
    if node_markers:
        r = stroke_px * s
        for p in g.coords:
            x, y = to_px(p)
            draw.ellipse([x - r, y - r, x + r, y + r], fill=0)
    return img.resize((width, height), Image.LANCZOS)


def write_svg(g: SpatialGraph, path, width: int = 512, height: int = 512, stroke_px: int = 3) -> None:
    if width <= 0 or height <= 0:
        raise GraphError("raster dimensions must be positive")
    scale = min(width, height) - 1
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for i, j in sorted(g.edges):
        (x1, y1), (x2, y2) = g.coords[i], g.coords[j]
        lines.append(
            f'<line x1="{x1 * scale:.3f}" y1="{(height - 1) - y1 * scale:.3f}" '
            f'x2="{x2 * scale:.3f}" y2="{(height - 1) - y2 * scale:.3f}" '
            f'stroke="black" stroke-width="{stroke_px}"/>'
        )
    lines.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

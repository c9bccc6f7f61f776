"""SVG overlays: a grey raster with polyline layers on top, and a parser for the paths."""

from __future__ import annotations

import base64
import re
import struct
import zlib
import xml.etree.ElementTree as ET

import numpy as np

from .field import FieldError, ScalarField

SVG_NS = "http://www.w3.org/2000/svg"
# drawing order, bottom to top
LAYER_ORDER = ("rejected", "open-contour", "closed-contour", "ring", "loop")
STYLE = {
    "rejected": "stroke:#888888;stroke-dasharray:2,2",
    "open-contour": "stroke:#1f77b4",
    "closed-contour": "stroke:#2ca02c",
    "ring": "stroke:#d62728",
    "loop": "stroke:#ff7f0e",
}


def encode_png(values: np.ndarray) -> bytes:
    """8-bit greyscale PNG of values in [0, 1]."""
    pix = np.rint(np.clip(values, 0.0, 1.0) * 255).astype(np.uint8)
    h, w = pix.shape
    raw = b"".join(b"\x00" + row.tobytes() for row in pix)

    def chunk(tag, data):
        return struct.pack(">I", len(data)) + tag + data + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)

    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"IDAT", zlib.compress(raw, 9)) + chunk(b"IEND", b"")


def _num(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def path_data(polyline, closed: bool = False) -> str:
    p = np.asarray(polyline, dtype=float).reshape(-1, 2)
    if len(p) == 0:
        return ""
    d = "M " + " L ".join(f"{_num(x)} {_num(y)}" for x, y in p)
    return d + " Z" if closed else d


def export_overlay_svg(base: ScalarField, layers: dict | None = None) -> str:
    """SVG document with ``base`` as an embedded raster and one path per polyline.

    ``layers`` maps a class name to a list of polylines or ``(polyline, closed)``
    pairs. Layers are drawn in a fixed order and paths keep their list order.
    Coordinates are pixel centres, offset by half a pixel onto the raster.
    """
    layers = layers or {}
    unknown = set(layers) - set(LAYER_ORDER)
    if unknown:
        raise FieldError(f"unknown overlay layer(s): {sorted(unknown)}")
    h, w = base.shape
    png = base64.b64encode(encode_png(base.values)).decode("ascii")
    out = [f'<svg xmlns="{SVG_NS}" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
           f'<image x="0" y="0" width="{w}" height="{h}" href="data:image/png;base64,{png}"/>',
           '<g transform="translate(0.5,0.5)" fill="none" stroke-width="1">']
    for cls in LAYER_ORDER:
        for item in layers.get(cls, []):
            poly, closed = item if isinstance(item, tuple) else (item, False)
            p = np.asarray(poly, dtype=float).reshape(-1, 2)
            if len(p) and (p[:, 0].min() < 0 or p[:, 1].min() < 0 or p[:, 0].max() > w - 1 or p[:, 1].max() > h - 1):
                raise FieldError(f"{cls} polyline leaves the base raster")
            out.append(f'<path class="{cls}" style="{STYLE[cls]}" d="{path_data(p, closed)}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


_TOKEN = re.compile(r"[MLZ]|[-+0-9.eE]+")


def parse_path(d: str) -> np.ndarray:
    nums = [float(t) for t in _TOKEN.findall(d) if t not in ("M", "L", "Z")]
    return np.array(nums, dtype=float).reshape(-1, 2)


def parse_overlay_svg(text: str) -> list:
    """[(class, polyline)] for every path, in document order."""
    root = ET.fromstring(text)
    return [(el.get("class"), parse_path(el.get("d", ""))) for el in root.iter(f"{{{SVG_NS}}}path")]

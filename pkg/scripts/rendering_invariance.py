"""Critical contours of one bump under two lights and a specular rendering.

Writes an SVG overlay per rendering and prints ring distances to the slant ring.
"""
import argparse
from pathlib import Path

import numpy as np

from extremal.contours import contour_distance, extremal_rings
from extremal.field import (RenderSpec, gen_sigmoid_bump, light_from_angles, normals_from_height, render,
                            slant_of_height)
from extremal.morse import build_ms_complex, simplify
from extremal.overlay import export_overlay_svg


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--elevation", type=float, default=12.5, help="light angle from the view axis, degrees")
    ap.add_argument("--out", default="out/invariance")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    h = gen_sigmoid_bump((args.size, args.size))
    slant = slant_of_height(h)
    ref = extremal_rings(slant, simplify(build_ms_complex(slant), 0.01 * np.ptp(slant.values)))
    n = normals_from_height(h)
    el = np.radians(args.elevation)
    specs = {"light_a": RenderSpec("lambertian", light_from_angles(el, 0.0)),
             "light_b": RenderSpec("lambertian", light_from_angles(el, np.pi)),
             "specular": RenderSpec("specular")}
    for name, spec in specs.items():
        im = render(n, spec)
        cx = simplify(build_ms_complex(im), 0.01 * np.ptp(im.values))
        rings = extremal_rings(im, cx, kind="valley")
        d = [contour_distance([r.contour], [q.contour for q in ref]) for r in rings] if ref else []
        print(f"{name:9s} rings {len(rings)}  distance to slant ring {', '.join(f'{x:.2f}' for x in d) or '-'} px")
        svg = export_overlay_svg(im, {"ring": [(r.contour.polyline, True) for r in rings]})
        (out / f"{name}.svg").write_text(svg)


if __name__ == "__main__":
    main()

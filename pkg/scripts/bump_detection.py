"""Rings on a rendered cobblestone scene: how many bumps are found per rendering."""
import argparse

import numpy as np

from extremal.contours import bump_regions, extremal_rings
from extremal.field import RenderSpec, gen_cobblestone, light_from_angles, normals_from_height, render
from extremal.morse import build_ms_complex, simplify


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--radius", type=float, default=24.0)
    ap.add_argument("--epsilon", type=float, default=0.01, help="relative simplification threshold")
    args = ap.parse_args()
    n = normals_from_height(gen_cobblestone((args.size, args.size), radius=args.radius))
    for name, spec in [("lambertian", RenderSpec("lambertian", light_from_angles(np.radians(12.5)))),
                       ("lambertian-overhead", RenderSpec("lambertian")),
                       ("specular", RenderSpec("specular"))]:
        im = render(n, spec)
        cx = simplify(build_ms_complex(im), args.epsilon * np.ptp(im.values))
        rings = extremal_rings(im, cx, kind="valley")
        sizes = sorted(int(r.enclosed.size) for r in rings)
        print(f"{name:20s} {len(rings)} rings, enclosed pixels {sizes}, "
              f"polarities {[b.polarity for b in bump_regions(rings)]}")


if __name__ == "__main__":
    main()

"""Closed flow loops of the orientation field for three renderings of one bump."""
import argparse

import numpy as np

from extremal.field import RenderSpec, gen_sigmoid_bump, normals_from_height, render
from extremal.flow import closed_flow_loops, encloses, hausdorff, orientation_field


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--texture-seed", type=int, default=0)
    args = ap.parse_args()
    c = ((args.size - 1) / 2,) * 2
    n = normals_from_height(gen_sigmoid_bump((args.size, args.size)))
    found = {}
    for name, spec in [("lambertian", RenderSpec("lambertian")),
                       ("specular", RenderSpec("specular", shininess=1)),
                       ("glass", RenderSpec("glass-texture", texture_seed=args.texture_seed))]:
        loops = closed_flow_loops(orientation_field(render(n, spec)))
        for lp in loops:
            r = np.hypot(lp.polyline[:, 0] - c[0], lp.polyline[:, 1] - c[1])
            print(f"{name:10s} winding {lp.winding:+.3f} radius {r.min():.1f}-{r.max():.1f} "
                  f"encloses apex {encloses(lp.polyline, c)}")
        found[name] = [lp.polyline for lp in loops if encloses(lp.polyline, c)]
    names = list(found)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            d = min((hausdorff(p, q) for p in found[a] for q in found[b]), default=float("inf"))
            print(f"{a}/{b}: {d:.1f} px")


if __name__ == "__main__":
    main()

"""Command-line pipeline: scenes, rendering, complexes, contours, flows, reconstruction.

Every command that writes files also writes a manifest (JSON) next to its
first output, recording the command, its parameters and the sha256 of every
input and output. Exit codes: 1 validation error, 2 I/O error, 3 the
inpainting relaxation hit its iteration cap.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import contours as C
from . import field as F
from . import flow as FL
from . import morse as M
from . import reconstruct as R
from .fileio import FormatError, atomic_write, dumps_json, histogram_csv, read_field, sha256_file, write_field
from .overlay import export_overlay_svg

EXIT_VALIDATION, EXIT_IO, EXIT_CONVERGENCE = 1, 2, 3


class UsageError(F.FieldError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class Run:
    """Collects inputs and outputs of one command for its manifest."""

    def __init__(self, cmd: str, args: argparse.Namespace):
        self.cmd = cmd
        skip = {"cmd", "func", "manifest"}
        self.params = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
        self.inputs, self.outputs = [], []
        self.manifest = getattr(args, "manifest", None)

    def read(self, path):
        f = read_field(path)
        self.inputs.append(str(path))
        return f

    def read_json(self, path):
        data = json.loads(Path(path).read_text())
        self.inputs.append(str(path))
        return data

    def write_field(self, path, field):
        write_field(path, field)
        self.outputs.append(str(path))

    def write_text(self, path, text):
        atomic_write(path, text)
        self.outputs.append(str(path))

    def finish(self):
        target = self.manifest
        if target is None and self.outputs:
            target = self.outputs[0] + ".manifest.json"
        if target is None:
            return
        doc = {"cmd": self.cmd, "params": _jsonable(self.params),
               "inputs": [{"path": p, "sha256": sha256_file(p)} for p in self.inputs],
               "outputs": [{"path": p, "sha256": sha256_file(p)} for p in self.outputs]}
        atomic_write(target, dumps_json(doc))


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, Path):
        return str(v)
    return v


def _vec(text: str, n: int) -> tuple:
    try:
        vals = tuple(float(t) for t in text.split(","))
    except ValueError:
        raise UsageError(f"expected {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n:
        raise UsageError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def _need_seed(args, why: str):
    if args.seed is None:
        raise UsageError(f"--seed is required for {why}")


def _complex(field, epsilon):
    cx = M.build_ms_complex(field)
    return M.simplify(cx, epsilon) if epsilon and epsilon > 0 else cx


def _default_eps(field, epsilon, rel):
    return float(epsilon) if epsilon is not None else rel * float(np.ptp(field.values))


# -- commands -----------------------------------------------------------------------

def cmd_gen(args, run: Run):
    grid = (args.width, args.height)
    if args.kind in ("sigmoid", "cobblestone"):
        gen = F.gen_sigmoid_bump if args.kind == "sigmoid" else F.gen_cobblestone
        kw = {k: v for k, v in (("radius", args.radius), ("height", args.bump_height)) if v is not None}
        f = gen(grid, softness=args.softness, base_tilt=np.radians(args.base_tilt), bend=args.bend, **kw)
    elif args.kind == "blob":
        _need_seed(args, "blob fields")
        f = F.gen_blob(grid, seed=args.seed)
    elif args.kind == "feature-blob":
        _need_seed(args, "feature-blob fields")
        f = F.gen_feature_blob(grid, seed=args.seed, n_features=args.features)
    else:
        raise UsageError(f"unknown kind {args.kind}")
    if args.noise > 0:
        _need_seed(args, "added noise")
        f = F.add_noise(f, args.noise, seed=args.seed)
    run.write_field(args.out, f)


def cmd_render(args, run: Run):
    h = run.read(args.input)
    light = _vec(args.light, 3)
    norm = float(np.linalg.norm(light))
    if norm == 0:
        raise UsageError("light must be non-zero")
    light = tuple(x / norm for x in light)
    if args.kind == "glass-texture":
        _need_seed(args, "glass-texture rendering")
    spec = F.RenderSpec(args.kind, light, ambient=args.ambient, shininess=args.shininess,
                        texture_seed=args.seed or 0)
    run.write_field(args.out, F.render(F.normals_from_height(h), spec))


def cmd_msc(args, run: Run):
    f = run.read(args.input)
    cx = _complex(f, args.epsilon)
    run.write_text(args.out, dumps_json(M.complex_to_dict(cx)))


def cmd_simplify(args, run: Run):
    f = run.read(args.input)
    cx = M.simplify(M.build_ms_complex(f), args.epsilon)
    run.write_field(args.out, F.ScalarField(cx.values, f.spacing))
    if args.json:
        run.write_text(args.json, dumps_json(M.complex_to_dict(cx)))


def _source(args, run: Run):
    """(field analysed, complex, kind): slant of a height field, or the image itself."""
    f = run.read(args.input)
    if args.slant:
        f = F.slant_of_height(f)
    kind = args.kind or ("ridge" if args.slant else "valley")
    cx = _complex(f, _default_eps(f, args.epsilon, 0.01))
    return f, cx, kind


def _contour_kw(args):
    return dict(steepness_threshold=args.threshold, probe_halfwidth=args.probe)


def cmd_contours(args, run: Run):
    f, cx, kind = _source(args, run)
    cs = C.critical_contours(f, cx, kind=kind, **_contour_kw(args))
    doc = M.complex_to_dict(cx)
    doc["contours"] = [C.contour_to_dict(c) for c in cs]
    run.write_text(args.out, dumps_json(doc))


def _labelings_doc(contours, shape, constraint):
    if len(contours) > 12:
        return {"skipped": f"{len(contours)} contours give too many labelings to enumerate"}
    h, w = shape
    labs = C.label_normals(contours, (w, h), constraint)
    return {"constraint": constraint,
            "all": [{"orientations": list(l.orientations), "consistent": l.consistent} for l in labs],
            "consistent_count": sum(l.consistent for l in labs)}


def cmd_rings(args, run: Run):
    f, cx, kind = _source(args, run)
    rings, rejected = C.extremal_rings(f, cx, kind=kind, report=True, **_contour_kw(args))
    doc = M.complex_to_dict(cx)
    doc["rings"] = [C.ring_to_dict(r) for r in rings]
    doc["rejected"] = [{"contour": C.contour_to_dict(r.contour), "reason": r.reason} for r in rejected]
    doc["labelings"] = _labelings_doc([r.contour for r in rings], f.shape, args.constraint)
    run.write_text(args.out, dumps_json(doc))
    print(len(rings))


def cmd_genericity(args, run: Run):
    h = run.read(args.input)
    slant = F.slant_of_height(h)
    cx = _complex(slant, _default_eps(slant, args.epsilon, 0.01))
    cs = C.critical_contours(slant, cx, kind="ridge", **_contour_kw(args))
    out = []
    for c in cs:
        try:
            g = C.genericity_ratio(slant, c, args.probe)
        except C.ContourError as e:
            out.append({"arc_ids": list(c.arc_ids), "error": str(e)})
            continue
        out.append({"arc_ids": list(c.arc_ids), "closed": c.closed, "sigma_xx": g.sigma_xx,
                    "sigma_y": g.sigma_y, "ratio": None if not np.isfinite(g.ratio) else g.ratio})
    run.write_text(args.out, dumps_json({"genericity": out}))


def cmd_gaussarea(args, run: Run):
    h = run.read(args.input)
    normals = F.normals_from_height(h)
    doc = {}
    area, skipped = C.gauss_map_area_detail(normals, np.ones(h.shape, bool), h.spacing)
    doc["domain"] = {"area": area, "skipped_border_pixels": skipped}
    if args.rings:
        slant = F.slant_of_height(h)
        cx = _complex(slant, _default_eps(slant, args.epsilon, 0.01))
        rows = []
        for r in C.extremal_rings(slant, cx):
            a, s = C.gauss_map_area_detail(normals, r.enclosed, h.spacing)
            rows.append({"interior_extremum": r.interior_extremum, "area": a, "skipped_border_pixels": s})
        doc["rings"] = rows
    run.write_text(args.out, dumps_json(doc))


def _orientation(args, run: Run):
    img = run.read(args.input)
    return FL.orientation_field(img, args.inner, args.outer, args.energy_floor)


def cmd_flow(args, run: Run):
    o = _orientation(args, run)
    p = args.out_prefix
    run.write_field(p + "_theta.fgrid", F.ScalarField(np.where(o.defined, o.theta, -1.0)))
    run.write_field(p + "_compression.fgrid", F.ScalarField(np.where(o.defined, o.compression, 0.0)))
    for name, img in zip(("theta", "compression", "validity"), FL.orientation_images(o)):
        run.write_field(f"{p}_{name}.pgm", F.ScalarField(img))


def cmd_loops(args, run: Run):
    o = _orientation(args, run)
    loops = FL.closed_flow_loops(o, args.threshold, args.step, args.max_steps)
    run.write_text(args.out, dumps_json({"flow_loops": [FL.loop_to_dict(c) for c in loops]}))
    print(len(loops))


def cmd_flatten(args, run: Run):
    f = run.read(args.input)
    cx = _complex(f, _default_eps(f, args.epsilon, 0.0))
    run.write_field(args.out, R.flatten(f, cx, args.dilation))


def cmd_inpaint(args, run: Run):
    f = run.read(args.input)
    cx = _complex(f, _default_eps(f, args.epsilon, 0.0))
    res = R.reconstruct(f, cx, args.dilation, tolerance=args.tolerance, max_iterations=args.max_iterations)
    run.write_field(args.out, res.field)
    if args.mask_out:
        run.write_field(args.mask_out, F.ScalarField(R.skeleton_mask(cx, args.dilation).astype(float)))
    if not res.converged:
        run.finish()
        raise R.ConvergenceError(f"no convergence after {res.iterations} sweeps (last update {res.max_update:.3g})")


def cmd_hist(args, run: Run):
    fields = [run.read(p) for p in args.input]
    hists = R.compare_histograms(fields, args.bins) if len(fields) > 1 else [R.gradient_histogram(fields[0], args.bins)]
    for p, (edges, counts) in zip(args.input, hists):
        run.write_text(f"{args.out_prefix}{Path(p).stem}.csv", histogram_csv(edges, counts))


def _load_contours(doc) -> list:
    if "contours" in doc:
        items = doc["contours"]
    elif "rings" in doc:
        items = [r["contour"] for r in doc["rings"]]
    else:
        raise UsageError("JSON has neither 'contours' nor 'rings'")
    return [C.Contour(d["arc_ids"], np.array(d["polyline"], dtype=np.int64).reshape(-1, 2),
                      d["steepness"], d["closed"], d.get("kind", "ridge")) for d in items]


def cmd_labelings(args, run: Run):
    doc = run.read_json(args.input)
    cs = _load_contours(doc)
    shape = (doc["shape"]["height"], doc["shape"]["width"])
    run.write_text(args.out, dumps_json({"labelings": _labelings_doc(cs, shape, args.constraint)}))


def cmd_stimulus(args, run: Run):
    f = F.gen_ring_stimulus((args.width, args.height), ring_radius=args.ring_radius, polarity=args.polarity)
    run.write_field(args.out, f)


def cmd_synth(args, run: Run):
    doc = run.read_json(args.strokes)
    strokes = [(np.array(s["polyline"], dtype=float), s["intensity"]) for s in doc["strokes"]]
    f = R.contour_synthesis(strokes, (args.height, args.width), args.background, args.blur, args.contrast)
    run.write_field(args.out, f)


def cmd_compare(args, run: Run):
    a = _load_contours(run.read_json(args.a))
    b = _load_contours(run.read_json(args.b))
    d = C.contour_distance(a, b)
    print(repr(float(d)))
    if args.out:
        run.write_text(args.out, dumps_json({"hausdorff": d}))


def cmd_overlay(args, run: Run):
    base = run.read(args.base)
    lo, hi = float(base.values.min()), float(base.values.max())
    shown = F.ScalarField((base.values - lo) / (hi - lo) if hi > lo else np.zeros(base.shape))
    layers = {}
    if args.contours:
        doc = run.read_json(args.contours)
        for d in doc.get("contours", []):
            layers.setdefault("closed-contour" if d["closed"] else "open-contour", []).append(
                (np.array(d["polyline"]), d["closed"]))
        for r in doc.get("rings", []):
            layers.setdefault("ring", []).append((np.array(r["contour"]["polyline"]), True))
        for r in doc.get("rejected", []):
            layers.setdefault("rejected", []).append((np.array(r["contour"]["polyline"]), True))
    if args.loops:
        doc = run.read_json(args.loops)
        layers["loop"] = [(np.array(d["polyline"]), True) for d in doc.get("flow_loops", [])]
    run.write_text(args.out, export_overlay_svg(shown, layers))


# -- parser -------------------------------------------------------------------------

def _contour_opts(p, slant_flag=True):
    p.add_argument("--input", required=True, help="FGRID or PGM field")
    if slant_flag:
        p.add_argument("--slant", action="store_true",
                       help="treat the input as a height field and analyse its slant (default kind ridge)")
        p.add_argument("--kind", choices=["ridge", "valley", "both"], default=None,
                       help="arc kind; default ridge with --slant, valley for images")
    p.add_argument("--epsilon", type=float, default=None,
                   help="simplification threshold (default 0.01 x field range)")
    p.add_argument("--threshold", type=float, default=None,
                   help="steepness threshold (default: median of arc scores, at least 0.25 x the maximum)")
    p.add_argument("--probe", type=float, default=2.0, help="probe half-width in pixels (default 2)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="extremal", description=__doc__.splitlines()[0])
    ap.add_argument("--manifest", default=None, help="manifest path (default: <first output>.manifest.json)")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--manifest", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
        return p

    p = add("gen", cmd_gen, "generate a height field or blob")
    p.add_argument("--kind", choices=["sigmoid", "cobblestone", "blob", "feature-blob"], required=True)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--radius", type=float, default=None, help="bump radius in pixels (default 48, cobblestone 24)")
    p.add_argument("--bump-height", type=float, default=None, help="bump height (default 32, cobblestone 16)")
    p.add_argument("--softness", type=float, default=None, help="sigmoid width (default radius/4)")
    p.add_argument("--base-tilt", type=float, default=0.0, help="base plane tilt in degrees")
    p.add_argument("--bend", type=float, default=0.0)
    p.add_argument("--features", type=int, default=5, help="feature-blob: number of features")
    p.add_argument("--noise", type=float, default=0.0, help="uniform noise amplitude")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = add("render", cmd_render, "render a height field")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", choices=["lambertian", "specular", "glass-texture"], default="lambertian")
    p.add_argument("--light", default="0,0,1", help="light direction x,y,z (normalised)")
    p.add_argument("--ambient", type=float, default=0.0)
    p.add_argument("--shininess", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=None, help="texture seed (glass-texture)")
    p.add_argument("--out", required=True)

    p = add("msc", cmd_msc, "Morse-Smale complex as JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--out", required=True)

    p = add("simplify", cmd_simplify, "persistence-simplified field")
    p.add_argument("--input", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--json", default=None, help="also write the simplified complex")

    p = add("contours", cmd_contours, "critical contours")
    _contour_opts(p)
    p.add_argument("--out", required=True)

    p = add("rings", cmd_rings, "extremal rings with labelings")
    _contour_opts(p)
    p.add_argument("--constraint", choices=["none", "convex-rim"], default="convex-rim")
    p.add_argument("--out", required=True)

    p = add("genericity", cmd_genericity, "genericity ratio of slant contours of a height field")
    _contour_opts(p, slant_flag=False)
    p.add_argument("--out", required=True)

    p = add("gaussarea", cmd_gaussarea, "Gauss map area of a height field")
    p.add_argument("--input", required=True)
    p.add_argument("--rings", action="store_true", help="also report the area inside each slant ring")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--out", required=True)

    for name, func, help_ in (("flow", cmd_flow, "orientation and compression maps"),
                              ("loops", cmd_loops, "closed flow loops")):
        p = add(name, func, help_)
        p.add_argument("--input", required=True)
        p.add_argument("--inner", type=float, default=1.5)
        p.add_argument("--outer", type=float, default=6.0)
        p.add_argument("--energy-floor", type=float, default=None, help="default 1e-4 x range^2")
        if name == "flow":
            p.add_argument("--out-prefix", required=True)
        else:
            p.add_argument("--threshold", type=float, default=None, help="default half the peak compression")
            p.add_argument("--step", type=float, default=1.0)
            p.add_argument("--max-steps", type=int, default=None, help="default 4 x (width + height)")
            p.add_argument("--out", required=True)

    for name, func, help_ in (("flatten", cmd_flatten, "region-mean flattening"),
                              ("inpaint", cmd_inpaint, "flatten and harmonic inpainting")):
        p = add(name, func, help_)
        p.add_argument("--input", required=True)
        p.add_argument("--epsilon", type=float, default=None, help="simplification threshold (default 0)")
        p.add_argument("--dilation", type=int, default=1 if name == "inpaint" else 0)
        p.add_argument("--out", required=True)
        if name == "inpaint":
            p.add_argument("--tolerance", type=float, default=None, help="default 1e-6 x range")
            p.add_argument("--max-iterations", type=int, default=None, help="default 20 x (width + height)")
            p.add_argument("--mask-out", default=None, help="also write the skeleton mask")

    p = add("hist", cmd_hist, "gradient-magnitude histograms (shared edges for several inputs)")
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--bins", type=int, default=32)
    p.add_argument("--out-prefix", required=True, help="CSV path prefix; the input stem is appended")

    p = add("labelings", cmd_labelings, "enumerate normal labelings of contours in a JSON file")
    p.add_argument("--input", required=True)
    p.add_argument("--constraint", choices=["none", "convex-rim"], default="none")
    p.add_argument("--out", required=True)

    p = add("stimulus", cmd_stimulus, "crater ring stimulus")
    p.add_argument("--polarity", choices=["a", "b"], default="a")
    p.add_argument("--ring-radius", type=float, default=60.0)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--out", required=True)

    p = add("synth", cmd_synth, "blurred stroke drawing")
    p.add_argument("--strokes", required=True, help='JSON {"strokes": [{"polyline": [[x, y], ...], "intensity": "dark"|"bright"}]}')
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--background", type=float, default=0.5)
    p.add_argument("--contrast", type=float, default=0.5)
    p.add_argument("--blur", type=float, default=2.0)
    p.add_argument("--out", required=True)

    p = add("compare-contours", cmd_compare, "Hausdorff distance between two contour JSON files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--out", default=None)

    p = add("overlay", cmd_overlay, "SVG overlay of contours, rings and loops")
    p.add_argument("--base", required=True)
    p.add_argument("--contours", default=None, help="JSON from contours or rings")
    p.add_argument("--loops", default=None, help="JSON from loops")
    p.add_argument("--out", required=True)
    return ap


def run(argv) -> int:
    try:
        args = build_parser().parse_args(argv)
        r = Run(args.cmd, args)
        args.func(args, r)
        r.finish()
        return 0
    except R.ConvergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (FormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (F.FieldError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()

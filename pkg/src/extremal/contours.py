"""Critical contours, extremal rings, genericity scores and normal labelings.

A contour is a chain of 1-cells of one kind: ``"ridge"`` chains follow
saddle-max arcs (the definition used on slant fields) and ``"valley"`` chains
follow saddle-min arcs. Rendered images show the slant-extremal curve as a dark
valley between brighter flanks, so image analysis usually wants ``"valley"``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field

import networkx as nx
import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .field import FieldError, NormalField, ScalarField, normals_from_slant_tilt
from .morse import MAXIMUM, MINIMUM, Arc, MsComplex

KIND_ARCS = {"ridge": "saddle-max", "valley": "saddle-min"}
SIGMA_Y_FLOOR = 1e-9
LEFT, RIGHT = "normal-points-left", "normal-points-right"


class ContourError(FieldError):
    """Degenerate or empty contour input."""


class PartitionError(FieldError):
    """Contours do not partition the domain."""


@dataclass
class Contour:
    arc_ids: list
    polyline: np.ndarray  # (n, 2) integer (x, y)
    steepness: float
    closed: bool
    kind: str = "ridge"

    def __post_init__(self):
        self.polyline = np.asarray(self.polyline, dtype=np.int64).reshape(-1, 2)
        if self.steepness < 0:
            raise ContourError("steepness must be non-negative")


@dataclass
class ExtremalRing:
    contour: Contour
    enclosed: np.ndarray  # flat pixel indices strictly inside the ring
    interior_extremum: int  # minimum for ridge rings, maximum for valley rings

    @property
    def interior_minimum(self) -> int:
        return self.interior_extremum


@dataclass
class RejectedRing:
    contour: Contour
    reason: str


@dataclass
class BumpRegion:
    ring: ExtremalRing
    polarity: str = "ambiguous"  # bump | dent | ambiguous

    def __post_init__(self):
        if self.polarity not in ("bump", "dent", "ambiguous"):
            raise FieldError(f"unknown polarity {self.polarity!r}")


@dataclass(frozen=True)
class Labeling:
    orientations: tuple
    consistent: bool


@dataclass(frozen=True)
class GenericityScore:
    sigma_xx: float
    sigma_y: float
    ratio: float


# -- sampling helpers -----------------------------------------------------------

def _tangents(poly: np.ndarray, reach: int = 2) -> np.ndarray:
    """Unit tangents from a centred difference over +-``reach`` samples."""
    n = len(poly)
    i = np.arange(n)
    a = poly[np.clip(i + reach, 0, n - 1)].astype(float)
    b = poly[np.clip(i - reach, 0, n - 1)].astype(float)
    t = a - b
    norm = np.hypot(t[:, 0], t[:, 1])
    norm[norm == 0] = 1.0
    return t / norm[:, None]


def _sample(values: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return ndimage.map_coordinates(values, [pts[:, 1], pts[:, 0]], order=1, mode="nearest")


def _inside(shape, pts: np.ndarray) -> np.ndarray:
    h, w = shape
    return (pts[:, 0] >= 0) & (pts[:, 0] <= w - 1) & (pts[:, 1] >= 0) & (pts[:, 1] <= h - 1)


def _directional(values: np.ndarray, spacing: float, poly: np.ndarray, halfwidth: float,
                 across: bool, order: int) -> np.ndarray:
    """First or second directional derivative at each interior polyline sample.

    ``across`` selects the normal direction, otherwise the tangent. A
    two-pixel polyline has no interior, so both of its ends are used with
    the segment direction. Samples whose probes leave the grid are dropped.
    """
    poly = np.asarray(poly, dtype=np.int64)
    if len(poly) < 2:
        return np.zeros(0)
    if len(poly) == 2:
        t = _tangents(poly)
        p = poly.astype(float)
    else:
        t = _tangents(poly)[1:-1]
        p = poly[1:-1].astype(float)
    d = np.stack([-t[:, 1], t[:, 0]], axis=1) if across else t
    plus, minus = p + halfwidth * d, p - halfwidth * d
    ok = _inside(values.shape, plus) & _inside(values.shape, minus)
    if not np.any(ok):
        return np.zeros(0)
    p, plus, minus = p[ok], plus[ok], minus[ok]
    h = halfwidth * spacing
    fp, fm = _sample(values, plus), _sample(values, minus)
    if order == 1:
        return (fp - fm) / (2 * h)
    return (fp - 2 * _sample(values, p) + fm) / (h * h)


def _polyline(obj) -> np.ndarray:
    return np.asarray(obj.polyline if hasattr(obj, "polyline") else obj, dtype=np.int64).reshape(-1, 2)


def arc_steepness(field: ScalarField, arc, probe_halfwidth: float = 2) -> float:
    """Median |second derivative across the arc| over its interior samples."""
    if probe_halfwidth < 1:
        raise FieldError("probe_halfwidth must be at least 1")
    poly = _polyline(arc)
    if len(poly) < 2:
        raise ContourError("arc polyline needs at least 2 samples")
    d2 = _directional(field.values, field.spacing, poly, probe_halfwidth, across=True, order=2)
    return float(np.median(np.abs(d2))) if d2.size else 0.0


def private_segment(arc, others) -> np.ndarray:
    """Prefix of ``arc`` up to the first pixel it shares with another arc.

    Discrete steepest paths that meet coincide from then on, so a connector
    arc that joins a ring runs along the ring to its extremum. Scoring only
    the unshared prefix keeps such arcs from inheriting the ring's steepness.
    ``others`` is a set of (x, y) tuples covered by the other arcs, extremum
    pixels excluded.
    """
    poly = _polyline(arc)
    for i, q in enumerate(map(tuple, poly[1:].tolist()), start=1):
        if q in others:
            return poly[:max(i + 1, 3)]
    return poly


def arc_scores(field: ScalarField, cx: MsComplex, probe_halfwidth: float = 2, kind: str | None = None) -> dict:
    """Steepness of the private segment of every arc (or only arcs of one contour kind)."""
    want = None if kind is None else KIND_ARCS[kind]
    owners = {}
    for a in cx.arcs:
        for q in map(tuple, a.polyline[1:-1].tolist()):
            owners.setdefault((a.kind, q), set()).add(a.id)
    out = {}
    for a in cx.arcs:
        if (want is not None and a.kind != want) or len(a.polyline) < 2:
            continue
        shared = {q for (k, q), ids in owners.items() if k == a.kind and ids - {a.id}}
        out[a.id] = arc_steepness(field, private_segment(a, shared), probe_halfwidth)
    return out


# -- chains -----------------------------------------------------------------------

def _check_kind(kind: str):
    if kind not in ("ridge", "valley", "both"):
        raise FieldError(f"kind must be ridge, valley or both, got {kind!r}")


def _arc_nodes(cx: MsComplex, arc: Arc):
    # arcs into the virtual minimum end on the boundary; give each its own end node
    end = ("edge", arc.id) if cx.critical(arc.extremum).virtual else arc.extremum
    return arc.saddle, end


def _merge_polylines(cx: MsComplex, steps) -> np.ndarray:
    """Join arcs traversed as (arc, forward) into one pixel path."""
    pieces = []
    for arc, forward in steps:
        p = arc.polyline if forward else arc.polyline[::-1]
        if pieces and len(p) and np.array_equal(pieces[-1][-1], p[0]):
            p = p[1:]
        pieces.append(p)
    return np.concatenate(pieces) if pieces else np.zeros((0, 2), np.int64)


def _chains(cx: MsComplex, arcs: list):
    """Split a set of arcs into closed cycles (minimum cycle basis) and maximal open chains."""
    by_id = {a.id: a for a in arcs}
    g = nx.Graph()
    for a in arcs:
        u, v = _arc_nodes(cx, a)
        mid = ("arc", a.id)
        w = max(len(a.polyline) - 1, 1) / 2
        g.add_edge(u, mid, weight=w)
        g.add_edge(mid, v, weight=w)
    cycles = []
    on_cycle = set()
    for nodes in sorted(nx.minimum_cycle_basis(g, weight="weight"), key=lambda c: sorted(map(str, c))):
        sub = g.subgraph(nodes)
        if any(d != 2 for _, d in sub.degree()):
            continue  # chorded basis element; not a simple ring
        start = min((n for n in nodes if not isinstance(n, tuple)), default=None)
        if start is None:
            continue
        order = [start]
        prev, cur = None, start
        while True:
            nxt = sorted((n for n in sub.neighbors(cur) if n != prev), key=str)[0]
            if nxt == start:
                break
            prev, cur = cur, nxt
            order.append(cur)
        steps = []
        for i in range(1, len(order), 2):
            arc = by_id[order[i][1]]
            steps.append((arc, _arc_nodes(cx, arc)[0] == order[i - 1]))
        cycles.append(steps)
        on_cycle.update(a.id for a, _ in steps)

    # remaining arcs: walk maximal chains between nodes of degree != 2
    rest = [a for a in arcs if a.id not in on_cycle]
    inc = {}
    for a in rest:
        for n in _arc_nodes(cx, a):
            inc.setdefault(n, []).append(a)
    used = set()
    chains = []

    def walk(node, arc):
        steps = []
        while True:
            used.add(arc.id)
            u, v = _arc_nodes(cx, arc)
            forward = u == node
            steps.append((arc, forward))
            node = v if forward else u
            nxt = [b for b in inc[node] if b.id not in used]
            if len(inc[node]) != 2 or not nxt:
                return steps
            arc = nxt[0]

    ends = sorted((n for n in inc if len(inc[n]) != 2), key=str)
    for n in ends:
        for a in sorted(inc[n], key=lambda a: a.id):
            if a.id not in used:
                chains.append(walk(n, a))
    for a in sorted(rest, key=lambda a: a.id):  # cycles left over from chorded components
        if a.id not in used:
            chains.append(walk(_arc_nodes(cx, a)[0], a))
    return cycles, chains


def default_threshold(scores: dict, percentile: float = 50.0, relative_floor: float = 0.25) -> float:
    vals = np.asarray(list(scores.values()), dtype=float)
    if vals.size == 0:
        return 0.0
    return float(max(np.percentile(vals, percentile), relative_floor * vals.max()))


def critical_contours(field: ScalarField, cx: MsComplex, steepness_threshold: float | None = None,
                      probe_halfwidth: float = 2, kind: str = "ridge",
                      percentile: float = 50.0, relative_floor: float = 0.25) -> list:
    """Chains of steep 1-cells.

    Every arc of the requested kind is scored with :func:`arc_steepness`;
    arcs below the threshold are dropped and the rest are assembled into
    closed contours (cycles) and maximal open chains. When
    ``steepness_threshold`` is None it is the ``percentile`` of the scores of
    all arcs of the complex, whatever their kind, raised to at least
    ``relative_floor`` times the steepest score. The floor matters on clean
    synthetic scenes, where flat areas produce many arcs of score ~0 and the
    percentile alone lands in that noise.
    """
    _check_kind(kind)
    if kind == "both":
        return (critical_contours(field, cx, steepness_threshold, probe_halfwidth, "ridge", percentile, relative_floor)
                + critical_contours(field, cx, steepness_threshold, probe_halfwidth, "valley", percentile,
                                    relative_floor))
    scores = arc_scores(field, cx, probe_halfwidth)
    if not scores:
        return []
    thr = default_threshold(scores, percentile, relative_floor) if steepness_threshold is None \
        else float(steepness_threshold)
    keep = [a for a in cx.arcs if a.kind == KIND_ARCS[kind] and a.id in scores and scores[a.id] >= thr]
    cycles, chains = _chains(cx, keep)
    out = []
    for steps, closed in [(c, True) for c in cycles] + [(c, False) for c in chains]:
        ids = [a.id for a, _ in steps]
        out.append(Contour(ids, _merge_polylines(cx, steps), min(scores[i] for i in ids), closed, kind))
    return out


# -- rings ------------------------------------------------------------------------

def rasterize(polyline: np.ndarray, shape) -> np.ndarray:
    """Boolean mask of a polyline, with straight segments between its vertices."""
    h, w = shape
    mask = np.zeros((h, w), dtype=bool)
    poly = _polyline(polyline)
    if len(poly) == 0:
        return mask
    pts = [poly[:1]]
    for a, b in zip(poly[:-1], poly[1:]):
        n = int(np.max(np.abs(b - a)))
        if n > 1:
            t = np.linspace(0, 1, n + 1)[1:, None]
            pts.append(np.rint(a + t * (b - a)).astype(np.int64))
        else:
            pts.append(b[None])
    p = np.concatenate(pts)
    ok = (p[:, 0] >= 0) & (p[:, 0] < w) & (p[:, 1] >= 0) & (p[:, 1] < h)
    mask[p[ok, 1], p[ok, 0]] = True
    return mask


def enclosed_pixels(polyline: np.ndarray, shape) -> np.ndarray:
    """Mask of pixels a closed curve separates from the grid border (4-connected flood)."""
    curve = rasterize(polyline, shape)
    labels, _ = ndimage.label(~curve)
    border = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    outside = np.isin(labels, border[border > 0])
    return ~curve & ~outside


def _validate_ring(cx: MsComplex, contour: Contour):
    """Return (enclosed flat indices, interior extremum id) or a rejection reason string."""
    if not contour.closed:
        return "not closed"
    inside = enclosed_pixels(contour.polyline, cx.shape)
    if not inside.any():
        return "encloses no pixels"
    _, ncomp = ndimage.label(inside)
    if ncomp != 1:
        return f"not a simple closed curve ({ncomp} enclosed components)"
    want, avoid = (MINIMUM, MAXIMUM) if contour.kind == "ridge" else (MAXIMUM, MINIMUM)
    hits = {MINIMUM: [], MAXIMUM: []}
    for c in cx.criticals:
        if c.virtual or c.index not in hits:
            continue
        x, y = c.position
        if inside[y, x]:
            hits[c.index].append(c.id)
    if len(hits[want]) != 1:
        return f"encloses {len(hits[want])} interior {'minima' if want == MINIMUM else 'maxima'}"
    if hits[avoid]:
        return f"encloses {len(hits[avoid])} off-ring {'maxima' if avoid == MAXIMUM else 'minima'}"
    return np.flatnonzero(inside.ravel()), hits[want][0]


def validate_rings(cx: MsComplex, contours: list):
    """Split closed contours into accepted rings and rejections with reasons."""
    rings, rejected = [], []
    for c in contours:
        if not c.closed:
            continue
        res = _validate_ring(cx, c)
        if isinstance(res, str):
            rejected.append(RejectedRing(c, res))
        else:
            rings.append(ExtremalRing(c, res[0], res[1]))
    return rings, rejected


def extremal_rings(slant: ScalarField, cx: MsComplex, steepness_threshold: float | None = None,
                   probe_halfwidth: float = 2, kind: str = "ridge", percentile: float = 50.0,
                   relative_floor: float = 0.25, report: bool = False):
    """Closed slant-extremal contours that pass the Jordan and interior-extremum checks.

    With ``report=True`` returns ``(rings, rejected)`` instead of only the rings.
    """
    contours = critical_contours(slant, cx, steepness_threshold, probe_halfwidth, kind, percentile, relative_floor)
    rings, rejected = validate_rings(cx, contours)
    return (rings, rejected) if report else rings


def bump_regions(rings: list, labeling: Labeling | None = None) -> list:
    """Wrap rings as bump regions; polarity stays ambiguous without a labeling."""
    out = []
    for i, r in enumerate(rings):
        pol = "ambiguous"
        if labeling is not None and labeling.consistent and i < len(labeling.orientations):
            # the normal points away from a bump's interior
            pol = "bump" if labeling.orientations[i] == _outward(r.contour) else "dent"
        out.append(BumpRegion(r, pol))
    return out


def _outward(contour: Contour) -> str:
    """Which side (left/right of travel) is outside a closed contour."""
    p = contour.polyline.astype(float)
    x, y = p[:, 0], p[:, 1]
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    # image coordinates have y pointing down: positive shoelace area is clockwise on screen
    return LEFT if area > 0 else RIGHT


# -- genericity and Gauss map -----------------------------------------------------

def genericity_ratio(slant: ScalarField, contour, probe_halfwidth: float = 2) -> GenericityScore:
    poly = _polyline(contour)
    if len(poly) < 3:
        raise ContourError("contour needs at least 3 samples")
    d2 = _directional(slant.values, slant.spacing, poly, probe_halfwidth, across=True, order=2)
    d1 = _directional(slant.values, slant.spacing, poly, probe_halfwidth, across=False, order=1)
    if d2.size == 0:
        raise ContourError("contour too close to the boundary for the probe width")
    sxx = float(np.median(np.abs(d2)))
    sy = float(np.median(np.abs(d1)))
    ratio = float("inf") if sy < SIGMA_Y_FLOOR else sxx * sxx / (sy * sy)
    return GenericityScore(sxx, sy, ratio)


def _region_mask(region, shape) -> np.ndarray:
    r = np.asarray(region)
    if r.dtype == bool:
        if r.shape != tuple(shape):
            raise FieldError("region mask shape does not match the normal field")
        return r
    mask = np.zeros(shape, dtype=bool)
    if r.ndim == 2 and r.shape[1] == 2:
        mask[r[:, 1], r[:, 0]] = True
    else:
        mask.ravel()[r.astype(np.int64).ravel()] = True
    return mask


def gauss_map_area_detail(normals: NormalField, region, spacing: float = 1.0):
    """(area in steradians, number of region pixels skipped at the border)."""
    n = normals.normals
    mask = _region_mask(region, n.shape[:2])
    if not mask.any():
        raise FieldError("region is empty")
    interior = np.zeros_like(mask)
    interior[1:-1, 1:-1] = True
    skipped = int(np.sum(mask & ~interior))
    nx_ = (n[1:-1, 2:] - n[1:-1, :-2]) / (2 * spacing)
    ny_ = (n[2:, 1:-1] - n[:-2, 1:-1]) / (2 * spacing)
    # |N . (N_x x N_y)| is |det| of the differential restricted to the tangent plane
    det = np.abs(np.einsum("ijk,ijk->ij", n[1:-1, 1:-1], np.cross(nx_, ny_)))
    area = float(np.sum(det[mask[1:-1, 1:-1]]) * spacing * spacing)
    return area, skipped


def gauss_map_area(normals: NormalField, region, spacing: float = 1.0) -> float:
    return gauss_map_area_detail(normals, region, spacing)[0]


def hemisphere_normals(size: int) -> tuple:
    """Unit hemisphere seen from above on [-1, 1]^2; (normals, spacing).

    Outside the disk the normals continue horizontally (the silhouette), so the
    Gauss image of the whole grid is exactly the upper hemisphere.
    """
    sp = 2.0 / size
    c = (np.arange(size) + 0.5) * sp - 1
    X, Y = np.meshgrid(c, c)
    r = np.hypot(X, Y)
    z = np.sqrt(np.clip(1 - r * r, 0, None))
    n = np.stack([X, Y, z], axis=-1)
    out = r >= 1
    n[out] = np.stack([X / r, Y / r, np.zeros_like(r)], axis=-1)[out]
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    return NormalField(n), sp


def taylor_patch_normals(kind: str = "untwisted", size: int = 129, half_width: float = 0.4, c1: float = 0.6,
                         c2: float = 0.1, sxx: float = 5.0) -> tuple:
    """Normals of a local patch with slant ``c1 + c2*y + sxx*x**2`` around an extremal curve.

    The curve runs along y through x = 0. The untwisted patch has tilt ``x``
    and the twisted one tilt ``y``; both share the slant data exactly.
    Returns (NormalField, spacing).
    """
    if kind not in ("untwisted", "twisted"):
        raise FieldError("kind must be 'untwisted' or 'twisted'")
    sp = 2 * half_width / (size - 1)
    c = np.linspace(-half_width, half_width, size)
    X, Y = np.meshgrid(c, c)
    slant = np.clip(c1 + c2 * Y + sxx * X * X, 0.0, np.pi / 2)
    tilt = X if kind == "untwisted" else Y
    return NormalField(normals_from_slant_tilt(slant, tilt)), sp


# -- labelings --------------------------------------------------------------------

def _side_regions(contour: Contour, labels: np.ndarray, offset: float = 2.0):
    """Most common region label to the left and to the right of travel."""
    poly = contour.polyline
    if len(poly) < 2:
        raise PartitionError("contour too short to have sides")
    t = _tangents(poly)
    # with y down, the left of travel direction (tx, ty) is (ty, -tx)
    left = np.stack([t[:, 1], -t[:, 0]], axis=1)
    out = []
    for sgn in (1, -1):
        pts = np.rint(poly + sgn * offset * left).astype(np.int64)
        ok = _inside(labels.shape, pts)
        lab = labels[pts[ok, 1], pts[ok, 0]]
        lab = lab[lab > 0]
        if lab.size == 0:
            raise PartitionError("could not find a region beside a contour")
        out.append(int(np.bincount(lab).argmax()))
    return out[0], out[1]


def check_partition(contours: list, domain, tol: float = 1.5):
    """Raise PartitionError unless every open contour ends on the border or another contour."""
    w, h = domain
    for i, c in enumerate(contours):
        if c.closed:
            continue
        others = [o.polyline for j, o in enumerate(contours) if j != i and len(o.polyline)]
        tree = cKDTree(np.concatenate(others)) if others else None
        for end in (c.polyline[0], c.polyline[-1]):
            x, y = end
            on_border = min(x, y, w - 1 - x, h - 1 - y) <= tol
            on_other = tree is not None and tree.query(end)[0] <= tol
            if not (on_border or on_other):
                raise PartitionError(f"contour {i} ends at ({x}, {y}) away from the border and other contours")


def label_normals(contours: list, domain, boundary_constraint: str = "none") -> list:
    """Enumerate all 2^N normal-side labelings of N contours with consistency flags.

    The normal along a contour points to one fixed side; the side it points to
    is the lower one. Each labeling therefore orders the two regions beside
    every contour. A labeling is consistent when these orders admit no cycle.
    The ``convex-rim`` constraint adds an outward-pointing normal on the
    domain border: every region touching the border is higher than the
    outside.
    """
    if boundary_constraint not in ("none", "convex-rim"):
        raise FieldError("boundary_constraint must be 'none' or 'convex-rim'")
    if not contours:
        return [Labeling((), True)]
    w, h = domain
    check_partition(contours, domain)
    mask = np.zeros((h, w), dtype=bool)
    for c in contours:
        mask |= rasterize(c.polyline, (h, w))
    labels, nreg = ndimage.label(~mask)
    sides = [_side_regions(c, labels) for c in contours]
    rim = set()
    if boundary_constraint == "convex-rim":
        rim = set(np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]])).tolist()) - {0}
    out = []
    for bits in itertools.product((LEFT, RIGHT), repeat=len(contours)):
        g = nx.DiGraph()
        g.add_nodes_from(range(1, nreg + 1))
        for (left, right), b in zip(sides, bits):
            hi, lo = (right, left) if b == LEFT else (left, right)
            g.add_edge(hi, lo)
        for r in rim:
            g.add_edge(r, "outside")
        out.append(Labeling(bits, nx.is_directed_acyclic_graph(g)))
    return out


# -- comparison -------------------------------------------------------------------

def contour_distance(a: list, b: list) -> float:
    """Symmetric Hausdorff distance between the pixel sets of two contour lists."""
    pa = [_polyline(c) for c in a]
    pb = [_polyline(c) for c in b]
    pa = np.concatenate(pa) if pa else np.zeros((0, 2))
    pb = np.concatenate(pb) if pb else np.zeros((0, 2))
    if len(pa) == 0 or len(pb) == 0:
        raise ContourError("contour_distance needs two non-empty contour lists")
    da, _ = cKDTree(pb).query(pa)
    db, _ = cKDTree(pa).query(pb)
    return float(max(da.max(), db.max()))


def contour_to_dict(c: Contour) -> dict:
    return {"arc_ids": list(c.arc_ids), "kind": c.kind, "closed": c.closed,
            "steepness": round(float(c.steepness), 12), "polyline": c.polyline.tolist()}


def ring_to_dict(r: ExtremalRing) -> dict:
    return {"contour": contour_to_dict(r.contour), "interior_extremum": r.interior_extremum,
            "enclosed_count": int(r.enclosed.size)}

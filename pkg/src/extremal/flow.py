"""Structure-tensor orientation fields and closed integral curves of the flow."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .field import FieldError, ScalarField

LAMBDA_FLOOR = 1e-12
ENERGY_FLOOR_FRACTION = 1e-4
CLOSURE_TURN_TOL = 0.3
WINDING_TOL = 0.05


@dataclass(frozen=True, eq=False)
class TensorField:
    jxx: np.ndarray
    jxy: np.ndarray
    jyy: np.ndarray
    inner_scale: float
    outer_scale: float
    value_range: float = 0.0  # range of the source image, for the default energy floor

    def eigenvalues(self):
        """(larger, smaller) eigenvalue maps."""
        tr = 0.5 * (self.jxx + self.jyy)
        disc = np.sqrt(0.25 * (self.jxx - self.jyy) ** 2 + self.jxy ** 2)
        return tr + disc, tr - disc


@dataclass(frozen=True, eq=False)
class OrientationField:
    theta: np.ndarray  # flow direction in [0, pi), NaN where undefined
    compression: np.ndarray  # >= 1, NaN where undefined

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.theta)

    @property
    def shape(self):
        return self.theta.shape


@dataclass
class FlowCurve:
    polyline: np.ndarray  # (n, 2) float (x, y)
    winding: float
    closed: bool
    reason: str  # closed | undefined | boundary | max-steps


def structure_tensor(image: ScalarField, inner_scale: float = 1.5, outer_scale: float = 6.0) -> TensorField:
    if not 0 < inner_scale < outer_scale:
        raise FieldError("need 0 < inner_scale < outer_scale")
    if outer_scale > min(image.shape) / 4:
        raise FieldError("smoothing scale exceeds a quarter of the image side")
    f = image.values
    # gaussian_filter truncates at 4 sigma and normalises the kernel to unit sum
    gx = ndimage.gaussian_filter(f, inner_scale, order=(0, 1), mode="nearest") / image.spacing
    gy = ndimage.gaussian_filter(f, inner_scale, order=(1, 0), mode="nearest") / image.spacing
    smooth = lambda a: ndimage.gaussian_filter(a, outer_scale, mode="nearest")
    return TensorField(smooth(gx * gx), smooth(gx * gy), smooth(gy * gy), inner_scale, outer_scale,
                       float(np.ptp(f)))


def orientation_compression(t: TensorField, energy_floor: float | None = None) -> OrientationField:
    """Flow orientation (perpendicular to the dominant gradient direction) and eigenvalue ratio."""
    if energy_floor is None:
        energy_floor = ENERGY_FLOOR_FRACTION * t.value_range ** 2
    if energy_floor < 0:
        raise FieldError("energy_floor must be non-negative")
    l1, l2 = t.eigenvalues()
    # principal eigenvector angle is atan2(2 jxy, jxx - jyy) / 2; the flow is perpendicular
    phi = 0.5 * np.arctan2(2 * t.jxy, t.jxx - t.jyy)
    theta = np.mod(phi + np.pi / 2, np.pi)
    ok = l1 > energy_floor
    comp = l1 / np.maximum(l2, LAMBDA_FLOOR)
    return OrientationField(np.where(ok, theta, np.nan), np.where(ok, comp, np.nan))


def orientation_field(image: ScalarField, inner_scale: float = 1.5, outer_scale: float = 6.0,
                      energy_floor: float | None = None) -> OrientationField:
    return orientation_compression(structure_tensor(image, inner_scale, outer_scale), energy_floor)


def uniform_orientation(shape, theta: float) -> OrientationField:
    return OrientationField(np.full(shape, float(theta) % np.pi), np.full(shape, 1.0))


def concentric_orientation(shape, center) -> OrientationField:
    """Orientation tangent to circles around ``center`` (undefined at the centre pixel)."""
    h, w = shape
    y, x = np.mgrid[0:h, 0:w].astype(float)
    dx, dy = x - center[0], y - center[1]
    theta = np.mod(np.arctan2(dy, dx) + np.pi / 2, np.pi)
    theta[np.hypot(dx, dy) < 0.5] = np.nan
    return OrientationField(theta, np.where(np.isfinite(theta), 1.0, np.nan))


# -- tracing ----------------------------------------------------------------------

class _Sampler:
    """Bilinear interpolation of the doubled-angle vector (cos 2theta, sin 2theta)."""

    def __init__(self, o: OrientationField):
        self.h, self.w = o.shape
        ok = o.defined
        th = np.where(ok, o.theta, 0.0)
        self.c = np.where(ok, np.cos(2 * th), 0.0).tolist()
        self.s = np.where(ok, np.sin(2 * th), 0.0).tolist()
        self.ok = ok.tolist()

    def direction(self, x: float, y: float, prev):
        """Unit direction at (x, y) with the sign closest to ``prev``; None if undefined or outside."""
        if not (0 <= x <= self.w - 1 and 0 <= y <= self.h - 1):
            return None
        x0, y0 = min(int(x), self.w - 2), min(int(y), self.h - 2)
        fx, fy = x - x0, y - y0
        c = s = 0.0
        for yy, xx, wgt in ((y0, x0, (1 - fx) * (1 - fy)), (y0, x0 + 1, fx * (1 - fy)),
                            (y0 + 1, x0, (1 - fx) * fy), (y0 + 1, x0 + 1, fx * fy)):
            if wgt == 0.0:
                continue
            if not self.ok[yy][xx]:
                return None
            c += wgt * self.c[yy][xx]
            s += wgt * self.s[yy][xx]
        if c * c + s * s < 1e-24:
            return None
        th = 0.5 * math.atan2(s, c)
        dx, dy = math.cos(th), math.sin(th)
        if prev is not None and dx * prev[0] + dy * prev[1] < 0:
            dx, dy = -dx, -dy
        return dx, dy


def _turn(a, b) -> float:
    return math.atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1])


def integral_curve(o: OrientationField, seed, step: float = 1.0, max_steps: int = 2000,
                   initial=None, _sampler: _Sampler | None = None) -> FlowCurve:
    """Trace the line field from ``seed`` with fixed-step RK4.

    The orientation sign is lifted at every evaluation to minimise turning.
    Tracing stops at undefined pixels, the domain boundary, ``max_steps``, or
    on closure: back within one step of the seed with total turning within
    0.3 rad of +-2 pi. ``winding`` is the total turning over 2 pi, including
    the final turn back onto the starting direction for closed curves.
    """
    if step <= 0:
        raise FieldError("step must be positive")
    sampler = _sampler or _Sampler(o)
    x, y = float(seed[0]), float(seed[1])
    d0 = sampler.direction(x, y, initial)
    if d0 is None:
        raise FieldError(f"orientation undefined at seed {tuple(seed)}")
    pts = [(x, y)]
    prev = d0
    turning = 0.0
    reason = "max-steps"
    closed = False
    for i in range(max_steps):
        k1 = prev if i == 0 else sampler.direction(x, y, prev)
        if k1 is None:
            reason = "undefined"
            break
        k2 = sampler.direction(x + 0.5 * step * k1[0], y + 0.5 * step * k1[1], k1)
        k3 = None if k2 is None else sampler.direction(x + 0.5 * step * k2[0], y + 0.5 * step * k2[1], k1)
        k4 = None if k3 is None else sampler.direction(x + step * k3[0], y + step * k3[1], k1)
        if k4 is None:
            reason = "undefined"
            nx_, ny_ = x + step * k1[0], y + step * k1[1]
            if not (0 <= nx_ <= sampler.w - 1 and 0 <= ny_ <= sampler.h - 1):
                reason = "boundary"
            break
        vx = (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6
        vy = (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6
        n = math.hypot(vx, vy)
        vx, vy = vx / n, vy / n
        turning += _turn(prev, (vx, vy))
        prev = (vx, vy)
        x, y = x + step * vx, y + step * vy
        pts.append((x, y))
        if i >= 3 and math.hypot(x - pts[0][0], y - pts[0][1]) <= step:
            total = turning + _turn(prev, d0)
            k = round(total / (2 * math.pi))
            if k in (-1, 1) and abs(total - 2 * math.pi * k) < CLOSURE_TURN_TOL:
                turning = total
                closed = True
                reason = "closed"
                break
    return FlowCurve(np.array(pts), turning / (2 * math.pi), closed, reason)


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return float(max(da.max(), db.max()))


def encloses(polyline: np.ndarray, point) -> bool:
    """Even-odd point-in-polygon test for a closed polyline."""
    x, y = float(point[0]), float(point[1])
    p = np.asarray(polyline, dtype=float)
    xa, ya = p[:, 0], p[:, 1]
    xb, yb = np.roll(xa, -1), np.roll(ya, -1)
    cross = (ya > y) != (yb > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = xa + (y - ya) * (xb - xa) / (yb - ya)
    return bool(np.sum(cross & (x < xi)) % 2)


def compression_seeds(o: OrientationField, threshold: float | None = None, size: int = 5,
                      max_seeds: int = 64) -> list:
    """Local maxima of compression above ``threshold``, strongest first.

    Only pixels whose ``size`` x ``size`` neighbourhood is fully defined are
    candidates, so a seed can always be traced. The default threshold is half
    the largest candidate compression.
    """
    traceable = ndimage.binary_erosion(o.defined, np.ones((size, size), bool), border_value=1)
    c = np.where(traceable, o.compression, -np.inf)
    if not np.isfinite(c).any():
        return []
    if threshold is None:
        threshold = 0.5 * float(np.max(c[np.isfinite(c)]))
    peak = (c == ndimage.maximum_filter(c, size=size, mode="nearest")) & (c >= threshold) & np.isfinite(c)
    ys, xs = np.nonzero(peak)
    order = np.lexsort((xs, ys, -c[ys, xs]))[:max_seeds]
    return [(int(xs[i]), int(ys[i])) for i in order]


def closed_flow_loops(o: OrientationField, compression_threshold: float | None = None, step: float = 1.0,
                      max_steps: int | None = None, max_seeds: int = 64) -> list:
    """Closed integral curves with |winding| ~ 1 traced from compression peaks, deduplicated.

    In noisy fields a curve from a seed spirals onto an attracting cycle
    instead of returning to its start. A trace that runs out of steps after
    winding at least twice is therefore retraced once from its endpoint,
    which by then lies on the cycle.
    """
    if max_steps is None:
        max_steps = 4 * (o.shape[0] + o.shape[1])
    sampler = _Sampler(o)
    loops = []
    for seed in compression_seeds(o, compression_threshold, max_seeds=max_seeds):
        curve = integral_curve(o, seed, step, max_steps, _sampler=sampler)
        if curve.reason == "max-steps" and abs(curve.winding) >= 2:
            p = curve.polyline
            curve = integral_curve(o, tuple(p[-1]), step, max_steps, initial=tuple(p[-1] - p[-2]),
                                   _sampler=sampler)
        if not curve.closed or abs(abs(curve.winding) - 1) > WINDING_TOL:
            continue
        if any(hausdorff(curve.polyline, other.polyline) < 2 * step for other in loops):
            continue
        loops.append(curve)
    return loops


def loop_to_dict(c: FlowCurve) -> dict:
    return {"winding": round(float(c.winding), 12), "closed": c.closed, "reason": c.reason,
            "polyline": np.round(c.polyline, 6).tolist()}


def orientation_images(o: OrientationField):
    """(theta, compression, validity) scaled to [0, 1] for PGM export."""
    ok = o.defined
    theta = np.where(ok, o.theta / np.pi, 0.0)
    comp = np.where(ok, o.compression, 0.0)
    logc = np.log10(np.maximum(comp, 1.0))
    top = logc.max() if logc.max() > 0 else 1.0
    return theta, logc / top, ok.astype(float)

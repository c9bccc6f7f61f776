"""Skeleton flattening, harmonic inpainting, gradient histograms and contour-drawing synthesis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .contours import rasterize
from .field import FieldError, ScalarField
from .morse import MsComplex, region_map, skeleton_pixels

STROKE_SIGN = {"bright": 1.0, "dark": -1.0}


class ConvergenceError(FieldError):
    pass


@dataclass(frozen=True, eq=False)
class InpaintResult:
    field: ScalarField
    converged: bool
    iterations: int
    max_update: float


def boundary_ring(shape) -> np.ndarray:
    m = np.zeros(shape, dtype=bool)
    m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
    return m


def _disk(radius: int) -> np.ndarray:
    r = int(radius)
    y, x = np.mgrid[-r:r + 1, -r:r + 1]
    return x * x + y * y <= r * r + r  # rounded outwards: radius 1 is the full 3x3 block


def skeleton_mask(cx: MsComplex, dilation: int = 1) -> np.ndarray:
    """Arc and critical pixels plus the domain boundary ring, dilated by ``dilation`` pixels."""
    if dilation < 0:
        raise FieldError("dilation must be non-negative")
    mask = skeleton_pixels(cx) | boundary_ring(cx.shape)
    if dilation > 0:
        mask = ndimage.binary_dilation(mask, structure=_disk(dilation))
    return mask


def flatten(image: ScalarField, cx: MsComplex, dilation: int = 0) -> ScalarField:
    """Replace every 2-cell by its mean intensity; skeleton pixels keep theirs.

    With ``dilation`` > 0 the kept set is ``skeleton_mask(cx, dilation)``, so
    the result agrees with the image on exactly the mask used for inpainting.
    Region means are taken over the pixels that get replaced.
    """
    if image.shape != tuple(cx.shape):
        raise FieldError("image and complex differ in shape")
    keep = skeleton_mask(cx, dilation) if dilation > 0 else skeleton_pixels(cx)
    labels = np.where(keep.ravel(), -1, region_map(cx).ravel())
    v = image.values.ravel()
    out = v.copy()
    inside = labels >= 0
    if inside.any():
        n = labels.max() + 1
        sums = np.bincount(labels[inside], weights=v[inside], minlength=n)
        counts = np.bincount(labels[inside], minlength=n)
        means = sums / np.maximum(counts, 1)
        # a region that is already flat keeps its value bit for bit
        lo, hi = np.full(n, np.inf), np.full(n, -np.inf)
        np.minimum.at(lo, labels[inside], v[inside])
        np.maximum.at(hi, labels[inside], v[inside])
        means = np.where(lo == hi, lo, means)
        out[inside] = means[labels[inside]]
    return ScalarField(out.reshape(image.shape), image.spacing)


def dirichlet_energy(u: np.ndarray) -> float:
    return float(np.sum(np.diff(u, axis=0) ** 2) + np.sum(np.diff(u, axis=1) ** 2))


def harmonic_inpaint(image: ScalarField, mask: np.ndarray, tolerance: float | None = None,
                     max_iterations: int | None = None, energy_trace: list | None = None) -> InpaintResult:
    """Solve Laplace's equation off ``mask`` with the masked pixels as Dirichlet data.

    Red-black Gauss-Seidel sweeps run until the largest per-pixel update drops
    below ``tolerance`` (default 1e-6 of the image range) or ``max_iterations``
    (default 20 * (width + height)) is reached. Free pixels start clipped into
    the range of the masked values, so every iterate obeys the maximum
    principle, converged or not. If ``energy_trace`` is a list, the Dirichlet
    energy after each sweep is appended to it.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != image.shape:
        raise FieldError("mask and image differ in shape")
    if not mask[boundary_ring(image.shape)].all():
        raise FieldError("mask must cover the domain boundary")
    v = image.values
    if tolerance is None:
        tolerance = 1e-6 * float(np.ptp(v))
    if max_iterations is None:
        max_iterations = 20 * (image.width + image.height)
    lo, hi = float(v[mask].min()), float(v[mask].max())
    u = np.where(mask, v, np.clip(v, lo, hi))
    free = ~mask
    if not free.any():
        return InpaintResult(ScalarField(u, image.spacing), True, 0, 0.0)

    yy, xx = np.indices(image.shape)
    colours = [free & ((yy + xx) % 2 == c) for c in (0, 1)]
    colours = [(np.nonzero(c[1:-1, 1:-1])) for c in colours]
    inner = u[1:-1, 1:-1]  # view: writes land in u
    it, delta = 0, np.inf
    while it < max_iterations:
        delta = 0.0
        for ys, xs in colours:
            avg = 0.25 * (u[ys, xs + 1] + u[ys + 2, xs + 1] + u[ys + 1, xs] + u[ys + 1, xs + 2])
            if avg.size:
                delta = max(delta, float(np.max(np.abs(avg - inner[ys, xs]))))
            inner[ys, xs] = avg
        it += 1
        if energy_trace is not None:
            energy_trace.append(dirichlet_energy(u))
        if delta < tolerance:
            break
    converged = bool(delta < tolerance)
    return InpaintResult(ScalarField(u, image.spacing), converged, it, float(delta))


def reconstruct(image: ScalarField, cx: MsComplex, dilation: int = 1, **kw) -> InpaintResult:
    """Flatten onto the complex, then inpaint everything off the dilated skeleton."""
    return harmonic_inpaint(flatten(image, cx, dilation), skeleton_mask(cx, dilation), **kw)


def gradient_magnitude(image: ScalarField) -> np.ndarray:
    gy, gx = np.gradient(image.values, image.spacing)
    return np.hypot(gx, gy)[1:-1, 1:-1]


def gradient_histogram(image: ScalarField, bins: int = 32, value_range=None):
    """Histogram of interior gradient magnitudes as (edges, counts)."""
    if bins < 2:
        raise FieldError("need at least 2 bins")
    g = gradient_magnitude(image).ravel()
    if value_range is None:
        value_range = (0.0, float(g.max()) if g.max() > 0 else 1.0)
    counts, edges = np.histogram(g, bins=bins, range=value_range)
    return edges, counts


def compare_histograms(images: list, bins: int = 32):
    """Histograms of several images on shared edges spanning [0, max over all]."""
    top = max(float(gradient_magnitude(im).max()) for im in images)
    rng = (0.0, top if top > 0 else 1.0)
    return [gradient_histogram(im, bins, rng) for im in images]


def contour_synthesis(strokes: list, shape, background: float = 0.5, blur_scale: float = 2.0,
                      contrast: float = 0.5) -> ScalarField:
    """Draw dark/bright polylines on a constant background and blur.

    ``strokes`` holds (polyline, "dark" | "bright") pairs with (x, y)
    vertices; later strokes overwrite earlier ones. The stroke layer is
    blurred on its own and added to the background, which makes swapping
    every stroke's polarity give exactly ``2 * background - output``.
    """
    h, w = shape
    layer = np.zeros((h, w))
    for poly, tone in strokes:
        if tone not in STROKE_SIGN:
            raise FieldError(f"stroke intensity must be 'dark' or 'bright', got {tone!r}")
        p = np.rint(np.asarray(poly, dtype=float)).astype(np.int64).reshape(-1, 2)
        if len(p) and (p[:, 0].min() < 0 or p[:, 1].min() < 0 or p[:, 0].max() >= w or p[:, 1].max() >= h):
            raise FieldError("stroke leaves the domain")
        layer[rasterize(p, (h, w))] = STROKE_SIGN[tone] * contrast
    if blur_scale > 0:
        layer = ndimage.gaussian_filter(layer, blur_scale, mode="nearest")
    return ScalarField(background + layer)


def invert_strokes(strokes: list) -> list:
    return [(p, "dark" if t == "bright" else "bright") for p, t in strokes]

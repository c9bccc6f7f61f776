"""Scalar fields, discrete calculus, synthetic surfaces and rendering.

Conventions: arrays are indexed ``values[y, x]``; the viewer looks along -z
with view vector (0, 0, 1) (orthographic projection).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np
from scipy import ndimage

VIEW = np.array([0.0, 0.0, 1.0])
TILT_UNDEFINED = float("nan")
TILT_DEGENERACY = 1e-6


class FieldError(ValueError):
    """Invalid field, parameter or coordinate."""


class BoundsError(FieldError, IndexError):
    pass


@dataclass(frozen=True, eq=False)
class ScalarField:
    values: np.ndarray
    spacing: float = 1.0
    allow_undefined: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise FieldError(f"expected a 2D array, got shape {v.shape}")
        if v.shape[0] < 3 or v.shape[1] < 3:
            raise FieldError(f"field must be at least 3x3, got {v.shape[1]}x{v.shape[0]}")
        if not self.spacing > 0:
            raise FieldError("spacing must be positive")
        if not self.allow_undefined and not np.all(np.isfinite(v)):
            raise FieldError("field values must be finite")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self):
        return self.values.shape

    def with_values(self, values) -> "ScalarField":
        return ScalarField(values, self.spacing)

    def __eq__(self, other):
        if not isinstance(other, ScalarField):
            return NotImplemented
        return (self.spacing == other.spacing and self.shape == other.shape
                and np.array_equal(self.values, other.values, equal_nan=True))

    def __hash__(self):
        return hash((self.shape, self.spacing, self.values.tobytes()))


@dataclass(frozen=True, eq=False)
class NormalField:
    normals: np.ndarray  # (height, width, 3)

    def __post_init__(self):
        n = np.asarray(self.normals, dtype=np.float64)
        if n.ndim != 3 or n.shape[2] != 3:
            raise FieldError(f"normals must have shape (h, w, 3), got {n.shape}")
        if not np.all(np.isfinite(n)):
            raise FieldError("normals must be finite")
        if np.max(np.abs(np.linalg.norm(n, axis=2) - 1.0)) > 1e-9:
            raise FieldError("normals must have unit length")
        if np.min(n[..., 2]) < -1e-12:
            raise FieldError("normals must face the viewer (non-negative z)")
        n = n.copy()
        n.flags.writeable = False
        object.__setattr__(self, "normals", n)

    @property
    def width(self) -> int:
        return self.normals.shape[1]

    @property
    def height(self) -> int:
        return self.normals.shape[0]


@dataclass(frozen=True)
class RenderSpec:
    kind: str = "lambertian"
    light: tuple = (0.0, 0.0, 1.0)
    ambient: float = 0.0
    shininess: float = 4.0
    texture_seed: int = 0
    # glass-texture only
    dot_density: float = 0.02
    pair_offset: float = 3.0
    dot_sigma: float = 0.8

    def __post_init__(self):
        if self.kind not in ("lambertian", "specular", "glass-texture"):
            raise FieldError(f"unknown render kind {self.kind!r}")
        light = np.asarray(self.light, dtype=np.float64)
        if light.shape != (3,) or not np.all(np.isfinite(light)):
            raise FieldError("light must be a 3-vector")
        norm = np.linalg.norm(light)
        if abs(norm - 1.0) > 1e-6:
            raise FieldError("light must be a unit vector")
        if light[2] <= 0:
            raise FieldError("light must have a positive view-axis component")
        if not 0.0 <= self.ambient <= 1.0:
            raise FieldError("ambient must lie in [0, 1]")
        if not self.shininess > 0:
            raise FieldError("shininess must be positive")
        object.__setattr__(self, "light", tuple(float(c) for c in light / norm))


def light_from_angles(elevation_from_view: float, azimuth: float = 0.0) -> tuple:
    """Unit light vector tilted ``elevation_from_view`` radians away from the view axis."""
    s = np.sin(elevation_from_view)
    return (float(s * np.cos(azimuth)), float(s * np.sin(azimuth)), float(np.cos(elevation_from_view)))


# -- discrete calculus -------------------------------------------------------

def _check_interior(field: ScalarField, x: int, y: int, margin: int = 1):
    if not (margin <= x <= field.width - 1 - margin and margin <= y <= field.height - 1 - margin):
        raise BoundsError(f"({x}, {y}) is not an interior pixel of a {field.width}x{field.height} field")


def gradient(field: ScalarField, x: int, y: int) -> np.ndarray:
    _check_interior(field, x, y)
    f, h = field.values, field.spacing
    return np.array([(f[y, x + 1] - f[y, x - 1]) / (2 * h),
                     (f[y + 1, x] - f[y - 1, x]) / (2 * h)])


def hessian(field: ScalarField, x: int, y: int) -> np.ndarray:
    _check_interior(field, x, y)
    f, h2 = field.values, field.spacing ** 2
    fxx = (f[y, x + 1] - 2 * f[y, x] + f[y, x - 1]) / h2
    fyy = (f[y + 1, x] - 2 * f[y, x] + f[y - 1, x]) / h2
    fxy = (f[y + 1, x + 1] - f[y + 1, x - 1] - f[y - 1, x + 1] + f[y - 1, x - 1]) / (4 * h2)
    return np.array([[fxx, fxy], [fxy, fyy]])


def gradient_arrays(values: np.ndarray, spacing: float = 1.0):
    """Central-difference (fx, fy) on the interior; boundary entries are NaN."""
    fx = np.full(values.shape, np.nan)
    fy = np.full(values.shape, np.nan)
    fx[1:-1, 1:-1] = (values[1:-1, 2:] - values[1:-1, :-2]) / (2 * spacing)
    fy[1:-1, 1:-1] = (values[2:, 1:-1] - values[:-2, 1:-1]) / (2 * spacing)
    return fx, fy


def _replicate_border(a: np.ndarray) -> np.ndarray:
    inner = a[1:-1, 1:-1]
    pad = [(1, 1), (1, 1)] + [(0, 0)] * (a.ndim - 2)
    return np.pad(inner, pad, mode="edge")


# -- normals, slant, tilt ----------------------------------------------------

def normals_from_height(height: ScalarField) -> NormalField:
    zx, zy = gradient_arrays(height.values, height.spacing)
    n = np.stack([-zx, -zy, np.ones_like(zx)], axis=-1)
    n = _replicate_border(n)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    return NormalField(n)


def normals_from_slant_tilt(slant: np.ndarray, tilt: np.ndarray) -> np.ndarray:
    tilt = np.where(np.isnan(tilt), 0.0, tilt)
    s = np.sin(slant)
    return np.stack([s * np.cos(tilt), s * np.sin(tilt), np.cos(slant)], axis=-1)


def slant_tilt(normals: NormalField, spacing: float = 1.0):
    """Slant in [0, pi/2] and tilt in (-pi, pi]; tilt is NaN where slant is degenerate."""
    n = normals.normals
    slant = np.arccos(np.clip(n[..., 2], 0.0, 1.0))
    tilt = np.arctan2(n[..., 1], n[..., 0])
    tilt = np.where(tilt <= -np.pi, np.pi, tilt)
    tilt = np.where(slant < TILT_DEGENERACY, TILT_UNDEFINED, tilt)
    return ScalarField(slant, spacing), ScalarField(tilt, spacing, allow_undefined=True)


def slant_of_height(height: ScalarField) -> ScalarField:
    return slant_tilt(normals_from_height(height), height.spacing)[0]


# -- rendering ---------------------------------------------------------------

def render(normals: NormalField, spec: RenderSpec) -> ScalarField:
    n = normals.normals
    light = np.asarray(spec.light)
    a = spec.ambient
    if spec.kind == "lambertian":
        img = a + (1 - a) * np.maximum(0.0, n @ light)
    elif spec.kind == "specular":
        ndotl = n @ light
        reflected = 2 * ndotl[..., None] * n - light
        img = a + (1 - a) * np.maximum(0.0, reflected @ VIEW) ** spec.shininess
    else:
        img = a + (1 - a) * _glass_texture(n, spec)
    return ScalarField(np.clip(img, 0.0, 1.0))


def _glass_texture(n: np.ndarray, spec: RenderSpec) -> np.ndarray:
    """Dot pairs oriented along the local isophote direction.

    Each dot is paired with a partner offset perpendicular to the projected
    surface gradient, so pair orientation follows the tangential texture
    compression of a slanted surface. Pixels with no defined tilt (exactly
    frontal normals) get random pair directions.
    """
    h, w = n.shape[:2]
    rng = np.random.default_rng(spec.texture_seed)
    count = max(1, int(round(spec.dot_density * h * w)))
    pos = rng.uniform([0, 0], [w - 1, h - 1], size=(count, 2))
    random_dir = rng.uniform(0, np.pi, size=count)
    ix = np.clip(np.rint(pos[:, 0]).astype(int), 0, w - 1)
    iy = np.clip(np.rint(pos[:, 1]).astype(int), 0, h - 1)
    nx, ny = n[iy, ix, 0], n[iy, ix, 1]
    sin_slant = np.hypot(nx, ny)
    tangential = np.arctan2(ny, nx) + np.pi / 2
    use_tangent = sin_slant > 1e-12
    angle = np.where(use_tangent, tangential, random_dir)
    # centre each pair on its sample point so chords do not twist around curved flows
    half = 0.5 * spec.pair_offset * np.stack([np.cos(angle), np.sin(angle)], axis=1)
    canvas = np.zeros((h, w))
    for pts in (pos - half, pos + half):
        _splat(canvas, pts)
    canvas = ndimage.gaussian_filter(canvas, spec.dot_sigma, mode="constant")
    peak = 1.0 / (2 * np.pi * spec.dot_sigma ** 2)
    return np.clip(canvas / peak, 0.0, 1.0)


def _splat(canvas: np.ndarray, pts: np.ndarray):
    h, w = canvas.shape
    x0 = np.floor(pts[:, 0]).astype(int)
    y0 = np.floor(pts[:, 1]).astype(int)
    fx = pts[:, 0] - x0
    fy = pts[:, 1] - y0
    for dx, dy, wgt in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                        (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        xx, yy = x0 + dx, y0 + dy
        ok = (xx >= 0) & (xx < w) & (yy >= 0) & (yy < h)
        np.add.at(canvas, (yy[ok], xx[ok]), wgt[ok])


# -- synthetic scenes --------------------------------------------------------

def _grid(shape):
    h, w = shape
    return np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))


def sigmoid_profile(r: np.ndarray, radius: float, softness: float) -> np.ndarray:
    return 0.5 * (1.0 - np.tanh((r - radius) / (2.0 * softness)))


def gen_sigmoid_bump(grid: Sequence[int] = (256, 256), center=None, radius: float = 48.0,
                     height: float = 32.0, base_tilt: float = 0.0, bend: float = 0.0,
                     softness: float | None = None, spacing: float = 1.0) -> ScalarField:
    """Height field of a sigmoidal bump on a tilted, optionally bent, base plane.

    ``grid`` is (width, height) in pixels; ``radius`` and ``softness`` are in
    pixels, ``height`` in world units. ``bend`` adds ``bend * r_world**2``.
    """
    w, h = int(grid[0]), int(grid[1])
    if center is None:
        center = ((w - 1) / 2.0, (h - 1) / 2.0)
    cx, cy = float(center[0]), float(center[1])
    softness = radius / 4.0 if softness is None else softness
    if radius <= 0 or softness <= 0:
        raise FieldError("radius and softness must be positive")
    margin = radius + 2 * softness
    if cx - margin < 0 or cx + margin > w - 1 or cy - margin < 0 or cy + margin > h - 1:
        raise FieldError("bump does not fit inside the grid")
    X, Y = _grid((h, w))
    r = np.hypot(X - cx, Y - cy)
    z = np.tan(base_tilt) * (X - cx) * spacing + bend * (r * spacing) ** 2
    z = z + height * sigmoid_profile(r, radius, softness)
    return ScalarField(z, spacing)


def gen_cobblestone(grid=(256, 256), centers=None, radius: float = 24.0, height: float = 16.0,
                    softness: float | None = None, base_tilt: float = 0.0, bend: float = 0.0,
                    spacing: float = 1.0) -> ScalarField:
    """Several sigmoid bumps on a shared base; default is a 2x2 arrangement."""
    w, h = int(grid[0]), int(grid[1])
    if centers is None:
        centers = [(w * fx, h * fy) for fy in (0.3, 0.7) for fx in (0.3, 0.7)]
    softness = radius / 4.0 if softness is None else softness
    X, Y = _grid((h, w))
    mx, my = (w - 1) / 2.0, (h - 1) / 2.0
    z = np.tan(base_tilt) * (X - mx) * spacing + bend * (np.hypot(X - mx, Y - my) * spacing) ** 2
    for cx, cy in centers:
        margin = radius + 2 * softness
        if cx - margin < 0 or cx + margin > w - 1 or cy - margin < 0 or cy + margin > h - 1:
            raise FieldError("bump does not fit inside the grid")
        z = z + height * sigmoid_profile(np.hypot(X - cx, Y - cy), radius, softness)
    return ScalarField(z, spacing)


def _lowpass_noise(shape, seed: int, cutoff: float) -> np.ndarray:
    h, w = shape
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((h, w))
    ky = np.fft.fftfreq(h) * h
    kx = np.fft.rfftfreq(w) * w
    k = np.hypot(*np.meshgrid(kx, ky))
    spectrum = np.fft.rfft2(noise) * np.exp(-0.5 * (k / cutoff) ** 2)
    out = np.fft.irfft2(spectrum, s=(h, w))
    out -= out.mean()
    return out / np.max(np.abs(out))


def boundary_window(shape) -> np.ndarray:
    h, w = shape
    wy = np.sin(np.pi * np.arange(h) / (h - 1))
    wx = np.sin(np.pi * np.arange(w) / (w - 1))
    return np.outer(wy, wx)


def gen_blob(grid=(256, 256), seed: int = 0, cutoff: float = 4.0, relief: float | None = None) -> ScalarField:
    """Band-limited random blob: windowed to zero on the border, normalised to [0, 1].

    ``relief`` scales the noise against the window; by default it is
    ``min(0.5, 0.2 * cutoff)``, because at one cycle per image a stronger
    noise swing can split the window's single hump in two.
    """
    if cutoff < 1:
        raise FieldError("cutoff must be >= 1 cycle per image")
    if relief is None:
        relief = min(0.5, 0.2 * cutoff)
    w, h = int(grid[0]), int(grid[1])
    noise = _lowpass_noise((h, w), seed, cutoff)
    z = boundary_window((h, w)) * (1.0 + relief * noise)
    z = (z - z.min()) / (z.max() - z.min())
    return ScalarField(z)


def plateau_window(shape, rim: float = 0.15) -> np.ndarray:
    """1 on the central plateau, falling smoothly to 0 over a rim of ``rim`` x size."""
    def ramp(n):
        t = np.minimum(np.arange(n), np.arange(n)[::-1]) / ((n - 1) * rim)
        t = np.clip(t, 0.0, 1.0)
        return t * t * (3 - 2 * t)
    h, w = shape
    return np.outer(ramp(h), ramp(w))


def gen_feature_blob(grid=(256, 256), seed: int = 0, n_features: int = 5,
                     amplitude=(0.2, 0.35), feature_sigma: float = 10.0) -> ScalarField:
    """Plateau blob carrying seeded Gaussian bumps and dents of controlled amplitude.

    Features sit on a nearly flat plateau at least ``4 * feature_sigma`` apart,
    so each one has persistence close to its amplitude (relative to the
    normalised range) and nothing else rises above a few thousandths.
    """
    w, h = int(grid[0]), int(grid[1])
    rng = np.random.default_rng(seed)
    X, Y = _grid((h, w))
    placed = []
    lo, hi = 0.25, 0.75
    attempts = 0
    while len(placed) < n_features and attempts < 10000:
        attempts += 1
        c = rng.uniform([lo * w, lo * h], [hi * w, hi * h])
        if all(np.hypot(*(c - p)) >= 4 * feature_sigma for p in placed):
            placed.append(c)
    z = 1.0 + 0.005 * boundary_window((h, w))
    for c in placed:
        sign = rng.choice([-1.0, 1.0])
        amp = rng.uniform(*amplitude)
        z = z + sign * amp * np.exp(-((X - c[0]) ** 2 + (Y - c[1]) ** 2) / (2 * feature_sigma ** 2))
    z = z * plateau_window((h, w))
    z = (z - z.min()) / (z.max() - z.min())
    return ScalarField(z)


def gen_ring_stimulus(grid=(256, 256), ring_radius: float = 60.0, polarity: str = "a",
                      wall: float = 6.0, asymmetry: float = 0.05) -> ScalarField:
    """Crater-style stimulus: a bright ridge ring around a shaded interior disk.

    Polarity ``b`` inverts intensities inside the ring, ``I_b = (max + min) - I_a``,
    and leaves the outside untouched; a one-pixel band at the ring radius is
    linearly blended between the two.
    """
    if polarity not in ("a", "b"):
        raise FieldError("polarity must be 'a' or 'b'")
    w, h = int(grid[0]), int(grid[1])
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    if ring_radius + 4 * wall > min(cx, cy):
        raise FieldError("ring does not fit inside the grid")
    X, Y = _grid((h, w))
    r = np.hypot(X - cx, Y - cy)
    phi = np.arctan2(Y - cy, X - cx)
    crest = 0.9 + 0.1 * asymmetry * np.cos(phi)
    inside = 0.15 + (crest - 0.15) * (r / ring_radius) ** 2
    outside = 0.45 + (crest - 0.45) * np.exp(-((r - ring_radius) / wall) ** 2)
    img_a = np.where(r < ring_radius, inside, outside)
    if polarity == "a":
        return ScalarField(img_a)
    inverted = img_a.max() + img_a.min() - img_a
    t = np.clip(r - (ring_radius - 1.0), 0.0, 1.0)  # 0 inside, 1 outside, blended on the band
    img_b = np.where(r < ring_radius - 1.0, inverted, np.where(r >= ring_radius, img_a,
                                                                (1 - t) * inverted + t * img_a))
    return ScalarField(img_b)


def add_noise(field: ScalarField, amplitude: float, seed: int = 0) -> ScalarField:
    if amplitude < 0:
        raise FieldError("noise amplitude must be non-negative")
    if amplitude == 0:
        return field
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-amplitude, amplitude, size=field.shape)
    return ScalarField(field.values + noise, field.spacing)

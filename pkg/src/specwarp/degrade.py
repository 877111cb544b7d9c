"""Degradation operators, aligned pair construction and synthetic guides.

Degradations model the restoration tasks the synthesized data trains:
per-band Gaussian noise, a mixed-corruption variant (impulses, stripes
and dead columns on disjoint band subsets), anti-aliased bicubic
downsampling, disk blur, missing bands and inpainting masks.  Every
operator is a pure function of (cube, spec): the spec carries the seed
and identical inputs reproduce outputs bit-exactly.

Pairs couple each degraded cube with its clean original, mixing proxy
cubes and synthesized cubes at a configurable ratio.  The synthetic
guide generator renders a known affine view of a reference RGB image
together with the exact correspondence map, giving end-to-end tests a
ground-truth warp.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import HyperCube, RgbImage, clamp_unit
from .seeding import child_seed

KINDS = ("gaussian_noniid", "complex", "sr_bicubic", "blur", "band_miss", "inpaint_mask")

# Ceiling guard: ratios that hit an integer boundary within this slack
# count as exact (0.1 * 30 must mean 3 sites, not 4).
_CEIL_GUARD = 1e-9


@dataclass(frozen=True)
class DegradationSpec:
    """Parameters of one degradation operator, including its seed.

    sigma_range is in reflectance units (the default spans 10/255 to
    70/255).  impulse_ratio_range, stripe_ratio_range and
    deadline_ratio_range bound the per-band corruption draws of the
    mixed-noise kind.  scale is the downsampling factor, blur_radius the
    disk radius in pixels, band_miss_ratio and mask_ratio the zeroed
    fractions.
    """

    kind: str
    seed: int = 0
    sigma_range: tuple[float, float] = (10.0 / 255.0, 70.0 / 255.0)
    impulse_ratio_range: tuple[float, float] = (0.1, 0.3)
    stripe_ratio_range: tuple[float, float] = (0.05, 0.15)
    deadline_ratio_range: tuple[float, float] = (0.05, 0.15)
    stripe_magnitude: float = 0.25
    scale: int = 4
    blur_radius: int = 15
    blur_shape: str = "disk"
    band_miss_ratio: float = 0.3
    mask_ratio: float = 0.9

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            msg = f"unknown degradation kind {self.kind!r}, expected one of {KINDS}"
            raise ValueError(msg)
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")
        for name in ("sigma_range", "impulse_ratio_range", "stripe_ratio_range", "deadline_ratio_range"):
            low, high = getattr(self, name)
            if not (math.isfinite(low) and math.isfinite(high) and 0 <= low <= high):
                msg = f"{name} must be ordered and nonnegative, got ({low}, {high})"
                raise ValueError(msg)
        for name in ("impulse_ratio_range", "stripe_ratio_range", "deadline_ratio_range"):
            if getattr(self, name)[1] > 1:
                raise ValueError(f"{name} must stay within [0, 1]")
        if self.scale not in (2, 4, 8):
            raise ValueError(f"scale must be one of 2, 4, 8, got {self.scale}")
        if self.blur_radius < 1:
            raise ValueError(f"blur_radius must be at least 1, got {self.blur_radius}")
        if self.blur_shape not in ("disk", "gaussian"):
            msg = f"blur_shape must be 'disk' or 'gaussian', got {self.blur_shape!r}"
            raise ValueError(msg)
        if not 0 <= self.band_miss_ratio <= 1:
            raise ValueError(f"band_miss_ratio must lie in [0, 1], got {self.band_miss_ratio}")
        if not 0 <= self.mask_ratio <= 1:
            raise ValueError(f"mask_ratio must lie in [0, 1], got {self.mask_ratio}")
        if not math.isfinite(self.stripe_magnitude) or self.stripe_magnitude < 0:
            raise ValueError(f"stripe_magnitude must be nonnegative, got {self.stripe_magnitude}")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "sigma_range": list(self.sigma_range),
            "impulse_ratio_range": list(self.impulse_ratio_range),
            "stripe_ratio_range": list(self.stripe_ratio_range),
            "deadline_ratio_range": list(self.deadline_ratio_range),
            "stripe_magnitude": self.stripe_magnitude,
            "scale": self.scale,
            "blur_radius": self.blur_radius,
            "blur_shape": self.blur_shape,
            "band_miss_ratio": self.band_miss_ratio,
            "mask_ratio": self.mask_ratio,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "DegradationSpec":
        data = dict(payload)
        for name in ("sigma_range", "impulse_ratio_range", "stripe_ratio_range", "deadline_ratio_range"):
            if name in data:
                data[name] = tuple(data[name])
        return cls(**data)


def _ceil_count(ratio: float, total: int) -> int:
    """Ceiling of ratio * total with a guard against float overshoot."""
    return int(math.ceil(ratio * total - _CEIL_GUARD))


def _gaussian_noniid(data: np.ndarray, spec: DegradationSpec, rng: np.random.Generator) -> np.ndarray:
    bands = data.shape[0]
    low, high = spec.sigma_range
    sigmas = rng.uniform(low, high, size=bands)
    noise = rng.standard_normal(size=data.shape) * sigmas[:, None, None]
    return data + noise


def _complex(data: np.ndarray, spec: DegradationSpec, rng: np.random.Generator) -> np.ndarray:
    out = _gaussian_noniid(data, spec, rng)
    bands, height, width = out.shape
    groups = np.array_split(rng.permutation(bands), 3)
    impulse_bands, stripe_bands, deadline_bands = groups
    for band in impulse_bands:
        ratio = rng.uniform(*spec.impulse_ratio_range)
        hit = rng.random((height, width)) < ratio
        salt = rng.random((height, width)) < 0.5
        plane = out[band]
        plane[hit & salt] = 1.0
        plane[hit & ~salt] = 0.0
    for band in stripe_bands:
        ratio = rng.uniform(*spec.stripe_ratio_range)
        count = _ceil_count(ratio, width)
        if count == 0:
            continue
        columns = rng.choice(width, size=count, replace=False)
        offsets = rng.uniform(-spec.stripe_magnitude, spec.stripe_magnitude, size=count)
        out[band][:, columns] += offsets[None, :]
    for band in deadline_bands:
        ratio = rng.uniform(*spec.deadline_ratio_range)
        count = _ceil_count(ratio, width)
        if count == 0:
            continue
        columns = rng.choice(width, size=count, replace=False)
        out[band][:, columns] = 0.0
    return out


def _cubic_kernel(x: np.ndarray, a: float = -0.5) -> np.ndarray:
    """Standard two-lobe cubic interpolation kernel."""
    ax = np.abs(x)
    near = (a + 2.0) * ax**3 - (a + 3.0) * ax**2 + 1.0
    far = a * ax**3 - 5.0 * a * ax**2 + 8.0 * a * ax - 4.0 * a
    return np.where(ax <= 1.0, near, np.where(ax < 2.0, far, 0.0))


def _resample_weights(in_size: int, out_size: int, antialias: bool) -> np.ndarray:
    """Dense (out_size, in_size) bicubic resampling matrix.

    Sample centers follow the half-pixel convention.  When downsampling
    with anti-aliasing the kernel stretches by the scale factor.  Border
    taps clamp to the edge sample and each output row normalizes to sum 1,
    so constants are preserved.
    """
    scale = in_size / out_size
    stretch = max(scale, 1.0) if antialias else 1.0
    support = 2.0 * stretch
    matrix = np.zeros((out_size, in_size), dtype=np.float64)
    for out_idx in range(out_size):
        center = (out_idx + 0.5) * scale - 0.5
        lo = int(math.floor(center - support)) + 1
        hi = int(math.floor(center + support))
        taps = np.arange(lo, hi + 1)
        weights = _cubic_kernel((center - taps) / stretch)
        taps = np.clip(taps, 0, in_size - 1)
        total = weights.sum()
        if total == 0:
            raise ValueError("degenerate resampling kernel")
        np.add.at(matrix[out_idx], taps, weights / total)
    return matrix


def resize_bicubic(
    planes: np.ndarray,
    out_height: int,
    out_width: int,
    antialias: bool = True,
) -> np.ndarray:
    """Separable bicubic resample of a (bands, H, W) stack, float64."""
    stack = np.asarray(planes, dtype=np.float64)
    if stack.ndim != 3:
        raise ValueError(f"expected (bands, height, width), got shape {stack.shape}")
    rows = _resample_weights(stack.shape[1], out_height, antialias)
    cols = _resample_weights(stack.shape[2], out_width, antialias)
    return np.einsum("oh,bhw,pw->bop", rows, stack, cols, optimize=True)


def _sr_bicubic(data: np.ndarray, spec: DegradationSpec) -> np.ndarray:
    bands, height, width = data.shape
    if height % spec.scale or width % spec.scale:
        msg = f"spatial dims {height}x{width} are not divisible by scale {spec.scale}"
        raise ValueError(msg)
    return resize_bicubic(data, height // spec.scale, width // spec.scale)


def _blur_kernel(spec: DegradationSpec) -> np.ndarray:
    radius = spec.blur_radius
    span = np.arange(-radius, radius + 1)
    yy, xx = np.meshgrid(span, span, indexing="ij")
    if spec.blur_shape == "disk":
        kernel = (yy**2 + xx**2 <= radius**2).astype(np.float64)
    else:
        sigma = radius / 3.0
        kernel = np.exp(-(yy**2 + xx**2) / (2.0 * sigma**2))
    return kernel / kernel.sum()


def _blur(data: np.ndarray, spec: DegradationSpec) -> np.ndarray:
    bands, height, width = data.shape
    kernel = _blur_kernel(spec)
    if kernel.shape[0] > height or kernel.shape[1] > width:
        msg = (
            f"blur kernel {kernel.shape[0]}x{kernel.shape[1]} exceeds "
            f"image {height}x{width}"
        )
        raise ValueError(msg)
    # Wrap-around convolution keeps the normalized kernel's global mean
    # preservation exact instead of losing mass at the border.
    padded = np.zeros((height, width), dtype=np.float64)
    radius = spec.blur_radius
    rows = np.arange(-radius, radius + 1) % height
    cols = np.arange(-radius, radius + 1) % width
    padded[np.ix_(rows, cols)] += kernel
    kernel_hat = np.fft.rfft2(padded)
    out = np.empty_like(data)
    for band in range(bands):
        out[band] = np.fft.irfft2(np.fft.rfft2(data[band]) * kernel_hat, s=(height, width))
    return out


def _band_miss(data: np.ndarray, spec: DegradationSpec, rng: np.random.Generator) -> np.ndarray:
    bands = data.shape[0]
    count = _ceil_count(spec.band_miss_ratio, bands)
    out = data.copy()
    if count:
        dropped = rng.choice(bands, size=count, replace=False)
        out[dropped] = 0.0
    return out


def _inpaint_mask(data: np.ndarray, spec: DegradationSpec, rng: np.random.Generator) -> np.ndarray:
    bands, height, width = data.shape
    sites = height * width
    count = _ceil_count(spec.mask_ratio, sites)
    out = data.copy()
    if count:
        masked = rng.choice(sites, size=count, replace=False)
        flat = out.reshape(bands, sites)
        flat[:, masked] = 0.0
    return out


def apply_degradation(cube: HyperCube, spec: DegradationSpec) -> HyperCube:
    """Apply one degradation operator; deterministic given the spec seed."""
    rng = np.random.default_rng(spec.seed)
    data = cube.data.astype(np.float64)
    if spec.kind == "gaussian_noniid":
        degraded = _gaussian_noniid(data, spec, rng)
    elif spec.kind == "complex":
        degraded = _complex(data, spec, rng)
    elif spec.kind == "sr_bicubic":
        degraded = _sr_bicubic(data, spec)
    elif spec.kind == "blur":
        degraded = _blur(data, spec)
    elif spec.kind == "band_miss":
        degraded = _band_miss(data, spec, rng)
    elif spec.kind == "inpaint_mask":
        degraded = _inpaint_mask(data, spec, rng)
    else:  # pragma: no cover - constructor rejects unknown kinds
        raise ValueError(f"unknown degradation kind {spec.kind!r}")
    clipped, count = clamp_unit(degraded)
    return HyperCube(data=clipped, wavelengths_nm=cube.wavelengths_nm, clamped=count)


# ---------------------------------------------------------------------------
# Aligned pairs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairRecord:
    """One aligned training pair and its reproducibility bookkeeping.

    provenance is "proxy" for pairs built from original cubes and
    "generated" for synthesized cubes.  proxy_index and guide_index locate
    the clean member; seed is the degradation seed this pair used.
    """

    degraded: HyperCube
    clean: HyperCube
    provenance: str
    proxy_index: int
    guide_index: int | None
    seed: int


@dataclass(frozen=True)
class PairSet:
    """Aligned degraded/clean pairs at a fixed generated-to-proxy ratio."""

    pairs: tuple[PairRecord, ...]
    spec: DegradationSpec
    ratio: int

    def counts(self) -> tuple[int, int]:
        proxy = sum(1 for p in self.pairs if p.provenance == "proxy")
        generated = sum(1 for p in self.pairs if p.provenance == "generated")
        return proxy, generated

    def verify(self) -> bool:
        """Re-degrade every clean member and compare bit-exactly."""
        for record in self.pairs:
            again = apply_degradation(record.clean, replace(self.spec, seed=record.seed))
            if again.data.tobytes() != record.degraded.data.tobytes():
                return False
        return True


def build_pairs(
    proxies: list[HyperCube],
    synthesized: list[list[HyperCube]],
    spec: DegradationSpec,
    ratio: int = 3,
) -> PairSet:
    """Couple degraded and clean cubes from proxies and synthesized views.

    Every proxy contributes one pair; the first `ratio` synthesized cubes
    of each proxy contribute one pair each, so the generated-to-proxy
    count ratio equals `ratio` exactly.  Each pair derives its own
    degradation seed from the spec seed and the pair's indices.
    """
    if ratio < 0:
        raise ValueError(f"ratio must be nonnegative, got {ratio}")
    if len(synthesized) != len(proxies):
        msg = f"{len(proxies)} proxies but {len(synthesized)} synthesized groups"
        raise ValueError(msg)
    records = []
    for i, proxy in enumerate(proxies):
        seed = child_seed(spec.seed, 0, i)
        degraded = apply_degradation(proxy, replace(spec, seed=seed))
        records.append(
            PairRecord(
                degraded=degraded,
                clean=proxy,
                provenance="proxy",
                proxy_index=i,
                guide_index=None,
                seed=seed,
            )
        )
    for i, group in enumerate(synthesized):
        if len(group) < ratio:
            msg = f"proxy {i} has {len(group)} synthesized cubes, ratio {ratio} needs {ratio}"
            raise ValueError(msg)
        for j in range(ratio):
            seed = child_seed(spec.seed, 1, i, j)
            degraded = apply_degradation(group[j], replace(spec, seed=seed))
            records.append(
                PairRecord(
                    degraded=degraded,
                    clean=group[j],
                    provenance="generated",
                    proxy_index=i,
                    guide_index=j,
                    seed=seed,
                )
            )
    return PairSet(pairs=tuple(records), spec=spec, ratio=ratio)


# ---------------------------------------------------------------------------
# Synthetic guides
# ---------------------------------------------------------------------------


def affine_translation(dy: float, dx: float) -> np.ndarray:
    """Forward affine that moves content by (dy, dx) pixels."""
    return np.array([[1.0, 0.0, dy], [0.0, 1.0, dx]], dtype=np.float64)


def affine_rotation_about_center(
    height: int,
    width: int,
    degrees: float,
    scale: float = 1.0,
) -> np.ndarray:
    """Forward affine rotating (and optionally scaling) about the image
    center."""
    if scale == 0:
        raise ValueError("scale must be nonzero")
    theta = math.radians(degrees)
    rot = scale * np.array(
        [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
    )
    center = np.array([(height - 1) / 2.0, (width - 1) / 2.0])
    shift = center - rot @ center
    return np.concatenate([rot, shift[:, None]], axis=1)


def _invert_affine(affine: np.ndarray) -> np.ndarray:
    matrix = np.asarray(affine, dtype=np.float64)
    if matrix.shape != (2, 3):
        raise ValueError(f"affine must be a 2x3 matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("affine entries must be finite")
    linear = matrix[:, :2]
    det = float(np.linalg.det(linear))
    if abs(det) < 1e-12:
        raise ValueError(f"affine is singular (determinant {det:.3e})")
    inverse = np.linalg.inv(linear)
    return np.concatenate([inverse, (-inverse @ matrix[:, 2])[:, None]], axis=1)


def _bilinear_sample(planes: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Sample channel planes at fractional (y, x) coords, clamped."""
    channels, height, width = planes.shape
    y = np.clip(coords[..., 0], 0.0, height - 1.0)
    x = np.clip(coords[..., 1], 0.0, width - 1.0)
    y0 = np.floor(y).astype(np.int64)
    x0 = np.floor(x).astype(np.int64)
    y1 = np.minimum(y0 + 1, height - 1)
    x1 = np.minimum(x0 + 1, width - 1)
    fy = y - y0
    fx = x - x0
    out = np.empty((channels,) + coords.shape[:-1], dtype=np.float64)
    for c in range(channels):
        plane = planes[c]
        top = plane[y0, x0] * (1.0 - fx) + plane[y0, x1] * fx
        bottom = plane[y1, x0] * (1.0 - fx) + plane[y1, x1] * fx
        out[c] = top * (1.0 - fy) + bottom * fy
    return out


def make_synthetic_guide(
    proxy_rgb: RgbImage,
    affine: np.ndarray,
    gain_jitter: float = 0.0,
    offset_jitter: float = 0.0,
    seed: int = 0,
) -> tuple[RgbImage, np.ndarray]:
    """Render an affine view of a reference image with known
    correspondence.

    affine is the forward 2x3 map sending reference coordinates to guide
    coordinates; it must be invertible.  Each guide pixel bilinearly
    samples the reference at the inverse-mapped location (clamped at the
    border).  Per-channel gains in [1-gain_jitter, 1+gain_jitter] and
    offsets in [-offset_jitter, offset_jitter] are drawn from the seed and
    applied afterwards, then values clamp to [0, 1].

    Returns the guide image and the float64 correspondence map of shape
    (height, width, 2) holding each guide pixel's source coordinate.
    """
    if not 0 <= gain_jitter < 1:
        raise ValueError(f"gain_jitter must lie in [0, 1), got {gain_jitter}")
    if not 0 <= offset_jitter <= 0.5:
        raise ValueError(f"offset_jitter must lie in [0, 0.5], got {offset_jitter}")
    inverse = _invert_affine(affine)
    height, width = proxy_rgb.height, proxy_rgb.width
    ys, xs = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    lattice = np.stack([ys, xs], axis=-1).astype(np.float64)
    source = lattice @ inverse[:, :2].T + inverse[:, 2]
    sampled = _bilinear_sample(proxy_rgb.data.astype(np.float64), source)
    rng = np.random.default_rng(seed)
    gains = 1.0 + rng.uniform(-gain_jitter, gain_jitter, size=3)
    offsets = rng.uniform(-offset_jitter, offset_jitter, size=3)
    jittered = sampled * gains[:, None, None] + offsets[:, None, None]
    guide = RgbImage(data=np.clip(jittered, 0.0, 1.0))
    source.flags.writeable = False
    return guide, source

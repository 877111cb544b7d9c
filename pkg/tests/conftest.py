"""Shared test helpers: correlated random cubes and small warp scenes."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter, gaussian_filter1d

from specwarp import (
    CandidateSet,
    DescriptorConfig,
    HyperCube,
    RetrievalConfig,
    RgbImage,
    WarpParams,
    build_descriptors,
    project_rgb,
    retrieve,
)


def texture_cube(
    rng: np.random.Generator,
    bands: int,
    height: int,
    width: int,
    sigma_xy: float = 1.5,
    sigma_band: float = 2.0,
) -> HyperCube:
    """Spatially and spectrally correlated random cube in [0.05, 0.95].

    Gaussian-filtered white noise: nearby pixels and nearby bands are
    similar, the way reflectance scenes behave, while the content stays
    random.  sigma_xy = 0 degenerates to white noise.
    """
    data = rng.standard_normal((bands, height, width))
    if sigma_xy > 0:
        data = gaussian_filter(data, sigma=(0, sigma_xy, sigma_xy), mode="reflect")
    if sigma_band > 0 and bands > 1:
        data = gaussian_filter1d(data, sigma=sigma_band, axis=0, mode="reflect")
    lo, hi = data.min(), data.max()
    data = 0.05 + 0.9 * (data - lo) / (hi - lo)
    wavelengths = np.linspace(400.0, 700.0, bands)
    return HyperCube(data=data, wavelengths_nm=wavelengths)


def random_rgb(rng: np.random.Generator, height: int, width: int) -> RgbImage:
    return RgbImage(data=rng.random((3, height, width)))


def self_candidates(height: int, width: int, keep: int = 4) -> CandidateSet:
    """Candidate set whose first candidate is the pixel itself.

    Remaining slots cycle through other lattice pixels at distance 1 so
    the set is valid but the self column is always the closest.
    """
    n = height * width
    lin = np.arange(n)
    cols = [lin]
    for shift in range(1, keep):
        cols.append((lin + shift) % n)
    linear = np.stack(cols, axis=1)
    coords = np.stack([linear // width, linear % width], axis=-1)
    distances = np.zeros((n, keep))
    distances[:, 1:] = 1.0
    return CandidateSet(height=height, width=width, coords=coords, distances=distances)


def retrieval_scene(
    rng: np.random.Generator,
    height: int = 8,
    width: int = 8,
    seeds: int = 4,
    keep: int = 4,
) -> tuple[RgbImage, RgbImage, CandidateSet]:
    """Small proxy/guide pair with retrieved candidates for warp tests."""
    cube = texture_cube(rng, 6, height, width, sigma_xy=1.0, sigma_band=1.0)
    proxy_rgb = project_rgb(cube)
    guide_rgb = RgbImage(
        data=np.clip(
            proxy_rgb.data + 0.05 * rng.standard_normal(proxy_rgb.data.shape), 0.0, 1.0
        )
    )
    cfg = DescriptorConfig()
    guide_desc = build_descriptors(guide_rgb, cfg)
    proxy_desc = build_descriptors(proxy_rgb, cfg)
    candidates = retrieve(
        guide_desc,
        proxy_desc,
        RetrievalConfig(seeds=seeds, expand_radius=1, keep=keep),
    )
    return proxy_rgb, guide_rgb, candidates


def random_params(
    rng: np.random.Generator,
    candidates: CandidateSet,
    stencil: int = 3,
    scale: float = 1.0,
) -> WarpParams:
    """Moderate random logits so no softmax saturates."""
    agg = scale * rng.standard_normal((candidates.pixels, candidates.keep))
    interp = scale * rng.standard_normal((candidates.pixels, stencil * stencil))
    return WarpParams(agg_logits=agg, interp_logits=interp, stencil=stencil)

"""Candidate correspondence retrieval between two descriptor fields.

For every pixel of a query image, exact nearest-neighbor search in
descriptor space produces seed matches in a reference image.  Each seed
is expanded to its spatial neighborhood on the reference lattice and the
pooled candidates are re-ranked by mean absolute descriptor difference,
keeping the best few per pixel.  All ordering is deterministic: distance
ties resolve to the smaller row-major linear index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .descriptors import DescriptorField

_QUERY_CHUNK = 512


@dataclass(frozen=True)
class RetrievalConfig:
    """Retrieval parameters.

    seeds nearest neighbors are found per pixel, each expanded to the
    (2 * expand_radius + 1)^2 window around it, and keep candidates
    survive the re-ranking.
    """

    seeds: int = 16
    expand_radius: int = 1
    keep: int = 16

    def __post_init__(self) -> None:
        if self.seeds < 1:
            raise ValueError(f"seeds must be positive, got {self.seeds}")
        if self.expand_radius < 0:
            raise ValueError(f"expand_radius must be nonnegative, got {self.expand_radius}")
        pool = self.seeds * (2 * self.expand_radius + 1) ** 2
        if not 1 <= self.keep <= pool:
            msg = f"keep must lie in [1, {pool}] for this pool size, got {self.keep}"
            raise ValueError(msg)

    @property
    def pool_size(self) -> int:
        return self.seeds * (2 * self.expand_radius + 1) ** 2


@dataclass(frozen=True)
class CandidateSet:
    """Ranked reference candidates for every query pixel.

    coords has shape (pixels, keep, 2) holding (row, column) reference
    coordinates; distances has shape (pixels, keep) with the mean absolute
    descriptor differences, nondecreasing along the last axis.  height and
    width describe the reference lattice, which candidates must lie on.
    Query pixels follow row-major order.
    """

    height: int
    width: int
    coords: np.ndarray
    distances: np.ndarray

    def __post_init__(self) -> None:
        coords = np.ascontiguousarray(np.asarray(self.coords, dtype=np.int32))
        dists = np.ascontiguousarray(np.asarray(self.distances, dtype=np.float64))
        if coords.ndim != 3 or coords.shape[2] != 2:
            msg = f"coords must have shape (pixels, keep, 2), got {coords.shape}"
            raise ValueError(msg)
        if dists.shape != coords.shape[:2]:
            msg = f"distances shape {dists.shape} does not match coords {coords.shape[:2]}"
            raise ValueError(msg)
        if coords.shape[1] < 1:
            raise ValueError("candidate sets must hold at least one candidate")
        y, x = coords[..., 0], coords[..., 1]
        if y.min(initial=0) < 0 or x.min(initial=0) < 0:
            raise ValueError("candidate coordinates must be nonnegative")
        if y.max(initial=-1) >= self.height or x.max(initial=-1) >= self.width:
            raise ValueError("candidate coordinates fall outside the reference lattice")
        if not np.all(np.isfinite(dists)):
            raise ValueError("candidate distances contain NaN or infinite entries")
        if np.any(np.diff(dists, axis=1) < 0):
            raise ValueError("candidate distances must be nondecreasing per pixel")
        coords.flags.writeable = False
        dists.flags.writeable = False
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "distances", dists)

    @property
    def pixels(self) -> int:
        return self.coords.shape[0]

    @property
    def keep(self) -> int:
        return self.coords.shape[1]

    def linear(self) -> np.ndarray:
        """Candidates as row-major linear indices, shape (pixels, keep)."""
        return (
            self.coords[..., 0].astype(np.int64) * self.width
            + self.coords[..., 1].astype(np.int64)
        )


def _stable_order_by(values: np.ndarray, tiebreak: np.ndarray) -> np.ndarray:
    """Row-wise argsort of values with ties resolved by ascending tiebreak."""
    pre = np.argsort(tiebreak, axis=1, kind="stable")
    rows = np.arange(values.shape[0])[:, None]
    order = np.argsort(values[rows, pre], axis=1, kind="stable")
    return pre[rows, order]


def knn_exact(
    queries: DescriptorField,
    reference: DescriptorField,
    k: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest reference descriptors per query pixel in L2.

    Returns (indices, distances): row-major linear indices into the
    reference lattice, shape (query_pixels, k), sorted by ascending
    Euclidean distance with ties resolved to the smaller index, and the
    matching distances.
    """
    if queries.dim != reference.dim:
        msg = f"descriptor dims differ: {queries.dim} vs {reference.dim}"
        raise ValueError(msg)
    n_ref = reference.vectors.shape[0]
    if not 1 <= k <= n_ref:
        msg = f"k must lie in [1, {n_ref}], got {k}"
        raise ValueError(msg)
    ref = reference.vectors
    ref_sq = np.einsum("nd,nd->n", ref, ref)
    n_query = queries.vectors.shape[0]
    indices = np.empty((n_query, k), dtype=np.int64)
    distances = np.empty((n_query, k), dtype=np.float64)
    for start in range(0, n_query, _QUERY_CHUNK):
        block = queries.vectors[start : start + _QUERY_CHUNK]
        block_sq = np.einsum("nd,nd->n", block, block)
        d2 = block_sq[:, None] - 2.0 * (block @ ref.T) + ref_sq[None, :]
        np.maximum(d2, 0.0, out=d2)
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        rows = np.arange(block.shape[0])[:, None]
        indices[start : start + block.shape[0]] = order
        distances[start : start + block.shape[0]] = np.sqrt(d2[rows, order])
    return indices, distances


def _expand_pool(seed_indices: np.ndarray, height: int, width: int, radius: int) -> np.ndarray:
    """Clamped spatial expansion of seed indices, shape (pixels, pool).

    Every seed contributes its full (2r+1)^2 window with coordinates
    clamped to the lattice, so duplicate candidates are kept.
    """
    seeds = np.asarray(seed_indices, dtype=np.int64)
    sy = seeds // width
    sx = seeds % width
    span = np.arange(-radius, radius + 1)
    off_y, off_x = np.meshgrid(span, span, indexing="ij")
    off_y = off_y.reshape(-1)
    off_x = off_x.reshape(-1)
    pool_y = np.clip(sy[:, :, None] + off_y[None, None, :], 0, height - 1)
    pool_x = np.clip(sx[:, :, None] + off_x[None, None, :], 0, width - 1)
    pool = pool_y * width + pool_x
    return pool.reshape(seeds.shape[0], -1)


def expand_and_refine(
    seed_indices: np.ndarray,
    queries: DescriptorField,
    reference: DescriptorField,
    config: RetrievalConfig,
) -> CandidateSet:
    """Expand seeds spatially and keep the best candidates per pixel.

    The pooled candidates of each query pixel are ranked by the mean
    absolute difference between the query and reference descriptors.
    Duplicates survive pooling; ties in the ranking resolve to the
    smaller reference linear index.
    """
    if queries.dim != reference.dim:
        msg = f"descriptor dims differ: {queries.dim} vs {reference.dim}"
        raise ValueError(msg)
    seeds = np.asarray(seed_indices, dtype=np.int64)
    if seeds.ndim != 2 or seeds.shape[0] != queries.vectors.shape[0]:
        msg = f"expected seed indices of shape ({queries.vectors.shape[0]}, seeds), got {seeds.shape}"
        raise ValueError(msg)
    if seeds.shape[1] != config.seeds:
        msg = f"expected {config.seeds} seeds per pixel, got {seeds.shape[1]}"
        raise ValueError(msg)
    if seeds.min(initial=0) < 0 or seeds.max(initial=-1) >= reference.vectors.shape[0]:
        raise ValueError("seed indices fall outside the reference lattice")
    height, width = reference.height, reference.width
    pool = _expand_pool(seeds, height, width, config.expand_radius)
    n, pool_size = pool.shape
    deltas = np.empty((n, pool_size), dtype=np.float64)
    qvec = queries.vectors
    rvec = reference.vectors
    for col in range(pool_size):
        deltas[:, col] = np.mean(np.abs(qvec - rvec[pool[:, col]]), axis=1)
    order = _stable_order_by(deltas, pool)[:, : config.keep]
    rows = np.arange(n)[:, None]
    kept = pool[rows, order]
    kept_deltas = deltas[rows, order]
    coords = np.stack([kept // width, kept % width], axis=2)
    return CandidateSet(
        height=height,
        width=width,
        coords=coords.astype(np.int32),
        distances=kept_deltas,
    )


def retrieve(
    queries: DescriptorField,
    reference: DescriptorField,
    config: RetrievalConfig,
) -> CandidateSet:
    """Full retrieval: exact seed search, expansion and refinement."""
    seeds, _ = knn_exact(queries, reference, config.seeds)
    return expand_and_refine(seeds, queries, reference, config)

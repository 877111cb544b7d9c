"""Exact nearest-neighbor seeding, spatial expansion and re-ranking."""

from __future__ import annotations

import numpy as np
import pytest

from specwarp import (
    CandidateSet,
    DescriptorConfig,
    RetrievalConfig,
    build_descriptors,
    expand_and_refine,
    knn_exact,
    retrieve,
)
from specwarp.descriptors import DescriptorField

from conftest import random_rgb


def field_from_matrix(matrix: np.ndarray, height: int, width: int) -> DescriptorField:
    return DescriptorField(height=height, width=width, vectors=np.asarray(matrix, dtype=np.float64))


def brute_force_knn(queries: np.ndarray, base: np.ndarray, k: int) -> np.ndarray:
    out = np.empty((queries.shape[0], k), dtype=np.int64)
    for i, q in enumerate(queries):
        d2 = ((base - q) ** 2).sum(axis=1)
        # ties resolve toward the smaller index: stable sort on (d2, idx)
        order = np.lexsort((np.arange(base.shape[0]), d2))
        out[i] = order[:k]
    return out


class TestConfig:
    def test_defaults(self):
        cfg = RetrievalConfig()
        assert (cfg.seeds, cfg.expand_radius, cfg.keep) == (16, 1, 16)
        assert cfg.pool_size == 144

    def test_keep_beyond_pool_rejected(self):
        with pytest.raises(ValueError, match="keep"):
            RetrievalConfig(seeds=2, expand_radius=0, keep=3)

    def test_nonpositive_seeds_rejected(self):
        with pytest.raises(ValueError):
            RetrievalConfig(seeds=0)


class TestCandidateSet:
    def test_linear_indexing(self):
        coords = np.array([[[0, 1], [1, 0]], [[1, 1], [0, 0]]])
        dists = np.array([[0.0, 1.0], [0.5, 0.75]])
        cand = CandidateSet(height=2, width=2, coords=coords, distances=dists)
        np.testing.assert_array_equal(cand.linear(), [[1, 2], [3, 0]])

    def test_out_of_lattice_coordinate_rejected(self):
        coords = np.array([[[0, 2]]])
        with pytest.raises(ValueError, match="lattice"):
            CandidateSet(height=2, width=2, coords=coords, distances=np.zeros((1, 1)))

    def test_decreasing_distances_rejected(self):
        coords = np.zeros((1, 2, 2), dtype=int)
        with pytest.raises(ValueError, match="nondecreasing"):
            CandidateSet(
                height=2, width=2, coords=coords, distances=np.array([[1.0, 0.5]])
            )


class TestKnnExact:
    def test_self_match(self):
        rng = np.random.default_rng(0)
        vec = rng.random((16, 5))
        field = field_from_matrix(vec, 4, 4)
        idx, dist = knn_exact(field, field, 1)
        np.testing.assert_array_equal(idx[:, 0], np.arange(16))
        # the expanded quadratic form leaves sqrt-of-round-off residue
        np.testing.assert_allclose(dist[:, 0], np.zeros(16), atol=1e-6)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        queries = rng.random((64, 7))
        base = rng.random((64, 7))
        qf = field_from_matrix(queries, 8, 8)
        bf = field_from_matrix(base, 8, 8)
        idx, dist = knn_exact(qf, bf, 4)
        expected = brute_force_knn(queries, base, 4)
        np.testing.assert_array_equal(idx, expected)
        assert np.all(np.diff(dist, axis=1) >= 0)

    def test_tie_breaks_to_smaller_linear_index(self):
        base = np.zeros((4, 3))
        base[3] = 1.0  # rows 0..2 are identical
        queries = np.zeros((1, 3))
        idx, dist = knn_exact(field_from_matrix(queries, 1, 1), field_from_matrix(base, 2, 2), 3)
        np.testing.assert_array_equal(idx[0], [0, 1, 2])
        np.testing.assert_array_equal(dist[0], [0.0, 0.0, 0.0])

    def test_k_larger_than_base_rejected(self):
        field = field_from_matrix(np.zeros((4, 2)), 2, 2)
        with pytest.raises(ValueError):
            knn_exact(field, field, 5)

    def test_dimension_mismatch_rejected(self):
        a = field_from_matrix(np.zeros((4, 2)), 2, 2)
        b = field_from_matrix(np.zeros((4, 3)), 2, 2)
        with pytest.raises(ValueError):
            knn_exact(a, b, 1)


class TestExpandAndRefine:
    def test_identical_images_keep_self_first(self):
        rng = np.random.default_rng(2)
        image = random_rgb(rng, 6, 6)
        desc = build_descriptors(image, DescriptorConfig(patch_side=3))
        cand = retrieve(desc, desc, RetrievalConfig(seeds=2, expand_radius=1, keep=1))
        np.testing.assert_array_equal(cand.linear()[:, 0], np.arange(36))
        np.testing.assert_array_equal(cand.distances, np.zeros((36, 1)))

    def test_zero_radius_reranks_seeds(self):
        rng = np.random.default_rng(3)
        guide = build_descriptors(random_rgb(rng, 4, 4), DescriptorConfig(patch_side=1))
        proxy = build_descriptors(random_rgb(rng, 4, 4), DescriptorConfig(patch_side=1))
        seeds, _ = knn_exact(guide, proxy, 3)
        cand = expand_and_refine(
            seeds, guide, proxy, RetrievalConfig(seeds=3, expand_radius=0, keep=3)
        )
        # with no expansion the candidate pool is exactly the seed set,
        # re-ranked under mean absolute difference
        lin = cand.linear()
        for u in range(16):
            assert set(lin[u]) == set(seeds[u])
            l1 = np.abs(proxy.vectors[lin[u]] - guide.vectors[u]).mean(axis=1)
            np.testing.assert_allclose(l1, cand.distances[u], rtol=1e-12)
            assert np.all(np.diff(l1) >= 0)

    def test_matches_exhaustive_pool_enumeration(self):
        rng = np.random.default_rng(4)
        guide_img = random_rgb(rng, 6, 6)
        proxy_img = random_rgb(rng, 6, 6)
        cfg_d = DescriptorConfig(patch_side=3)
        guide = build_descriptors(guide_img, cfg_d)
        proxy = build_descriptors(proxy_img, cfg_d)
        cfg = RetrievalConfig(seeds=3, expand_radius=1, keep=4)
        cand = retrieve(guide, proxy, cfg)
        seeds, _ = knn_exact(guide, proxy, 3)
        height = width = 6
        for u in range(36):
            pool = []
            for seed in seeds[u]:
                sy, sx = divmod(int(seed), width)
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        yy = min(max(sy + dy, 0), height - 1)
                        xx = min(max(sx + dx, 0), width - 1)
                        pool.append(yy * width + xx)
            pool = np.asarray(pool)
            l1 = np.abs(proxy.vectors[pool] - guide.vectors[u]).mean(axis=1)
            order = np.lexsort((pool, l1))
            kept = pool[order[:4]]
            np.testing.assert_array_equal(cand.linear()[u], kept)
            np.testing.assert_allclose(cand.distances[u], l1[order[:4]], rtol=1e-12)

    def test_kept_distances_bound_discarded_pool(self):
        rng = np.random.default_rng(5)
        guide = build_descriptors(random_rgb(rng, 5, 5), DescriptorConfig(patch_side=1))
        proxy = build_descriptors(random_rgb(rng, 5, 5), DescriptorConfig(patch_side=1))
        cfg = RetrievalConfig(seeds=2, expand_radius=1, keep=3)
        seeds, _ = knn_exact(guide, proxy, 2)
        cand = expand_and_refine(seeds, guide, proxy, cfg)
        for u in range(25):
            pool = set()
            for seed in seeds[u]:
                sy, sx = divmod(int(seed), 5)
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        pool.add((min(max(sy + dy, 0), 4)) * 5 + min(max(sx + dx, 0), 4))
            l1 = {
                v: np.abs(proxy.vectors[v] - guide.vectors[u]).mean() for v in pool
            }
            kept = cand.linear()[u]
            discarded = pool.difference(kept.tolist())
            if discarded:
                assert cand.distances[u].max() <= min(l1[v] for v in discarded) + 1e-15

    def test_pool_always_contains_seeds(self):
        rng = np.random.default_rng(6)
        guide = build_descriptors(random_rgb(rng, 5, 5), DescriptorConfig(patch_side=1))
        proxy = build_descriptors(random_rgb(rng, 5, 5), DescriptorConfig(patch_side=1))
        cfg = RetrievalConfig(seeds=4, expand_radius=0, keep=4)
        cand = retrieve(guide, proxy, cfg)
        seeds, _ = knn_exact(guide, proxy, 4)
        np.testing.assert_array_equal(np.sort(cand.linear(), axis=1), np.sort(seeds, axis=1))

    def test_duplicates_allowed_in_candidates(self):
        # two seeds adjacent to each other share expanded neighbors; the
        # clamped corner also duplicates entries, all kept as a multiset
        rng = np.random.default_rng(7)
        guide = build_descriptors(random_rgb(rng, 3, 3), DescriptorConfig(patch_side=1))
        proxy = build_descriptors(random_rgb(rng, 3, 3), DescriptorConfig(patch_side=1))
        cfg = RetrievalConfig(seeds=2, expand_radius=1, keep=9)
        cand = retrieve(guide, proxy, cfg)
        lin = cand.linear()
        # at least one pixel keeps a duplicated candidate (pool 18 over 9 sites)
        has_dup = any(len(set(lin[u].tolist())) < cand.keep for u in range(9))
        assert has_dup

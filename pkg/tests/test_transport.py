"""Frozen sparse operators: construction, application and verification."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from specwarp import (
    HyperCube,
    SparseWarp,
    WarpContainerError,
    WarpParams,
    compose,
    freeze,
    init_params,
    load_warp,
    overlap_kappa,
    save_warp,
    soft_weights,
    transfer,
    verify_operator,
)
from specwarp.warp import stencil_indices

from conftest import random_params, retrieval_scene, self_candidates, texture_cube


def identity_warp(n: int, k_limit: int = 1, stencil: int = 1) -> SparseWarp:
    return SparseWarp(matrix=sp.identity(n, format="csr"), k_limit=k_limit, stencil=stencil)


def random_operator(rng: np.random.Generator, side: int) -> SparseWarp:
    """Frozen composite from random logits on a small self-candidate scene."""
    cand = self_candidates(side, side, keep=4)
    params = random_params(rng, cand, stencil=3)
    factor_a, factor_b = freeze(params, cand)
    return compose(factor_a, factor_b)


class TestSparseWarp:
    def test_non_square_rejected(self):
        with pytest.raises(ValueError, match="square"):
            SparseWarp(matrix=sp.csr_matrix(np.ones((2, 3))), k_limit=1, stencil=1)

    def test_duplicates_merge_and_zeros_drop(self):
        rows = [0, 0, 0, 1]
        cols = [1, 1, 0, 1]
        vals = [0.3, 0.2, 0.0, 1.0]
        coo = sp.coo_matrix((vals, (rows, cols)), shape=(2, 2))
        warp = SparseWarp(matrix=coo.tocsr(), k_limit=2, stencil=1)
        np.testing.assert_array_equal(warp.row_supports(), [1, 1])
        assert warp.matrix[0, 1] == pytest.approx(0.5)

    def test_apply_matches_dense(self):
        rng = np.random.default_rng(0)
        dense = rng.random((6, 6))
        dense /= dense.sum(axis=1, keepdims=True)
        warp = SparseWarp(matrix=sp.csr_matrix(dense), k_limit=6, stencil=1)
        field = rng.random((6, 3))
        np.testing.assert_allclose(warp.apply(field), dense @ field, atol=1e-14)
        vec = rng.random(6)
        out = warp.apply(vec)
        assert out.shape == (6,)
        np.testing.assert_allclose(out, dense @ vec, atol=1e-14)

    def test_apply_size_mismatch_rejected(self):
        warp = identity_warp(4)
        with pytest.raises(ValueError, match="rows"):
            warp.apply(np.zeros(5))

    def test_support_bound(self):
        warp = identity_warp(4, k_limit=16, stencil=7)
        assert warp.support_bound == 784


class TestFreeze:
    def test_sharp_logits_give_identity_factors(self):
        # a logit gap of 800 underflows the off weights to exact zero,
        # which construction then drops from the stored support
        cand = self_candidates(3, 3, keep=3)
        agg = np.full((9, 3), -800.0)
        agg[:, 0] = 800.0
        interp = np.zeros((9, 9))
        interp[:, 4] = 800.0
        params = WarpParams(agg_logits=agg, interp_logits=interp, stencil=3)
        factor_a, factor_b = freeze(params, cand)
        for factor in (factor_a, factor_b):
            np.testing.assert_array_equal(factor.row_supports(), np.ones(9))
            np.testing.assert_allclose(factor.matrix.toarray(), np.eye(9))
        assert (factor_a.k_limit, factor_a.stencil) == (3, 1)
        assert (factor_b.k_limit, factor_b.stencil) == (1, 3)

    def test_aggregation_rows_match_softmax_accumulation(self):
        rng = np.random.default_rng(1)
        _, _, cand = retrieval_scene(rng, 6, 6)
        params = random_params(rng, cand, stencil=3)
        factor_a, _ = freeze(params, cand)
        weights = soft_weights(params.agg_logits, params.temperature)
        lin = cand.linear()
        dense = factor_a.matrix.toarray()
        for u in range(36):
            accumulated = {}
            for k in range(cand.keep):
                col = int(lin[u, k])
                accumulated[col] = accumulated.get(col, 0.0) + weights[u, k]
            total = sum(accumulated.values())
            for col, value in accumulated.items():
                np.testing.assert_allclose(dense[u, col], value / total, atol=1e-12)
            assert np.count_nonzero(dense[u]) == len(accumulated)

    def test_interpolation_rows_match_stencil_accumulation(self):
        rng = np.random.default_rng(2)
        cand = self_candidates(4, 4, keep=2)
        params = random_params(rng, cand, stencil=3)
        _, factor_b = freeze(params, cand)
        weights = soft_weights(params.interp_logits)
        neighbors = stencil_indices(4, 4, 3)
        dense = factor_b.matrix.toarray()
        for u in range(16):
            accumulated = {}
            for s in range(9):
                col = int(neighbors[u, s])
                accumulated[col] = accumulated.get(col, 0.0) + weights[u, s]
            total = sum(accumulated.values())
            for col, value in accumulated.items():
                np.testing.assert_allclose(dense[u, col], value / total, atol=1e-12)

    def test_rows_renormalize_exactly(self):
        rng = np.random.default_rng(3)
        _, _, cand = retrieval_scene(rng, 8, 8)
        params = random_params(rng, cand)
        factor_a, factor_b = freeze(params, cand)
        for factor in (factor_a, factor_b):
            np.testing.assert_allclose(factor.row_sums(), 1.0, atol=1e-12)

    def test_pixel_count_mismatch_rejected(self):
        cand = self_candidates(2, 2, keep=2)
        params = random_params(np.random.default_rng(4), self_candidates(3, 3, keep=2))
        with pytest.raises(ValueError, match="pixels"):
            freeze(params, cand)


class TestTransfer:
    def test_identity_operators_reproduce_cube(self):
        rng = np.random.default_rng(5)
        cube = texture_cube(rng, 4, 5, 6)
        eye = identity_warp(30)
        out = transfer(eye, eye, cube)
        np.testing.assert_array_equal(out.data, cube.data)
        assert out.clamped == 0

    def test_constant_cube_is_fixed_point(self):
        rng = np.random.default_rng(6)
        cube = HyperCube(
            data=np.full((3, 6, 6), 0.4, dtype=np.float32),
            wavelengths_nm=np.array([400.0, 500.0, 600.0]),
        )
        operator = random_operator(rng, 6)
        half = identity_warp(36)
        out = transfer(operator, half, cube)
        np.testing.assert_allclose(out.data, 0.4, atol=1e-6)

    def test_matches_manual_two_step(self):
        rng = np.random.default_rng(7)
        cube = texture_cube(rng, 4, 6, 6)
        cand = self_candidates(6, 6, keep=4)
        params = random_params(rng, cand, stencil=3)
        factor_a, factor_b = freeze(params, cand)
        out = transfer(factor_a, factor_b, cube)
        manual = factor_b.matrix @ (factor_a.matrix @ cube.pixel_matrix())
        np.testing.assert_allclose(out.pixel_matrix(), manual, atol=1e-6)
        assert out.clamped == 0
        np.testing.assert_array_equal(out.wavelengths_nm, cube.wavelengths_nm)

    def test_size_mismatch_rejected(self):
        rng = np.random.default_rng(8)
        cube = texture_cube(rng, 3, 4, 4)
        with pytest.raises(ValueError, match="pixels"):
            transfer(identity_warp(9), identity_warp(9), cube)


class TestCompose:
    def test_matches_two_step_application(self):
        rng = np.random.default_rng(9)
        cand = self_candidates(6, 6, keep=4)
        params = random_params(rng, cand, stencil=3)
        factor_a, factor_b = freeze(params, cand)
        combined = compose(factor_a, factor_b)
        field = rng.random((36, 5))
        two_step = factor_b.apply(factor_a.apply(field))
        np.testing.assert_allclose(combined.apply(field), two_step, atol=1e-12)

    def test_bookkeeping(self):
        a = identity_warp(4, k_limit=16, stencil=1)
        b = identity_warp(4, k_limit=1, stencil=7)
        combined = compose(a, b)
        assert combined.k_limit == 16
        assert combined.stencil == 7
        assert combined.support_bound == 784

    def test_size_mismatch_rejected(self):
        with pytest.raises(ValueError, match="sizes"):
            compose(identity_warp(4), identity_warp(9))

    def test_composite_stays_row_stochastic(self):
        rng = np.random.default_rng(10)
        combined = random_operator(rng, 8)
        assert combined.matrix.data.min() >= 0
        np.testing.assert_allclose(combined.row_sums(), 1.0, atol=1e-12)
        assert combined.row_supports().max() <= combined.support_bound


class TestVerifyOperator:
    def test_valid_operator_passes(self):
        rng = np.random.default_rng(11)
        report = verify_operator(random_operator(rng, 8))
        assert report.passed
        assert report.nonnegative
        assert report.max_row_sum_error <= 1e-9
        assert report.hull_violations == 0
        assert report.failures == ()

    def test_scaled_row_fails_and_names_row(self):
        matrix = sp.identity(5, format="csr").tolil()
        matrix[3, 3] = 1.5
        warp = SparseWarp(matrix=matrix.tocsr(), k_limit=1, stencil=1)
        report = verify_operator(warp)
        assert not report.passed
        assert any("row sums" in f and "3" in f for f in report.failures)

    def test_negative_weight_fails(self):
        dense = np.eye(4)
        dense[2, 2] = -1.0
        dense[2, 3] = 2.0
        warp = SparseWarp(matrix=sp.csr_matrix(dense), k_limit=2, stencil=1)
        report = verify_operator(warp)
        assert not report.nonnegative
        assert any("negative" in f for f in report.failures)
        # affine-but-not-convex rows can leave the value hull of their support
        assert report.hull_violations > 0

    def test_support_bound_violation_fails(self):
        dense = np.full((3, 3), 1.0 / 3.0)
        warp = SparseWarp(matrix=sp.csr_matrix(dense), k_limit=1, stencil=1)
        report = verify_operator(warp)
        assert report.max_row_support == 3
        assert any("support" in f for f in report.failures)

    def test_report_serializes(self):
        report = verify_operator(identity_warp(4))
        data = report.to_dict()
        assert data["passed"] is True
        assert data["support_bound"] == 1


class TestOverlapKappa:
    def test_permutation_has_unit_gain(self):
        rng = np.random.default_rng(12)
        perm = rng.permutation(16)
        matrix = sp.csr_matrix(
            (np.ones(16), (np.arange(16), perm)), shape=(16, 16)
        )
        warp = SparseWarp(matrix=matrix, k_limit=1, stencil=1)
        assert overlap_kappa(warp) == pytest.approx(1.0, abs=1e-9)

    def test_all_rows_on_one_column(self):
        n = 4
        matrix = sp.csr_matrix(
            (np.ones(n), (np.arange(n), np.zeros(n, dtype=int))), shape=(n, n)
        )
        warp = SparseWarp(matrix=matrix, k_limit=1, stencil=1)
        # transpose-product has a single eigenvalue n on the shared column
        assert overlap_kappa(warp) == pytest.approx(float(n), rel=1e-8)

    def test_matches_dense_eigenvalue(self):
        rng = np.random.default_rng(13)
        warp = random_operator(rng, 8)
        dense = warp.matrix.toarray()
        oracle = float(np.linalg.eigvalsh(dense.T @ dense).max())
        assert overlap_kappa(warp) == pytest.approx(oracle, rel=1e-6)

    def test_never_below_one_for_row_stochastic(self):
        rng = np.random.default_rng(14)
        for seed in range(5):
            warp = random_operator(np.random.default_rng(seed), 6)
            assert overlap_kappa(warp) >= 1.0 - 1e-9


class TestWarpContainer:
    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(15)
        warp = random_operator(rng, 8)
        path = str(tmp_path / "op.swrp")
        save_warp(warp, path)
        loaded = load_warp(path)
        assert (loaded.n, loaded.k_limit, loaded.stencil) == (
            warp.n, warp.k_limit, warp.stencil,
        )
        np.testing.assert_array_equal(loaded.matrix.indptr, warp.matrix.indptr)
        np.testing.assert_array_equal(loaded.matrix.indices, warp.matrix.indices)
        np.testing.assert_array_equal(loaded.matrix.data, warp.matrix.data)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.swrp"
        path.write_bytes(b"NOPE" + bytes(12))
        with pytest.raises(WarpContainerError, match="magic"):
            load_warp(str(path))

    def test_truncated_payload_rejected(self, tmp_path):
        rng = np.random.default_rng(16)
        warp = random_operator(rng, 4)
        path = str(tmp_path / "short.swrp")
        save_warp(warp, path)
        blob = open(path, "rb").read()
        open(path, "wb").write(blob[:-8])
        with pytest.raises(WarpContainerError, match="declares"):
            load_warp(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        rng = np.random.default_rng(17)
        warp = random_operator(rng, 4)
        path = str(tmp_path / "long.swrp")
        save_warp(warp, path)
        with open(path, "ab") as fh:
            fh.write(b"\x00" * 4)
        with pytest.raises(WarpContainerError, match="declares"):
            load_warp(path)

    def test_out_of_lattice_column_rejected(self, tmp_path):
        path = str(tmp_path / "col.swrp")
        save_warp(identity_warp(2), path)
        blob = bytearray(open(path, "rb").read())
        # second row's column index lives at the end of the u32 column block
        cols_off = 16 + 4 * 2 + 4
        blob[cols_off : cols_off + 4] = np.asarray([9], dtype="<u4").tobytes()
        open(path, "wb").write(bytes(blob))
        with pytest.raises(WarpContainerError, match="lattice"):
            load_warp(path)

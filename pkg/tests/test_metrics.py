"""Reconstruction quality metrics against closed forms and oracles."""

from __future__ import annotations

import numpy as np
import pytest

from specwarp import HyperCube, evaluate, psnr, sam, ssim

from conftest import texture_cube


def constant_cube(value: float, bands: int = 3, side: int = 16) -> HyperCube:
    return HyperCube(
        data=np.full((bands, side, side), value, dtype=np.float32),
        wavelengths_nm=np.linspace(400.0, 700.0, bands),
    )


def cube_from(data: np.ndarray) -> HyperCube:
    data = np.asarray(data, dtype=np.float32)
    return HyperCube(
        data=data, wavelengths_nm=np.linspace(400.0, 700.0, data.shape[0])
    )


class TestPsnr:
    def test_constant_offset_closed_form(self):
        a = constant_cube(0.4)
        b = constant_cube(0.5)
        # mse = 0.01 exactly, so 10 log10(1 / 0.01) = 20 dB
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-6)

    def test_identical_inputs_hit_sentinel(self):
        rng = np.random.default_rng(0)
        cube = texture_cube(rng, 4, 8, 8)
        assert psnr(cube, cube) == 100.0

    def test_tiny_error_caps_at_sentinel(self):
        a = constant_cube(0.5)
        data = np.array(a.data)
        data[0, 0, 0] += 1e-7
        b = cube_from(data)
        assert psnr(a, b) == 100.0

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        x = texture_cube(rng, 4, 10, 10)
        y = texture_cube(rng, 4, 10, 10)
        assert psnr(x, y) == psnr(y, x)

    def test_gaussian_noise_matches_sigma_prediction(self):
        # mse -> sigma^2 so psnr -> -20 log10(sigma) = 26.02 dB at 0.05
        values = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            clean = np.full((4, 32, 32), 0.5)
            noisy = clean + 0.05 * rng.standard_normal(clean.shape)
            values.append(psnr(cube_from(clean), cube_from(np.clip(noisy, 0, 1))))
        assert np.mean(values) == pytest.approx(26.0206, abs=0.2)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            psnr(constant_cube(0.5, side=8), constant_cube(0.5, side=16))


class TestSsim:
    def test_self_similarity_is_exactly_one(self):
        rng = np.random.default_rng(2)
        cube = texture_cube(rng, 4, 16, 16)
        assert ssim(cube, cube) == 1.0

    def test_constant_pair_reduces_to_luminance_term(self):
        a = constant_cube(0.2)
        b = constant_cube(0.7)
        c1 = 0.01**2
        # the stored planes carry the f32 roundings of 0.2 and 0.7
        mu_a = float(np.float32(0.2))
        mu_b = float(np.float32(0.7))
        expected = (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
        assert ssim(a, b) == pytest.approx(expected, rel=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        x = texture_cube(rng, 3, 16, 16)
        y = texture_cube(rng, 3, 16, 16)
        assert ssim(x, y) == pytest.approx(ssim(y, x), abs=1e-12)

    def test_bounded_above_by_one(self):
        rng = np.random.default_rng(4)
        x = texture_cube(rng, 3, 16, 16)
        y = texture_cube(rng, 3, 16, 16)
        assert ssim(x, y) < 1.0

    def test_noise_lowers_score(self):
        rng = np.random.default_rng(5)
        clean = texture_cube(rng, 3, 24, 24)
        light = np.clip(clean.data + 0.02 * rng.standard_normal(clean.data.shape), 0, 1)
        heavy = np.clip(clean.data + 0.2 * rng.standard_normal(clean.data.shape), 0, 1)
        assert ssim(clean, cube_from(heavy)) < ssim(clean, cube_from(light)) < 1.0

    def test_window_shrinks_for_small_inputs(self):
        rng = np.random.default_rng(6)
        tiny = texture_cube(rng, 3, 5, 5)
        value = ssim(tiny, tiny)
        assert value == 1.0
        other = texture_cube(rng, 3, 5, 5)
        assert -1.0 <= ssim(tiny, other) <= 1.0


class TestSam:
    def test_identical_spectra_give_exact_zero(self):
        rng = np.random.default_rng(7)
        cube = texture_cube(rng, 8, 12, 12)
        assert sam(cube, cube) == 0.0

    def test_scaled_spectra_give_exact_zero(self):
        rng = np.random.default_rng(8)
        cube = texture_cube(rng, 8, 12, 12)
        half = cube_from(0.5 * cube.data)
        assert sam(cube, half) == 0.0

    def test_orthogonal_spectra_give_ninety(self):
        a = np.zeros((2, 4, 4), dtype=np.float32)
        b = np.zeros((2, 4, 4), dtype=np.float32)
        a[0] = 1.0
        b[1] = 1.0
        assert sam(cube_from(a), cube_from(b)) == pytest.approx(90.0, abs=1e-12)

    def test_matches_arccos_oracle(self):
        rng = np.random.default_rng(9)
        x = texture_cube(rng, 6, 10, 10)
        y = texture_cube(rng, 6, 10, 10)
        mat_x = x.pixel_matrix()
        mat_y = y.pixel_matrix()
        dots = np.einsum("nb,nb->n", mat_x, mat_y)
        norms = np.linalg.norm(mat_x, axis=1) * np.linalg.norm(mat_y, axis=1)
        oracle = float(np.degrees(np.mean(np.arccos(np.clip(dots / norms, -1, 1)))))
        assert sam(x, y) == pytest.approx(oracle, abs=1e-6)

    def test_symmetry(self):
        rng = np.random.default_rng(10)
        x = texture_cube(rng, 5, 8, 8)
        y = texture_cube(rng, 5, 8, 8)
        assert sam(x, y) == pytest.approx(sam(y, x), abs=1e-12)

    def test_tiny_norm_pixels_excluded(self):
        a = np.zeros((2, 2, 2), dtype=np.float32)
        b = np.zeros((2, 2, 2), dtype=np.float32)
        # one real pixel at a known 45 degree separation; rest below floor
        a[:, 0, 0] = [1.0, 0.0]
        b[:, 0, 0] = [1.0, 1.0]
        assert sam(cube_from(a), cube_from(b)) == pytest.approx(45.0, abs=1e-9)

    def test_all_pixels_below_floor_returns_zero(self):
        zeros = constant_cube(0.0, bands=3, side=4)
        assert sam(zeros, zeros) == 0.0


class TestEvaluate:
    def test_returns_all_three(self):
        rng = np.random.default_rng(11)
        ref = texture_cube(rng, 4, 16, 16)
        noisy = cube_from(
            np.clip(ref.data + 0.05 * rng.standard_normal(ref.data.shape), 0, 1)
        )
        report = evaluate(ref, noisy)
        assert report.psnr == pytest.approx(psnr(ref, noisy))
        assert report.ssim == pytest.approx(ssim(ref, noisy))
        assert report.sam == pytest.approx(sam(ref, noisy))
        payload = report.to_json()
        assert set(payload) == {"psnr", "ssim", "sam"}

"""Spectral calculus on the period-2 torus: transforms, Biot-Savart, norms."""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thinflow.spectral import (
    Grid,
    SpectralScalarField,
    VelocityField,
    biot_savart,
    curl,
    dealias,
    divergence,
    gradient,
    h1_seminorm,
    inverse_transform,
    l2_norm,
    laplacian,
    linf_norm,
    odd_odd_residual,
    read_checkpoint,
    velocity_l2,
    write_checkpoint,
)


def random_field(grid, seed=0, mean_free=False):
    rng = np.random.default_rng(seed)
    f = SpectralScalarField.from_samples(grid, rng.standard_normal((grid.N, grid.N)))
    if mean_free:
        c = f.coeffs.copy()
        c[0, 0] = 0.0
        f = SpectralScalarField.from_coeffs(grid, c)
    return f


class TestGrid:
    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            Grid(48)

    def test_rejects_small(self):
        with pytest.raises(ValueError):
            Grid(8)

    def test_rejects_other_period(self):
        with pytest.raises(ValueError):
            Grid(32, L=1.0)

    def test_spacing_and_coordinates(self):
        g = Grid(32)
        assert g.h == 2.0 / 32
        assert g.x[0] == 0.0 and g.x[-1] == 2.0 - g.h

    def test_wavenumbers_are_pi_times_modes(self):
        g = Grid(16)
        kx, ky = g.wavenumbers()
        assert kx[1, 0] == np.pi
        assert ky[0, 1] == np.pi
        assert kx[g.N // 2, 0] == -np.pi * g.N / 2

    def test_dealias_keeps_low_kills_high(self):
        g = Grid(64)
        mask = g.dealias_mask()
        assert mask[0, 0]
        assert mask[21, 21]
        assert not mask[22, 0]
        assert not mask[0, 32]


class TestScalarField:
    def test_round_trip_samples_coeffs(self):
        g = Grid(32)
        f = random_field(g, 1)
        back = SpectralScalarField.from_coeffs(g, f.coeffs)
        np.testing.assert_allclose(back.samples, f.samples, atol=1e-12)

    def test_zero_mode_is_mean(self):
        g = Grid(32)
        f = random_field(g, 2)
        assert f.coeffs[0, 0].real == pytest.approx(np.mean(f.samples), abs=1e-13)
        assert f.mean() == pytest.approx(np.mean(f.samples), abs=1e-13)

    def test_arithmetic(self):
        g = Grid(16)
        f, h = random_field(g, 3), random_field(g, 4)
        np.testing.assert_allclose((f + h).samples, f.samples + h.samples)
        np.testing.assert_allclose((f - h).samples, f.samples - h.samples)
        np.testing.assert_allclose((f * 2.5).samples, 2.5 * f.samples)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            SpectralScalarField.from_samples(Grid(16), np.zeros((32, 32)))

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_parseval(self, seed):
        g = Grid(32)
        f = random_field(g, seed)
        phys = np.sum(f.samples**2) * g.h**2
        spec = 4.0 * np.sum(np.abs(f.coeffs) ** 2)
        assert phys == pytest.approx(spec, rel=1e-12)
        assert l2_norm(f) == pytest.approx(np.sqrt(phys), rel=1e-12)


class TestCalculus:
    def test_gradient_of_plane_wave(self):
        g = Grid(64)
        X, Y = g.meshgrid()
        f = SpectralScalarField.from_samples(g, np.sin(np.pi * X) * np.cos(2 * np.pi * Y))
        fx, fy = gradient(f)
        np.testing.assert_allclose(
            fx.samples, np.pi * np.cos(np.pi * X) * np.cos(2 * np.pi * Y), atol=1e-12
        )
        np.testing.assert_allclose(
            fy.samples, -2 * np.pi * np.sin(np.pi * X) * np.sin(2 * np.pi * Y), atol=1e-12
        )

    def test_laplacian_eigenfunction(self):
        g = Grid(64)
        X, Y = g.meshgrid()
        f = SpectralScalarField.from_samples(g, np.sin(np.pi * X) * np.sin(np.pi * Y))
        np.testing.assert_allclose(laplacian(f).samples, -2 * np.pi**2 * f.samples, atol=1e-11)

    def test_h1_seminorm_plane_wave(self):
        g = Grid(64)
        X, _ = g.meshgrid()
        f = SpectralScalarField.from_samples(g, np.sin(np.pi * X))
        # ||f||^2 = 2, ||grad f||^2 = pi^2 * 2
        assert h1_seminorm(f) == pytest.approx(np.pi * np.sqrt(2.0), rel=1e-12)

    def test_dealias_removes_high_modes(self):
        g = Grid(32)
        f = random_field(g, 5)
        d = dealias(f)
        assert np.all(d.coeffs[~g.dealias_mask()] == 0)
        keep = g.dealias_mask()
        np.testing.assert_allclose(d.coeffs[keep], f.coeffs[keep])

    def test_linf_norm(self):
        g = Grid(16)
        f = random_field(g, 6)
        assert linf_norm(f) == np.max(np.abs(f.samples))


class TestBiotSavart:
    def test_explicit_single_mode(self):
        # omega = sin(pi x) sin(pi y): u = (1/(2 pi)) (sin(pi x) cos(pi y),
        # -cos(pi x) sin(pi y)) from u_hat = i k^perp / |k|^2 omega_hat.
        g = Grid(64)
        X, Y = g.meshgrid()
        w = SpectralScalarField.from_samples(g, np.sin(np.pi * X) * np.sin(np.pi * Y))
        u = biot_savart(w)
        np.testing.assert_allclose(
            u.u1.samples, np.sin(np.pi * X) * np.cos(np.pi * Y) / (2 * np.pi), atol=1e-12
        )
        np.testing.assert_allclose(
            u.u2.samples, -np.cos(np.pi * X) * np.sin(np.pi * Y) / (2 * np.pi), atol=1e-12
        )

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=20, deadline=None)
    def test_divergence_free_and_curl_round_trip(self, seed):
        g = Grid(32)
        w = random_field(g, seed, mean_free=True)
        u = biot_savart(w)
        wn = l2_norm(w)
        assert l2_norm(divergence(u)) <= 1e-12 * wn
        assert l2_norm(curl(u) - w) <= 1e-10 * wn

    def test_rejects_nonzero_mean(self):
        g = Grid(32)
        w = random_field(g, 11, mean_free=True)
        shift = SpectralScalarField.from_samples(g, w.samples + 3.0)
        with pytest.raises(ValueError, match="mean"):
            biot_savart(shift)

    def test_velocity_l2(self):
        g = Grid(64)
        X, Y = g.meshgrid()
        w = SpectralScalarField.from_samples(g, np.sin(np.pi * X) * np.sin(np.pi * Y))
        # ||u||_L2 = ||omega||_L2 / |k| with |k| = pi sqrt(2)
        assert velocity_l2(biot_savart(w)) == pytest.approx(
            l2_norm(w) / (np.pi * np.sqrt(2.0)), rel=1e-12
        )


class TestOddOdd:
    def test_odd_odd_field_has_zero_residual(self):
        g = Grid(64)
        X, Y = g.meshgrid()
        f = SpectralScalarField.from_samples(
            g, np.sin(np.pi * X) * np.sin(2 * np.pi * Y) + np.sin(3 * np.pi * X) * np.sin(np.pi * Y)
        )
        assert odd_odd_residual(f) <= 1e-13

    def test_even_component_detected(self):
        g = Grid(64)
        X, Y = g.meshgrid()
        f = SpectralScalarField.from_samples(g, np.cos(np.pi * X) * np.sin(np.pi * Y))
        # even in x: f + f(-x, y) = 2f, so the residual is 2 max|f|
        assert odd_odd_residual(f) == pytest.approx(2.0, rel=1e-10)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        g = Grid(32)
        f = random_field(g, 12)
        p = tmp_path / "state.bin"
        write_checkpoint(p, f, t=0.375, nu=1.5e-3)
        f2, t, nu = read_checkpoint(p)
        assert f2.grid.N == 32 and t == 0.375 and nu == 1.5e-3
        np.testing.assert_array_equal(f2.samples, f.samples)

    def test_rejects_garbage(self, tmp_path):
        p = tmp_path / "bad.bin"
        p.write_bytes(b"not a checkpoint at all")
        with pytest.raises(Exception):
            read_checkpoint(p)

    def test_deterministic_bytes(self, tmp_path):
        g = Grid(16)
        f = random_field(g, 13)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        write_checkpoint(p1, f, t=0.5, nu=0.0)
        write_checkpoint(p2, f, t=0.5, nu=0.0)
        assert p1.read_bytes() == p2.read_bytes()

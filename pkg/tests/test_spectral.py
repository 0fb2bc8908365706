# tests/test_spectral.py
from __future__ import annotations

import math

import numpy as np
import pytest

from kawahara_lab.errors import InvalidInput, InvalidParameters
from kawahara_lab.spectral import (
    CutoffEta,
    DispersionParams,
    GridSpec,
    SpaceTimeFunction,
    SpaceTimeLattice,
    SpectralField1D,
    eta,
    linear_multiplier,
    low_mask,
    phi,
    phi_prime,
    project_high,
    project_low,
    propagate,
    threshold_a,
    to_physical,
    to_physical_rows,
    to_spectral,
    to_spectral_rows,
)


# -------------------------
# Dispersion
# -------------------------
def test_alpha_zero_is_rejected():
    with pytest.raises(InvalidParameters, match="alpha must be nonzero"):
        DispersionParams(0.0, 1.0)


@pytest.mark.parametrize(
    "alpha,beta,expected",
    [
        (1.0, 0.0, 1.0),
        (1.0, 5.0 / 6.0, 1.0),
        (1.0, 5.0, math.sqrt(6.0)),
        (1.0, 10.0, math.sqrt(12.0)),
        (-2.0, 20.0, math.sqrt(12.0)),
    ],
)
def test_threshold_a(alpha, beta, expected):
    assert threshold_a(DispersionParams(alpha, beta)) == pytest.approx(expected)


def test_phi_is_odd_and_phi_prime_matches_difference_quotient():
    p = DispersionParams(1.5, -0.7)
    xi = np.linspace(-3.0, 3.0, 13)
    np.testing.assert_allclose(phi(-xi, p), -phi(xi, p))
    h = 1e-6
    fd = (phi(xi + h, p) - phi(xi - h, p)) / (2.0 * h)
    np.testing.assert_allclose(phi_prime(xi, p), fd, rtol=1e-7, atol=1e-6)


# -------------------------
# Cutoff
# -------------------------
def test_eta_profile():
    assert eta(0.0) == 1.0
    assert eta(1.0) == 1.0
    assert eta(2.0) == 0.0
    assert eta(5.0) == 0.0
    assert 0.0 < eta(1.5) < 1.0
    x = np.linspace(0.0, 3.0, 31)
    np.testing.assert_array_equal(eta(x), eta(-x))
    assert np.all(np.diff(eta(x)) <= 0.0)


def test_scaled_cutoff():
    c = CutoffEta(2.0)
    assert c(2.0) == 1.0
    assert c(4.0) == 0.0
    with pytest.raises(InvalidParameters):
        CutoffEta(0.0)


# -------------------------
# Grid
# -------------------------
@pytest.mark.parametrize("M", [4, 100, 0])
def test_grid_rejects_bad_point_counts(M):
    with pytest.raises(InvalidParameters):
        GridSpec(math.pi, M)


def test_grid_layout(small_grid):
    g = small_grid
    assert g.dx == pytest.approx(2.0 * g.half_length / g.points)
    assert g.dxi == pytest.approx(1.0 / 8.0)
    assert g.max_frequency == pytest.approx(4.0)
    assert g.x[0] == pytest.approx(-g.half_length)
    assert g.k[g.nyquist_index] == -g.points // 2
    assert g.index_of(-1) == g.points - 1
    assert np.array_equal(g.k[g.mirror], np.where(g.k == -g.points // 2, g.k, -g.k))
    with pytest.raises(InvalidInput):
        g.index_of(g.points // 2)
    assert g.refined().points == 2 * g.points
    assert g.refined().dxi == g.dxi


# -------------------------
# Transforms
# -------------------------
@pytest.mark.parametrize("shift", [0.0, 1.0, -2.5])
def test_forward_transform_of_gaussian(shift):
    grid = GridSpec(8.0 * math.pi, 256)
    u = np.exp(-0.5 * (grid.x - shift) ** 2)
    c = to_spectral_rows(u, grid)
    expected = np.exp(-1j * shift * grid.xi) * np.exp(-0.5 * grid.xi**2)
    np.testing.assert_allclose(c, expected, atol=1e-12)


def test_real_band_limited_round_trip(small_grid):
    g = small_grid
    u = np.cos(3 * g.dxi * g.x) + 0.5 * np.sin(5 * g.dxi * g.x) + 0.25
    field = to_spectral(u, g)
    assert field.is_real()
    back = to_physical(field)
    assert np.isrealobj(back)
    np.testing.assert_allclose(back, u, atol=1e-13)


def test_complex_round_trip_and_parseval(small_grid, rng):
    g = small_grid
    u = rng.normal(size=g.points) + 1j * rng.normal(size=g.points)
    c = to_spectral_rows(u, g)
    np.testing.assert_allclose(to_physical_rows(c, g), u, atol=1e-12)
    l2_x = math.sqrt(float(np.sum(np.abs(u) ** 2)) * g.dx)
    assert SpectralField1D(g, c).l2_norm() == pytest.approx(l2_x, rel=1e-12)


def test_real_input_zeroes_the_unpaired_mode(small_grid, rng):
    g = small_grid
    c = to_spectral_rows(rng.normal(size=(3, g.points)), g)
    assert np.all(c[:, g.nyquist_index] == 0.0)
    np.testing.assert_array_equal(c, np.conj(c[:, g.mirror]))


def test_transforms_reject_wrong_shapes(small_grid):
    with pytest.raises(InvalidInput):
        to_spectral_rows(np.zeros(7), small_grid)
    with pytest.raises(InvalidInput):
        to_physical_rows(np.zeros(7), small_grid)
    with pytest.raises(InvalidInput):
        to_spectral(np.zeros((2, small_grid.points)), small_grid)


# -------------------------
# Fields
# -------------------------
def test_field_algebra(small_grid):
    g = small_grid
    a = SpectralField1D.single_mode(g, 2, 1.0)
    b = SpectralField1D.single_mode(g, -2, 1.0)
    s = a + b
    assert s.is_real()
    assert not a.is_real()
    assert (s - b).coeffs[g.index_of(2)] == 1.0
    assert (-a).coeffs[g.index_of(2)] == -1.0
    assert (2.0 * a).coeffs[g.index_of(2)] == 2.0
    assert SpectralField1D.zeros(g).mean_mode == 0.0
    with pytest.raises(InvalidInput):
        a + SpectralField1D.zeros(g.refined())
    with pytest.raises(InvalidInput):
        SpectralField1D(g, np.zeros(g.points + 1))


def test_field_is_immutable(small_grid):
    f = SpectralField1D.zeros(small_grid)
    with pytest.raises(ValueError):
        f.coeffs[0] = 1.0


# -------------------------
# Linear flow
# -------------------------
def test_propagator_is_unitary_and_a_group(small_grid, params, rng):
    g = small_grid
    samples = rng.normal(size=g.points)
    u = to_spectral(samples, g)
    m = linear_multiplier(g, 0.37, params)
    np.testing.assert_allclose(np.abs(m), 1.0, atol=1e-14)
    assert propagate(u, 0.37, params).l2_norm() == pytest.approx(u.l2_norm(), rel=1e-12)
    composed = propagate(propagate(u, 0.2, params), 0.3, params)
    direct = propagate(u, 0.5, params)
    np.testing.assert_allclose(composed.coeffs, direct.coeffs, atol=1e-12)
    back = propagate(direct, -0.5, params)
    np.testing.assert_allclose(back.coeffs, u.coeffs, atol=1e-12)


def test_single_mode_phase(small_grid, params):
    g = small_grid
    u = SpectralField1D.single_mode(g, 8)
    t = 0.01
    out = propagate(u, t, params)
    xi = g.xi[g.index_of(8)]
    assert out.coeffs[g.index_of(8)] == pytest.approx(np.exp(-1j * t * phi(xi, params)))


# -------------------------
# Projections
# -------------------------
def test_low_mask_keeps_the_boundary(small_grid):
    g = small_grid
    mask = low_mask(g, 1.0)
    assert mask[g.index_of(8)]
    assert not mask[g.index_of(9)]
    assert low_mask(g, 0.0).sum() == 1
    with pytest.raises(InvalidInput):
        low_mask(g, -1.0)


def test_projections_split_the_field(small_grid, rng):
    g = small_grid
    u = to_spectral(rng.normal(size=g.points), g)
    low = project_low(u, 1.5)
    high = project_high(u, 1.5)
    np.testing.assert_array_equal((low + high).coeffs, u.coeffs)
    assert np.all(low.coeffs[np.abs(g.xi) > 1.5] == 0.0)
    assert np.all(high.coeffs[np.abs(g.xi) <= 1.5] == 0.0)


# -------------------------
# Space-time
# -------------------------
def test_lattice_times(small_grid):
    lat = SpaceTimeLattice(small_grid, 2.0, 16)
    assert lat.dt == pytest.approx(0.25)
    assert lat.times[lat.zero_index] == 0.0
    assert lat.times[0] == pytest.approx(-2.0)
    assert lat.shape == (16, small_grid.points)
    fine = lat.refined()
    assert fine.n_t == 32 and fine.grid.points == 2 * small_grid.points
    assert fine.t_half == lat.t_half


@pytest.mark.parametrize("n_t", [0, 3, 15])
def test_lattice_rejects_odd_sizes(small_grid, n_t):
    with pytest.raises(InvalidParameters):
        SpaceTimeLattice(small_grid, 2.0, n_t)


def test_free_wave_rows_match_propagate(lattice, params, rng):
    g = lattice.grid
    u0 = to_spectral(np.cos(2 * g.dxi * g.x) + 0.3 * np.cos(7 * g.dxi * g.x), g)
    fn = SpaceTimeFunction.free_wave(u0, lattice, params)
    for j in (0, lattice.zero_index, lattice.n_t - 1):
        expected = propagate(u0, lattice.times[j], params)
        np.testing.assert_allclose(fn.at(j).coeffs, expected.coeffs, atol=1e-12)
    np.testing.assert_allclose(fn.samples()[lattice.zero_index], to_physical(u0), atol=1e-12)

    tapered = SpaceTimeFunction.free_wave(u0, lattice, params, taper=CutoffEta(0.5))
    assert np.all(tapered.rows[0] == 0.0)
    np.testing.assert_array_equal(tapered.rows[lattice.zero_index], u0.coeffs)


def test_space_time_function_checks(lattice):
    z = SpaceTimeFunction.zeros(lattice)
    assert (z + z).rows.shape == lattice.shape
    with pytest.raises(InvalidInput):
        SpaceTimeFunction(lattice, np.zeros((3, 3)))
    with pytest.raises(InvalidInput):
        z - SpaceTimeFunction.zeros(lattice.refined())

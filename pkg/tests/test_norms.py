# tests/test_norms.py
from __future__ import annotations

import math

import numpy as np
import pytest

from kawahara_lab.errors import InvalidInput, InvalidParameters
from kawahara_lab.families import bump_data_family, free_wave_family
from kawahara_lab.norms import (
    NormParams,
    SpaceTimeSample,
    SpaceTimeSpectrum,
    dominant_modulation,
    estimate_ratio,
    mixed_norm,
    phase_step,
    resolved_refinement,
    resonance_gap,
    sobolev_norm,
    time_taper,
    xsb_norm,
)
from kawahara_lab.spectral import (
    ETA,
    DispersionParams,
    GridSpec,
    SpaceTimeFunction,
    SpaceTimeLattice,
    SpectralField1D,
    bracket,
    phi,
    to_spectral,
)


def _random_function(lattice: SpaceTimeLattice, rng: np.random.Generator) -> SpaceTimeFunction:
    rows = rng.normal(size=lattice.shape) + 1j * rng.normal(size=lattice.shape)
    return SpaceTimeFunction(lattice, rows)


# -------------------------
# Parameters
# -------------------------
def test_norm_params_defaults():
    p = NormParams()
    assert p.b == pytest.approx(0.6)
    assert p.s2 == pytest.approx(-0.4)
    assert p.b_prime == pytest.approx(-0.3)
    assert p.s1 == pytest.approx(0.7)
    assert set(p.derived()) == {"b", "b_prime", "s1", "s2", "D"}


@pytest.mark.parametrize(
    "kwargs",
    [
        {"epsilon": 0.0},
        {"epsilon": 0.25},
        {"epsilon": 0.1, "s2": -0.45},
        {"b": 0.0},
    ],
)
def test_norm_params_rejects(kwargs):
    with pytest.raises(InvalidParameters):
        NormParams(**kwargs)


def test_threshold_follows_dispersion():
    p = DispersionParams(1.0, 10.0)
    np_ = NormParams.for_dispersion(p)
    assert np_.D == pytest.approx(4.0 * math.sqrt(12.0))
    with pytest.raises(InvalidParameters, match="4a"):
        NormParams.for_dispersion(p, D=4.0)


# -------------------------
# Resonance
# -------------------------
def test_resonance_identity(rng):
    p = DispersionParams(1.3, 0.7)
    xi1 = rng.uniform(-10.0, 10.0, size=1000)
    xi2 = rng.uniform(-10.0, 10.0, size=1000)
    tau1 = rng.uniform(-1e4, 1e4, size=1000)
    tau2 = rng.uniform(-1e4, 1e4, size=1000)
    xi, tau = xi1 + xi2, tau1 + tau2
    sigma = tau + phi(xi, p)
    sigma1 = tau1 + phi(xi1, p)
    sigma2 = tau2 + phi(xi2, p)
    lhs = np.abs(sigma - sigma1 - sigma2)
    gap = resonance_gap(xi1, xi2, p)
    np.testing.assert_allclose(lhs, gap, rtol=1e-9, atol=1e-9 * 20.0**5)


def test_dominant_modulation_carries_a_third_of_the_gap(rng):
    p = DispersionParams(1.0, 0.5)
    for _ in range(200):
        xi1, xi2 = rng.uniform(-6.0, 6.0, size=2)
        tau1, tau2 = rng.uniform(-500.0, 500.0, size=2)
        xi, tau = xi1 + xi2, tau1 + tau2
        name = dominant_modulation(xi1, tau1, xi, tau, p)
        value = {
            "sigma": abs(tau + phi(xi, p)),
            "sigma1": abs(tau1 + phi(xi1, p)),
            "sigma2": abs(tau2 + phi(xi2, p)),
        }[name]
        assert value >= resonance_gap(xi1, xi2, p) / 3.0 - 1e-9


def test_resonance_gap_scalar():
    assert resonance_gap(1.0, 1.0, DispersionParams()) == pytest.approx(5.0 * 2.0 * 3.0)


# -------------------------
# Sobolev / Bourgain
# -------------------------
def test_sobolev_norm_of_single_mode(small_grid):
    g = small_grid
    u = SpectralField1D.single_mode(g, 16, 2.0)
    xi = g.xi[g.index_of(16)]
    assert sobolev_norm(u, 0.0) == pytest.approx(u.l2_norm())
    assert sobolev_norm(u, 0.5) == pytest.approx(2.0 * math.sqrt(g.dxi) * bracket(xi) ** 0.5)


def test_space_time_plancherel(lattice, rng):
    fn = _random_function(lattice, rng)
    F = SpaceTimeSpectrum.from_function(fn, taper=False)
    samples = fn.samples()
    expected = math.sqrt(float(np.sum(np.abs(samples) ** 2)) * lattice.grid.dx * lattice.dt)
    assert F.l2_norm() == pytest.approx(expected, rel=1e-12)
    assert xsb_norm(F, 0.0, 0.0, DispersionParams()) == pytest.approx(F.l2_norm(), rel=1e-12)


def test_padding_round_trip(lattice, rng):
    fn = _random_function(lattice, rng)
    F = SpaceTimeSpectrum.from_function(fn, taper=False)
    assert F.coeffs.shape == (lattice.grid.points, 2 * lattice.n_t)
    assert F.sigma(DispersionParams()).shape == F.coeffs.shape
    rows = F.padded_rows()
    np.testing.assert_allclose(rows[: lattice.n_t], fn.rows, atol=1e-12)
    np.testing.assert_allclose(rows[lattice.n_t:], 0.0, atol=1e-12)


def test_tau_spacing(lattice):
    F = SpaceTimeSpectrum.from_function(SpaceTimeFunction.zeros(lattice))
    assert F.dtau == pytest.approx(2.0 * math.pi / (4.0 * lattice.t_half))
    assert F.tau[1] == pytest.approx(F.dtau)


def test_from_samples_matches_from_function(lattice, rng):
    g = lattice.grid
    u0 = to_spectral(np.cos(3 * g.dxi * g.x), g)
    fn = SpaceTimeFunction.free_wave(u0, lattice, DispersionParams())
    a = SpaceTimeSpectrum.from_function(fn)
    b = SpaceTimeSpectrum.from_samples(fn.samples(), lattice)
    np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-12)
    with pytest.raises(InvalidInput):
        SpaceTimeSpectrum.from_samples(np.zeros((3, 3)), lattice)


def test_product_is_a_cyclic_convolution(rng):
    lattice = SpaceTimeLattice(GridSpec(4.0, 8), 1.0, 4)
    Fu = SpaceTimeSpectrum.from_function(_random_function(lattice, rng), taper=False)
    Fv = SpaceTimeSpectrum.from_function(_random_function(lattice, rng), taper=False)
    M, P = Fu.coeffs.shape
    scale = lattice.grid.dxi * Fu.dtau / (2.0 * math.pi)
    naive = np.zeros((M, P), dtype=np.complex128)
    for k in range(M):
        for n in range(P):
            total = 0.0j
            for k1 in range(M):
                for n1 in range(P):
                    total += Fu.coeffs[k1, n1] * Fv.coeffs[(k - k1) % M, (n - n1) % P]
            naive[k, n] = scale * total
    np.testing.assert_allclose(Fu.multiply(Fv).coeffs, naive, atol=1e-10)


def test_derivative_multiplier(lattice, rng):
    F = SpaceTimeSpectrum.from_function(_random_function(lattice, rng))
    np.testing.assert_allclose(F.derivative().coeffs, F.coeffs * (1j * lattice.grid.xi)[:, None])


def test_free_wave_sits_near_the_dispersion_surface(small_grid):
    g = small_grid
    params = DispersionParams(0.01, 0.0)
    lattice = SpaceTimeLattice(g, 2.0, 128)
    u0 = to_spectral(np.exp(-0.5 * g.x**2), g)
    F = SpaceTimeSample(SpaceTimeFunction.free_wave(u0, lattice, params), u0).spectrum
    l2 = F.l2_norm()
    # <sigma>^b >= 1, and the taper keeps the modulation O(1)
    assert l2 <= xsb_norm(F, 0.0, 0.6, params) <= 3.0 * l2


def test_taper_matches_eta_on_the_default_window(lattice):
    np.testing.assert_array_equal(time_taper(lattice), ETA(lattice.times))


def test_tapered_samples(lattice, rng):
    fn = _random_function(lattice, rng)
    sample = SpaceTimeSample(fn)
    np.testing.assert_allclose(sample.tapered_samples, fn.samples() * time_taper(lattice)[:, None], atol=1e-12)
    assert sample.lattice is lattice


# -------------------------
# Mixed norms
# -------------------------
def _naive_mixed(u, dx, dt, p_x, p_t, order):
    a = np.abs(u)
    n_t, n_x = a.shape

    def lp(values, w, p):
        if math.isinf(p):
            return max(values)
        return sum(wi * v**p for wi, v in zip(w, values)) ** (1.0 / p)

    if order == "x-outer":
        inner = [lp([a[j, i] for j in range(n_t)], dt, p_t) for i in range(n_x)]
        return lp(inner, [dx] * n_x, p_x)
    inner = [lp([a[j, i] for i in range(n_x)], [dx] * n_x, p_x) for j in range(n_t)]
    return lp(inner, dt, p_t)


@pytest.mark.parametrize("order", ["x-outer", "t-outer"])
@pytest.mark.parametrize(
    "p_x,p_t",
    [(2, 2), (4, 2), (2, 4), (4, "inf"), ("inf", 4), (12, 12), (4, 4)],
)
def test_mixed_norm_against_loops(rng, order, p_x, p_t):
    u = rng.normal(size=(5, 7))
    dx, dt = 0.3, 0.2
    px = math.inf if p_x == "inf" else float(p_x)
    pt = math.inf if p_t == "inf" else float(p_t)
    expected = _naive_mixed(u, dx, [dt] * 5, px, pt, order)
    assert mixed_norm(u, dx=dx, dt=dt, spatial=p_x, temporal=p_t, order=order) == pytest.approx(expected, rel=1e-12)


def test_mixed_norm_with_time_weights(rng):
    u = rng.normal(size=(4, 6))
    w = np.array([0.1, 0.2, 0.3, 0.4])
    expected = _naive_mixed(u, 0.5, list(w), 4.0, 2.0, "x-outer")
    assert mixed_norm(u, dx=0.5, dt=w, spatial=4, temporal=2) == pytest.approx(expected, rel=1e-12)


def test_mixed_norm_of_constant():
    u = np.ones((8, 10))
    value = mixed_norm(u, dx=0.5, dt=0.25, spatial=4, temporal=2, order="x-outer")
    assert value == pytest.approx((8 * 0.25) ** 0.5 * (10 * 0.5) ** 0.25)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"spatial": 3, "temporal": 2},
        {"spatial": 2, "temporal": "two"},
        {"spatial": 2, "temporal": 2, "order": "diagonal"},
    ],
)
def test_mixed_norm_rejects(kwargs):
    with pytest.raises(InvalidInput):
        mixed_norm(np.ones((2, 2)), dx=1.0, dt=1.0, **kwargs)


def test_mixed_norm_rejects_bad_shapes():
    with pytest.raises(InvalidInput):
        mixed_norm(np.ones(4), dx=1.0, dt=1.0, spatial=2, temporal=2)
    with pytest.raises(InvalidInput):
        mixed_norm(np.ones((3, 2)), dx=1.0, dt=np.ones(2), spatial=2, temporal=2)


# -------------------------
# Estimate ratios
# -------------------------
def _mode(k: int, amplitude: float):
    return lambda lat: SpectralField1D.single_mode(lat.grid, k, amplitude)


def test_estimate_ratio_two_resolutions(lattice):
    family = [_mode(1, 1.0), _mode(3, 2.0), _mode(5, 0.5)]
    report = estimate_ratio(
        family,
        lambda u: 2.0 * u.l2_norm(),
        lambda u: sobolev_norm(u, 0.0),
        lattice=lattice,
        label="double",
    )
    assert report.resolutions == (lattice.grid.points, 2 * lattice.grid.points)
    assert len(report.rows) == 6
    assert report.max_ratio == pytest.approx(2.0)
    assert report.slope == pytest.approx(0.0, abs=1e-12)
    assert report.skipped == 0
    assert list(report.to_frame().columns) == ["sample_id", "lhs", "rhs", "ratio", "resolution"]


def test_estimate_ratio_skips_zero_rhs(lattice):
    family = [_mode(1, 1.0), lambda lat: SpectralField1D.zeros(lat.grid)]
    report = estimate_ratio(family, lambda u: u.l2_norm(), lambda u: u.l2_norm(), lattice=lattice)
    assert report.skipped == 2
    assert {r.sample_id for r in report.rows} == {0}


def test_estimate_ratio_is_thread_independent(lattice):
    family = [_mode(k, 1.0 + k) for k in range(1, 9)]
    lhs = lambda u: sobolev_norm(u, 1.0)  # noqa: E731
    rhs = lambda u: sobolev_norm(u, 0.0)  # noqa: E731
    one = estimate_ratio(family, lhs, rhs, lattice=lattice, threads=1).to_frame()
    many = estimate_ratio(family, lhs, rhs, lattice=lattice, threads=4).to_frame()
    assert one.equals(many)


def test_estimate_ratio_rejects_empty_family(lattice):
    with pytest.raises(InvalidInput):
        estimate_ratio([], lambda u: 1.0, lambda u: 1.0, lattice=lattice)


def test_estimate_ratio_rejects_a_coarser_fine_lattice(lattice):
    with pytest.raises(InvalidInput):
        estimate_ratio([_mode(1, 1.0)], lambda u: 1.0, lambda u: 1.0, lattice=lattice, fine=lattice)


def test_false_estimate_fails_when_the_band_follows_the_grid(lattice):
    # ||u||_{H^10} <= C ||u||_{L^2} cannot hold; the ratio must grow with the band
    lhs = lambda u: sobolev_norm(u, 10.0)  # noqa: E731
    rhs = lambda u: sobolev_norm(u, 0.0)  # noqa: E731
    relative = estimate_ratio(bump_data_family(6, seed=4, band=0.5, relative=True), lhs, rhs, lattice=lattice)
    assert relative.slope > 5.0
    assert not relative.is_stable()

    # a fixed band only tests convergence of the quadrature
    fixed = estimate_ratio(bump_data_family(6, seed=4, band=2.0), lhs, rhs, lattice=lattice)
    assert fixed.slope == pytest.approx(0.0, abs=1e-9)
    assert fixed.is_stable()


def test_true_estimate_passes_under_a_relative_band(lattice):
    family = bump_data_family(6, seed=4, band=0.5, relative=True)
    report = estimate_ratio(family, lambda u: sobolev_norm(u, 0.0), lambda u: sobolev_norm(u, 1.0), lattice=lattice)
    assert report.slope < 0.0
    assert report.is_stable()


def test_linear_estimate_is_stable_under_a_relative_band(soft_params):
    lattice = SpaceTimeLattice(GridSpec(8.0 * math.pi, 32), 2.0, 32)
    fine = resolved_refinement(lattice, soft_params, 0.5)
    report = estimate_ratio(
        free_wave_family(6, soft_params, seed=2, band=0.5, relative=True),
        lambda x: xsb_norm(x.spectrum, 0.0, 0.6, soft_params),
        lambda x: sobolev_norm(x.initial, 0.0),
        lattice=lattice,
        fine=fine,
    )
    assert report.resolutions == (32, 64)
    assert abs(report.slope) <= 0.15


def test_phase_step(lattice, params):
    # dt = 1/16, phi(2) = 32
    assert phase_step(lattice, params, 2.0) == pytest.approx(2.0)
    assert phase_step(lattice, params, 0.0) == 0.0


def test_resolved_refinement_keeps_the_phase_step(lattice, params):
    fine = resolved_refinement(lattice, params, 0.5)
    # quintic dispersion: doubling the band multiplies the top phase by 32
    assert fine.grid.points == 2 * lattice.grid.points
    assert fine.n_t == 32 * lattice.n_t
    assert fine.t_half == lattice.t_half
    assert phase_step(fine, params, 4.0) == pytest.approx(phase_step(lattice, params, 2.0))


@pytest.mark.parametrize("fraction", [0.0, -0.5, 1.5])
def test_resolved_refinement_rejects(lattice, params, fraction):
    with pytest.raises(InvalidParameters):
        resolved_refinement(lattice, params, fraction)

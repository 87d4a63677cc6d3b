import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad
from scipy.optimize import brentq

from rigidity_lab import geometry
from rigidity_lab.errors import NonConvexError, NonPositiveRadiusError

TWO_PI = 2.0 * np.pi


def test_unit_circle_closed_forms(circle_frame):
    f = circle_frame
    assert_allclose(f.perimeter, TWO_PI, rtol=0, atol=1e-13)
    assert_allclose(f.lazutkin_const, 1.0 / TWO_PI, rtol=0, atol=1e-14)
    assert_allclose(f.mu, np.pi, rtol=0, atol=1e-12)
    assert_allclose(f.x, f.sigma / TWO_PI, rtol=0, atol=1e-12)
    assert_allclose(f.kappa, 1.0, rtol=0, atol=1e-13)


def test_marked_point_convention(circle_frame, perturbed_frame):
    for f in (circle_frame, perturbed_frame):
        assert_allclose(f.position[0], [0.0, 0.0], atol=1e-13)
        assert np.min(f.position[:, 0]) > -1e-12  # domain sits in {x >= 0}
        # reflection symmetry of the table
        th = np.linspace(0.1, 3.0, 7)
        up = f.profile.position(th)
        dn = f.profile.position(-th)
        assert_allclose(up[:, 0], dn[:, 0], atol=1e-14)
        assert_allclose(up[:, 1], -dn[:, 1], atol=1e-14)


def test_curvature_against_finite_difference_oracle():
    profile = geometry.build_profile([0.0, 0.0, 0.01])
    theta = np.linspace(0.0, TWO_PI, 101)
    h = 1e-4  # balances truncation vs roundoff in the second difference
    p0 = profile.position(theta)
    pp = profile.position(theta + h)
    pm = profile.position(theta - h)
    vel = (pp - pm) / (2 * h)
    acc = (pp - 2 * p0 + pm) / h**2
    cross = vel[:, 0] * acc[:, 1] - vel[:, 1] * acc[:, 0]
    kappa_fd = cross / np.linalg.norm(vel, axis=1) ** 3
    assert_allclose(profile.curvature(theta), kappa_fd, rtol=0, atol=1e-6)


def test_small_perturbation_accepted_large_rejected():
    geometry.build_profile([0.0, 0.0, 0.01])  # convex, accepted
    with pytest.raises(NonConvexError):
        geometry.build_profile([0.0, 0.0, 0.9])
    # the curvature formula itself shows the sign change on the raw series
    bad = geometry.DomainProfile((0.0, 0.0, 0.9), 8, 1.0 + 0.9)
    theta = TWO_PI * np.arange(4096) / 4096
    assert np.min(bad.curvature(theta)) < 0


def test_radius_positivity_rejected():
    with pytest.raises(NonPositiveRadiusError):
        geometry.build_profile([-1.5])


def test_parameter_validation():
    with pytest.raises(ValueError):
        geometry.build_profile([], smoothness_order=7)
    profile = geometry.unit_circle_profile()
    with pytest.raises(ValueError):
        geometry.build_frame(profile, 200)
    with pytest.raises(ValueError):
        geometry.build_frame(profile, 511)


def test_frame_tables_monotone(perturbed_frame):
    f = perturbed_frame
    assert np.all(np.diff(f.sigma) > 0)
    assert np.all(np.diff(f.x) > 0)
    assert f.sigma[0] == 0.0 and f.x[0] == 0.0
    assert f.x[-1] < 1.0
    # last gap closes the period
    assert_allclose(f.sigma[-1] + (f.sigma[1] - f.sigma[0]), f.perimeter, rtol=1e-9)


def test_mu_against_adaptive_quadrature_oracle(perturbed_frame, rng):
    """Independent route: adaptive quadrature + root solve, no FFT machinery."""
    profile = perturbed_frame.profile
    chart = perturbed_frame.chart

    def density(theta):
        return profile.curvature(theta) ** (2.0 / 3.0) * profile.speed(theta)

    total = quad(density, np.pi, 3 * np.pi, limit=200, epsabs=1e-13, epsrel=1e-13)[0]

    def x_of_theta(theta):
        return quad(density, np.pi, theta, limit=200, epsabs=1e-13, epsrel=1e-13)[0] / total

    for x_target in rng.uniform(0.02, 0.98, size=10):
        theta_star = brentq(lambda t: x_of_theta(t) - x_target, np.pi + 1e-12, 3 * np.pi - 1e-12,
                            xtol=1e-13)
        mu_oracle = profile.curvature(theta_star) ** (1.0 / 3.0) * total / 2.0
        assert_allclose(chart.mu_of_x(x_target), mu_oracle, rtol=0, atol=1e-9)


def test_mu_two_routes_agree(perturbed_frame):
    """Direct curvature formula vs chain rule through the arclength map."""
    chart = perturbed_frame.chart
    x = np.linspace(0.0, 1.0, 257, endpoint=False)
    theta = chart.theta_of_x(x)
    direct = chart.mu_of_theta(theta)
    dx_dsigma = chart.dx_dtheta(theta) / chart.dsigma_dtheta(theta)
    via_chain = np.sqrt(dx_dsigma / chart.lazutkin_const) / (2.0 * chart.lazutkin_const)
    assert_allclose(direct, via_chain, rtol=0, atol=1e-9)


def test_mu_evenness(perturbed_frame):
    chart = perturbed_frame.chart
    x = np.linspace(0.01, 0.49, 33)
    assert_allclose(chart.mu_of_x(x), chart.mu_of_x(1.0 - x), rtol=0, atol=1e-12)


def test_chart_normalizations(perturbed_frame):
    chart = perturbed_frame.chart
    # the Lazutkin density integrates to exactly one unit of x
    profile = perturbed_frame.profile
    total = quad(
        lambda t: profile.curvature(t) ** (2.0 / 3.0) * profile.speed(t),
        np.pi, 3 * np.pi, limit=200, epsabs=1e-13, epsrel=1e-13,
    )[0]
    assert_allclose(chart.lazutkin_const * total, 1.0, rtol=0, atol=1e-12)
    # unit mass under the frame's x quadrature
    assert_allclose(chart.integrate_dx(np.ones(chart.n_grid)), 1.0, rtol=0, atol=1e-13)


def test_roundtrip_inverse_maps(perturbed_frame):
    chart = perturbed_frame.chart
    x = np.linspace(0.0, 0.999, 41)
    assert_allclose(chart.x_of_theta(chart.theta_of_x(x)), x, rtol=0, atol=1e-12)
    s = np.linspace(0.0, 0.999 * chart.perimeter, 41)
    assert_allclose(chart.sigma_of_theta(chart.theta_of_sigma(s)), s, rtol=0, atol=1e-11)


def test_spectral_convergence_on_doubling():
    profile = geometry.build_profile([0.0, 0.0, 0.01])
    f1 = geometry.build_frame(profile, 512)
    f2 = geometry.build_frame(profile, 1024)
    assert abs(f1.perimeter - f2.perimeter) < 1e-10
    assert abs(f1.lazutkin_const - f2.lazutkin_const) < 1e-10


def test_closeness_circle_is_zero(circle_frame):
    rep = geometry.closeness_report(circle_frame)
    assert rep.eps < 1e-12
    assert rep.eps_all < 1e-9


def test_closeness_monotone_and_linear():
    values = {}
    for a2 in (0.005, 0.01, 0.02, 0.1):
        frame = geometry.build_frame(geometry.build_profile([0.0, 0.0, a2]), 512)
        values[a2] = geometry.closeness_report(frame).eps
    assert values[0.005] < values[0.01] < values[0.02]
    # leading-order linearity in the small regime
    assert 1.8 < values[0.01] / values[0.005] < 2.3
    assert 1.8 < values[0.02] / values[0.01] < 2.3
    # tenfold coefficient gives roughly tenfold offset (superlinear drift at
    # a_2 = 0.1 is outside the linear regime)
    assert 9.0 < values[0.1] / values[0.01] < 17.0


def test_closeness_derivative_table(perturbed_frame):
    rep = geometry.closeness_report(perturbed_frame)
    assert rep.order == 8 and len(rep.derivative_sup) == 8
    assert rep.eps_all >= rep.eps
    assert all(s >= 0 for s in rep.derivative_sup)


def test_domain_spec_file_roundtrip(tmp_path):
    path = tmp_path / "dom.json"
    profile = geometry.build_profile([0.0, 0.0, 0.01])
    geometry.save_domain_spec(path, profile, 512)
    loaded, n = geometry.load_domain_spec(path)
    assert n == 512
    assert loaded.radial_coeffs == profile.radial_coeffs
    path2 = tmp_path / "bad.json"
    path2.write_text('{"radial_cosine_coeffs": [], "bogus": 1}')
    with pytest.raises(ValueError, match="unknown domain spec keys"):
        geometry.load_domain_spec(path2)

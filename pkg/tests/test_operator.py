import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import zeta

from rigidity_lab import billiards, functionals as fn, geometry
from rigidity_lab import operator as op
from rigidity_lab.errors import NotContractiveError

LADDER = (8, 16, 32, 64)
PARAMS = op.GammaSpaceParams(gamma=3.5, J=48, Q=16)


def test_params_validation():
    with pytest.raises(ValueError):
        op.GammaSpaceParams(gamma=3.0)
    with pytest.raises(ValueError):
        op.GammaSpaceParams(gamma=4.0)
    with pytest.raises(ValueError):
        op.GammaSpaceParams(J=1)


# -- divisor matrix ---------------------------------------------------------------


def test_delta_entries():
    delta = op.assemble_delta(PARAMS)
    get = lambda q, j: delta.entries[q - 1, j - 1]
    assert get(2, 6) == 1.0 and get(2, 5) == 0.0
    assert np.all(delta.row(1) == 1.0)
    col12 = delta.entries[:, 11]
    hits = {int(q) for q in delta.row_q[col12 == 1.0]}
    assert hits == {1, 2, 3, 4, 6, 12}


@pytest.mark.parametrize("gamma", [3.1, 3.5, 3.9])
def test_delta_minus_identity_norm(gamma):
    dmi = op.subtract_identity(op.assemble_delta(PARAMS))
    res = op.gamma_norm(dmi, gamma)
    assert abs(res.tail_completed - (zeta(gamma, 1) - 1.0)) < 1e-10
    assert res.tail_completed < 0.202057  # below the gamma -> 3 limit


def test_delta_norm_and_identity_norm():
    assert op.gamma_norm(op.assemble_delta(PARAMS), 3.5).tail_completed < zeta(3.0, 1)
    assert_allclose(op.gamma_norm(op.identity_matrix(PARAMS), 3.5).tail_completed,
                    1.0, rtol=0, atol=1e-12)


def test_truncated_norm_monotone_in_J():
    values = []
    for J in (12, 24, 48, 96):
        params = op.GammaSpaceParams(3.5, J, 16)
        dmi = op.subtract_identity(op.assemble_delta(params))
        res = op.gamma_norm(dmi, 3.5)
        values.append(res.truncated)
        assert res.truncated <= res.tail_completed + 1e-15
    assert all(a < b for a, b in zip(values, values[1:]))


def test_gamma_norm_rejects_label_zero(circle_frame, circle_orbits):
    T = op.assemble_T(circle_frame, circle_frame.chart,
                      {q: circle_orbits[q] for q in range(2, 5)}, PARAMS)
    with pytest.raises(ValueError):
        op.gamma_norm(T, 3.5)


def test_gamma_norm_submultiplicative(rng):
    labels = np.arange(1, 9)
    for _ in range(5):
        A = rng.standard_normal((8, 8))
        B = rng.standard_normal((8, 8))
        mk = lambda M: op.OperatorMatrix(M, labels, labels, "random")
        na = op.gamma_norm(mk(A), 3.5).truncated
        nb = op.gamma_norm(mk(B), 3.5).truncated
        nab = op.gamma_norm(mk(A @ B), 3.5).truncated
        assert nab <= na * nb * (1 + 1e-12)


# -- assembled operator ------------------------------------------------------------


def test_circle_matrix_closed_form(circle_frame, circle_orbits):
    T = op.assemble_T(circle_frame, circle_frame.chart,
                      {q: circle_orbits[q] for q in range(2, 17)}, PARAMS)
    assert_allclose(T.entries[0], np.eye(49)[0], rtol=0, atol=1e-13)
    assert np.all(T.entries[1] == 1.0)
    for i, q in enumerate(T.row_q):
        if q < 2:
            continue
        expect = np.where(T.col_j % q == 0, (np.pi / q) / np.sin(np.pi / q), 0.0)
        assert_allclose(T.entries[i], expect, rtol=0, atol=1e-10)


def test_matrix_perturbation_scales_linearly(circle_frame, circle_orbits):
    T1 = op.assemble_T(circle_frame, circle_frame.chart,
                       {q: circle_orbits[q] for q in range(2, 17)}, PARAMS)
    diffs = {}
    for a2 in (0.005, 0.01):
        frame = geometry.build_frame(geometry.build_profile([0.0, 0.0, a2]), 512)
        orbits = billiards.compute_orbits(frame, range(2, 17))
        T2 = op.assemble_T(frame, frame.chart, orbits, PARAMS)
        diffs[a2] = np.max(np.abs(T2.entries - T1.entries))
    assert 1.7 < diffs[0.01] / diffs[0.005] < 2.4
    assert diffs[0.01] < 20 * 0.0326  # entrywise O(eps), frame offset ~0.0326


# -- second-order column functional --------------------------------------------------


def test_second_order_functional_circle(circle_frame, circle_fit):
    lss = op.script_L_star_star_table(circle_frame.chart, circle_fit, 16)
    assert_allclose(lss[0], np.pi**2 / 6.0, rtol=0, atol=1e-9)
    assert np.max(np.abs(lss[1:])) < 1e-9


def test_second_order_functional_decay(perturbed_frame, perturbed_fit):
    lss = op.script_L_star_star_table(perturbed_frame.chart, perturbed_fit, 48)
    j = np.arange(1, 49, dtype=float)
    weighted = np.abs(lss[1:]) * j**3
    assert np.max(weighted[8:]) < np.max(weighted[:8])


def test_second_order_functional_extrapolation_oracle(perturbed_frame, perturbed_orbits,
                                                      perturbed_fit):
    """Richardson limit of q^2 L_q(e_j) over the ladder matches the table."""
    chart = perturbed_frame.chart
    lss = op.script_L_star_star_table(chart, perturbed_fit, 8)
    for j in (1, 2, 3, 5):
        vals = {q: q * q * fn.script_L_q(fn.CosineSeries.basis(j), perturbed_orbits[q], chart)
                for q in (32, 64)}
        extrap = (64**2 * vals[64] - 32**2 * vals[32]) / (64**2 - 32**2)
        assert abs(extrap - lss[j]) < 1e-5


# -- certificate ----------------------------------------------------------------------


def test_remainder_constant_calibration():
    ratio = op.calibrate_remainder_constant(a2_values=(0.005, 0.01))
    assert 15.0 < ratio < op.DEFAULT_C_CONSTANT   # default keeps headroom


def test_analytic_bound_frozen_value():
    bound = op.analytic_contraction_bound(0.0)
    assert 0.9784 < bound < 0.9786
    assert bound < 0.979
    with pytest.raises(ValueError):
        op.analytic_contraction_bound(1.6)


def test_certificate_analytic_only_pass_and_fail():
    cert = op.contraction_certificate(None, None, PARAMS, eps=0.0)
    assert cert.passed and cert.numeric_norm is None
    cert_bad = op.contraction_certificate(None, None, PARAMS, eps=0.3)
    assert not cert_bad.passed            # graceful, no exception
    assert cert_bad.analytic_bound > 1.0


def test_certificate_circle_numeric(circle_frame, circle_orbits, circle_fit):
    cert = op.contraction_certificate(
        circle_frame, circle_frame.chart, PARAMS,
        orbits={q: circle_orbits[q] for q in range(2, 17)}, fit=circle_fit,
    )
    assert 0.76 < cert.numeric_norm_completed < 0.78
    assert cert.passed and cert.inversion_certified


def test_certificate_perturbed_numeric(perturbed_frame, perturbed_orbits, perturbed_fit):
    cert = op.contraction_certificate(
        perturbed_frame, perturbed_frame.chart, PARAMS,
        orbits={q: perturbed_orbits[q] for q in range(2, 17)}, fit=perturbed_fit,
    )
    assert cert.numeric_norm_completed < 1.0
    assert cert.inversion_certified
    payload = cert.to_json_dict()
    assert set(payload) == {"gamma", "epsilon", "c_constant", "analytic_bound",
                            "numeric_norm", "numeric_norm_completed", "pass"}


def test_certificate_triangle_inequality(perturbed_frame, perturbed_orbits, perturbed_fit):
    """Numeric norm is controlled by the three-part split, and the divisor-scaled
    part obeys its closed-form bound."""
    frame, chart, fit = perturbed_frame, perturbed_frame.chart, perturbed_fit
    orbits = {q: perturbed_orbits[q] for q in range(2, 17)}
    eps = geometry.closeness_report(frame).eps
    tsr = op.assemble_T_star_R(frame, chart, orbits, PARAMS, fit)
    norm_total = op.gamma_norm(op.subtract_identity(tsr), 3.5).tail_completed

    dmi = op.subtract_identity(op.assemble_delta(PARAMS))
    norm_dmi = op.gamma_norm(dmi, 3.5).tail_completed

    dp = op.assemble_delta_prime(chart, fit, PARAMS)
    norm_dp = op.gamma_norm(dp, 3.5).tail_completed
    c = op.DEFAULT_C_CONSTANT
    dp_bound = ((np.pi + eps) ** 3 / (48 * np.cos(eps)) + c * eps / 4.0) * op.ZETA3
    assert norm_dp <= dp_bound

    rem = op.assemble_remainder(tsr, chart, fit)
    norm_rem = op.gamma_norm(rem, 3.5).truncated
    assert norm_rem <= c * eps
    assert norm_total <= norm_dmi + norm_dp + norm_rem + 1e-9


# -- inversion -------------------------------------------------------------------------


def _square_tsr(frame, orbits, fit, n=12):
    params = op.GammaSpaceParams(3.5, max(48, n), n)
    tsr = op.assemble_T_star_R(frame, frame.chart,
                               {q: orbits[q] for q in range(2, n + 1)}, params, fit)
    return op.square_block(tsr, n)


def test_neumann_zero_rhs(circle_frame, circle_orbits, circle_fit):
    A = _square_tsr(circle_frame, circle_orbits, circle_fit)
    w, info = op.neumann_invert(A, np.zeros(12))
    assert np.all(w.coeffs == 0.0)


def test_neumann_round_trip_basis(circle_frame, circle_orbits, circle_fit):
    A = _square_tsr(circle_frame, circle_orbits, circle_fit)
    rhs = A.entries[:, 2].copy()     # image of e_3
    w, info = op.neumann_invert(A, rhs, order=60, tol=1e-15)
    expect = np.zeros(13)
    expect[3] = 1.0
    assert_allclose(w.coeffs, expect, rtol=0, atol=1e-8)


def test_neumann_ratio_below_certified_bound(circle_frame, circle_orbits, circle_fit):
    cert = op.contraction_certificate(
        circle_frame, circle_frame.chart, PARAMS,
        orbits={q: circle_orbits[q] for q in range(2, 17)}, fit=circle_fit)
    A = _square_tsr(circle_frame, circle_orbits, circle_fit)
    rng = np.random.default_rng(3)
    _, info = op.neumann_invert(A, rng.standard_normal(12), order=40, tol=0.0)
    ratios = info.contraction_ratios
    assert np.all(ratios[1:] <= cert.numeric_norm_completed + 1e-9)


def test_neumann_agrees_with_lstsq(perturbed_frame, perturbed_orbits, perturbed_fit, rng):
    A = _square_tsr(perturbed_frame, perturbed_orbits, perturbed_fit)
    rhs = rng.standard_normal(12) * 0.1
    w, _ = op.neumann_invert(A, rhs, order=200, tol=1e-15)
    ls = op.lstsq_invert(A, rhs)
    assert np.max(np.abs(w.coeffs - ls.coeffs)) < 1e-6


def test_neumann_requires_certificate(circle_frame, circle_orbits, circle_fit):
    A = _square_tsr(circle_frame, circle_orbits, circle_fit)
    with pytest.raises(NotContractiveError):
        op.neumann_invert(A, np.zeros(12), certified=False)


def test_square_block_validation(circle_frame, circle_orbits, circle_fit):
    A = _square_tsr(circle_frame, circle_orbits, circle_fit)
    with pytest.raises(ValueError):
        op.square_block(A, 20)


# -- structural decomposition -----------------------------------------------------------


def test_decompose_circle_basis_vector(circle_frame, circle_orbits, circle_fit):
    params = op.GammaSpaceParams(3.5, 48, 16)
    T = op.assemble_T(circle_frame, circle_frame.chart,
                      {q: circle_orbits[q] for q in range(2, 17)}, params)
    rep = op.decompose_T(T, circle_frame.chart, circle_fit,
                         test_functions=[fn.CosineSeries.basis(5, 9)])
    assert np.max(rep.per_u_residuals) < 1e-6
    zeros = op.decompose_T(T, circle_frame.chart, circle_fit,
                           test_functions=[fn.CosineSeries(np.zeros(9))])
    assert np.max(zeros.per_u_residuals) == 0.0


def test_decompose_remainder_decays_on_ladder(perturbed_frame, perturbed_orbits,
                                              perturbed_fit):
    params = op.GammaSpaceParams(3.5, 48, 64)
    T = op.assemble_T(perturbed_frame, perturbed_frame.chart,
                      {q: perturbed_orbits[q] for q in LADDER}, params)
    rep = op.decompose_T(T, perturbed_frame.chart, perturbed_fit, seed=5)
    assert -8.0 < rep.decay_slope < -3.5
    assert np.all(np.diff(rep.max_abs_per_row) < 0)


def test_T_star_R_marked_row_is_divisor_row(perturbed_frame, perturbed_orbits,
                                            perturbed_fit):
    tsr = op.assemble_T_star_R(
        perturbed_frame, perturbed_frame.chart,
        {q: perturbed_orbits[q] for q in range(2, 17)}, PARAMS, perturbed_fit)
    assert tsr.row_q[0] == 1
    assert np.all(tsr.entries[0] == 1.0)
    assert tsr.row_tail_coeff[0] == 1.0


def test_b_star_vector():
    b = op.build_b_star([0, 1, 2, 3, 8])
    assert_allclose(b, [0.0, 0.0, 0.25, 1.0 / 9.0, 1.0 / 64.0], rtol=0, atol=1e-16)


def test_kernel_margin_bounded_away_from_zero(perturbed_frame):
    """Smallest singular value on the admissible subspace, square truncations."""
    threshold = 0.05
    values = []
    for n in (8, 12, 16):
        orbits = billiards.compute_orbits(perturbed_frame, range(2, n + 1))
        T = op.assemble_T(perturbed_frame, perturbed_frame.chart, orbits,
                          op.GammaSpaceParams(3.5, n, n))
        values.append(op.kernel_margin(T))
    assert all(v > threshold for v in values)

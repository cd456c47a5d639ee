# test_stability.py
import cmath
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from modules.analysis.periodic import find_periodic_orbit
from modules.analysis.stability import (
    ELLIPTIC, HYPERBOLIC, INCONCLUSIVE, PARABOLIC, STABLE, UNSTABLE, NormalCoords,
    alpha_for_theta, classify, corroborate_decay, eigen_from_parameters, eigen_transverse,
    from_normal_coords, jacobian_skew, jacobian_skew_original, measure_rotation, normal_form_c2,
    numeric_jacobian, stability_margin, theta_of, third_derivative_table, to_normal_coords,
)
from modules.market.dynamics import ModelSpec, SkewState
from modules.market.families import INVERSE_POWER, FMapFamily, GMapFamily
from modules.market.orbit import simulate_skew
from modules.utils.errors import ClassificationError, DomainError

THETA = math.pi / 6.0


@pytest.fixture
def smooth_model():
    fam, gfam = FMapFamily.smooth_c4(), GMapFamily.linear(0.5)
    return ModelSpec(N=2, alpha=alpha_for_theta(fam, gfam, THETA), f=fam, g=gfam)


def test_alpha_for_theta(smooth_model):
    assert smooth_model.alpha == pytest.approx(0.580, abs=1e-3)
    assert theta_of(smooth_model) == pytest.approx(THETA)


def test_alpha_for_theta_out_of_range():
    fam = FMapFamily.smooth_c4()
    with pytest.raises(DomainError):
        alpha_for_theta(fam, GMapFamily.linear(0.5), math.pi)
    with pytest.raises(DomainError):
        alpha_for_theta(fam, GMapFamily.linear(0.0), THETA)


@pytest.mark.parametrize('u, expected', [
    (0.0, PARABOLIC),
    (-0.25, ELLIPTIC),
    (-1.0, ELLIPTIC),
    (-1.5, HYPERBOLIC),
    (0.2, HYPERBOLIC),
])
def test_classify(u, expected):
    assert classify(u) == expected


def test_eigenvalues_elliptic_on_unit_circle():
    lam_plus, lam_minus, kind = eigen_from_parameters(0.0, -0.5, 0.5)
    assert kind == ELLIPTIC
    assert abs(lam_plus) == pytest.approx(1.0)
    assert lam_plus * lam_minus == pytest.approx(1.0)
    assert lam_plus == pytest.approx(cmath.exp(1j * math.acos(0.5)))


def test_jacobian_eigenvalues_match_closed_form(smooth_model):
    lam_plus, lam_minus, _ = eigen_transverse(smooth_model)
    eigenvalues = np.linalg.eigvals(jacobian_skew(smooth_model))
    for lam in (1.0, lam_plus, lam_minus):
        assert np.min(np.abs(eigenvalues - lam)) < 1e-10


def test_original_coordinate_jacobian(smooth_model):
    J = jacobian_skew_original(smooth_model)
    assert_allclose(J @ np.array([1.0, 1.0, 0.0]), [1.0, 1.0, 0.0], atol=1e-12)
    lam_plus, lam_minus, _ = eigen_transverse(smooth_model)
    eigenvalues = np.linalg.eigvals(J)
    for lam in (1.0, lam_plus, lam_minus):
        assert np.min(np.abs(eigenvalues - lam)) < 1e-10


def test_third_derivative_table_matches_normal_form(smooth_model):
    table = third_derivative_table(smooth_model)
    assert sorted(table) == sorted(f'{axis}_{tail}' for axis in 'XY' for tail in ('xxx', 'xxy', 'xyy', 'yyy'))
    c2 = normal_form_c2(smooth_model)
    assert 8.0 * c2.real == pytest.approx(table['X_xxx'] + table['X_xyy'] + table['Y_xxy'] + table['Y_yyy'])
    assert 8.0 * c2.imag == pytest.approx(table['Y_xxx'] - table['X_xxy'] + table['Y_xyy'] - table['X_yyy'])
    # g 가 선형이면 K_g = 4 g_p^3 만 남는다
    assert table['X_yyy'] == pytest.approx(4.0 * 0.5 ** 3 * (-math.sin(THETA) / (2.0 * 0.5)) ** 3)


def test_numeric_jacobian_matches_analytic(smooth_model):
    fixed = SkewState(np.array([0.5, 0.5]), np.array([1.0]))
    assert_allclose(numeric_jacobian(smooth_model, fixed), jacobian_skew(smooth_model), atol=1e-7)


def test_numeric_jacobian_step_range(smooth_model):
    with pytest.raises(DomainError):
        numeric_jacobian(smooth_model, SkewState([0.5, 0.5], [1.0]), h=1e-2)


def test_smooth_c4_is_stable(smooth_model):
    report = stability_margin(smooth_model)
    assert report.classification == ELLIPTIC
    assert report.verdict == STABLE
    assert report.failing == []
    assert report.theta == pytest.approx(THETA)
    assert report.closed_form_margin == pytest.approx((1.0 - smooth_model.alpha) * -2.0 / 8.0)
    assert report.margin == pytest.approx(report.closed_form_margin, rel=1e-9)
    assert report.self_checks.passed
    assert report.hypotheses.passed


def test_smooth_c4_default_family_is_always_elliptic():
    fam = FMapFamily.smooth_c4()
    for alpha in (0.0, 0.3, 0.6, 0.9):
        for a in (0.25, 0.5, 1.0):
            report = stability_margin(ModelSpec(N=2, alpha=alpha, f=fam, g=GMapFamily.linear(a)))
            assert report.classification == ELLIPTIC


def test_normal_form_needs_elliptic_point():
    model = ModelSpec(N=2, alpha=0.5, f=FMapFamily.smooth_c4(), g=GMapFamily.linear(0.0))
    with pytest.raises(ClassificationError):
        normal_form_c2(model)


def test_parabolic_without_price_feedback_is_inconclusive():
    model = ModelSpec(N=2, alpha=0.5, f=FMapFamily.smooth_c4(), g=GMapFamily.linear(0.0))
    report = stability_margin(model)
    assert report.classification == PARABOLIC
    assert report.verdict == INCONCLUSIVE


def test_inverse_power_family_is_hyperbolic():
    fam = FMapFamily.piecewise_affine(INVERSE_POWER, power=6.0)
    model = ModelSpec(N=2, alpha=0.0, f=fam, g=GMapFamily.linear(1.0))
    report = stability_margin(model, method='finite_difference')
    assert report.classification == HYPERBOLIC
    assert report.verdict == UNSTABLE
    assert report.derivatives.f_p == pytest.approx(-3.0, rel=1e-3)
    assert report.lambda_plus.real == pytest.approx(-5.0 + 2.0 * math.sqrt(6.0), rel=1e-3)
    assert report.lambda_minus.real == pytest.approx(-5.0 - 2.0 * math.sqrt(6.0), rel=1e-3)
    assert report.unstable_direction is not None
    assert not report.derivatives.smooth


def test_non_smooth_family_is_not_stable():
    model = ModelSpec(N=2, alpha=0.5, f=FMapFamily.piecewise_affine(), g=GMapFamily.linear(0.5))
    report = stability_margin(model, method='finite_difference')
    assert report.verdict != STABLE
    assert 'c4_region' in report.failing


def test_stability_requires_two_sellers():
    model = ModelSpec(N=3, alpha=0.5, f=FMapFamily.smooth_c4(), g=GMapFamily.linear(0.5))
    with pytest.raises(DomainError):
        stability_margin(model)


def test_normal_coordinates_round_trip(smooth_model):
    state = SkewState(np.array([0.52, 0.47]), np.array([1.05]))
    back = from_normal_coords(smooth_model, to_normal_coords(smooth_model, state))
    assert_allclose(back.x, state.x, atol=1e-12)
    assert_allclose(back.rho, state.rho, rtol=1e-12)


def test_fixed_point_maps_to_origin(smooth_model):
    nc = to_normal_coords(smooth_model, SkewState([0.5, 0.5], [1.0]))
    assert nc == NormalCoords(mu=0.5, z=0j)


def test_measured_rotation_matches_theta(smooth_model):
    assert measure_rotation(smooth_model) == pytest.approx(THETA, abs=1e-3)


def test_orbit_decays_toward_fixed_point(smooth_model):
    result = corroborate_decay(smooth_model, SkewState([0.51, 0.48], [1.1]), T=6000, stride=12)
    assert len(result['amplitudes']) == 501
    assert result['amplitude_ratio'] < 0.5
    assert result['final_gap'] < result['initial_gap']


def test_skew_orbit_stays_in_smooth_region(smooth_model):
    orbit = simulate_skew(smooth_model, SkewState([0.51, 0.48], [1.1]), 600, record_every=6)
    assert np.all((orbit.x > 1.0 / 3.0) & (orbit.x < 2.0 / 3.0))


# ---------------------------------------------------------------------------
# 주기 궤도
# ---------------------------------------------------------------------------

@pytest.fixture
def feedback_model():
    return ModelSpec(N=2, alpha=0.0, f=FMapFamily.piecewise_affine(), g=GMapFamily.linear(1.0))


@pytest.mark.parametrize('rho', [2.0, 50.0])
def test_periodic_orbit_found(feedback_model, rho):
    result = find_periodic_orbit(feedback_model, rho)
    assert result.found
    assert result.residual <= 1e-9
    assert_allclose(result.state.x, [rho / (rho + 1.0), 1.0 / (rho + 1.0)], atol=1e-9)
    assert result.max_ratio == pytest.approx(rho, rel=1e-9)


def test_periodic_orbit_degenerate_at_one(feedback_model):
    result = find_periodic_orbit(feedback_model, 1.0)
    assert result.found and result.degenerate
    assert result.max_ratio == 1.0


def test_periodic_orbit_unreachable_ratio():
    model = ModelSpec(N=2, alpha=0.0, f=FMapFamily.piecewise_affine(), g=GMapFamily.linear(0.5))
    result = find_periodic_orbit(model, 5.0)
    assert not result.found
    assert result.state is None


def test_periodic_orbit_argument_checks(feedback_model):
    with pytest.raises(DomainError):
        find_periodic_orbit(feedback_model, 0.5)
    with pytest.raises(DomainError):
        find_periodic_orbit(feedback_model, 2.0, period=3)

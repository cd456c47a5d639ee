# test_families.py
import math

import numpy as np
import pytest

from modules.market.families import (
    CKernel, FMapFamily, GMapFamily, INVERSE_POWER, compute_C_N, compute_S_g,
    derivative_bundle, eval_f, eval_f_alpha, eval_f_dx, eval_g, f_family_from_flat,
    iterate_f_alpha, quadratic_hg2_window, validate_f, validate_g, validate_sandwich,
)
from modules.utils.errors import DomainError

ALL_FAMILIES = [
    FMapFamily.piecewise_affine(),
    FMapFamily.piecewise_affine(INVERSE_POWER, power=2.0),
    FMapFamily.spefam(),
    FMapFamily.smooth_c4(),
    FMapFamily.skewed_quadratic(),
]


@pytest.mark.parametrize('fam', ALL_FAMILIES, ids=lambda fam: fam.kind)
def test_identity_at_rho_one(fam):
    for x in np.linspace(0.0, 1.0, 11):
        assert eval_f(fam, 1.0, float(x)) == float(x)


def test_piecewise_affine_values():
    fam = FMapFamily.piecewise_affine()
    assert eval_f(fam, 2.0, 0.6) == pytest.approx(0.3)
    assert eval_f(fam, 0.5, 0.4) == pytest.approx(0.7)
    assert eval_f_dx(fam, 2.0, 0.3) == pytest.approx(0.5)


def test_f_alpha_mixes_loyalty():
    fam = FMapFamily.piecewise_affine()
    assert eval_f_alpha(fam, 0.25, 2.0, 0.6) == pytest.approx(0.25 * 0.6 + 0.75 * 0.3)
    with pytest.raises(DomainError):
        eval_f_alpha(fam, 1.0, 2.0, 0.6)


def test_iterate_f_alpha_composes():
    fam = FMapFamily.piecewise_affine()
    once = eval_f_alpha(fam, 0.5, 2.0, 0.8)
    assert iterate_f_alpha(fam, 0.5, 2.0, 0.8, 2) == pytest.approx(eval_f_alpha(fam, 0.5, 2.0, once))
    with pytest.raises(DomainError):
        iterate_f_alpha(fam, 0.5, 2.0, 0.8, 0)


@pytest.mark.parametrize('rho, x', [(0.0, 0.5), (-1.0, 0.5), (math.inf, 0.5), (2.0, 1.5), (2.0, -0.1)])
def test_eval_f_rejects_out_of_domain(rho, x):
    with pytest.raises(DomainError):
        eval_f(FMapFamily.piecewise_affine(), rho, x)


@pytest.mark.parametrize('fam', ALL_FAMILIES, ids=lambda fam: fam.kind)
def test_shared_hypotheses_hold(fam):
    report = validate_f(fam, N=2, grid=20)
    for name in ('f_range', 'identity_at_one', 'hf1_increasing_x', 'hf1_boundary_values'):
        assert report.get(name).passed, name


@pytest.mark.parametrize('fam', [FMapFamily.piecewise_affine(), FMapFamily.spefam()],
                         ids=lambda fam: fam.kind)
def test_affine_families_pass_full_validation(fam):
    report = validate_f(fam, N=2, grid=30)
    assert report.passed, [c.name for c in report.failed_checks()]


def test_smooth_c4_kernel_checks():
    report = validate_f(FMapFamily.smooth_c4(), N=2, grid=30)
    for name in ('hf3_symmetry', 'c_symmetric', 'c_at_one', 'b_at_one', 'b_slope_at_one',
                 'b_at_rho0', 'b_increasing', 'b_c_slope_condition'):
        assert report.get(name).passed, name


def test_skewed_quadratic_breaks_symmetry_but_satisfies_sandwich():
    fam = FMapFamily.skewed_quadratic(gamma=0.3)
    assert not validate_f(fam, N=2, grid=20).get('hf3_symmetry').passed
    report = validate_sandwich(fam, 0.3, grid=20)
    assert report.get('sandwich_slope_match').passed
    assert report.get('sandwich_slope_match').measured == pytest.approx(0.0, abs=1e-12)
    assert report.get('sandwich_envelopes').passed
    assert report.passed


def test_sandwich_envelope_rejects_too_small_gamma():
    report = validate_sandwich(FMapFamily.skewed_quadratic(gamma=0.3), 0.1, grid=20)
    assert report.get('sandwich_slope_match').passed
    assert not report.get('sandwich_envelopes').passed


def test_validate_f_rejects_coarse_grid():
    with pytest.raises(DomainError):
        validate_f(FMapFamily.piecewise_affine(), N=2, grid=5)


def test_spefam_zero_deviation_required_for_small_n():
    fam = FMapFamily.spefam('scaled_bound', 0.5)
    report = validate_f(fam, N=3, grid=20)
    assert not report.get('spefam_zero_deviation').passed
    assert report.get('spefam_deviation_bounds').passed


def test_spefam_deviation_not_applicable_for_two_sellers():
    report = validate_f(FMapFamily.spefam('scaled_bound', 0.5), N=2, grid=20)
    assert not report.get('spefam_deviation_vs_C_N').applicable


def test_c_kernel_inverse_power():
    kernel = CKernel(INVERSE_POWER, 6.0)
    assert kernel(2.0) == pytest.approx(2.0 ** -6)
    assert kernel(0.5) == pytest.approx(kernel(2.0))
    with pytest.raises(DomainError):
        CKernel(INVERSE_POWER, 0.0)


def test_family_constructor_constraints():
    with pytest.raises(DomainError):
        FMapFamily.smooth_c4(rho0=1.0)
    with pytest.raises(DomainError):
        FMapFamily.smooth_c4(x0=0.5)
    with pytest.raises(DomainError):
        FMapFamily.skewed_quadratic(gamma=0.6)
    with pytest.raises(DomainError):
        GMapFamily.linear(1.5)


def test_linear_g_drops_quadratic_term():
    assert GMapFamily(kind='linear', a=0.5, b=0.3).b == 0.0


def test_flat_round_trip_keeps_family():
    fam = FMapFamily.smooth_c4(rho0=4.0, x0=0.25)
    assert f_family_from_flat(fam.to_flat()) == fam


def test_eval_g_domain():
    gfam = GMapFamily.quadratic(0.5, -0.1)
    assert eval_g(gfam, 0.5) == pytest.approx(0.25 - 0.025)
    with pytest.raises(DomainError):
        eval_g(gfam, 1.5)


def test_S_g_values():
    assert compute_S_g(GMapFamily.linear(0.5)) == pytest.approx(3.0)
    assert math.isinf(compute_S_g(GMapFamily.linear(1.0)))


def test_validate_g_linear():
    report = validate_g(GMapFamily.linear(0.5), N=2)
    assert report.passed
    assert report.constants['S_g'] == pytest.approx(3.0)


def test_validate_g_many_sellers_monte_carlo():
    report = validate_g(GMapFamily.linear(0.5), N=4, samples=2000, seed=3)
    assert report.get('hg2').passed


def test_validate_g_positive_quadratic_breaks_hg2():
    low, high = quadratic_hg2_window(0.5)
    assert (low, high) == pytest.approx((0.125, 0.25))
    report = validate_g(GMapFamily.quadratic(0.5, 0.2), N=2)
    assert report.get('hg1_increasing').passed
    assert not report.get('hg2').passed


@pytest.mark.parametrize('N, rho, expected', [
    (5, 0.5, 0.3),
    (5, 2.0, 1.0 / 6.0),
    (5, 1.0, 0.0),
])
def test_C_N_values(N, rho, expected):
    assert compute_C_N(N, rho) == pytest.approx(expected)


def test_C_N_domain():
    with pytest.raises(DomainError):
        compute_C_N(4, 2.0)
    with pytest.raises(DomainError):
        compute_C_N(5, 4.0)
    with pytest.raises(DomainError):
        compute_C_N(2, 0.5)


def test_K_g_values():
    fam = FMapFamily.smooth_c4()
    assert derivative_bundle(fam, GMapFamily.linear(0.5)).K_g == pytest.approx(0.5)
    assert derivative_bundle(fam, GMapFamily.quadratic(0.5, -0.1)).K_g == pytest.approx(1.1)


def test_smooth_c4_center_derivatives():
    bundle = derivative_bundle(FMapFamily.smooth_c4(), GMapFamily.linear(0.5))
    k = (1.0 - math.exp(-math.log(3.0) ** 2)) / (2.0 * math.log(3.0))
    assert bundle.f_p == pytest.approx(-k)
    assert bundle.f_rho2x == pytest.approx(-2.0)
    assert bundle.f_rhox == 0.0
    assert bundle.smooth


def test_finite_difference_matches_analytic_for_smooth_c4():
    fam = FMapFamily.smooth_c4()
    analytic = derivative_bundle(fam, GMapFamily.linear(0.5))
    numeric = derivative_bundle(fam, GMapFamily.linear(0.5), method='finite_difference')
    assert numeric.f_p == pytest.approx(analytic.f_p, abs=1e-6)
    assert numeric.f_rho2x == pytest.approx(analytic.f_rho2x, abs=1e-3)


def test_piecewise_affine_reported_non_smooth():
    bundle = derivative_bundle(FMapFamily.piecewise_affine(), GMapFamily.linear(0.5),
                               method='finite_difference')
    assert not bundle.smooth

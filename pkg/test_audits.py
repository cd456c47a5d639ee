# test_audits.py
import math

import numpy as np
import pytest

from modules.analysis.audits import (
    AUDITS, audit_alt2_mean, audit_crossings, audit_fraction_bounds, audit_mean_volume,
    audit_nonsym_bounds, audit_price_identity, audit_price_product, audit_rho_bounds,
    ratio_decay_check, run_audits, search_alt2_crossing,
)
from modules.analysis.constants import (
    compute_T_N, contraction_gamma, contraction_gamma_N, separation_ratios, uniform_rho_bound,
)
from modules.analysis.report import AuditReport, merge_reports
from modules.market.dynamics import ALT2, MarketState, ModelSpec, sample_state
from modules.market.families import FMapFamily, GMapFamily
from modules.market.orbit import Orbit, simulate
from modules.utils.errors import DomainError


def pa_model(N=2, alpha=0.0, a=0.5, **kwargs):
    return ModelSpec(N=N, alpha=alpha, f=FMapFamily.piecewise_affine(), g=GMapFamily.linear(a), **kwargs)


def seeded_orbit(model, T=2000, seed=11, record_every=1):
    return simulate(model, sample_state(np.random.default_rng(seed), model.N), T, record_every)


def synthetic_orbit(x_rows, p_rows):
    x = np.array(x_rows, dtype=float)
    p = np.array(p_rows, dtype=float)
    return Orbit(kind='full', t=np.arange(len(x)), x=x, rho=p[:, :-1] / p[:, -1:], p=p)


def assert_checked(report, *names):
    """검사가 실제로 수행되었고 통과했는지 확인 (not-applicable 은 통과로 치지 않는다)"""
    for name in names:
        check = report.get(name)
        assert check.applicable, f"{name} 이 적용되지 않음: {check.detail}"
        assert check.passed, name


# ---------------------------------------------------------------------------
# 상수
# ---------------------------------------------------------------------------

def test_separation_ratios_two_sellers():
    assert separation_ratios(2) == pytest.approx((2.0, 0.5))


@pytest.mark.parametrize('alpha, expected', [(0.0, 2), (0.9, 14)])
def test_T_2(alpha, expected):
    assert compute_T_N(pa_model(alpha=alpha)) == expected


def test_uniform_bound_two_sellers():
    bound, applicable = uniform_rho_bound(pa_model())
    assert bound == pytest.approx(18.0)
    assert applicable


def test_uniform_bound_not_applicable_when_S_g_infinite():
    bound, applicable = uniform_rho_bound(pa_model(a=1.0))
    assert math.isinf(bound)
    assert not applicable


def test_contraction_gamma():
    assert contraction_gamma(pa_model()) == pytest.approx(0.6)
    with pytest.raises(DomainError):
        contraction_gamma(pa_model(N=3))


def test_contraction_gamma_N_is_finite_for_moderate_g():
    gamma = contraction_gamma_N(pa_model(N=4, alpha=0.5, a=0.3))
    assert 0.0 < gamma < math.inf


# ---------------------------------------------------------------------------
# 보고서
# ---------------------------------------------------------------------------

def test_report_requires_anchor():
    with pytest.raises(ValueError):
        AuditReport().add_check('unnamed', True)


def test_not_applicable_does_not_fail():
    report = AuditReport()
    report.add_check('ok', True, anchor='a')
    report.not_applicable('skipped', anchor='b')
    assert report.passed
    report.add_check('bad', False, anchor='c')
    assert [check.name for check in report.failed_checks()] == ['bad']


def test_merge_reports_is_order_independent():
    first, second = AuditReport(), AuditReport()
    first.add_check('shared', True, measured=1.0, anchor='x')
    first.set_constant('M', 2.0)
    second.add_check('shared', False, measured=2.0, anchor='y')
    second.set_constant('M', 3.0)
    a = merge_reports({'one': first, 'two': second}).to_dict()
    b = merge_reports({'two': second, 'one': first}).to_dict()
    assert a == b
    assert {check['name'] for check in a['checks']} == {'shared', 'two.shared'}
    assert a['constants'] == {'M': 2.0, 'two.M': 3.0}


# ---------------------------------------------------------------------------
# 궤도 감사
# ---------------------------------------------------------------------------

def test_two_seller_orbit_passes_standard_audits():
    model = pa_model(alpha=0.5)
    orbit = seeded_orbit(model)
    bound, applicable = uniform_rho_bound(model)
    report = run_audits(['rho_bounds', 'mean_volume', 'price_product', 'fraction_bounds'],
                        orbit, model, {'bound': bound, 'uniform_applicable': applicable})
    assert report.passed, [check.name for check in report.failed_checks()]
    assert_checked(report, 'ratio_enters_bound', 'sign_preserved', 'abs_non_increasing',
                   'product_non_increasing', 'eps_positive')
    # T_2(0.5) = 3, S_g = 3
    assert bound == pytest.approx(54.0)
    assert report.constants['bound'] == pytest.approx(54.0)
    assert report.constants['bound_source'] == 'uniform'
    assert report.constants['eps'] > 0.0


def test_mean_volume_two_sellers_sign_and_monotonicity():
    model = pa_model()
    orbit = simulate(model, MarketState([0.7, 0.5], [1.0, 1.0]), 200)
    report = audit_mean_volume(orbit, model)
    assert_checked(report, 'sign_preserved', 'abs_non_increasing', 'strict_decrease')
    assert report.constants['mean_limit_estimate'] >= 0.5


def test_mean_volume_skips_non_symmetric_family():
    model = ModelSpec(N=2, alpha=0.3, f=FMapFamily.skewed_quadratic(), g=GMapFamily.linear(0.5))
    report = audit_mean_volume(seeded_orbit(model, T=100), model)
    assert not report.get('sign_preserved').applicable


def test_mean_volume_band_for_many_sellers():
    model = pa_model(N=4, alpha=0.9)
    report = audit_mean_volume(seeded_orbit(model, T=3000, seed=20240501), model)
    assert report.passed
    assert_checked(report, 'band_lower_invariant', 'band_upper_invariant')
    assert report.constants['band_lower'] == pytest.approx(1.0 / 3.0)


def test_mean_volume_many_sellers_requires_spefam():
    model = ModelSpec(N=3, alpha=0.5, f=FMapFamily.smooth_c4(), g=GMapFamily.linear(0.5))
    report = audit_mean_volume(seeded_orbit(model, T=50), model)
    assert not report.get('band_lower_invariant').applicable


def test_rho_bounds_tail_fallback_and_not_applicable_uniform():
    model = pa_model(a=1.0)
    orbit = seeded_orbit(model, T=500)
    report = audit_rho_bounds(orbit, bound=None, uniform_applicable=False)
    assert report.constants['bound_source'] == 'tail'
    assert not report.get('uniform_bound').applicable
    assert_checked(report, 'ratio_enters_bound')


def test_rho_bounds_detects_never_entering():
    orbit = synthetic_orbit([[0.5, 0.5]] * 3, [[1.0, 1.0], [5.0, 1.0], [9.0, 1.0]])
    report = audit_rho_bounds(orbit, bound=2.0)
    assert not report.get('ratio_enters_bound').passed
    assert math.isinf(report.constants['t_prime'])
    assert report.constants['M'] == pytest.approx(9.0)


def test_price_product_non_increasing_under_hg2():
    model = pa_model(alpha=0.3)
    report = audit_price_product(seeded_orbit(model, T=500), model)
    assert_checked(report, 'product_non_increasing', 'max_price_bounded')
    assert not report.get('product_non_decreasing').applicable


def test_price_product_non_decreasing_in_quadratic_window():
    model = ModelSpec(N=2, alpha=0.3, f=FMapFamily.piecewise_affine(), g=GMapFamily.quadratic(0.5, 0.2))
    report = audit_price_product(seeded_orbit(model, T=500), model)
    assert not report.get('product_non_increasing').applicable
    assert_checked(report, 'product_non_decreasing', 'min_price_positive', 'price_identity')


def test_price_identity():
    assert audit_price_identity(GMapFamily.quadratic(0.4, -0.3), samples=500, seed=1).passed


def test_crossings_alternating_indices_pass():
    x_rows = [[0.6, 0.4], [0.4, 0.6]] * 10
    p_rows = [[1.2, 1.0], [1.0, 1.2]] * 10
    report = audit_crossings(synthetic_orbit(x_rows, p_rows), window=4)
    assert_checked(report, 'crossing_x_min', 'crossing_x_max', 'crossing_p_min', 'crossing_p_max')
    assert report.constants['x_max_max_dwell'] == 1


def test_crossings_stuck_index_fails():
    report = audit_crossings(synthetic_orbit([[0.6, 0.4]] * 20, [[1.2, 1.0]] * 20), window=4)
    check = report.get('crossing_x_max')
    assert not check.passed
    assert check.measured == 5
    assert report.constants['x_max_max_dwell'] == 20


def test_crossings_ties_are_not_applicable():
    report = audit_crossings(synthetic_orbit([[0.5, 0.5]] * 10, [[1.0, 1.0]] * 10), window=4)
    assert not report.get('crossing_x_min').applicable
    assert report.passed


def test_crossings_rejects_bad_window():
    with pytest.raises(DomainError):
        audit_crossings(synthetic_orbit([[0.6, 0.4]] * 3, [[1.2, 1.0]] * 3), window=0)


def test_fraction_bounds_constants():
    orbit = synthetic_orbit([[0.2, 0.9], [0.3, 0.6], [0.45, 0.5]], [[1.0, 1.0]] * 3)
    report = audit_fraction_bounds(orbit)
    assert report.constants['eps'] == pytest.approx(0.1)
    assert report.constants['initial_gap'] == pytest.approx(0.7)
    assert report.constants['eps_N_tail'] == pytest.approx(0.3)


def test_nonsym_bounds_hold_for_skewed_family():
    model = ModelSpec(N=2, alpha=0.3, f=FMapFamily.skewed_quadratic(gamma=0.3), g=GMapFamily.linear(0.5))
    report = audit_nonsym_bounds(seeded_orbit(model, T=1000), model, gamma_dev=0.3)
    assert_checked(report, 'nonsym_upper', 'nonsym_lower')
    assert report.passed


def test_nonsym_bounds_need_two_sellers():
    model = pa_model(N=3)
    report = audit_nonsym_bounds(seeded_orbit(model, T=20), model)
    assert not report.get('nonsym_upper').applicable


def test_alt2_mean_invariance_and_search():
    model = pa_model(variant=ALT2)
    orbit = simulate(model, MarketState([0.7, 0.5], [1.5, 1.0]), 500)
    report = audit_alt2_mean(orbit, model, draws=20000, seed=0)
    assert_checked(report, 'alt2_mean_above_half_invariant', 'alt2_upward_crossing_exists')


def test_alt2_search_is_seeded():
    model = pa_model(variant=ALT2)
    first = search_alt2_crossing(model, draws=20000, seed=4)
    assert first == search_alt2_crossing(model, draws=20000, seed=4)
    assert first['found']
    assert first['mean_before'] < 0.5 < first['mean_after']


def test_alt2_audit_not_applicable_to_standard_orbit():
    model = pa_model()
    report = audit_alt2_mean(seeded_orbit(model, T=10), model)
    assert not report.get('alt2_mean_above_half_invariant').applicable


def test_ratio_decay_after_long_excursion():
    model = pa_model()
    orbit = simulate(model, MarketState([0.5, 0.5], [40.0, 1.0]), 200)
    report = ratio_decay_check(orbit, model)
    assert report.constants['gamma'] == pytest.approx(0.6)
    assert report.constants['T_N'] == 2
    assert_checked(report, 'ratio_decay')


def test_run_audits_rejects_unknown_name():
    model = pa_model()
    with pytest.raises(DomainError):
        run_audits(['no_such_audit'], seeded_orbit(model, T=10), model)


def test_every_registered_audit_runs():
    model = pa_model(alpha=0.5)
    report = run_audits(sorted(AUDITS), seeded_orbit(model, T=300), model,
                        {'window': 100, 'alt2_draws': 1000})
    assert len(report.checks) > 0

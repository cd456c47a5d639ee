# modules/analysis/audits.py
"""
궤도 감사: 기록된 궤도에서 가격비 상한, 평균 고객 수, 가격 곱, 극값 교대,
고객 비율 하한, 비대칭 경계, alt2 평균 조건을 검사한다.

감사는 실패를 예외로 던지지 않고 AuditReport 항목으로 남긴다.
"""
import math

import numpy as np

from .constants import compute_T_N, contraction_gamma
from .report import AuditReport, merge_reports
from ..market.dynamics import ALT2, full_step_lists
from ..market.families import (
    EXP_ABS_LOG, INVERSE_POWER, PIECEWISE_AFFINE, QUADRATIC, SPEFAM_DEV,
    eval_f_dx, quadratic_hg2_window, validate_f, validate_g, validate_sandwich,
)
from ..utils.errors import DomainError
from ..utils.logger import setup_logger

STEP_TOL = 1e-12
EXACT_TOL = 1e-14
# 엄격 단조성은 반올림 잡음보다 충분히 큰 변화가 기대되는 스텝에서만 판정한다
STRICT_FLOOR = 1e-6


def _consecutive(orbit):
    return orbit.record_every == 1 and len(orbit) >= 2


def audit_rho_bounds(orbit, bound=None, uniform_applicable=None):
    """
    가격비 유계성과 상한 진입 시각 t'

    Args:
        orbit (Orbit): 궤도
        bound (float): 상한 (None 또는 inf 이면 꼬리 최댓값의 1.05 배를 사용)
        uniform_applicable (bool): 균일 상한의 적용 여부 (False 면 not-applicable 항목으로 기록)

    Returns:
        AuditReport: M, t_prime, bound, horizon 상수 포함
    """
    report = AuditReport()
    ratio = orbit.ratio_max
    M = float(ratio.max())
    report.add_check('ratio_finite', math.isfinite(M), measured=M,
                     anchor='bounded price ratios')
    report.set_constant('M', M)
    report.set_constant('horizon', int(orbit.t[-1]))

    tail = ratio[len(ratio) // 2:]
    report.set_constant('tail_max', float(tail.max()))
    if bound is None or not math.isfinite(bound):
        bound, source = 1.05 * float(tail.max()), 'tail'
    else:
        source = 'uniform'
    report.set_constant('bound', bound)
    report.set_constant('bound_source', source)
    if uniform_applicable is False:
        report.not_applicable('uniform_bound', anchor='uniform ratio bound',
                              detail='S_g 가 무한하거나 적용 조건 불충족')

    # 뒤에서부터 누적 최댓값: k 이후 전부 bound 이하인 첫 k
    suffix_max = np.maximum.accumulate(ratio[::-1])[::-1]
    inside = np.nonzero(suffix_max <= bound)[0]
    if inside.size:
        t_prime = int(orbit.t[inside[0]])
        report.add_check('ratio_enters_bound', True, measured=t_prime, anchor="uniform bound after t'",
                         detail='entered and stayed within horizon')
        report.set_constant('t_prime', t_prime)
    else:
        report.add_check('ratio_enters_bound', False, measured=float(ratio[-1]),
                         anchor="uniform bound after t'", detail='never entered within horizon')
        report.set_constant('t_prime', math.inf)
    return report


def _symmetric(model):
    return validate_f(model.f, model.N, grid=20).get('hf3_symmetry').passed


def _is_spefam(fam):
    if fam.kind == SPEFAM_DEV:
        return True
    kernel = fam.c_kernel
    return fam.kind == PIECEWISE_AFFINE and (
        kernel.name == EXP_ABS_LOG or (kernel.name == INVERSE_POWER and kernel.power == 1.0))


def audit_mean_volume(orbit, model):
    """
    평균 고객 수 <x> 의 제약

    N = 2: <x> = 1/2 보존, 2<x>-1 의 부호 보존과 크기 비증가 (rho1 != 1 이면 엄격 감소)
    N > 2: N<x> 의 띠 [1/(N-1), N - 1/(N-1)] 불변성과 띠 밖에서의 엄격 단조 복귀

    Returns:
        AuditReport: 검사 결과 (mean_limit_estimate 상수 포함)
    """
    report = AuditReport()
    mean = orbit.mean_x
    tail = mean[-max(1, len(mean) // 10):]
    report.set_constant('mean_limit_estimate', float(tail.mean()))
    if len(orbit) < 2:
        report.not_applicable('mean_volume', anchor='mean volume', detail='기록이 2개 미만')
        return report

    if model.N == 2:
        _mean_volume_two(orbit, model, mean, report)
    else:
        _mean_volume_many(orbit, model, mean, report)
    return report


def _mean_volume_two(orbit, model, mean, report):
    anchor = 'N=2 mean volume'
    if not _symmetric(model):
        for name in ('mean_half_preserved', 'sign_preserved', 'abs_non_increasing', 'strict_decrease'):
            report.not_applicable(name, anchor=anchor, detail='f 가 대칭(Hf3)이 아님')
        return
    s = 2.0 * mean - 1.0
    now, nxt = s[:-1], s[1:]

    at_half = np.abs(now) <= EXACT_TOL
    if at_half.any():
        drift = float(np.abs(nxt[at_half]).max())
        report.add_check('mean_half_preserved', drift <= EXACT_TOL, measured=drift,
                         tolerance=EXACT_TOL, anchor=anchor)
    else:
        report.not_applicable('mean_half_preserved', anchor=anchor, detail='<x> = 1/2 인 시각 없음')

    off = np.abs(now) > STEP_TOL
    flips = off & (np.sign(nxt) != np.sign(now)) & (np.abs(nxt) > STEP_TOL)
    report.add_check('sign_preserved', not flips.any(), measured=int(flips.sum()),
                     tolerance=STEP_TOL, anchor=anchor)

    growth = float((np.abs(nxt) - np.abs(now)).max())
    report.add_check('abs_non_increasing', growth <= STEP_TOL, measured=growth,
                     tolerance=STEP_TOL, anchor=anchor)

    if orbit.record_every != 1:
        report.not_applicable('strict_decrease', anchor=anchor, detail='record_every != 1')
        return
    moved = (np.abs(orbit.rho[1:, 0] - 1.0) > STRICT_FLOOR) & (np.abs(now) > STRICT_FLOOR)
    if moved.any():
        worst = float((np.abs(nxt[moved]) - np.abs(now[moved])).max())
        report.add_check('strict_decrease', worst < 0.0, measured=worst,
                         anchor=anchor, detail='rho1^{t+1} != 1 인 스텝')
    else:
        report.not_applicable('strict_decrease', anchor=anchor, detail='rho1 이 1 에서 움직인 스텝 없음')


def _mean_volume_many(orbit, model, mean, report):
    anchor = 'N>2 mean volume'
    N = model.N
    names = ('band_lower_invariant', 'band_upper_invariant',
             'strict_increase_below', 'strict_decrease_above')
    if not _is_spefam(model.f):
        for name in names:
            report.not_applicable(name, anchor=anchor, detail=f"'{model.f.kind}' 는 SPEFAM 형태가 아님")
        return
    if model.f.kind == SPEFAM_DEV and not validate_f(model.f, N, grid=20).passed:
        for name in names:
            report.not_applicable(name, anchor=anchor, detail='SPEFAM 편차 검증 실패')
        return

    lower, upper = 1.0 / (N - 1), N - 1.0 / (N - 1)
    total = N * mean
    now, nxt = total[:-1], total[1:]
    report.set_constant('band_lower', lower)
    report.set_constant('band_upper', upper)

    inside_low = now >= lower - STEP_TOL
    exits = inside_low & (nxt < lower - STEP_TOL)
    report.add_check('band_lower_invariant', not exits.any(), measured=int(exits.sum()),
                     tolerance=STEP_TOL, anchor=anchor)
    inside_high = now <= upper + STEP_TOL
    exits = inside_high & (nxt > upper + STEP_TOL)
    report.add_check('band_upper_invariant', not exits.any(), measured=int(exits.sum()),
                     tolerance=STEP_TOL, anchor=anchor)

    # 엄격성은 rho^{t+1} != 1 (가격이 모두 같지 않은 스텝) 에서만 요구
    moved = orbit.ratio_max[1:] - 1.0 > STRICT_FLOOR
    below = (now < lower - STRICT_FLOOR) & moved
    above = (now > upper + STRICT_FLOOR) & moved
    if below.any():
        worst = float((now[below] - nxt[below]).max())
        report.add_check('strict_increase_below', worst < 0.0, measured=worst, anchor=anchor)
    else:
        report.not_applicable('strict_increase_below', anchor=anchor, detail='띠 아래 시각 없음')
    if above.any():
        worst = float((nxt[above] - now[above]).max())
        report.add_check('strict_decrease_above', worst < 0.0, measured=worst, anchor=anchor)
    else:
        report.not_applicable('strict_decrease_above', anchor=anchor, detail='띠 위 시각 없음')


def audit_price_identity(gfam, samples=10000, seed=0):
    """
    2차 g 의 항등식 (1 + g(d))(1 + g(-d)) = 1 + (2b - a^2 + b^2 d^2) d^2 점별 확인

    Returns:
        AuditReport: 최대 잔차
    """
    report = AuditReport()
    rng = np.random.default_rng(seed)
    d = rng.uniform(-1.0, 1.0, size=samples)
    a, b = gfam.a, gfam.b
    lhs = (1.0 + a * d + b * d * d) * (1.0 - a * d + b * d * d)
    rhs = 1.0 + (2.0 * b - a * a + b * b * d * d) * d * d
    residual = float(np.abs(lhs - rhs).max())
    report.add_check('price_identity', residual <= STEP_TOL, measured=residual,
                     tolerance=STEP_TOL, anchor='quadratic g price identity')
    return report


def audit_price_product(orbit, model):
    """
    가격 곱 prod p_i 의 단조성

    Hg2 가 성립하면 비증가와 최대 가격 유계, N = 2 이고 b in (a^2/2, a/2) 이면
    비감소와 최소 가격 양수, 항등식 검사를 수행한다.

    Returns:
        AuditReport: 검사 결과와 dist_fixed 추세 상수
    """
    report = AuditReport()
    anchor = 'realistic prices'
    if orbit.p is None:
        for name in ('product_non_increasing', 'product_non_decreasing'):
            report.not_applicable(name, anchor=anchor, detail='가격 크기가 없는 skew 궤도')
        return report

    product = orbit.price_product
    ratio = product[1:] / product[:-1]
    max_price = float(orbit.p.max())
    min_price = float(orbit.p.min())
    report.set_constant('max_price', max_price)
    report.set_constant('min_price', min_price)

    half = len(orbit) // 2
    dist = orbit.dist_fixed
    report.set_constant('limsup_max_price', float(orbit.p[half:].max()))
    report.set_constant('dist_fixed_head', float(dist[:max(half, 1)].mean()))
    report.set_constant('dist_fixed_tail', float(dist[half:].mean()))
    report.set_constant('dist_fixed_decreasing', bool(dist[half:].mean() < dist[:max(half, 1)].mean()))

    hg2 = validate_g(model.g, model.N, samples=20000).get('hg2').passed
    low, high = quadratic_hg2_window(model.g.a)
    in_window = model.N == 2 and model.g.kind == QUADRATIC and low < model.g.b < high

    if hg2:
        growth = float(ratio.max() - 1.0) if ratio.size else 0.0
        report.add_check('product_non_increasing', growth <= STEP_TOL, measured=growth,
                         tolerance=STEP_TOL, anchor=anchor)
        report.add_check('max_price_bounded', math.isfinite(max_price), measured=max_price,
                         anchor=anchor)
    else:
        report.not_applicable('product_non_increasing', anchor=anchor, detail='Hg2 불성립')

    if in_window:
        drop = float(1.0 - ratio.min()) if ratio.size else 0.0
        report.add_check('product_non_decreasing', drop <= STEP_TOL, measured=drop,
                         tolerance=STEP_TOL, anchor='Hg1 without Hg2')
        report.add_check('min_price_positive', min_price > 0.0, measured=min_price,
                         anchor='Hg1 without Hg2')
        report = report.merge(audit_price_identity(model.g))
    else:
        report.not_applicable('product_non_decreasing', anchor='Hg1 without Hg2',
                              detail='N=2 2차 g 의 (a^2/2, a/2) 구간이 아님')
    return report


def _runs(indices, valid):
    """같은 인덱스가 연속된 최장 구간 길이 (동률 시각은 구간을 끊는다)"""
    longest = current = 0
    previous = None
    for index, ok in zip(indices, valid):
        if not ok:
            current, previous = 0, None
            continue
        current = current + 1 if index == previous else 1
        previous = index
        longest = max(longest, current)
    return longest


def audit_crossings(orbit, window=5000):
    """
    극값 인덱스 (x, p 의 argmin/argmax) 의 교대

    모든 윈도(window 스텝)마다 각 인덱스가 한 번 이상 바뀌어야 한다.
    동률(차이 < 1e-14) 시각은 판정에서 제외한다.

    Returns:
        AuditReport: 검사 결과와 인덱스별 최장 체류 시간
    """
    report = AuditReport()
    anchor = 'perpetual crossings'
    if window < 1:
        raise DomainError(f"window 는 1 이상이어야 합니다: {window}")
    step = orbit.record_every or 1
    rows = max(2, window // step)
    report.set_constant('window', int(window))

    for name, (indices, ties) in sorted(orbit.extremal_indices().items()):
        check = f'crossing_{name}'
        valid = ~ties
        if not valid.any():
            report.not_applicable(check, anchor=anchor, detail='모든 시각이 동률')
            continue
        report.set_constant(f'{name}_max_dwell', _runs(indices, valid) * step)
        if len(orbit) < rows:
            report.not_applicable(check, anchor=anchor, detail='궤도가 윈도보다 짧음')
            continue
        stuck = 0
        judged = 0
        for start in range(0, len(orbit) - rows + 1, rows):
            chunk = indices[start:start + rows][valid[start:start + rows]]
            if chunk.size < 2:
                continue
            judged += 1
            if np.unique(chunk).size < 2:
                stuck += 1
        if judged == 0:
            report.not_applicable(check, anchor=anchor, detail='판정 가능한 윈도 없음')
        else:
            report.add_check(check, stuck == 0, measured=stuck, anchor=anchor,
                             detail=f'{judged} windows')
    return report


def audit_fraction_bounds(orbit):
    """
    고객 비율 하한 eps = min min(x_i, 1 - x_i) 와 꼬리 구간의 최대 격차

    Returns:
        AuditReport: eps, eps_N_tail, initial_gap 상수 포함
    """
    report = AuditReport()
    eps = float(np.minimum(orbit.x, 1.0 - orbit.x).min())
    report.add_check('eps_positive', eps > 0.0, measured=eps, anchor='no capture')
    report.set_constant('eps', eps)
    gaps = np.abs(orbit.x - orbit.x[:, -1:]).max(axis=1)
    report.set_constant('initial_gap', float(gaps[0]))
    report.set_constant('eps_N_tail', float(gaps[len(gaps) // 2:].max()))
    return report


def audit_nonsym_bounds(orbit, model, gamma_dev=0.3):
    """
    비대칭 f 에서의 평균 경계 (N = 2)

    rho' = rho1^{t+1} 이 1 보다 크면 c = f'_x(rho', 0), 작으면 c = f'_x(rho', 1) 로
    2<x'>-1-gamma <= c_alpha (2<x>-1-gamma), 2<x'>-1+gamma >= c_alpha (2<x>-1+gamma)
    (c_alpha = alpha + (1-alpha) c) 를 확인하고 [(1-gamma)/2, (1+gamma)/2] 불변성을 본다.

    Returns:
        AuditReport: 검사 결과
    """
    report = AuditReport()
    anchor = 'non-symmetric f bounds'
    names = ('nonsym_upper', 'nonsym_lower', 'nonsym_interval_invariant')
    if model.N != 2 or not _consecutive(orbit):
        for name in names:
            report.not_applicable(name, anchor=anchor, detail='N=2, record_every=1 궤도가 필요')
        return report
    sandwich = validate_sandwich(model.f, gamma_dev, grid=30)
    if not sandwich.passed:
        for name in names:
            report.not_applicable(name, anchor=anchor, detail='샌드위치 가정 검증 실패')
        return report

    alpha = model.alpha
    s = 2.0 * orbit.mean_x - 1.0
    upper_gap = lower_gap = -math.inf
    for k in range(len(orbit) - 1):
        rho = float(orbit.rho[k + 1, 0])
        if rho == 1.0:
            c = 1.0
        else:
            c = eval_f_dx(model.f, rho, 0.0 if rho > 1.0 else 1.0)
        c_alpha = alpha + (1.0 - alpha) * c
        upper_gap = max(upper_gap, (s[k + 1] - gamma_dev) - c_alpha * (s[k] - gamma_dev))
        lower_gap = max(lower_gap, c_alpha * (s[k] + gamma_dev) - (s[k + 1] + gamma_dev))
    report.add_check('nonsym_upper', upper_gap <= STEP_TOL, measured=upper_gap,
                     tolerance=STEP_TOL, anchor=anchor)
    report.add_check('nonsym_lower', lower_gap <= STEP_TOL, measured=lower_gap,
                     tolerance=STEP_TOL, anchor=anchor)

    inside = np.abs(s[:-1]) <= gamma_dev
    leaks = inside & (np.abs(s[1:]) > gamma_dev + STEP_TOL)
    if inside.any():
        report.add_check('nonsym_interval_invariant', not leaks.any(), measured=int(leaks.sum()),
                         tolerance=STEP_TOL, anchor=anchor)
    else:
        report.not_applicable('nonsym_interval_invariant', anchor=anchor,
                              detail='<x> 가 구간 안에 들어온 적 없음')
    report.set_constant('gamma_dev', gamma_dev)
    return report


def search_alt2_crossing(model, draws=100000, seed=0, rho_range=(0.25, 4.0)):
    """
    <x> < 1/2 에서 한 스텝 만에 <x'> > 1/2 가 되는 alt2 상태를 시드 고정 탐색

    Returns:
        dict: found, draws_used, x, rho, mean_before, mean_after
    """
    rng = np.random.default_rng(seed)
    for k in range(1, int(draws) + 1):
        x = rng.uniform(0.0, 1.0, size=2)
        rho = rng.uniform(*rho_range)
        if x.mean() >= 0.5 or x.min() <= 0.0:
            continue
        new_x, _ = full_step_lists(model, x.tolist(), [rho, 1.0], alt2=True)
        after = 0.5 * (new_x[0] + new_x[1])
        if after > 0.5:
            return {'found': True, 'draws_used': k, 'x': x.tolist(), 'rho': float(rho),
                    'mean_before': float(x.mean()), 'mean_after': after}
    return {'found': False, 'draws_used': int(draws)}


def audit_alt2_mean(orbit, model=None, draws=100000, seed=0):
    """
    alt2 모델의 평균 조건

    (i) <x> > 1/2 의 전방 불변성, (ii) 궤도 안의 상향 교차와 시드 고정 탐색 결과

    Returns:
        AuditReport: 검사 결과
    """
    report = AuditReport()
    anchor = 'alt2 mean-volume claims'
    if orbit.variant != ALT2:
        report.not_applicable('alt2_mean_above_half_invariant', anchor=anchor,
                              detail='alt2 모델로 만든 궤도가 아님')
        return report
    mean = orbit.mean_x
    above = mean[:-1] > 0.5
    drops = above & (mean[1:] <= 0.5)
    if above.any():
        report.add_check('alt2_mean_above_half_invariant', not drops.any(),
                         measured=int(drops.sum()), anchor=anchor)
    else:
        report.not_applicable('alt2_mean_above_half_invariant', anchor=anchor,
                              detail='<x> > 1/2 인 시각 없음')
    at_half = np.abs(mean[:-1] - 0.5) <= EXACT_TOL
    synced = np.abs(orbit.rho[:-1, 0] - 1.0) <= EXACT_TOL
    if (at_half & synced).any():
        drift = float(np.abs(mean[1:][at_half & synced] - 0.5).max())
        report.add_check('alt2_half_preserved', drift <= EXACT_TOL, measured=drift,
                         tolerance=EXACT_TOL, anchor=anchor)

    crossings = np.nonzero((mean[:-1] < 0.5) & (mean[1:] > 0.5))[0]
    report.set_constant('orbit_upward_crossings', int(crossings.size))
    if model is not None:
        found = search_alt2_crossing(model, draws=draws, seed=seed)
        report.add_check('alt2_upward_crossing_exists', found['found'],
                         measured=found['draws_used'], anchor=anchor,
                         detail=str({k: v for k, v in found.items() if k != 'found'}))
    return report


def ratio_decay_check(orbit, model):
    """
    rho1 > 2 가 T_2 스텝 연속된 직후 한 스텝 가격비 감소율이 gamma 이하인지 확인
    (rho1 < 1/2 쪽은 대칭으로 1/gamma 이상)

    Returns:
        AuditReport: 검사 결과
    """
    report = AuditReport()
    anchor = 'gamma contraction'
    if model.N != 2 or not _consecutive(orbit):
        report.not_applicable('ratio_decay', anchor=anchor, detail='N=2, record_every=1 궤도가 필요')
        return report
    gamma = contraction_gamma(model)
    T = compute_T_N(model)
    report.set_constant('gamma', gamma)
    report.set_constant('T_N', T)

    rho = orbit.rho[:, 0]
    worst = -math.inf
    triggers = 0
    # x^k 는 rho^1..rho^k 로만 갱신되었으므로 k >= T 부터 판정
    for k in range(T, len(rho) - 1):
        window = rho[k - T + 1:k + 1]
        if np.all(window > 2.0):
            factor = rho[k + 1] / rho[k]
        elif np.all(window < 0.5):
            factor = rho[k] / rho[k + 1]
        else:
            continue
        triggers += 1
        worst = max(worst, factor)
    if triggers:
        report.add_check('ratio_decay', worst <= gamma + STEP_TOL, measured=worst,
                         tolerance=STEP_TOL, anchor=anchor, detail=f'{triggers} trigger steps')
    else:
        report.not_applicable('ratio_decay', anchor=anchor, detail='발동 구간 없음')
    return report


def _run_rho_bounds(orbit, model, params):
    return audit_rho_bounds(orbit, params.get('bound'), params.get('uniform_applicable'))


def _run_mean_volume(orbit, model, params):
    return audit_mean_volume(orbit, model)


def _run_price_product(orbit, model, params):
    return audit_price_product(orbit, model)


def _run_crossings(orbit, model, params):
    return audit_crossings(orbit, int(params.get('window', 5000)))


def _run_fraction_bounds(orbit, model, params):
    return audit_fraction_bounds(orbit)


def _run_nonsym_bounds(orbit, model, params):
    return audit_nonsym_bounds(orbit, model, float(params.get('gamma_dev', 0.3)))


def _run_alt2_mean(orbit, model, params):
    return audit_alt2_mean(orbit, model, draws=int(params.get('alt2_draws', 100000)),
                           seed=int(params.get('seed', 0)))


AUDITS = {
    'rho_bounds': _run_rho_bounds,
    'mean_volume': _run_mean_volume,
    'price_product': _run_price_product,
    'crossings': _run_crossings,
    'fraction_bounds': _run_fraction_bounds,
    'nonsym_bounds': _run_nonsym_bounds,
    'alt2_mean': _run_alt2_mean,
}


def run_audits(names, orbit, model, params=None):
    """
    이름으로 선택한 감사를 실행해 결정적으로 병합

    Args:
        names (list): AUDITS 의 키 목록
        orbit (Orbit): 궤도
        model (ModelSpec): 모델
        params (dict): window, gamma_dev, bound 등

    Returns:
        AuditReport: 병합 보고서
    """
    logger = setup_logger()
    params = params or {}
    unknown = [name for name in names if name not in AUDITS]
    if unknown:
        raise DomainError(f"알 수 없는 감사 이름: {unknown}")
    reports = {}
    for name in names:
        reports[name] = AUDITS[name](orbit, model, params)
        status = '통과' if reports[name].passed else '실패'
        logger.info(f"감사 '{name}': {status}")
    return merge_reports(reports)

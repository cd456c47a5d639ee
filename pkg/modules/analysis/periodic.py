# modules/analysis/periodic.py
"""
N = 2 축약 사상의 4-주기 궤도 탐색

rho1 = 1 위상에서의 (x1, x2) 두 좌표로 주기 사상을 매개화하고,
rho1 패턴 (1, rho, 1, 1/rho) 와 귀환 조건의 잔차를 감쇠 가우스-뉴턴
(scipy least_squares, 수치 야코비안) 으로 푼다. 실패하면 반대각선 x2 = 1 - x1
위에서 이분법으로 패턴 조건을 맞춘 뒤 잔차를 다시 확인한다.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect, brentq, least_squares

from ..market.dynamics import SkewState, skew_step_lists
from ..market.families import eval_g
from ..utils.errors import DomainError, NumericError
from ..utils.logger import setup_logger

PERIOD = 4
RESIDUAL_TOL = 1e-9


@dataclass
class PeriodicOrbitResult:
    """
    주기 궤도 탐색 결과

    state 는 찾지 못했으면 None 이고, 그 이유는 message 에 남는다.
    """
    rho: float
    period: int
    state: SkewState = None
    found: bool = False
    degenerate: bool = False
    residual: float = float('nan')
    pattern: list = field(default_factory=list)
    max_ratio: float = float('nan')
    method: str = ''
    message: str = ''

    def to_dict(self):
        return {
            'rho': self.rho,
            'period': self.period,
            'found': self.found,
            'degenerate': self.degenerate,
            'x': None if self.state is None else self.state.x.tolist(),
            'rho_1': None if self.state is None else float(self.state.rho[0]),
            'residual': self.residual,
            'pattern': list(self.pattern),
            'max_ratio': self.max_ratio,
            'method': self.method,
            'message': self.message,
        }


def _orbit_of(model, x):
    """(x1, x2, rho1 = 1) 에서 시작한 PERIOD 스텝 궤도"""
    states = [(list(x), [1.0])]
    xs, rho = list(x), [1.0]
    for _ in range(PERIOD):
        xs, rho = skew_step_lists(model, xs, rho)
        states.append((xs, rho))
    return states


def _target_difference(model, rho):
    """(1 + g(d)) / (1 + g(-d)) = rho 를 만족하는 d in (0, 1]"""
    def gap(d):
        return (1.0 + eval_g(model.g, d)) / (1.0 + eval_g(model.g, -d)) - rho

    # g(-1) = -1 이면 d -> 1 에서 비율이 발산하므로 1 바로 아래에서 구간을 잡는다
    high = 1.0 if 1.0 + eval_g(model.g, -1.0) > 0.0 else 1.0 - 1e-15
    if gap(high) < 0.0:
        return None
    return brentq(gap, 0.0, high, xtol=1e-15)


def _residuals(model, x, rho, d_target):
    try:
        states = _orbit_of(model, x)
    except NumericError:
        return np.full(2 + PERIOD, 1e3)
    expected = [rho, 1.0, 1.0 / rho, 1.0]
    pattern = [math.log(states[k + 1][1][0]) - math.log(expected[k]) for k in range(PERIOD)]
    closing = [states[-1][0][0] - x[0], states[-1][0][1] - x[1]]
    return np.array([x[0] - x[1] - d_target] + pattern + closing)


def _summarize(model, x, rho):
    states = _orbit_of(model, x)
    pattern = [1.0] + [s[1][0] for s in states[1:PERIOD]]
    expected = [1.0, rho, 1.0, 1.0 / rho]
    closing = max(abs(states[-1][0][0] - x[0]), abs(states[-1][0][1] - x[1]),
                  abs(states[-1][1][0] - 1.0))
    pattern_error = max(abs(p - e) / e for p, e in zip(pattern, expected))
    residual = max(closing, pattern_error)
    return residual, pattern, max(max(p, 1.0 / p) for p in pattern)


def find_periodic_orbit(model, rho, period=PERIOD):
    """
    rho1 패턴 (1, rho, 1, 1/rho) 를 갖는 4-주기 점 탐색

    Args:
        model (ModelSpec): N = 2 모델
        rho (float): 패턴의 최대 상대가격 (>= 1)
        period (int): 주기 (4 만 지원)

    Returns:
        PeriodicOrbitResult: 탐색 결과 (rho = 1 은 동기화 고정점으로 degenerate 처리)
    """
    logger = setup_logger()
    if model.N != 2:
        raise DomainError(f"주기 궤도 탐색은 N = 2 전용입니다: N={model.N}")
    if period != PERIOD:
        raise DomainError(f"지원하는 주기는 {PERIOD} 뿐입니다: {period}")
    if not (math.isfinite(rho) and rho >= 1.0):
        raise DomainError(f"rho 는 1 이상이어야 합니다: {rho}")

    result = PeriodicOrbitResult(rho=float(rho), period=period)
    if rho == 1.0:
        result.state = SkewState(np.array([0.5, 0.5]), np.array([1.0]))
        result.found = True
        result.degenerate = True
        result.residual = 0.0
        result.pattern = [1.0] * period
        result.max_ratio = 1.0
        result.method = 'fixed_point'
        result.message = "rho = 1 은 동기화 고정점 (퇴화 주기 궤도)"
        return result

    d_target = _target_difference(model, rho)
    if d_target is None:
        result.message = f"(1+g(d))/(1+g(-d)) = {rho} 인 d in (0,1] 가 없습니다 (S_g 가 유한)"
        logger.warning(result.message)
        return result

    # 반대각선 위의 시작점: x1 - x2 = d, x1 + x2 = 1
    start = np.array([(1.0 + d_target) / 2.0, (1.0 - d_target) / 2.0])
    edge = 1e-12
    try:
        solution = least_squares(lambda v: _residuals(model, v, rho, d_target), start,
                                 bounds=([edge, edge], [1.0 - edge, 1.0 - edge]),
                                 method='trf', xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                 max_nfev=200)
        candidate, method = solution.x, 'gauss_newton'
    except (ValueError, NumericError) as e:
        logger.warning(f"가우스-뉴턴 실패: {str(e)}")
        candidate, method = None, ''

    residual = math.inf
    if candidate is not None:
        residual, pattern, max_ratio = _summarize(model, candidate.tolist(), rho)
    if not residual <= RESIDUAL_TOL:
        # 반대각선 슬라이스에서 x1 - x2 = d 조건만 이분법으로 맞춘다
        x1 = bisect(lambda v: (2.0 * v - 1.0) - d_target, 0.5, 1.0, xtol=1e-15)
        candidate, method = np.array([x1, 1.0 - x1]), 'antidiagonal_bisection'
        residual, pattern, max_ratio = _summarize(model, candidate.tolist(), rho)

    result.residual = residual
    result.method = method
    result.pattern = pattern
    result.max_ratio = max_ratio
    if residual <= RESIDUAL_TOL:
        result.state = SkewState(candidate, np.array([1.0]))
        result.found = True
        result.message = "4-주기 점을 찾았습니다"
        logger.info(f"4-주기 궤도 (rho={rho}): x={candidate.tolist()}, residual={residual:.3g}")
    else:
        result.message = f"수렴 실패: residual={residual:.3g} > {RESIDUAL_TOL}"
        logger.warning(result.message)
    return result

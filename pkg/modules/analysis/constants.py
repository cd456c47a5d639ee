# modules/analysis/constants.py
"""
명시적 상수: T_N, 균일 가격비 상한, 수축률 gamma / gamma_N
"""
import math

import numpy as np
from scipy.optimize import minimize_scalar

from ..market.families import compute_S_g, eval_f_alpha, eval_g, iterate_f_alpha
from ..utils.errors import DivergenceError, DomainError, InconsistencyError
from ..utils.logger import setup_logger

T_N_CAP = 10 ** 6


def separation_ratios(N):
    """
    T_N 정의에 쓰이는 (높은 비율, 낮은 비율) = (N(N-1)/(1+(N-2)(N+1)), (N-1)/N)
    """
    return N * (N - 1) / (1.0 + (N - 2) * (N + 1)), (N - 1) / N


def compute_T_N(model, cap=T_N_CAP):
    """
    f_alpha^t(rho_high, 1) < f_alpha^t(rho_low, 0) 를 만족하는 최소 t

    Args:
        model (ModelSpec): 모델
        cap (int): 반복 상한

    Returns:
        int: T_N

    Raises:
        DivergenceError: 상한 안에 분리되지 않음 (부적절한 사상족)
    """
    high_ratio, low_ratio = separation_ratios(model.N)
    high, low = 1.0, 0.0
    for t in range(1, int(cap) + 1):
        high = eval_f_alpha(model.f, model.alpha, high_ratio, high)
        low = eval_f_alpha(model.f, model.alpha, low_ratio, low)
        if high < low:
            return t
    raise DivergenceError(f"T_N 계산이 {cap} 회 안에 끝나지 않았습니다 (N={model.N}, alpha={model.alpha})")


def uniform_rho_bound(model):
    """
    가격비 균일 상한

    N = 2: 2 S_g^{T_2} (항상 적용), N > 2: N + 1 (S_g <= ((N+1)/N)^{1/T_N} 일 때만 적용)

    Returns:
        tuple: (bound, applicable)
    """
    s_g = compute_S_g(model.g)
    if not math.isfinite(s_g):
        return math.inf, False
    T = compute_T_N(model)
    if model.N == 2:
        return 2.0 * s_g ** T, True
    threshold = ((model.N + 1.0) / model.N) ** (1.0 / T)
    return float(model.N + 1), s_g <= threshold


def contraction_gamma(model):
    """
    N = 2 가격비 수축률 gamma = (1 + g(A - B)) / (1 + g(B - A))

    A = f_alpha^{T_2}(2, 1), B = f_alpha^{T_2}(1/2, 0)

    Raises:
        InconsistencyError: gamma >= 1
    """
    if model.N != 2:
        raise DomainError(f"contraction_gamma 는 N = 2 전용입니다: N={model.N}")
    T = compute_T_N(model)
    A = iterate_f_alpha(model.f, model.alpha, 2.0, 1.0, T)
    B = iterate_f_alpha(model.f, model.alpha, 0.5, 0.0, T)
    gamma = (1.0 + eval_g(model.g, A - B)) / (1.0 + eval_g(model.g, B - A))
    if not gamma < 1.0:
        raise InconsistencyError(f"gamma={gamma} >= 1 (A={A}, B={B})")
    return gamma


def contraction_gamma_N(model, grid=2001):
    """
    N > 2 수축률 gamma_N

    x in [0, (N-2)/(N-1)] 에서 (1 + g(A - B/(N-1) - x)) / (1 + g(B - A/(N-1) - x)) 의 최댓값.
    조밀 격자 최댓값 주변을 scipy 유계 최적화로 다듬는다.

    Returns:
        float: gamma_N (분모가 0 이하가 되면 inf)
    """
    logger = setup_logger()
    N = model.N
    if N <= 2:
        raise DomainError(f"contraction_gamma_N 은 N > 2 전용입니다: N={N}")
    T = compute_T_N(model)
    high_ratio, low_ratio = separation_ratios(N)
    A = iterate_f_alpha(model.f, model.alpha, high_ratio, 1.0, T)
    B = iterate_f_alpha(model.f, model.alpha, low_ratio, 0.0, T)
    upper = (N - 2) / (N - 1)

    def ratio(x):
        d_num = min(max(A - B / (N - 1) - x, -1.0), 1.0)
        d_den = min(max(B - A / (N - 1) - x, -1.0), 1.0)
        denominator = 1.0 + eval_g(model.g, d_den)
        if denominator <= 0.0:
            return math.inf
        return (1.0 + eval_g(model.g, d_num)) / denominator

    xs = np.linspace(0.0, upper, grid)
    values = np.array([ratio(float(x)) for x in xs])
    if not np.all(np.isfinite(values)):
        return math.inf
    k = int(np.argmax(values))
    lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, grid - 1)]
    best = float(values[k])
    if hi > lo:
        refined = minimize_scalar(lambda x: -ratio(x), bounds=(lo, hi), method='bounded',
                                  options={'xatol': 1e-12})
        if refined.success:
            best = max(best, -float(refined.fun))
    logger.debug(f"gamma_N={best} (N={N}, T_N={T}, A={A}, B={B})")
    return best

# modules/market/dynamics.py
"""
시장 상태와 시간 발전 사상

전체 사상 F: 가격을 먼저 (이전 고객 비율로) 갱신하고, 새 가격으로 고객 비율을 갱신한다.
축약 사상 F_skew: rho_i = p_i / p_N 좌표에서의 같은 동역학.

내부 커널은 리스트/파이썬 float 로 계산한다 (판매자 수가 작고 궤도가 길기 때문).
경쟁자 평균은 math.fsum 으로 계산해서 동기화 상태가 비트 단위로 보존되게 한다.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from .families import FMapFamily, GMapFamily, eval_f
from ..utils.errors import DomainError, InversionError, NumericError

STANDARD = 'standard'
ALT2 = 'alt2'
VARIANTS = (STANDARD, ALT2)

# 반올림으로 인한 [0,1] 이탈 허용치
CLAMP_TOL = 1e-14
INVERSION_XTOL = 1e-13


@dataclass(frozen=True)
class ModelSpec:
    """
    동역학을 완전히 정하는 (N, alpha, f, g) 묶음

    Args:
        N (int): 판매자 수 (>= 2)
        alpha (float): 충성도, [0, 1)
        f (FMapFamily): 고객 비율 갱신 사상족
        g (GMapFamily): 가격 갱신 사상족
        variant (str): 'standard' | 'alt2' (N = 2 의 대안 비율 모델)
    """
    N: int
    alpha: float
    f: FMapFamily = field(default_factory=FMapFamily)
    g: GMapFamily = field(default_factory=GMapFamily)
    variant: str = STANDARD

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise DomainError(f"N 은 2 이상의 정수여야 합니다: {self.N}")
        if not (math.isfinite(self.alpha) and 0.0 <= self.alpha < 1.0):
            raise DomainError(f"alpha 는 [0, 1) 에 있어야 합니다: {self.alpha}")
        if self.variant not in VARIANTS:
            raise DomainError(f"알 수 없는 모델 변형: {self.variant}")
        if self.variant == ALT2 and self.N != 2:
            raise DomainError(f"alt2 모델은 N = 2 에서만 정의됩니다: N={self.N}")


@dataclass(frozen=True)
class MarketState:
    """
    전체 상태 (x, p)

    Args:
        x (numpy.ndarray): 판매자별 고객 비율, [0,1]^N
        p (numpy.ndarray): 판매자별 가격/매력도, 양수
    """
    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if x.ndim != 1 or p.shape != x.shape or x.size < 2:
            raise DomainError(f"x, p 는 같은 길이(>= 2)의 벡터여야 합니다: {x.shape}, {p.shape}")
        if not np.all((x >= 0.0) & (x <= 1.0)):
            raise DomainError(f"고객 비율은 [0,1] 에 있어야 합니다: {x.tolist()}")
        if not np.all(np.isfinite(p) & (p > 0.0)):
            raise DomainError(f"가격은 유한한 양수여야 합니다: {p.tolist()}")
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'p', p)

    @property
    def N(self):
        return self.x.size

    @property
    def mean_x(self):
        return float(self.x.mean())


@dataclass(frozen=True)
class SkewState:
    """
    축약 상태 (x, rho), rho_i = p_i / p_N (i < N), rho_N = 1 은 저장하지 않는다
    """
    x: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        rho = np.asarray(self.rho, dtype=float).reshape(-1)
        if x.ndim != 1 or rho.size != x.size - 1 or x.size < 2:
            raise DomainError(f"rho 의 길이는 N-1 이어야 합니다: x={x.shape}, rho={rho.shape}")
        if not np.all((x >= 0.0) & (x <= 1.0)):
            raise DomainError(f"고객 비율은 [0,1] 에 있어야 합니다: {x.tolist()}")
        if not np.all(np.isfinite(rho) & (rho > 0.0)):
            raise DomainError(f"상대가격은 유한한 양수여야 합니다: {rho.tolist()}")
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'rho', rho)

    @property
    def N(self):
        return self.x.size

    def full_rho(self):
        """rho_N = 1 을 붙인 길이 N 벡터"""
        return np.append(self.rho, 1.0)


# ---------------------------------------------------------------------------
# 내부 커널 (리스트 입출력)
# ---------------------------------------------------------------------------

def clamp_fraction(value, index):
    """반올림 수준의 [0,1] 이탈은 잘라내고, 그보다 크면 수치 오류"""
    if 0.0 <= value <= 1.0:
        return value
    if -CLAMP_TOL <= value < 0.0:
        return 0.0
    if 1.0 < value <= 1.0 + CLAMP_TOL:
        return 1.0
    raise NumericError(f"고객 비율이 [0,1] 을 벗어났습니다: {value!r}", index=index)


def _price_factors(g, x):
    """1 + g(x_i - <x>_i^c) 목록"""
    N = len(x)
    total = math.fsum(x)
    factors = []
    for i, xi in enumerate(x):
        d = (N * xi - total) / (N - 1)
        factor = 1.0 + g.a * d + g.b * d * d
        if not (math.isfinite(factor) and factor > 0.0):
            raise NumericError(f"가격 배율이 양수가 아닙니다: {factor!r}", index=i)
        factors.append(factor)
    return factors


def _competitor_ratios(values):
    """v_i / <v>_i^c 목록"""
    N = len(values)
    ratios = []
    for i, vi in enumerate(values):
        others = math.fsum(values[:i] + values[i + 1:])
        ratios.append((N - 1) * vi / others)
    return ratios


def _update_fractions(model, x, ratios):
    alpha = model.alpha
    fam = model.f
    new_x = []
    for i, (xi, ri) in enumerate(zip(x, ratios)):
        if not (math.isfinite(ri) and ri > 0.0):
            raise NumericError(f"상대가격이 유한한 양수가 아닙니다: {ri!r}", index=i)
        value = alpha * xi + (1.0 - alpha) * eval_f(fam, ri, xi)
        new_x.append(clamp_fraction(value, i))
    return new_x


def full_step_lists(model, x, p, alt2=False):
    """
    전체 사상 한 스텝 (리스트 입출력)

    Args:
        model (ModelSpec): 모델
        x (list): 고객 비율
        p (list): 가격
        alt2 (bool): True 이면 비율 2 p_i' / (p_1' + p_2') 사용

    Returns:
        tuple: (new_x, new_p)
    """
    factors = _price_factors(model.g, x)
    new_p = []
    for i, (pi, factor) in enumerate(zip(p, factors)):
        value = pi * factor
        if not (math.isfinite(value) and value > 0.0):
            raise NumericError(f"가격이 유한한 양수가 아닙니다: {value!r}", index=i)
        new_p.append(value)
    if alt2:
        total = new_p[0] + new_p[1]
        ratios = [2.0 * new_p[0] / total, 2.0 * new_p[1] / total]
    else:
        ratios = _competitor_ratios(new_p)
    return _update_fractions(model, x, ratios), new_p


def skew_step_lists(model, x, rho):
    """
    축약 사상 한 스텝 (rho 는 길이 N-1)

    Returns:
        tuple: (new_x, new_rho)
    """
    factors = _price_factors(model.g, x)
    reference = factors[-1]
    new_rho = []
    for i, ri in enumerate(rho):
        value = ri * factors[i] / reference
        if not (math.isfinite(value) and value > 0.0):
            raise NumericError(f"상대가격이 유한한 양수가 아닙니다: {value!r}", index=i)
        new_rho.append(value)
    ratios = _competitor_ratios(new_rho + [1.0])
    return _update_fractions(model, x, ratios), new_rho


# ---------------------------------------------------------------------------
# 공개 연산
# ---------------------------------------------------------------------------

def _check_model_state(model, N):
    if N != model.N:
        raise DomainError(f"상태의 판매자 수({N})가 모델의 N({model.N})과 다릅니다")


def step_full(model, s):
    """
    전체 사상 F 한 스텝

    p_i' = p_i (1 + g(x_i - <x>_i^c)) 를 먼저 계산하고,
    x_i' = f_alpha(p_i' / <p'>_i^c, x_i) 로 고객 비율을 갱신한다.

    Args:
        model (ModelSpec): 모델
        s (MarketState): 현재 상태

    Returns:
        MarketState: 다음 상태
    """
    _check_model_state(model, s.N)
    new_x, new_p = full_step_lists(model, s.x.tolist(), s.p.tolist(),
                                   alt2=model.variant == ALT2)
    return MarketState(np.array(new_x), np.array(new_p))


def step_skew(model, s):
    """축약 사상 F_skew 한 스텝"""
    _check_model_state(model, s.N)
    if model.variant == ALT2:
        # alt2 비율 2 p_1 / (p_1 + p_2) 는 rho 만으로 정해진다
        full = lift_to_full(s)
        nxt = step_alt2(model, full)
        return project_to_skew(nxt)
    new_x, new_rho = skew_step_lists(model, s.x.tolist(), s.rho.tolist())
    return SkewState(np.array(new_x), np.array(new_rho))


def step_alt2(model, s):
    """
    N = 2 대안 모델 한 스텝 (고객 비율 갱신에 2 p_i' / (p_1' + p_2') 사용)

    Args:
        model (ModelSpec): N = 2 모델
        s (MarketState): 현재 상태

    Returns:
        MarketState: 다음 상태
    """
    if model.N != 2 or s.N != 2:
        raise DomainError(f"alt2 스텝은 N = 2 에서만 정의됩니다: N={s.N}")
    new_x, new_p = full_step_lists(model, s.x.tolist(), s.p.tolist(), alt2=True)
    return MarketState(np.array(new_x), np.array(new_p))


def invert_f_alpha(fam, alpha, rho, target, index=None):
    """
    f_alpha(rho, .) 의 단조 역함수 (구간 이분법, 절대 오차 1e-13)

    Raises:
        InversionError: target 이 f_alpha(rho, [0,1]) 밖에 있는 경우
    """
    if rho == 1.0:
        return target

    def residual(x):
        return alpha * x + (1.0 - alpha) * eval_f(fam, rho, x) - target

    low, high = residual(0.0), residual(1.0)
    if abs(low) <= 1e-15:
        return 0.0
    if abs(high) <= 1e-15:
        return 1.0
    if low > 0.0 or high < 0.0:
        raise InversionError(
            f"역함수 구간을 잡지 못했습니다: rho={rho!r}, target={target!r}, "
            f"range=[{target + low!r}, {target + high!r}]", index=index)
    return bisect(residual, 0.0, 1.0, xtol=INVERSION_XTOL, maxiter=200)


def inverse_step(model, s):
    """
    F 의 역사상

    현재 가격 p 가 곧 p^{t+1} 이므로 먼저 x^t 를 f_alpha 역함수로 구하고,
    그 x^t 로 p^t = p^{t+1} / (1 + g(x^t_i - <x^t>_i^c)) 를 복원한다.

    Args:
        model (ModelSpec): 모델
        s (MarketState): F 의 상(image)에 있는 상태

    Returns:
        MarketState: 이전 상태
    """
    _check_model_state(model, s.N)
    p = s.p.tolist()
    if model.variant == ALT2:
        total = p[0] + p[1]
        ratios = [2.0 * p[0] / total, 2.0 * p[1] / total]
    else:
        ratios = _competitor_ratios(p)
    previous_x = [invert_f_alpha(model.f, model.alpha, r, xi, index=i)
                  for i, (r, xi) in enumerate(zip(ratios, s.x.tolist()))]
    factors = _price_factors(model.g, previous_x)
    previous_p = [pi / factor for pi, factor in zip(p, factors)]
    return MarketState(np.array(previous_x), np.array(previous_p))


def project_to_skew(s):
    """(x, p) -> (x, rho), rho_i = p_i / p_N"""
    p = s.p
    return SkewState(s.x.copy(), p[:-1] / p[-1])


def lift_to_full(s, p_N=1.0):
    """(x, rho) -> (x, p), p_N 을 주어진 값으로 둔다"""
    return MarketState(s.x.copy(), np.append(s.rho * p_N, p_N))


def distance_to_fixed_set(s):
    """
    동기화 상태 집합까지의 거리: max_{i,j} max(|x_i - x_j|, |p_i - p_j|)

    Args:
        s (MarketState | SkewState): 상태 (축약 상태는 rho_N = 1 을 포함해 계산)

    Returns:
        float: 거리 (>= 0)
    """
    prices = s.p if isinstance(s, MarketState) else s.full_rho()
    return float(max(np.ptp(s.x), np.ptp(prices)))


def sample_state(rng, N, x_low=0.05, x_high=0.95, p_low=0.5, p_high=2.0):
    """
    시드 고정 난수 생성기로 균등 초기 상태 생성

    Args:
        rng (numpy.random.Generator): 난수 생성기
        N (int): 판매자 수

    Returns:
        MarketState: 초기 상태
    """
    x = rng.uniform(x_low, x_high, size=N)
    p = rng.uniform(p_low, p_high, size=N)
    return MarketState(x, p)

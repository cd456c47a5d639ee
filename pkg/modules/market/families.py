# modules/market/families.py
"""
사상족 f(rho, x), g(d) 정의와 검증

f 는 상대가격 rho 에 따라 고객 비율 x 를 갱신하는 사상, g 는 고객 비율 차이 d 에
따라 가격을 곱셈 갱신하는 사상이다. 모든 기술자(descriptor)는 불변 dataclass 이며
이름으로 커널을 고르므로 multiprocessing 으로 피클링할 수 있다.
"""
import math
from dataclasses import dataclass

import numpy as np

from ..analysis.report import AuditReport
from ..utils.errors import DomainError
from ..utils.logger import setup_logger

# f 사상족 종류
PIECEWISE_AFFINE = 'piecewise_affine'
SPEFAM_DEV = 'spefam_dev'
SMOOTH_C4 = 'smooth_c4'
SKEWED_QUADRATIC = 'skewed_quadratic'
F_KINDS = (PIECEWISE_AFFINE, SPEFAM_DEV, SMOOTH_C4, SKEWED_QUADRATIC)

# g 사상족 종류
LINEAR = 'linear'
QUADRATIC = 'quadratic'
G_KINDS = (LINEAR, QUADRATIC)

# c 커널 / b 커널 / 편차 커널 이름
EXP_ABS_LOG = 'exp_abs_log'
EXP_LOG_SQ = 'exp_log_sq'
INVERSE_POWER = 'inverse_power'
C_KERNELS = (EXP_ABS_LOG, EXP_LOG_SQ, INVERSE_POWER)

LOG_ODD = 'log_odd'
LINEAR_B = 'linear'
B_KERNELS = (LOG_ODD, LINEAR_B)

DEV_ZERO = 'zero'
DEV_SCALED_BOUND = 'scaled_bound'
DEV_KINDS = (DEV_ZERO, DEV_SCALED_BOUND)

# 허용 오차
TOL_EXACT = 1e-12
TOL_GRID = 1e-9

# 유한차분 스텝 (미분 차수별)
FD_STEPS = {1: 1e-4, 2: 1e-3, 3: 4e-3}
FD_STEP_X = 1e-2


# ---------------------------------------------------------------------------
# 커널
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CKernel:
    """
    수축 계수 c(rho) 커널 (u = ln rho 의 짝함수)

    Args:
        name (str): exp_abs_log | exp_log_sq | inverse_power
        power (float): inverse_power 의 지수 p (c = exp(-p|ln rho|))
    """
    name: str = EXP_ABS_LOG
    power: float = 1.0

    def __post_init__(self):
        if self.name not in C_KERNELS:
            raise DomainError(f"알 수 없는 c 커널: {self.name}")
        if self.name == INVERSE_POWER and not self.power > 0:
            raise DomainError(f"inverse_power 지수는 양수여야 합니다: {self.power}")

    def __call__(self, rho):
        u = math.log(rho)
        if self.name == EXP_LOG_SQ:
            return math.exp(-u * u)
        p = self.power if self.name == INVERSE_POWER else 1.0
        return math.exp(-p * abs(u))

    def derivative(self, rho):
        """c'(rho), rho = 1 에서는 오른쪽 미분"""
        u = math.log(rho)
        if self.name == EXP_LOG_SQ:
            return -2.0 * u * math.exp(-u * u) / rho
        p = self.power if self.name == INVERSE_POWER else 1.0
        sign = 1.0 if u >= 0 else -1.0
        return -p * sign * math.exp(-p * abs(u)) / rho

    @property
    def smooth_at_one(self):
        return self.name == EXP_LOG_SQ

    def center_derivatives(self):
        """
        rho = 1 에서의 c', c'', c''' (u 좌표 테일러 계수에서 변환)

        Returns:
            tuple: (c1, c2, c3)
        """
        if self.name == EXP_LOG_SQ:
            cu, cuu, cuuu = 0.0, -2.0, 0.0
        else:
            # 오른쪽 분기 값 (rho = 1 에서 매끄럽지 않음)
            p = self.power if self.name == INVERSE_POWER else 1.0
            cu, cuu, cuuu = -p, p * p, -p ** 3
        return cu, cuu - cu, cuuu - 3.0 * cuu + 2.0 * cu


@dataclass(frozen=True)
class BKernel:
    """
    매끄러운 사상족의 이동 항 b(rho), rho in [1, rho0]

    log_odd: b = k ln rho, k = (1 - c(rho0)) / (2 ln rho0)
    linear:  b = k (rho - 1), k = (1 - c(rho0)) / (2 (rho0 - 1))
    """
    name: str = LOG_ODD

    def __post_init__(self):
        if self.name not in B_KERNELS:
            raise DomainError(f"알 수 없는 b 커널: {self.name}")

    def slope(self, rho0, c_kernel):
        gap = (1.0 - c_kernel(rho0)) / 2.0
        if self.name == LOG_ODD:
            return gap / math.log(rho0)
        return gap / (rho0 - 1.0)

    def value(self, rho, rho0, c_kernel):
        k = self.slope(rho0, c_kernel)
        if self.name == LOG_ODD:
            return k * math.log(rho)
        return k * (rho - 1.0)

    def derivative(self, rho, rho0, c_kernel):
        k = self.slope(rho0, c_kernel)
        if self.name == LOG_ODD:
            return k / rho
        return k

    def center_derivatives(self, rho0, c_kernel):
        """rho = 1 에서의 (b', b'', b''')"""
        k = self.slope(rho0, c_kernel)
        if self.name == LOG_ODD:
            return k, -k, 2.0 * k
        return k, 0.0, 0.0


@dataclass(frozen=True)
class DevKernel:
    """
    SPEFAM 편차 f_dev(rho, x) >= 0

    zero: 0
    scaled_bound: scale * (1 - 1/rho) * x (rho >= 1), scale * (1 - rho) * x (rho <= 1)
    """
    name: str = DEV_ZERO
    scale: float = 0.0

    def __post_init__(self):
        if self.name not in DEV_KINDS:
            raise DomainError(f"알 수 없는 편차 커널: {self.name}")
        if not 0.0 <= self.scale <= 1.0:
            raise DomainError(f"편차 배율은 [0,1] 이어야 합니다: {self.scale}")

    def __call__(self, rho, x):
        if self.name == DEV_ZERO:
            return 0.0
        if rho >= 1.0:
            return self.scale * (1.0 - 1.0 / rho) * x
        return self.scale * (1.0 - rho) * x


# ---------------------------------------------------------------------------
# 사상족 기술자
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FMapFamily:
    """
    고객 비율 갱신 사상 f 의 기술자

    Args:
        kind (str): piecewise_affine | spefam_dev | smooth_c4 | skewed_quadratic
        c_kernel (CKernel): c(rho) (spefam_dev 제외)
        f_dev (DevKernel): 편차 (spefam_dev 전용)
        rho0 (float): 매끄러운 영역의 바깥 경계 (> 1)
        x0 (float): x 에 대해 아핀인 영역의 안쪽 경계, (0, 1/2)
        b_kernel (BKernel): b(rho)
        gamma (float): skewed_quadratic 의 곡률/포락선 매개변수, (0, 1/2)
    """
    kind: str = PIECEWISE_AFFINE
    c_kernel: CKernel = None
    f_dev: DevKernel = None
    rho0: float = 3.0
    x0: float = 1.0 / 3.0
    b_kernel: BKernel = None
    gamma: float = 0.3

    def __post_init__(self):
        if self.kind not in F_KINDS:
            raise DomainError(f"알 수 없는 f 사상족: {self.kind}")
        if self.kind == SPEFAM_DEV:
            if self.f_dev is None:
                object.__setattr__(self, 'f_dev', DevKernel())
        elif self.c_kernel is None:
            default = EXP_LOG_SQ if self.kind == SMOOTH_C4 else EXP_ABS_LOG
            object.__setattr__(self, 'c_kernel', CKernel(default))
        if self.kind == SMOOTH_C4:
            if self.b_kernel is None:
                object.__setattr__(self, 'b_kernel', BKernel())
            if not (math.isfinite(self.rho0) and self.rho0 > 1.0):
                raise DomainError(f"rho0 는 1 보다 커야 합니다: {self.rho0}")
            if not 0.0 < self.x0 < 0.5:
                raise DomainError(f"x0 는 (0, 1/2) 에 있어야 합니다: {self.x0}")
        if self.kind == SKEWED_QUADRATIC and not 0.0 < self.gamma < 0.5:
            raise DomainError(f"gamma 는 (0, 1/2) 에 있어야 합니다: {self.gamma}")

    # 생성 도우미
    @classmethod
    def piecewise_affine(cls, c_kernel=EXP_ABS_LOG, power=1.0):
        return cls(kind=PIECEWISE_AFFINE, c_kernel=CKernel(c_kernel, power))

    @classmethod
    def spefam(cls, dev_kind=DEV_ZERO, dev_scale=0.0):
        return cls(kind=SPEFAM_DEV, f_dev=DevKernel(dev_kind, dev_scale))

    @classmethod
    def smooth_c4(cls, rho0=3.0, x0=1.0 / 3.0, c_kernel=EXP_LOG_SQ, b_kernel=LOG_ODD):
        return cls(kind=SMOOTH_C4, c_kernel=CKernel(c_kernel), rho0=rho0, x0=x0,
                   b_kernel=BKernel(b_kernel))

    @classmethod
    def skewed_quadratic(cls, gamma=0.3, c_kernel=EXP_ABS_LOG, power=1.0):
        return cls(kind=SKEWED_QUADRATIC, c_kernel=CKernel(c_kernel, power), gamma=gamma)

    def c(self, rho):
        """c(rho); spefam_dev 는 1/rho 아핀 기저를 쓴다"""
        if self.kind == SPEFAM_DEV:
            return math.exp(-abs(math.log(rho)))
        return self.c_kernel(rho)

    def to_flat(self):
        """평문 설정 키로 직렬화"""
        flat = {'f.kind': self.kind}
        if self.kind == SPEFAM_DEV:
            flat['f.dev_kind'] = self.f_dev.name
            flat['f.dev_scale'] = self.f_dev.scale
            return flat
        flat['f.c_kernel'] = self.c_kernel.name
        if self.c_kernel.name == INVERSE_POWER:
            flat['f.c_power'] = self.c_kernel.power
        if self.kind == SMOOTH_C4:
            flat['f.rho0'] = self.rho0
            flat['f.x0'] = self.x0
            flat['f.b_kernel'] = self.b_kernel.name
        if self.kind == SKEWED_QUADRATIC:
            flat['f.gamma'] = self.gamma
        return flat


@dataclass(frozen=True)
class GMapFamily:
    """
    가격 갱신 사상 g 의 기술자: g(d) = a d (+ b d^2)

    Args:
        kind (str): linear | quadratic
        a (float): 1차 계수, (0, 1]
        b (float): 2차 계수 (quadratic 전용)
    """
    kind: str = LINEAR
    a: float = 0.5
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in G_KINDS:
            raise DomainError(f"알 수 없는 g 사상족: {self.kind}")
        if not (math.isfinite(self.a) and 0.0 <= self.a <= 1.0):
            raise DomainError(f"g.a 는 [0, 1] 이어야 합니다: {self.a}")
        if self.kind == LINEAR and self.b != 0.0:
            object.__setattr__(self, 'b', 0.0)
        if not math.isfinite(self.b):
            raise DomainError(f"g.b 가 유한하지 않습니다: {self.b}")

    @classmethod
    def linear(cls, a=0.5):
        return cls(kind=LINEAR, a=a)

    @classmethod
    def quadratic(cls, a=0.5, b=-0.1):
        return cls(kind=QUADRATIC, a=a, b=b)

    def to_flat(self):
        flat = {'g.kind': self.kind, 'g.a': self.a}
        if self.kind == QUADRATIC:
            flat['g.b'] = self.b
        return flat


def f_family_from_flat(flat):
    """
    평문 설정 dict 에서 FMapFamily 생성

    Args:
        flat (dict): 'f.kind', 'f.rho0' 등의 키를 가진 dict

    Returns:
        FMapFamily: 생성된 기술자
    """
    kind = flat.get('f.kind', PIECEWISE_AFFINE)
    if kind == SPEFAM_DEV:
        return FMapFamily.spefam(flat.get('f.dev_kind', DEV_ZERO), float(flat.get('f.dev_scale', 0.0)))
    default_c = EXP_LOG_SQ if kind == SMOOTH_C4 else EXP_ABS_LOG
    c_kernel = CKernel(flat.get('f.c_kernel', default_c), float(flat.get('f.c_power', 1.0)))
    if kind == SMOOTH_C4:
        return FMapFamily(kind=kind, c_kernel=c_kernel,
                          rho0=float(flat.get('f.rho0', 3.0)),
                          x0=float(flat.get('f.x0', 1.0 / 3.0)),
                          b_kernel=BKernel(flat.get('f.b_kernel', LOG_ODD)))
    if kind == SKEWED_QUADRATIC:
        return FMapFamily(kind=kind, c_kernel=c_kernel, gamma=float(flat.get('f.gamma', 0.3)))
    return FMapFamily(kind=kind, c_kernel=c_kernel)


def g_family_from_flat(flat):
    """평문 설정 dict 에서 GMapFamily 생성"""
    kind = flat.get('g.kind', LINEAR)
    return GMapFamily(kind=kind, a=float(flat.get('g.a', 0.5)), b=float(flat.get('g.b', 0.0)))


# ---------------------------------------------------------------------------
# 평가
# ---------------------------------------------------------------------------

def _check_rho(rho):
    if not (isinstance(rho, (int, float, np.floating)) and math.isfinite(rho) and rho > 0.0):
        raise DomainError(f"rho 는 유한한 양수여야 합니다: {rho}")


def _check_x(x):
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x 는 [0, 1] 에 있어야 합니다: {x}")


def _smooth_upper(fam, rho, x):
    """매끄러운 사상족의 rho > 1 분기 값"""
    c = fam.c_kernel(rho)
    if rho >= fam.rho0:
        return c * x
    b = fam.b_kernel.value(rho, fam.rho0, fam.c_kernel)
    if x >= fam.x0:
        return 0.5 - b + c * (x - 0.5)
    a0, m0 = _hermite_ends(fam, b, c)
    x0 = fam.x0
    s = x / x0
    s2 = s * s
    s3 = s2 * s
    h10 = s3 - 2.0 * s2 + s
    h01 = -2.0 * s3 + 3.0 * s2
    h11 = s3 - s2
    return h10 * x0 * m0 + h01 * a0 + h11 * x0 * c


def _smooth_upper_dx(fam, rho, x):
    c = fam.c_kernel(rho)
    if rho >= fam.rho0 or x >= fam.x0:
        return c
    b = fam.b_kernel.value(rho, fam.rho0, fam.c_kernel)
    a0, m0 = _hermite_ends(fam, b, c)
    x0 = fam.x0
    s = x / x0
    d10 = 3.0 * s * s - 4.0 * s + 1.0
    d01 = -6.0 * s * s + 6.0 * s
    d11 = 3.0 * s * s - 2.0 * s
    return d10 * m0 + d01 * a0 / x0 + d11 * c


def _hermite_ends(fam, b, c):
    """
    [0, x0] 보간 구간의 끝값과 진입 기울기

    진입 기울기는 2*delta - c (도함수가 선형이 되는 값)에서 시작해
    Fritsch-Carlson 단조 영역 alpha >= 0, alpha^2 + beta^2 <= 9 로 자른다.
    """
    a0 = 0.5 - b + c * (fam.x0 - 0.5)
    delta = a0 / fam.x0
    m0 = max(2.0 * delta - c, 0.0)
    limit = math.sqrt(max(9.0 * delta * delta - c * c, 0.0))
    return a0, min(m0, limit)


def eval_f(fam, rho, x):
    """
    f(rho, x) 계산

    Args:
        fam (FMapFamily): 사상족
        rho (float): 상대가격 (> 0)
        x (float): 고객 비율, [0, 1]

    Returns:
        float: f(rho, x) in [0, 1]
    """
    _check_rho(rho)
    _check_x(x)
    if rho == 1.0:
        return x
    kind = fam.kind
    if kind == PIECEWISE_AFFINE:
        c = fam.c_kernel(rho)
        return c * x if rho > 1.0 else 1.0 - c * (1.0 - x)
    if kind == SPEFAM_DEV:
        if rho > 1.0:
            return x / rho + fam.f_dev(rho, x)
        return 1.0 - rho * (1.0 - x) - fam.f_dev(rho, 1.0 - x)
    if kind == SMOOTH_C4:
        if rho > 1.0:
            return _smooth_upper(fam, rho, x)
        return 1.0 - _smooth_upper(fam, 1.0 / rho, 1.0 - x)
    # skewed_quadratic
    c = fam.c_kernel(rho)
    if rho > 1.0:
        return c * x + fam.gamma * (1.0 - c) * x * x
    y = 1.0 - x
    return 1.0 - c * y - 0.5 * fam.gamma * (1.0 - c) * y * y


def eval_f_dx(fam, rho, x):
    """
    x 에 대한 편미분 f'_x(rho, x)

    spefam_dev 는 편차 커널이 임의이므로 중심차분(경계에서는 한쪽 차분)을 쓴다.
    """
    _check_rho(rho)
    _check_x(x)
    if rho == 1.0:
        return 1.0
    kind = fam.kind
    if kind == PIECEWISE_AFFINE:
        return fam.c_kernel(rho)
    if kind == SMOOTH_C4:
        if rho > 1.0:
            return _smooth_upper_dx(fam, rho, x)
        return _smooth_upper_dx(fam, 1.0 / rho, 1.0 - x)
    if kind == SKEWED_QUADRATIC:
        c = fam.c_kernel(rho)
        if rho > 1.0:
            return c + 2.0 * fam.gamma * (1.0 - c) * x
        return c + fam.gamma * (1.0 - c) * (1.0 - x)
    h = 1e-6
    lo, hi = max(x - h, 0.0), min(x + h, 1.0)
    return (eval_f(fam, rho, hi) - eval_f(fam, rho, lo)) / (hi - lo)


def eval_f_alpha(fam, alpha, rho, x):
    """
    충성도 혼합 사상 f_alpha(rho, x) = alpha x + (1 - alpha) f(rho, x)

    Args:
        fam (FMapFamily): 사상족
        alpha (float): 충성도, [0, 1)
        rho (float): 상대가격
        x (float): 고객 비율

    Returns:
        float: f_alpha(rho, x)
    """
    if not 0.0 <= alpha < 1.0:
        raise DomainError(f"alpha 는 [0, 1) 에 있어야 합니다: {alpha}")
    return alpha * x + (1.0 - alpha) * eval_f(fam, rho, x)


def iterate_f_alpha(fam, alpha, rho, x, t):
    """rho 고정 상태에서 x 자리로 f_alpha 를 t 번 합성"""
    if int(t) != t or t < 1:
        raise DomainError(f"반복 횟수 t 는 1 이상의 정수여야 합니다: {t}")
    value = x
    for _ in range(int(t)):
        value = eval_f_alpha(fam, alpha, rho, value)
    return value


def eval_g(gfam, d):
    """
    g(d) = a d (+ b d^2)

    Args:
        gfam (GMapFamily): g 사상족
        d (float): 고객 비율 차이, [-1, 1]

    Returns:
        float: g(d) (> -1 이 기대됨)
    """
    if not -1.0 <= d <= 1.0:
        raise DomainError(f"d 는 [-1, 1] 에 있어야 합니다: {d}")
    return gfam.a * d + gfam.b * d * d


# ---------------------------------------------------------------------------
# 고정점 중심 미분
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DerivativeBundle:
    """
    고정점 (rho, x) = (1, 1/2) 에서의 f 편미분과 g 의 0 에서의 미분

    f 부분만 또는 g 부분만 채운 뒤 merge 로 합친다.
    K_g = 4 g_p^3 - 6 g_p g_pp + 2 g_ppp
    """
    f_p: float = None
    f_rho2: float = None
    f_rho3: float = None
    f_rho2x: float = None
    f_rhox: float = None
    f_rhox2: float = None
    g_p: float = None
    g_pp: float = None
    g_ppp: float = None
    K_g: float = None
    smooth: bool = True
    source: str = 'analytic'

    def merge(self, other):
        values = {}
        for name in self.__dataclass_fields__:
            mine, theirs = getattr(self, name), getattr(other, name)
            values[name] = mine if mine is not None else theirs
        values['smooth'] = self.smooth and other.smooth
        values['source'] = self.source if self.source == other.source else f"{self.source}+{other.source}"
        return DerivativeBundle(**values)

    def to_dict(self):
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


def _richardson(stencil, h):
    coarse = stencil(h)
    fine = stencil(h / 2.0)
    return (4.0 * fine - coarse) / 3.0


def central_difference(func, x0, order, h=None):
    """
    Richardson 보정 중심차분 (1~3 차)

    Args:
        func (callable): 스칼라 함수
        x0 (float): 미분 위치
        order (int): 미분 차수
        h (float): 스텝 (None 이면 차수별 기본값)

    Returns:
        float: 미분 추정값
    """
    h = FD_STEPS[order] if h is None else h
    if order == 1:
        def stencil(step):
            return (func(x0 + step) - func(x0 - step)) / (2.0 * step)
    elif order == 2:
        def stencil(step):
            return (func(x0 + step) - 2.0 * func(x0) + func(x0 - step)) / (step * step)
    elif order == 3:
        def stencil(step):
            return (func(x0 + 2 * step) - 2.0 * func(x0 + step)
                    + 2.0 * func(x0 - step) - func(x0 - 2 * step)) / (2.0 * step ** 3)
    else:
        raise DomainError(f"지원하지 않는 미분 차수: {order}")
    return _richardson(stencil, h)


def _fd_center_bundle(fam, x=0.5):
    """유한차분으로 f 의 중심 미분 추정 (한쪽 미분 비교로 매끄러움 판정)"""
    def along_rho(xx):
        return lambda r: eval_f(fam, r, xx)

    def rho_derivative(order):
        return lambda xx: central_difference(along_rho(xx), 1.0, order)

    f_p = central_difference(along_rho(x), 1.0, 1)
    f_rho2 = central_difference(along_rho(x), 1.0, 2)
    f_rho3 = central_difference(along_rho(x), 1.0, 3)
    f_rhox = central_difference(rho_derivative(1), x, 1, FD_STEP_X)
    f_rho2x = central_difference(rho_derivative(2), x, 1, FD_STEP_X)
    f_rhox2 = central_difference(rho_derivative(1), x, 2, FD_STEP_X)

    # 왼쪽/오른쪽 rho 미분이 다르면 rho = 1 에서 매끄럽지 않음
    h = FD_STEPS[1]
    smooth = True
    for xx in (x - FD_STEP_X, x, x + FD_STEP_X):
        right = (eval_f(fam, 1.0 + h, xx) - xx) / h
        left = (xx - eval_f(fam, 1.0 - h, xx)) / h
        if abs(right - left) > 1e-2 * max(1.0, abs(right)):
            smooth = False
    return DerivativeBundle(f_p=f_p, f_rho2=f_rho2, f_rho3=f_rho3, f_rho2x=f_rho2x,
                            f_rhox=f_rhox, f_rhox2=f_rhox2, smooth=smooth,
                            source='finite_difference')


def f_center_derivatives(fam, method='analytic'):
    """
    (rho, x) = (1, 1/2) 에서 f 의 편미분 묶음 (f 부분)

    smooth_c4 는 b/c 커널 미분으로 정확히 계산하고, 그 외 사상족이나
    method='finite_difference' 요청은 Richardson 중심차분으로 추정한다.
    rho = 1 에서 매끄럽지 않으면 smooth=False 로 보고한다.

    Args:
        fam (FMapFamily): 사상족
        method (str): 'analytic' | 'finite_difference'

    Returns:
        DerivativeBundle: f 부분이 채워진 묶음
    """
    logger = setup_logger()
    if method == 'analytic' and fam.kind == SMOOTH_C4:
        b1, b2, b3 = fam.b_kernel.center_derivatives(fam.rho0, fam.c_kernel)
        c1, c2, _ = fam.c_kernel.center_derivatives()
        smooth = fam.c_kernel.smooth_at_one and fam.b_kernel.name == LOG_ODD
        if not smooth:
            logger.warning("b/c 커널 조합이 rho = 1 에서 C4 가 아닙니다 (오른쪽 분기 값 사용)")
        return DerivativeBundle(f_p=-b1, f_rho2=-b2, f_rho3=-b3, f_rho2x=c2,
                                f_rhox=c1, f_rhox2=0.0, smooth=smooth, source='analytic')
    if method == 'analytic':
        logger.warning(f"'{fam.kind}' 사상족은 해석적 중심 미분이 없어 유한차분으로 대체합니다")
    bundle = _fd_center_bundle(fam)
    if not bundle.smooth:
        logger.warning(f"'{fam.kind}' 사상족은 rho = 1 에서 미분 가능하지 않습니다 (non-smooth)")
    return bundle


def g_center_derivatives(gfam):
    """
    g 의 0 에서의 미분 묶음 (g 부분)

    Args:
        gfam (GMapFamily): g 사상족

    Returns:
        DerivativeBundle: g_p, g_pp, g_ppp, K_g 가 채워진 묶음
    """
    g_p = gfam.a
    g_pp = 2.0 * gfam.b
    g_ppp = 0.0
    K_g = 4.0 * g_p ** 3 - 6.0 * g_p * g_pp + 2.0 * g_ppp
    return DerivativeBundle(g_p=g_p, g_pp=g_pp, g_ppp=g_ppp, K_g=K_g)


def derivative_bundle(fam, gfam, method='analytic'):
    """f 부분과 g 부분을 합친 전체 묶음"""
    return f_center_derivatives(fam, method).merge(g_center_derivatives(gfam))


# ---------------------------------------------------------------------------
# 상수
# ---------------------------------------------------------------------------

def compute_S_g(gfam):
    """
    S_g = sup (1 + g(x)) / (1 + g(y)), 단조 증가 g 에서는 끝점 비율

    Returns:
        float: S_g (g(-1) <= -1 이면 inf)
    """
    low = 1.0 + eval_g(gfam, -1.0)
    if low <= 0.0:
        return math.inf
    return (1.0 + eval_g(gfam, 1.0)) / low


def compute_C_N(N, rho):
    """
    편차 상대 크기의 상한 C_N(rho)

    Args:
        N (int): 판매자 수 (rho > 1 분기는 N >= 5, rho < 1 분기는 N > 2)
        rho (float): (0, N - 1)

    Returns:
        float: C_N(rho) (rho = 1 이면 0)
    """
    if not (math.isfinite(rho) and 0.0 < rho < N - 1):
        raise DomainError(f"rho 는 (0, N-1) = (0, {N - 1}) 에 있어야 합니다: {rho}")
    if N < 3:
        raise DomainError(f"C_N 은 N > 2 에서만 정의됩니다: N={N}")
    if rho == 1.0:
        return 0.0
    if rho < 1.0:
        return min(1.0 - rho,
                   (1.0 - rho) ** 2 * (N - 2) / (N - 1 - (N - 2) * rho))
    if N < 5:
        raise DomainError(f"rho > 1 분기의 C_N 은 N >= 5 에서만 정의됩니다: N={N}")
    terms = [
        1.0 - 1.0 / rho,
        (N - 2) * (rho - 1.0) / (rho * (1.0 + (N - 2) * rho)),
        ((N - rho) * rho - (N - 1)) / ((N - 1) * rho),
    ]
    if rho < N - 2:
        terms.append((rho - 1.0) * (1.0 / rho - 1.0 / (N - 2)))
    return min(terms)


def quadratic_hg2_window(a):
    """Hg1 은 만족하지만 Hg2 는 깨지는 2차 계수 구간 (a^2/2, a/2)"""
    return a * a / 2.0, a / 2.0


# ---------------------------------------------------------------------------
# 검증
# ---------------------------------------------------------------------------

def _rho_grid(fam, grid):
    span = max(fam.rho0 * 1.5 if fam.kind == SMOOTH_C4 else 4.0, 4.0)
    # 짝수 개의 대칭 로그 격자: 역수 쌍으로 구성되고 1 은 포함되지 않는다
    return np.geomspace(1.0 / span, span, 2 * grid)


def validate_f(fam, N, grid=60):
    """
    f 사상족 가정(Hf1-3) 격자 검증

    실패는 예외가 아니라 보고서 항목으로 기록된다.

    Args:
        fam (FMapFamily): 사상족
        N (int): 판매자 수 (SPEFAM 편차 한도에 사용)
        grid (int): 축당 격자 점 수 (>= 10)

    Returns:
        AuditReport: 검증 결과
    """
    logger = setup_logger()
    if grid < 10:
        raise DomainError(f"격자는 축당 10 점 이상이어야 합니다: {grid}")

    report = AuditReport()
    rhos = _rho_grid(fam, grid)
    xs = np.linspace(0.0, 1.0, grid + 1)
    values = np.array([[eval_f(fam, float(r), float(x)) for x in xs] for r in rhos])

    # 값 범위
    report.add_check('f_range', values.min() >= 0.0 and values.max() <= 1.0,
                     measured=max(-values.min(), values.max() - 1.0, 0.0),
                     tolerance=0.0, anchor='f([0,1]) in [0,1]')

    # f(1, .) = Id
    identity = max(abs(eval_f(fam, 1.0, float(x)) - x) for x in xs)
    report.add_check('identity_at_one', identity == 0.0, measured=identity,
                     tolerance=0.0, anchor='Hf2 f(1,.)=Id')

    # Hf1: x 에 대한 증가, 경계값, 기울기 < 1
    dx_min = float(np.diff(values, axis=1).min())
    report.add_check('hf1_increasing_x', dx_min >= -TOL_EXACT, measured=dx_min,
                     tolerance=TOL_EXACT, anchor='Hf1')
    upper = rhos > 1.0
    boundary = max(float(np.abs(values[upper, 0]).max()),
                   float(np.abs(values[~upper, -1] - 1.0).max()))
    report.add_check('hf1_boundary_values', boundary <= TOL_EXACT, measured=boundary,
                     tolerance=TOL_EXACT, anchor='Hf1 f(rho,0)=0 (rho>=1), f(rho,1)=1 (rho<=1)')
    slope = max(eval_f_dx(fam, float(r), float(x)) for r in rhos for x in xs)
    report.add_check('hf1_slope_below_one', slope < 1.0, measured=slope,
                     tolerance=0.0, anchor='Hf1 sup f_x < 1 (rho != 1)')

    # Hf2: rho 에 대한 감소
    drho_max = float(np.diff(values, axis=0).max())
    report.add_check('hf2_decreasing_rho', drho_max <= TOL_EXACT, measured=drho_max,
                     tolerance=TOL_EXACT, anchor='Hf2')

    # Hf3: 대칭 잔차
    residual = 0.0
    for r in rhos:
        for x in xs:
            residual = max(residual, abs(eval_f(fam, 1.0 / float(r), float(x)) - 1.0
                                         + eval_f(fam, float(r), 1.0 - float(x))))
    report.add_check('hf3_symmetry', residual <= TOL_EXACT, measured=residual,
                     tolerance=TOL_EXACT, anchor='Hf3')
    report.set_constant('symmetry_residual', residual)

    if fam.kind != SPEFAM_DEV:
        _validate_c_kernel(fam, rhos, report)
    if fam.kind == SMOOTH_C4:
        _validate_b_kernel(fam, grid, report)
    if fam.kind == SPEFAM_DEV:
        _validate_deviation(fam, N, rhos, xs, report)

    logger.info(f"f 사상족 '{fam.kind}' 검증 완료: {'통과' if report.passed else '실패'}")
    return report


def _validate_c_kernel(fam, rhos, report):
    kernel = fam.c_kernel
    sym = max(abs(kernel(1.0 / float(r)) - kernel(float(r))) for r in rhos)
    report.add_check('c_symmetric', sym <= TOL_EXACT, measured=sym,
                     tolerance=TOL_EXACT, anchor='c(1/rho)=c(rho)')
    report.add_check('c_at_one', kernel(1.0) == 1.0, measured=kernel(1.0),
                     tolerance=0.0, anchor='c(1)=1')
    upper = np.array([kernel(float(r)) for r in rhos if r > 1.0])
    in_range = bool(np.all((upper > 0.0) & (upper < 1.0)))
    decreasing = bool(np.all(np.diff(upper) < 0.0))
    report.add_check('c_in_unit_interval', in_range, measured=float(upper.min()),
                     anchor='c(rho) in (0,1) for rho>1')
    report.add_check('c_strictly_decreasing', decreasing,
                     measured=float(np.diff(upper).max()), anchor='c decreasing on [1,inf)')


def _validate_b_kernel(fam, grid, report):
    b_kernel, c_kernel, rho0, x0 = fam.b_kernel, fam.c_kernel, fam.rho0, fam.x0
    rhos = np.linspace(1.0, rho0, 4 * grid)
    b_values = np.array([b_kernel.value(float(r), rho0, c_kernel) for r in rhos])
    target = (1.0 - c_kernel(rho0)) / 2.0
    report.add_check('b_at_one', abs(b_values[0]) <= TOL_EXACT, measured=b_values[0],
                     tolerance=TOL_EXACT, anchor='b(1)=0')
    b1 = b_kernel.derivative(1.0, rho0, c_kernel)
    report.add_check('b_slope_at_one', b1 > 0.0, measured=b1, anchor="b'(1)>0")
    report.add_check('b_at_rho0', abs(b_values[-1] - target) <= TOL_EXACT,
                     measured=abs(b_values[-1] - target), tolerance=TOL_EXACT,
                     anchor='b(rho0)=(1-c(rho0))/2')
    report.add_check('b_increasing', bool(np.all(np.diff(b_values) > 0.0)),
                     measured=float(np.diff(b_values).min()), anchor='b increasing')
    slack = min(b_kernel.derivative(float(r), rho0, c_kernel) + c_kernel.derivative(float(r)) * x0
                for r in rhos)
    report.add_check('b_c_slope_condition', slack >= -TOL_EXACT, measured=slack,
                     tolerance=TOL_EXACT, anchor="b'+c'x0>=0 on [1,rho0]")


def _validate_deviation(fam, N, rhos, xs, report):
    worst = 0.0
    negative = 0.0
    for r in rhos:
        r = float(r)
        bound = (1.0 - 1.0 / r) if r >= 1.0 else (1.0 - r)
        for x in xs:
            dev = fam.f_dev(r, float(x))
            negative = min(negative, dev)
            worst = max(worst, dev - bound * x)
    report.add_check('spefam_deviation_bounds', negative >= 0.0 and worst <= TOL_EXACT,
                     measured=max(worst, -negative), tolerance=TOL_EXACT,
                     anchor='0 <= f_dev <= (1-1/rho)x | (1-rho)x')

    if N <= 2:
        report.not_applicable('spefam_deviation_vs_C_N', anchor='f_dev/x < C_N(rho)',
                              detail='N=2 에서는 C_N 조건이 필요 없음')
        return
    if N in (3, 4):
        peak = max(fam.f_dev(float(r), float(x)) for r in rhos for x in xs)
        report.add_check('spefam_zero_deviation', peak == 0.0, measured=peak,
                         anchor='N in {3,4}: f_dev = 0')
        return
    excess = -math.inf
    probe = np.linspace(1e-3, N - 1 - 1e-3, 8 * len(rhos) // 2)
    for r in probe:
        r = float(r)
        if abs(r - 1.0) < 1e-9:
            continue
        ratio = fam.f_dev(r, 1.0)
        excess = max(excess, ratio - compute_C_N(N, r))
    report.add_check('spefam_deviation_vs_C_N', excess < 0.0 or fam.f_dev.name == DEV_ZERO,
                     measured=excess, anchor='f_dev/x < C_N(rho)')


def validate_g(gfam, N, samples=100000, seed=0):
    """
    g 사상족 가정(Hg1-3) 검증

    Hg2 는 N = 2 에서 해석적으로 (g(d) + g(-d) = 2 b d^2 <= 0 iff b <= 0),
    N > 2 에서는 시드 고정 몬테카를로 표본으로 확인한다.

    Args:
        gfam (GMapFamily): g 사상족
        N (int): 판매자 수
        samples (int): Hg2 표본 수
        seed (int): 난수 시드

    Returns:
        AuditReport: 검증 결과
    """
    logger = setup_logger()
    report = AuditReport()

    ds = np.linspace(-1.0, 1.0, 2001)[1:]
    values = gfam.a * ds + gfam.b * ds * ds
    report.add_check('hg1_zero_at_zero', eval_g(gfam, 0.0) == 0.0, measured=eval_g(gfam, 0.0),
                     anchor='Hg1 g(0)=0')
    report.add_check('hg1_increasing', bool(np.all(np.diff(values) > 0.0)),
                     measured=float(np.diff(values).min()), anchor='Hg1 increasing on (-1,1]')
    report.add_check('hg1_above_minus_one', bool(np.all(values > -1.0)),
                     measured=float(values.min()), anchor='Hg1 g > -1 on (-1,1]')

    if N == 2:
        worst = 2.0 * gfam.b
        report.add_check('hg2', gfam.b <= 0.0, measured=worst, tolerance=0.0,
                         anchor='Hg2 (N=2: b <= 0)')
    else:
        rng = np.random.default_rng(seed)
        x = rng.uniform(0.0, 1.0, size=(samples, N))
        total = x.sum(axis=1, keepdims=True)
        d = x - (total - x) / (N - 1)
        sums = (gfam.a * d + gfam.b * d * d).sum(axis=1)
        worst = float(sums.max())
        report.add_check('hg2', worst <= TOL_EXACT, measured=worst, tolerance=TOL_EXACT,
                         anchor=f'Hg2 (Monte-Carlo, {samples} draws)')

    s_g = compute_S_g(gfam)
    report.add_check('hg3', math.isfinite(s_g), measured=s_g, anchor='Hg3 S_g < inf')
    report.set_constant('S_g', s_g)

    logger.info(f"g 사상족 '{gfam.kind}' (a={gfam.a}, b={gfam.b}) 검증 완료")
    return report


def validate_sandwich(fam, gamma, grid=60):
    """
    비대칭 경계 가정 검증

    f'_x(rho, 0) = f'_x(1/rho, 1) 이고, rho >= 1 에서
    c x <= f <= c x + gamma (1 - c) (c = f'_x(rho, 0)),
    rho <= 1 에서 1 - c(1-x) - gamma(1-c) <= f <= 1 - c(1-x) (c = f'_x(rho, 1)).

    Args:
        fam (FMapFamily): 사상족
        gamma (float): 포락선 매개변수, (0, 1)
        grid (int): 축당 격자 점 수

    Returns:
        AuditReport: 검증 결과
    """
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma 는 (0, 1) 에 있어야 합니다: {gamma}")
    report = AuditReport()
    rhos = _rho_grid(fam, grid)
    xs = np.linspace(0.0, 1.0, grid + 1)

    # 기울기 일치는 rho >= 1 쪽에서만 요구된다
    mismatch = max(abs(eval_f_dx(fam, float(r), 0.0) - eval_f_dx(fam, 1.0 / float(r), 1.0))
                   for r in rhos if r >= 1.0)
    report.add_check('sandwich_slope_match', mismatch <= TOL_EXACT, measured=mismatch,
                     tolerance=TOL_EXACT, anchor="f'_x(rho,0)=f'_x(1/rho,1)")

    violation = 0.0
    for r in rhos:
        r = float(r)
        if r >= 1.0:
            c = eval_f_dx(fam, r, 0.0)
            for x in xs:
                value = eval_f(fam, r, float(x))
                violation = max(violation, c * x - value, value - c * x - gamma * (1.0 - c))
        else:
            c = eval_f_dx(fam, r, 1.0)
            for x in xs:
                value = eval_f(fam, r, float(x))
                ceiling = 1.0 - c * (1.0 - x)
                violation = max(violation, value - ceiling, ceiling - gamma * (1.0 - c) - value)
    report.add_check('sandwich_envelopes', violation <= TOL_EXACT, measured=violation,
                     tolerance=TOL_EXACT, anchor='affine envelopes with gamma')
    return report


# modules/analysis/stability.py
"""
N = 2 대칭 고정점 (1/2, 1/2, 1) 의 안정성 분석

(mu, Delta, eps) = ((x1+x2)/2, (x1-x2)/2, ln rho1) 좌표에서 횡단 야코비안,
고유값, 회전각 theta, 3차 정규형 계수 c2 와 안정성 여유 Re(e^{-i theta} c2) 를 계산한다.
"""
import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .report import AuditReport
from ..market.dynamics import SkewState, skew_step_lists
from ..market.families import (
    SMOOTH_C4, central_difference, derivative_bundle, eval_f, validate_f,
)
from ..market.orbit import simulate_skew
from ..utils.errors import ClassificationError, DomainError, NumericError
from ..utils.logger import setup_logger

PARABOLIC = 'parabolic'
ELLIPTIC = 'elliptic'
HYPERBOLIC = 'hyperbolic'

STABLE = 'stable'
UNSTABLE = 'unstable'
INCONCLUSIVE = 'inconclusive'

FIXED_MU = 0.5
DERIV_TOL = 1e-6
# 유한차분 미분은 비매끄러운 rho = 1 에서 O(h) 편향이 있어 |u| 가 이보다 작으면 포물형으로 본다
FD_PARABOLIC_TOL = 1e-4


def _require_two(model):
    if model.N != 2:
        raise DomainError(f"안정성 분석은 N = 2 에서만 정의됩니다: N={model.N}")


def f_rho_at(fam, x):
    """
    f'_rho(1, x)

    smooth_c4 는 아핀 영역 [x0, 1-x0] 에서 -b'(1) + c'(1)(x - 1/2),
    그 외 사상족은 중심차분 추정값이다.
    """
    if fam.kind == SMOOTH_C4:
        if not fam.x0 <= x <= 1.0 - fam.x0:
            raise DomainError(f"x={x} 가 매끄러운 영역 [{fam.x0}, {1.0 - fam.x0}] 밖입니다")
        b1, _, _ = fam.b_kernel.center_derivatives(fam.rho0, fam.c_kernel)
        c1, _, _ = fam.c_kernel.center_derivatives()
        return -b1 + c1 * (x - 0.5)
    if not 0.0 < x < 1.0:
        raise DomainError(f"x 는 (0, 1) 에 있어야 합니다: {x}")
    return central_difference(lambda r: eval_f(fam, r, x), 1.0, 1)


def parabolic_tolerance(fam):
    return 0.0 if fam.kind == SMOOTH_C4 else FD_PARABOLIC_TOL


# ---------------------------------------------------------------------------
# 선형화
# ---------------------------------------------------------------------------

def jacobian_skew(model, x=FIXED_MU):
    """
    (mu, Delta, eps) 좌표의 F_skew 야코비안

    Args:
        model (ModelSpec): N = 2 모델
        x (float): 동기화 점의 고객 비율

    Returns:
        numpy.ndarray: 3x3 행렬
    """
    _require_two(model)
    f_p = f_rho_at(model.f, x)
    g_p = model.g.a
    coupling = (1.0 - model.alpha) * f_p
    return np.array([
        [1.0, 0.0, 0.0],
        [0.0, 1.0 + 4.0 * coupling * g_p, coupling],
        [0.0, 4.0 * g_p, 1.0],
    ])


def jacobian_skew_original(model, x=FIXED_MU):
    """(x1, x2, eps = ln rho1) 좌표의 야코비안, (1, 1, 0) 은 고유값 1 의 고유벡터"""
    _require_two(model)
    f_p = f_rho_at(model.f, x)
    g_p = model.g.a
    coupling = (1.0 - model.alpha) * f_p
    u = coupling * g_p
    return np.array([
        [1.0 + 2.0 * u, -2.0 * u, coupling],
        [-2.0 * u, 1.0 + 2.0 * u, -coupling],
        [2.0 * g_p, -2.0 * g_p, 1.0],
    ])


def classify(u, tol=0.0):
    """u = (1-alpha) f_p g_p 로 고정점 분류"""
    if abs(u) <= tol:
        return PARABOLIC
    if -1.0 <= u < 0.0:
        return ELLIPTIC
    return HYPERBOLIC


def eigen_from_parameters(alpha, f_p, g_p, tol=0.0):
    """
    횡단 고유값 lambda+- = 1 + 2u +- 2 sqrt(u (1 + u)), u = (1-alpha) f_p g_p

    Returns:
        tuple: (lambda_plus, lambda_minus, classification)
    """
    u = (1.0 - alpha) * f_p * g_p
    root = 2.0 * cmath.sqrt(u * (1.0 + u))
    lambda_plus = complex(1.0 + 2.0 * u) + root
    lambda_minus = complex(1.0 + 2.0 * u) - root
    return lambda_plus, lambda_minus, classify(u, tol)


def eigen_transverse(model, x=FIXED_MU):
    """
    횡단 블록의 고유값과 분류

    Returns:
        tuple: (lambda_plus, lambda_minus, classification)
    """
    _require_two(model)
    return eigen_from_parameters(model.alpha, f_rho_at(model.f, x), model.g.a,
                                 parabolic_tolerance(model.f))


def eigenvectors_transverse(model, x=FIXED_MU):
    """(Delta, eps) 좌표의 고유벡터 (e_plus, e_minus)"""
    _require_two(model)
    g_p = model.g.a
    if g_p == 0.0:
        raise ClassificationError("g'(0) = 0 이면 횡단 블록이 대각화되지 않습니다")
    coupling = (1.0 - model.alpha) * f_rho_at(model.f, x)
    half_root = 0.5 * cmath.sqrt(coupling * (1.0 + coupling * g_p) / g_p)
    e_plus = np.array([coupling / 2.0 + half_root, 1.0], dtype=complex)
    e_minus = np.array([coupling / 2.0 - half_root, 1.0], dtype=complex)
    return e_plus, e_minus


def theta_from_parameters(alpha, f_p, g_p):
    """cos theta = 1 + 2 (1-alpha) f_p g_p 에서 theta"""
    if not f_p < 0.0:
        raise ClassificationError(f"f_p < 0 조건 위반: f_p={f_p}")
    if not g_p > 0.0:
        raise ClassificationError(f"g_p > 0 조건 위반: g_p={g_p}")
    u = (1.0 - alpha) * f_p * g_p
    if u < -1.0:
        raise ClassificationError(f"(1-alpha) f_p g_p >= -1 조건 위반: {u}")
    return math.acos(1.0 + 2.0 * u)


def theta_of(model, mu=FIXED_MU):
    """
    회전각 theta(mu) in (0, pi]

    Raises:
        ClassificationError: f_p < 0 또는 (1-alpha) f_p g_p >= -1 위반
    """
    _require_two(model)
    return theta_from_parameters(model.alpha, f_rho_at(model.f, mu), model.g.a)


def alpha_for_theta(fam, gfam, theta):
    """
    원하는 회전각을 주는 충성도 alpha = 1 - (1 - cos theta) / (2 |f_p| g_p)

    Args:
        fam (FMapFamily): f 사상족
        gfam (GMapFamily): g 사상족
        theta (float): 목표 회전각, (0, pi]

    Returns:
        float: alpha in [0, 1)
    """
    if not 0.0 < theta <= math.pi:
        raise DomainError(f"theta 는 (0, pi] 에 있어야 합니다: {theta}")
    f_p = f_rho_at(fam, FIXED_MU)
    g_p = gfam.a
    if f_p == 0.0 or g_p == 0.0:
        raise DomainError("f_p g_p = 0 이면 회전각을 조절할 수 없습니다 (포물형)")
    alpha = 1.0 - (1.0 - math.cos(theta)) / (2.0 * abs(f_p) * g_p)
    if not 0.0 <= alpha < 1.0:
        raise DomainError(f"theta={theta} 를 주는 alpha={alpha} 가 [0, 1) 밖입니다")
    return alpha


# ---------------------------------------------------------------------------
# 정규형
# ---------------------------------------------------------------------------

def third_derivatives(alpha, bundle):
    """
    (x, y) 차트 원점에서 X, Y 의 3차 편미분 표

    Args:
        alpha (float): 충성도
        bundle (DerivativeBundle): 중심 미분 묶음

    Returns:
        tuple: (theta, dict) 표의 키는 X_xxx, X_xxy, X_xyy, X_yyy, Y_xxx, Y_xxy, Y_xyy, Y_yyy
    """
    theta = theta_from_parameters(alpha, bundle.f_p, bundle.g_p)
    c, s = math.cos(theta), math.sin(theta)
    if abs(s) < 1e-15:
        raise ClassificationError("sin theta = 0 (lambda = -1) 에서는 정규형 좌표가 정의되지 않습니다")
    g_p, K_g = bundle.g_p, bundle.K_g
    loyal = 1.0 - alpha
    h3 = bundle.f_p + 3.0 * bundle.f_rho2 + bundle.f_rho3
    m = bundle.f_rho2x

    A = (c - 1.0) / (2.0 * g_p)
    B = -s / (2.0 * g_p)
    X = {
        'X_xxx': K_g * A ** 3,
        'X_xxy': K_g * A * A * B,
        'X_xyy': K_g * A * B * B,
        'X_yyy': K_g * B ** 3,
    }
    lead = -2.0 * loyal * bundle.f_p * g_p / s
    # Y_yyy 의 3 m s^2 항: 이 항이 있어야 Re(e^{-i theta} c2) = (1 - alpha) m / 8
    Y = {
        'Y_xxx': lead * X['X_xxx'] - loyal / s * (4.0 * g_p * h3 * c ** 3 + 3.0 * m * c * c * (c - 1.0)),
        'Y_xxy': lead * X['X_xxy'] + loyal * (4.0 * g_p * h3 * c * c + m * c * (3.0 * c - 2.0)),
        'Y_xyy': lead * X['X_xyy'] - loyal * (4.0 * g_p * h3 * c * s + m * s * (3.0 * c - 1.0)),
        'Y_yyy': lead * X['X_yyy'] + loyal * (4.0 * g_p * h3 * s * s + 3.0 * m * s * s),
    }
    return theta, {**X, **Y}


def assemble_c2(alpha, bundle):
    """
    c2(0) = (X_xxx + X_xyy + Y_xxy + Y_yyy + i (Y_xxx - X_xxy + Y_xyy - X_yyy)) / 8

    Returns:
        tuple: (c2, theta, table)
    """
    theta, t = third_derivatives(alpha, bundle)
    real = t['X_xxx'] + t['X_xyy'] + t['Y_xxy'] + t['Y_yyy']
    imag = t['Y_xxx'] - t['X_xxy'] + t['Y_xyy'] - t['X_yyy']
    return complex(real, imag) / 8.0, theta, t


def rotated_margin(c2, theta):
    """Re(e^{-i theta} c2)"""
    return (cmath.exp(-1j * theta) * c2).real


def third_derivative_table(model, method='analytic'):
    """모델의 3차 편미분 표"""
    _require_two(model)
    bundle = derivative_bundle(model.f, model.g, method)
    return third_derivatives(model.alpha, bundle)[1]


def normal_form_c2(model, method='analytic'):
    """
    정규형 계수 c2(0)

    Raises:
        ClassificationError: 타원형이 아닌 고정점
    """
    _require_two(model)
    bundle = derivative_bundle(model.f, model.g, method)
    kind = classify((1.0 - model.alpha) * bundle.f_p * bundle.g_p, parabolic_tolerance(model.f))
    if kind != ELLIPTIC:
        raise ClassificationError(f"정규형은 타원형 고정점에서만 정의됩니다: {kind}")
    return assemble_c2(model.alpha, bundle)[0]


# ---------------------------------------------------------------------------
# 보고서
# ---------------------------------------------------------------------------

@dataclass
class StabilityReport:
    """고정점 안정성 분석 결과"""
    alpha: float
    mu: float
    theta: float
    lambda_plus: complex
    lambda_minus: complex
    classification: str
    derivatives: object
    c2: complex
    margin: float
    closed_form_margin: float
    hypotheses: AuditReport
    self_checks: AuditReport
    verdict: str
    failing: list = field(default_factory=list)
    unstable_direction: list = None
    corroboration: dict = field(default_factory=dict)

    @property
    def stable(self):
        return self.verdict == STABLE

    def to_dict(self):
        return {
            'alpha': self.alpha,
            'mu': self.mu,
            'theta': self.theta,
            'lambda_plus': self.lambda_plus,
            'lambda_minus': self.lambda_minus,
            'classification': self.classification,
            'derivatives': self.derivatives.to_dict(),
            'c2': self.c2,
            'margin': self.margin,
            'closed_form_margin': self.closed_form_margin,
            'hypotheses': self.hypotheses.to_dict(),
            'self_checks': self.self_checks.to_dict(),
            'verdict': self.verdict,
            'failing': list(self.failing),
            'unstable_direction': self.unstable_direction,
            'corroboration': dict(self.corroboration),
        }


def _hypotheses(model, bundle, classification, lambda_minus):
    report = AuditReport()
    fam = model.f
    in_region = fam.kind == SMOOTH_C4 and bundle.smooth and fam.x0 <= FIXED_MU <= 1.0 - fam.x0
    report.add_check('c4_region', in_region, anchor='f in C4 near (1, 1/2)',
                     detail=f"kind={fam.kind}, smooth={bundle.smooth}")
    symmetry = validate_f(fam, 2, grid=20).get('hf3_symmetry')
    report.add_check('symmetry_hf3', symmetry.passed, measured=symmetry.measured,
                     tolerance=symmetry.tolerance, anchor='Hf3')
    report.add_check('conderiv_f_p_negative', bundle.f_p < 0.0, measured=bundle.f_p,
                     anchor="f'_rho(1,1/2) < 0")
    report.add_check('conderiv_f_rhox', abs(bundle.f_rhox) <= DERIV_TOL, measured=bundle.f_rhox,
                     tolerance=DERIV_TOL, anchor="f''_rho x(1,1/2) = 0")
    report.add_check('conderiv_f_rhox2', abs(bundle.f_rhox2) <= DERIV_TOL, measured=bundle.f_rhox2,
                     tolerance=DERIV_TOL, anchor="f'''_rho x^2(1,1/2) = 0")
    report.add_check('g_odd', model.g.b == 0.0 and model.g.a > 0.0, measured=model.g.b,
                     anchor="g odd, g'(0) > 0")
    report.add_check('elliptic', classification == ELLIPTIC, anchor='elliptic fixed point',
                     detail=classification)
    report.add_check('lambda_not_minus_one', abs(lambda_minus + 1.0) > 1e-12,
                     measured=abs(lambda_minus + 1.0), anchor='lambda != -1')
    return report


def _verdict(classification, hypotheses, margin, g_p):
    failing = [check.name for check in hypotheses.failed_checks()]
    if classification == PARABOLIC:
        return (UNSTABLE if g_p != 0.0 else INCONCLUSIVE), failing
    if classification == HYPERBOLIC:
        return UNSTABLE, failing
    if classification == ELLIPTIC and {'conderiv_f_rhox', 'conderiv_f_rhox2'} & set(failing):
        return UNSTABLE, failing
    if failing or not math.isfinite(margin) or margin == 0.0:
        return INCONCLUSIVE, failing
    return (STABLE if margin < 0.0 else UNSTABLE), failing


def stability_margin(model, method='analytic'):
    """
    고정점 (1/2, 1/2, 1) 의 안정성 보고서

    가정이 충족되지 않아도 예외 대신 verdict='inconclusive' (또는 'unstable') 와
    실패한 가정 이름을 돌려준다.

    Args:
        model (ModelSpec): N = 2 모델
        method (str): 미분 계산 방식 ('analytic' | 'finite_difference')

    Returns:
        StabilityReport: 분석 결과
    """
    logger = setup_logger()
    _require_two(model)
    bundle = derivative_bundle(model.f, model.g, method)
    lambda_plus, lambda_minus, classification = eigen_from_parameters(
        model.alpha, bundle.f_p, bundle.g_p, parabolic_tolerance(model.f))
    closed_form = (1.0 - model.alpha) * bundle.f_rho2x / 8.0

    theta, c2, margin = float('nan'), complex(float('nan'), float('nan')), float('nan')
    if classification == ELLIPTIC:
        try:
            c2, theta, _ = assemble_c2(model.alpha, bundle)
            margin = rotated_margin(c2, theta)
        except ClassificationError as e:
            theta = math.pi
            logger.warning(f"정규형 계산 불가: {str(e)}")

    self_checks = AuditReport()
    product = abs(lambda_plus * lambda_minus - 1.0)
    self_checks.add_check('lambda_product', product <= 1e-12, measured=product,
                          tolerance=1e-12, anchor='lambda+ lambda- = 1')
    if classification == ELLIPTIC:
        modulus = max(abs(abs(lambda_plus) - 1.0), abs(abs(lambda_minus) - 1.0))
        self_checks.add_check('unit_modulus', modulus <= 1e-12, measured=modulus,
                              tolerance=1e-12, anchor='elliptic => |lambda| = 1')
    if math.isfinite(margin):
        gap = abs(margin - closed_form)
        self_checks.add_check('margin_collapse', gap <= 1e-10 * max(1.0, abs(closed_form)),
                              measured=gap, tolerance=1e-10,
                              anchor="8 Re(e^{-i theta} c2) = (1-alpha) f'''_rho^2 x")

    hypotheses = _hypotheses(model, bundle, classification, lambda_minus)
    verdict, failing = _verdict(classification, hypotheses, margin, bundle.g_p)

    unstable = None
    if classification == HYPERBOLIC and bundle.g_p != 0.0:
        e_plus, e_minus = eigenvectors_transverse(model)
        vector = e_plus if abs(lambda_plus) > 1.0 else e_minus
        unstable = [float(v.real) for v in vector]

    logger.info(f"안정성 분석: {classification}, margin={margin:.6g}, verdict={verdict}")
    return StabilityReport(
        alpha=model.alpha, mu=FIXED_MU, theta=theta,
        lambda_plus=lambda_plus, lambda_minus=lambda_minus,
        classification=classification, derivatives=bundle,
        c2=c2, margin=margin, closed_form_margin=closed_form,
        hypotheses=hypotheses, self_checks=self_checks,
        verdict=verdict, failing=failing, unstable_direction=unstable,
    )


# ---------------------------------------------------------------------------
# 좌표 변환과 수치 교차검증
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormalCoords:
    """mu = <x>, z = x + i y (횡단 좌표)"""
    mu: float
    z: complex


def _chart(model):
    theta = theta_of(model)
    s = math.sin(theta)
    if abs(s) < 1e-15:
        raise ClassificationError("sin theta = 0 이면 정규형 좌표가 정의되지 않습니다")
    return math.cos(theta), s, model.g.a


def to_normal_coords(model, s):
    """
    (x1, x2, rho1) -> (mu, z)

    Args:
        model (ModelSpec): 타원형 N = 2 모델
        s (SkewState): 축약 상태

    Returns:
        NormalCoords: 정규 좌표
    """
    _require_two(model)
    c, sin_theta, g_p = _chart(model)
    x1, x2 = float(s.x[0]), float(s.x[1])
    mu = 0.5 * (x1 + x2)
    delta = 0.5 * (x1 - x2)
    eps = math.log(float(s.rho[0]))
    y = ((c - 1.0) * eps - 4.0 * g_p * delta) / sin_theta
    return NormalCoords(mu=mu, z=complex(eps, y))


def from_normal_coords(model, nc):
    """(mu, z) -> SkewState"""
    _require_two(model)
    c, sin_theta, g_p = _chart(model)
    eps, y = nc.z.real, nc.z.imag
    delta = ((c - 1.0) * eps - sin_theta * y) / (4.0 * g_p)
    return SkewState(np.array([nc.mu + delta, nc.mu - delta]), np.array([math.exp(eps)]))


def transformed_step(model, v):
    """(mu, Delta, eps) 좌표에서 F_skew 한 스텝"""
    mu, delta, eps = v
    x, rho = skew_step_lists(model, [mu + delta, mu - delta], [math.exp(eps)])
    return np.array([0.5 * (x[0] + x[1]), 0.5 * (x[0] - x[1]), math.log(rho[0])])


def numeric_jacobian(model, point, h=1e-5):
    """
    (mu, Delta, eps) 변환 스텝의 중심차분 야코비안

    Args:
        model (ModelSpec): N = 2 모델
        point (SkewState): 미분 위치
        h (float): 차분 간격, [1e-8, 1e-3]

    Returns:
        numpy.ndarray: 3x3 행렬
    """
    _require_two(model)
    if not 1e-8 <= h <= 1e-3:
        raise DomainError(f"h 는 [1e-8, 1e-3] 에 있어야 합니다: {h}")
    x1, x2 = float(point.x[0]), float(point.x[1])
    base = np.array([0.5 * (x1 + x2), 0.5 * (x1 - x2), math.log(float(point.rho[0]))])
    jac = np.empty((3, 3))
    for j in range(3):
        step = np.zeros(3)
        step[j] = h
        jac[:, j] = (transformed_step(model, base + step)
                     - transformed_step(model, base - step)) / (2.0 * h)
    if not np.all(np.isfinite(jac)):
        raise NumericError(f"유한차분 야코비안에 비유한 값이 있습니다: {jac.tolist()}")
    return jac


def measure_rotation(model, amplitude=1e-4, samples=8):
    """
    미소 궤도의 arg(z'/z) 평균으로 회전각 추정

    Returns:
        float: 추정 회전각
    """
    angles = []
    for k in range(samples):
        phase = 2.0 * math.pi * k / samples
        start = NormalCoords(FIXED_MU, amplitude * cmath.exp(1j * phase))
        state = from_normal_coords(model, start)
        x, rho = skew_step_lists(model, state.x.tolist(), state.rho.tolist())
        image = to_normal_coords(model, SkewState(np.array(x), np.array(rho)))
        angles.append(cmath.phase(image.z / start.z))
    return float(np.mean(angles))


def corroborate_decay(model, s0, T=6000, stride=12, transient=0.1):
    """
    시뮬레이션 궤도로 |z| 감쇠 확인

    Args:
        model (ModelSpec): 타원형 N = 2 모델
        s0 (SkewState): 시작 상태
        T (int): 스텝 수
        stride (int): |z| 표본 간격
        transient (float): 단조성 판정에서 제외할 앞부분 비율

    Returns:
        dict: 초기/최종 진폭, 감쇠비, 비증가 구간 비율, 최대 상대 증가량, 표본 |z| 목록
    """
    logger = setup_logger()
    orbit = simulate_skew(model, s0, T, record_every=stride)
    amplitudes = np.array([abs(to_normal_coords(model, orbit.state_at(k)).z)
                           for k in range(len(orbit))])
    gap = np.abs(orbit.x[:, 0] - orbit.x[:, 1]) + np.abs(np.log(orbit.rho[:, 0]))
    start = int(len(amplitudes) * transient)
    tail = amplitudes[start:]
    increments = np.diff(tail) / tail[:-1] if tail.size > 1 else np.zeros(0)
    result = {
        'T': int(T),
        'stride': int(stride),
        'initial_amplitude': float(amplitudes[0]),
        'final_amplitude': float(amplitudes[-1]),
        'amplitude_ratio': float(amplitudes[-1] / amplitudes[0]) if amplitudes[0] > 0 else float('nan'),
        'initial_gap': float(gap[0]),
        'final_gap': float(gap[-1]),
        'gap_ratio': float(gap[-1] / gap[0]) if gap[0] > 0 else float('nan'),
        'non_increasing_fraction': float(np.mean(increments <= 0.0)) if increments.size else 1.0,
        'max_relative_increase': float(increments.max()) if increments.size else 0.0,
        'mu_limit_estimate': float(orbit.mean_x[-1]),
        'amplitudes': amplitudes.tolist(),
    }
    logger.info(f"감쇠 확인: |z| {result['initial_amplitude']:.4g} -> {result['final_amplitude']:.4g}")
    return result

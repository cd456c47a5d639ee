# modules/experiments/config.py
"""
실험 설정 파서

형식: UTF-8 평문 `key = value` 줄, `#` 이후는 주석.
값은 YAML 규칙으로 해석하며 (0.5, [0.6, 0.4], true, linear),
모르는 키 / 타입 불일치 / 제약 위반을 줄 번호와 함께 모두 모아 한 번에 보고한다.
"""
import math
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from ..analysis.audits import AUDITS
from ..analysis.stability import alpha_for_theta
from ..market.dynamics import ALT2, VARIANTS, MarketState, ModelSpec, SkewState, sample_state
from ..market.families import (
    B_KERNELS, C_KERNELS, DEV_KINDS, F_KINDS, G_KINDS, f_family_from_flat, g_family_from_flat,
)
from ..utils.config_loader import DEFAULT_SETTINGS, coerce_scalar
from ..utils.errors import ConfigError, MarketModelError


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value):
    return (isinstance(value, (int, float)) and not isinstance(value, bool)
            and math.isfinite(value))


def _number_list(value):
    if _is_number(value):
        value = [value]
    return isinstance(value, list) and len(value) > 0 and all(_is_number(v) for v in value)


def _choice(options):
    return ('str', lambda v: v in options, f"{' | '.join(options)} 중 하나")


# key -> (타입, 제약 함수, 제약 설명)
SCHEMA = {
    'model.N': ('int', lambda v: v >= 2, '2 이상'),
    'model.alpha': ('float', lambda v: 0.0 <= v < 1.0, '[0, 1)'),
    'model.theta': ('float', lambda v: 0.0 < v <= math.pi, '(0, pi]'),
    'model.variant': _choice(VARIANTS),
    'f.kind': _choice(F_KINDS),
    'f.c_kernel': _choice(C_KERNELS),
    'f.c_power': ('float', lambda v: v > 0.0, '양수'),
    'f.b_kernel': _choice(B_KERNELS),
    'f.rho0': ('float', lambda v: v > 1.0, '1 초과'),
    'f.x0': ('float', lambda v: 0.0 < v < 0.5, '(0, 1/2)'),
    'f.dev_kind': _choice(DEV_KINDS),
    'f.dev_scale': ('float', lambda v: 0.0 <= v <= 1.0, '[0, 1]'),
    'f.gamma': ('float', lambda v: 0.0 < v < 0.5, '(0, 1/2)'),
    'g.kind': _choice(G_KINDS),
    'g.a': ('float', lambda v: 0.0 <= v <= 1.0, '[0, 1]'),
    'g.b': ('float', lambda v: True, '실수'),
    'init.x': ('float_list', lambda v: all(0.0 <= x <= 1.0 for x in v), '각 원소 [0, 1]'),
    'init.p': ('float_list', lambda v: all(p > 0.0 for p in v), '각 원소 양수'),
    'init.rho': ('float_list', lambda v: all(r > 0.0 for r in v), '각 원소 양수'),
    'init.seed': ('int', lambda v: 0 <= v < 2 ** 64, '[0, 2^64)'),
    'init.x_low': ('float', lambda v: 0.0 <= v <= 1.0, '[0, 1]'),
    'init.x_high': ('float', lambda v: 0.0 <= v <= 1.0, '[0, 1]'),
    'init.p_low': ('float', lambda v: v > 0.0, '양수'),
    'init.p_high': ('float', lambda v: v > 0.0, '양수'),
    'run.T': ('int', lambda v: v >= 1, '1 이상'),
    'run.record_every': ('int', lambda v: v >= 1, '1 이상'),
    'audit.names': ('str_list', lambda v: all(name in AUDITS for name in v),
                    f"{', '.join(sorted(AUDITS))} 중에서 선택"),
    'audit.window': ('int', lambda v: v >= 1, '1 이상'),
    'audit.gamma_dev': ('float', lambda v: 0.0 < v < 1.0, '(0, 1)'),
    'audit.bound': ('bound', lambda v: v == 'uniform' or v > 0.0, "'uniform' 또는 양수"),
    'audit.orbit_csv': ('str', lambda v: len(v) > 0, '경로'),
    'sweep.alpha': ('float_list', lambda v: all(0.0 <= a < 1.0 for a in v), '각 원소 [0, 1)'),
    'sweep.g_a': ('float_list', lambda v: all(0.0 <= a <= 1.0 for a in v), '각 원소 [0, 1]'),
    'sweep.audits': ('bool', lambda v: True, 'true | false'),
    'periodic.rho': ('float_list', lambda v: all(r >= 1.0 for r in v), '각 원소 1 이상'),
    'periodic.period': ('int', lambda v: v == 4, '4'),
    'stability.corroborate': ('bool', lambda v: True, 'true | false'),
    'stability.corroborate_T': ('int', lambda v: v >= 1, '1 이상'),
    'stability.stride': ('int', lambda v: v >= 1, '1 이상'),
    'output.prefix': ('str', lambda v: len(v) > 0 and os.sep not in v, '파일 이름 접두사'),
    'output.plot': ('bool', lambda v: True, 'true | false'),
    'output.pdf': ('bool', lambda v: True, 'true | false'),
}

DEFAULTS = {
    'model.N': 2,
    'model.variant': 'standard',
    'f.kind': 'piecewise_affine',
    'g.kind': 'linear',
    'g.a': 0.5,
    'run.T': 1000,
    'run.record_every': 1,
    'audit.names': ['rho_bounds', 'mean_volume', 'price_product', 'crossings', 'fraction_bounds'],
    'audit.window': 5000,
    'audit.gamma_dev': 0.3,
    'audit.bound': 'uniform',
    'sweep.audits': True,
    'periodic.rho': [2.0],
    'periodic.period': 4,
    'stability.corroborate': False,
    'stability.corroborate_T': 6000,
    'stability.stride': 12,
    'output.prefix': 'run',
    'output.plot': False,
    'output.pdf': False,
}


def _coerce(kind, value):
    """
    스키마 타입으로 변환

    Returns:
        tuple: (변환값, 오류 메시지 또는 None)
    """
    if kind == 'int':
        if _is_int(value):
            return value, None
        if isinstance(value, float) and value.is_integer():
            return int(value), None
        return None, "정수가 아닙니다"
    if kind == 'float':
        return (float(value), None) if _is_number(value) else (None, "실수가 아닙니다")
    if kind == 'bool':
        return (value, None) if isinstance(value, bool) else (None, "true/false 가 아닙니다")
    if kind == 'str':
        return (value, None) if isinstance(value, str) else (None, "문자열이 아닙니다")
    if kind == 'float_list':
        if _number_list(value):
            return [float(v) for v in (value if isinstance(value, list) else [value])], None
        return None, "실수 목록이 아닙니다"
    if kind == 'str_list':
        if isinstance(value, str):
            value = [v.strip() for v in value.split(',') if v.strip()]
        if isinstance(value, list) and value and all(isinstance(v, str) for v in value):
            return value, None
        return None, "이름 목록이 아닙니다"
    if kind == 'bound':
        if value == 'uniform':
            return value, None
        return (float(value), None) if _is_number(value) else (None, "'uniform' 또는 실수가 아닙니다")
    return None, f"알 수 없는 타입 {kind}"


@dataclass
class ExperimentConfig:
    """
    검증된 실험 설정

    Args:
        values (dict): 평문 키 -> 값 (기본값 포함)
        lines (dict): 평문 키 -> 원문 줄 번호
    """
    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def N(self):
        return self.values['model.N']

    def build_model(self, alpha=None, g_a=None):
        """
        ModelSpec 생성 (sweep 점은 alpha, g_a 를 덮어쓴다)

        model.theta 가 주어지면 alpha 는 cos theta = 1 + 2 (1-alpha) f_p g_p 에서 유도한다.
        """
        flat = dict(self.values)
        if g_a is not None:
            flat['g.a'] = g_a
        fam = f_family_from_flat(flat)
        gfam = g_family_from_flat(flat)
        if alpha is None:
            alpha = flat.get('model.alpha')
            if alpha is None:
                alpha = alpha_for_theta(fam, gfam, flat['model.theta'])
        return ModelSpec(N=flat['model.N'], alpha=alpha, f=fam, g=gfam,
                         variant=flat['model.variant'])

    def sampler_bounds(self, settings=None):
        sampler = dict(DEFAULT_SETTINGS['sampler'])
        if settings:
            sampler.update(settings.get('sampler', {}))
        for name in ('x_low', 'x_high', 'p_low', 'p_high'):
            key = f'init.{name}'
            if key in self.values:
                sampler[name] = self.values[key]
        return sampler

    @property
    def uses_sampler(self):
        return 'init.x' not in self.values

    def initial_state(self, settings=None):
        """
        초기 상태: 명시 벡터가 있으면 그대로, 없으면 init.seed 로 균등 표본

        init.rho 만 주어진 경우 p = (rho, 1) 로 올린다.
        """
        N = self.N
        if not self.uses_sampler:
            x = np.array(self.values['init.x'])
            if 'init.p' in self.values:
                p = np.array(self.values['init.p'])
            elif 'init.rho' in self.values:
                p = np.append(self.values['init.rho'], 1.0)
            else:
                p = np.ones(N)
            return MarketState(x, p)
        rng = np.random.default_rng(self.values['init.seed'])
        bounds = self.sampler_bounds(settings)
        return sample_state(rng, N, **bounds)

    def skew_initial_state(self, settings=None):
        state = self.initial_state(settings)
        return SkewState(state.x, state.p[:-1] / state.p[-1])

    def with_overrides(self, overrides):
        """일부 키를 바꾼 새 설정 (검증 포함)"""
        values = dict(self.values)
        values.update(overrides)
        errors = _validate_values(values, self.lines)
        if errors:
            raise ConfigError(errors)
        return ExperimentConfig(values=values, lines=dict(self.lines))

    def to_flat(self):
        return dict(sorted(self.values.items()))


def _validate_values(values, lines, failed=()):
    """
    교차 키 제약 확인, 오류 목록 반환

    failed 에 든 키 (줄 단위 검사에서 이미 오류가 난 키) 가 걸린 제약은 건너뛴다.
    """
    errors = []

    def clean(*keys):
        return not any(key in failed for key in keys)

    def line_of(*keys):
        for key in keys:
            if key in lines:
                return lines[key]
        return None

    N = values.get('model.N', 2)
    if 'model.alpha' in values and 'model.theta' in values:
        errors.append((line_of('model.theta'), "model.alpha 와 model.theta 는 함께 쓸 수 없습니다"))
    if ('model.alpha' not in values and 'model.theta' not in values
            and clean('model.alpha', 'model.theta')):
        errors.append((None, "model.alpha 또는 model.theta 가 필요합니다"))
    if values.get('model.variant') == ALT2 and N != 2 and clean('model.N'):
        errors.append((line_of('model.variant'), "alt2 모델은 N = 2 에서만 쓸 수 있습니다"))

    if 'init.x' in values:
        if len(values['init.x']) != N and clean('model.N'):
            errors.append((line_of('init.x'), f"init.x 의 길이는 N={N} 이어야 합니다"))
        if 'init.p' in values and len(values['init.p']) != N and clean('model.N'):
            errors.append((line_of('init.p'), f"init.p 의 길이는 N={N} 이어야 합니다"))
        if 'init.rho' in values and len(values['init.rho']) != N - 1 and clean('model.N'):
            errors.append((line_of('init.rho'), f"init.rho 의 길이는 N-1={N - 1} 이어야 합니다"))
        if 'init.p' in values and 'init.rho' in values:
            errors.append((line_of('init.rho'), "init.p 와 init.rho 는 함께 쓸 수 없습니다"))
    elif clean('init.x'):
        if 'init.p' in values or 'init.rho' in values:
            errors.append((line_of('init.p', 'init.rho'), "init.p / init.rho 는 init.x 와 함께 써야 합니다"))
        elif 'init.seed' not in values and clean('init.seed'):
            errors.append((None, "init.x 를 주지 않으면 init.seed 가 필요합니다 (무작위 초기화)"))

    for low, high in (('init.x_low', 'init.x_high'), ('init.p_low', 'init.p_high')):
        if low in values and high in values and not values[low] < values[high]:
            errors.append((line_of(low), f"{low} < {high} 이어야 합니다"))

    if not any(key.startswith('f.') for key in failed):
        try:
            f_family_from_flat(values)
        except MarketModelError as e:
            errors.append((line_of('f.kind', 'f.c_kernel'), str(e)))
    if not any(key.startswith('g.') for key in failed):
        try:
            g_family_from_flat(values)
        except MarketModelError as e:
            errors.append((line_of('g.kind', 'g.a'), str(e)))
    return errors


def parse_config(text):
    """
    평문 설정 텍스트를 검증된 ExperimentConfig 로 변환

    Args:
        text (str): `key = value` 줄로 된 UTF-8 텍스트

    Returns:
        ExperimentConfig: 검증된 설정

    Raises:
        ConfigError: 모든 오류를 줄 번호와 함께 모아서 발생
    """
    errors = []
    values = dict(DEFAULTS)
    lines = {}
    failed = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            errors.append((line_no, f"'key = value' 형식이 아닙니다: {raw.strip()}"))
            continue
        key, _, text_value = line.partition('=')
        key, text_value = key.strip(), text_value.strip()
        if key not in SCHEMA:
            errors.append((line_no, f"알 수 없는 키: {key}"))
            continue
        if key in lines:
            errors.append((line_no, f"중복된 키: {key} ({lines[key]}행에서 이미 지정)"))
            continue
        lines[key] = line_no
        try:
            parsed = coerce_scalar(text_value)
        except yaml.YAMLError as e:
            errors.append((line_no, f"{key}: 값을 해석할 수 없습니다 ({str(e).splitlines()[0]})"))
            failed.add(key)
            continue
        kind, constraint, description = SCHEMA[key]
        value, problem = _coerce(kind, parsed)
        if problem:
            errors.append((line_no, f"{key}: {problem} (값: {text_value})"))
            failed.add(key)
            continue
        if not constraint(value):
            errors.append((line_no, f"{key}: 제약 위반, {description} (값: {text_value})"))
            failed.add(key)
            continue
        values[key] = value

    errors.extend(_validate_values(values, lines, failed))
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(values=values, lines=lines)


def load_experiment_config(filepath):
    """
    설정 파일 로드

    Raises:
        ConfigError: 파일이 없거나 읽을 수 없는 경우 포함
    """
    if not os.path.exists(filepath):
        raise ConfigError(f"설정 파일을 찾을 수 없습니다: {filepath}")
    try:
        with open(filepath, 'r', encoding='utf-8') as f:
            text = f.read()
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"설정 파일을 읽을 수 없습니다: {filepath} ({str(e)})") from e
    return parse_config(text)

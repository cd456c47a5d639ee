# modules/market/orbit.py
"""
궤도 기록과 CSV 입출력

CSV 헤더: t,x_1..x_N,p_1..p_N,rho_1..rho_{N-1},mean_x,price_product,dist_fixed
축약(skew) 궤도는 p_N = 1 로 정규화한 가격을 p 열에 기록한다.
"""
import math
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .dynamics import (
    ALT2, MarketState, SkewState, full_step_lists, skew_step_lists,
)
from ..utils.errors import DomainError, NumericError, OrbitFormatError
from ..utils.logger import setup_logger

FULL = 'full'
SKEW = 'skew'

# 극값 인덱스의 동률 판정 기준
TIE_TOL = 1e-14


@dataclass
class Orbit:
    """
    시간 순서로 기록된 상태열

    Args:
        kind (str): 'full' | 'skew'
        t (numpy.ndarray): 기록 시각
        x (numpy.ndarray): (기록 수, N) 고객 비율
        rho (numpy.ndarray): (기록 수, N-1) 상대가격 p_i / p_N
        p (numpy.ndarray): (기록 수, N) 가격, skew 궤도는 None
        record_every (int): 기록 간격 (CSV 에서 읽은 불규칙 궤도는 None)
        variant (str): 생성에 쓰인 모델 변형
    """
    kind: str
    t: np.ndarray
    x: np.ndarray
    rho: np.ndarray
    p: np.ndarray = None
    record_every: int = 1
    variant: str = 'standard'
    metadata: dict = field(default_factory=dict)

    @property
    def N(self):
        return self.x.shape[1]

    def __len__(self):
        return self.x.shape[0]

    @property
    def prices(self):
        """가격 행렬 (skew 궤도는 p_N = 1 로 정규화)"""
        if self.p is not None:
            return self.p
        return np.hstack([self.rho, np.ones((len(self), 1))])

    @property
    def mean_x(self):
        return self.x.mean(axis=1)

    @property
    def price_product(self):
        if self.p is None:
            return np.full(len(self), np.nan)
        return np.prod(self.p, axis=1)

    @property
    def dist_fixed(self):
        return np.maximum(np.ptp(self.x, axis=1), np.ptp(self.prices, axis=1))

    @property
    def ratio_max(self):
        """시각별 max_i max(rho_i, 1/rho_i)"""
        return np.max(np.maximum(self.rho, 1.0 / self.rho), axis=1)

    @property
    def boundary_flag(self):
        """고객 비율이 0 또는 1 에 닿은 적이 있는지 여부"""
        return bool(np.any((self.x == 0.0) | (self.x == 1.0)))

    def extremal_indices(self):
        """
        시각별 argmin/argmax 인덱스와 동률 여부

        Returns:
            dict: 'x_min', 'x_max', 'p_min', 'p_max' -> (인덱스 배열, 동률 마스크)
        """
        result = {}
        for label, values in (('x', self.x), ('p', self.prices)):
            ordered = np.sort(values, axis=1)
            result[f'{label}_min'] = (np.argmin(values, axis=1),
                                      (ordered[:, 1] - ordered[:, 0]) < TIE_TOL)
            result[f'{label}_max'] = (np.argmax(values, axis=1),
                                      (ordered[:, -1] - ordered[:, -2]) < TIE_TOL)
        return result

    def state_at(self, k):
        """k 번째 기록 상태 (full 은 MarketState, skew 는 SkewState)"""
        if self.kind == FULL:
            return MarketState(self.x[k], self.p[k])
        return SkewState(self.x[k], self.rho[k])

    def to_frame(self):
        """
        궤도를 DataFrame 으로 변환

        Returns:
            pandas.DataFrame: CSV 헤더 순서의 열
        """
        N = self.N
        data = {'t': self.t.astype(np.int64)}
        prices = self.prices
        for i in range(N):
            data[f'x_{i + 1}'] = self.x[:, i]
        for i in range(N):
            data[f'p_{i + 1}'] = prices[:, i]
        for i in range(N - 1):
            data[f'rho_{i + 1}'] = self.rho[:, i]
        data['mean_x'] = self.mean_x
        data['price_product'] = np.prod(prices, axis=1)
        data['dist_fixed'] = self.dist_fixed
        return pd.DataFrame(data)

    def to_csv(self, filepath):
        """
        CSV 저장 (float 는 최단 round-trip 표기)

        Returns:
            str: 저장된 파일 경로
        """
        directory = os.path.dirname(filepath)
        if directory and not os.path.exists(directory):
            os.makedirs(directory)
        self.to_frame().to_csv(filepath, index=False, lineterminator='\n')
        return filepath

    def verify(self, model, tol=1e-12):
        """
        연속 기록 상태가 스텝 방정식을 만족하는지 재검증

        Args:
            model (ModelSpec): 궤도를 만든 모델
            tol (float): 허용 잔차

        Returns:
            tuple: (통과 여부, 최대 잔차), record_every != 1 이면 (None, nan)
        """
        if self.record_every != 1 or len(self) < 2:
            return None, float('nan')
        worst = 0.0
        for k in range(len(self) - 1):
            x = self.x[k].tolist()
            if self.kind == FULL:
                new_x, new_p = full_step_lists(model, x, self.p[k].tolist(),
                                               alt2=model.variant == ALT2)
                scale = max(1.0, float(np.max(np.abs(new_p))))
                price_residual = float(np.max(np.abs(np.array(new_p) - self.p[k + 1]))) / scale
            else:
                new_x, new_rho = skew_step_lists(model, x, self.rho[k].tolist())
                scale = max(1.0, float(np.max(np.abs(new_rho))))
                price_residual = float(np.max(np.abs(np.array(new_rho) - self.rho[k + 1]))) / scale
            x_residual = float(np.max(np.abs(np.array(new_x) - self.x[k + 1])))
            worst = max(worst, x_residual, price_residual)
        return worst <= tol, worst


def _rows_for(T, record_every):
    if int(T) != T or T < 1:
        raise DomainError(f"T 는 1 이상의 정수여야 합니다: {T}")
    if int(record_every) != record_every or record_every < 1:
        raise DomainError(f"record_every 는 1 이상의 정수여야 합니다: {record_every}")
    return int(T) // int(record_every) + 1


def simulate(model, s0, T, record_every=1):
    """
    전체 사상으로 궤도 생성

    t = 0 의 초기 상태와 record_every 의 배수 시각의 상태를 기록한다.

    Args:
        model (ModelSpec): 모델
        s0 (MarketState): 초기 상태
        T (int): 스텝 수 (>= 1)
        record_every (int): 기록 간격 (>= 1)

    Returns:
        Orbit: 기록된 궤도

    Raises:
        NumericError: 수치 실패 (실패한 시각 t 포함)
    """
    rows = _rows_for(T, record_every)
    if s0.N != model.N:
        raise DomainError(f"초기 상태의 판매자 수({s0.N})가 모델의 N({model.N})과 다릅니다")
    N = model.N
    alt2 = model.variant == ALT2
    times = np.zeros(rows, dtype=np.int64)
    xs = np.empty((rows, N))
    ps = np.empty((rows, N))
    x, p = s0.x.tolist(), s0.p.tolist()
    xs[0], ps[0] = x, p

    row = 1
    for t in range(1, int(T) + 1):
        try:
            x, p = full_step_lists(model, x, p, alt2=alt2)
        except NumericError as e:
            raise e.at_time(t) from e
        if t % record_every == 0:
            times[row] = t
            xs[row], ps[row] = x, p
            row += 1

    rho = ps[:, :-1] / ps[:, -1:]
    return Orbit(kind=FULL, t=times, x=xs, rho=rho, p=ps,
                 record_every=int(record_every), variant=model.variant)


def simulate_skew(model, s0, T, record_every=1):
    """
    축약 사상으로 궤도 생성 (가격 크기가 필요 없는 분석용)

    Args:
        model (ModelSpec): 모델
        s0 (SkewState): 초기 상태
        T (int): 스텝 수
        record_every (int): 기록 간격

    Returns:
        Orbit: kind='skew' 궤도
    """
    rows = _rows_for(T, record_every)
    if s0.N != model.N:
        raise DomainError(f"초기 상태의 판매자 수({s0.N})가 모델의 N({model.N})과 다릅니다")
    if model.variant == ALT2:
        raise DomainError("alt2 모델은 전체 상태 궤도(simulate)로만 기록합니다")
    N = model.N
    times = np.zeros(rows, dtype=np.int64)
    xs = np.empty((rows, N))
    rhos = np.empty((rows, N - 1))
    x, rho = s0.x.tolist(), s0.rho.tolist()
    xs[0], rhos[0] = x, rho

    row = 1
    for t in range(1, int(T) + 1):
        try:
            x, rho = skew_step_lists(model, x, rho)
        except NumericError as e:
            raise e.at_time(t) from e
        if t % record_every == 0:
            times[row] = t
            xs[row], rhos[row] = x, rho
            row += 1

    return Orbit(kind=SKEW, t=times, x=xs, rho=rhos, record_every=int(record_every),
                 variant=model.variant)


def _parse_float(text):
    try:
        return float(text)
    except ValueError:
        return math.nan


def read_orbit_csv(filepath):
    """
    CSV 로 저장된 궤도 읽기

    Args:
        filepath (str): CSV 경로

    Returns:
        Orbit: kind='full' 궤도

    Raises:
        OrbitFormatError: 헤더/값 오류 (파일 줄 번호 포함)
    """
    logger = setup_logger()
    if not os.path.exists(filepath):
        raise OrbitFormatError(f"궤도 파일을 찾을 수 없습니다: {filepath}")
    try:
        df = pd.read_csv(filepath, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise OrbitFormatError(f"CSV 파싱 실패: {str(e)}") from e

    x_cols = [c for c in df.columns if c.startswith('x_')]
    N = len(x_cols)
    expected = (['t'] + [f'x_{i}' for i in range(1, N + 1)]
                + [f'p_{i}' for i in range(1, N + 1)])
    missing = [c for c in expected if c not in df.columns]
    if N < 2 or missing:
        raise OrbitFormatError([(1, f"헤더에 필요한 열이 없습니다: {missing or ['x_1', 'x_2']}")])

    errors = []
    # float() 는 최단 왕복 표기를 비트 단위로 복원한다
    numeric = pd.DataFrame({c: df[c].map(_parse_float) for c in expected})
    # 데이터 행 k 는 파일의 k + 2 번째 줄 (헤더가 1행)
    for k in range(len(df)):
        line_no = k + 2
        row = numeric.iloc[k]
        bad = [c for c in expected if not math.isfinite(row[c])]
        if bad:
            errors.append((line_no, f"숫자가 아니거나 유한하지 않은 값: {', '.join(bad)}"))
            continue
        xs = row[[f'x_{i}' for i in range(1, N + 1)]].to_numpy()
        ps = row[[f'p_{i}' for i in range(1, N + 1)]].to_numpy()
        if np.any((xs < 0.0) | (xs > 1.0)):
            errors.append((line_no, "고객 비율이 [0,1] 을 벗어났습니다"))
        if np.any(ps <= 0.0):
            errors.append((line_no, "가격이 양수가 아닙니다"))
    if not errors and len(df) == 0:
        errors.append((2, "데이터 행이 없습니다"))
    if not errors:
        steps = np.diff(numeric['t'].to_numpy())
        for k, step in enumerate(steps):
            if step <= 0:
                errors.append((k + 3, "t 가 증가하지 않습니다"))
    if errors:
        raise OrbitFormatError(errors)

    t = numeric['t'].to_numpy().astype(np.int64)
    x = numeric[[f'x_{i}' for i in range(1, N + 1)]].to_numpy(dtype=float)
    p = numeric[[f'p_{i}' for i in range(1, N + 1)]].to_numpy(dtype=float)
    steps = np.unique(np.diff(t))
    record_every = int(steps[0]) if steps.size == 1 else (1 if steps.size == 0 else None)
    logger.info(f"궤도 CSV 로드: {filepath} (N={N}, {len(t)}행)")
    return Orbit(kind=FULL, t=t, x=x, rho=p[:, :-1] / p[:, -1:], p=p,
                 record_every=record_every)

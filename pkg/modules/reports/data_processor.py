# modules/reports/data_processor.py
import numpy as np
import pandas as pd
from ..utils.logger import setup_logger

# 통계를 내는 파생 열
SERIES_COLUMNS = ('mean_x', 'ratio_max', 'dist_fixed', 'price_product')


class OrbitDataProcessor:
    """
    궤도 파생 계열의 통계 처리 클래스
    """
    def __init__(self):
        """
        초기화
        """
        self.logger = setup_logger()

    def series_frame(self, orbit):
        """
        궤도를 파생 계열 데이터프레임으로 변환

        Args:
            orbit (Orbit): 궤도

        Returns:
            pandas.DataFrame: t, mean_x, ratio_max, dist_fixed, price_product 열
        """
        if orbit is None or len(orbit) == 0:
            self.logger.warning("궤도가 비어있습니다")
            return None

        df = pd.DataFrame({
            't': orbit.t,
            'mean_x': orbit.mean_x,
            'ratio_max': orbit.ratio_max,
            'dist_fixed': orbit.dist_fixed,
            'price_product': orbit.price_product,
        })
        return df

    def calculate_statistics(self, series):
        """
        단일 계열의 통계 계산

        Args:
            series (pandas.Series): 값 계열

        Returns:
            dict: 통계 정보 (유한값이 없으면 None)
        """
        values = series[np.isfinite(series)]
        if values.empty:
            return None

        stats = {
            'count': int(len(values)),
            'min': float(values.min()),
            'max': float(values.max()),
            'mean': float(values.mean()),
            'median': float(values.median()),
            'std': float(values.std()) if len(values) > 1 else 0.0,
        }

        # 백분위 통계
        for p in [10, 25, 75, 90, 95, 99]:
            stats[f'percentile_{p}'] = float(values.quantile(p / 100))

        return stats

    def tail_estimates(self, df, fraction=0.1):
        """
        꼬리 구간 추정값 (<x> 의 극한 추정, 가격비 꼬리 최댓값)

        Args:
            df (pandas.DataFrame): series_frame 결과
            fraction (float): 꼬리 구간 비율

        Returns:
            dict: 꼬리 추정값
        """
        if df is None or df.empty:
            return None

        size = max(1, int(len(df) * fraction))
        tail = df.tail(size)
        return {
            'tail_rows': int(size),
            'mean_x_limit': float(tail['mean_x'].mean()),
            'mean_x_spread': float(tail['mean_x'].max() - tail['mean_x'].min()),
            'ratio_tail_max': float(tail['ratio_max'].max()),
            'dist_fixed_tail_max': float(tail['dist_fixed'].max()),
        }

    def compare_windows(self, df, fraction=0.1):
        """
        앞 구간과 뒤 구간 비교 (감쇠 측정)

        Args:
            df (pandas.DataFrame): series_frame 결과
            fraction (float): 각 구간의 비율

        Returns:
            dict: 구간별 평균과 감쇠비, 구간이 겹치면 None
        """
        if df is None or df.empty:
            return None

        size = max(1, int(len(df) * fraction))
        if 2 * size > len(df):
            self.logger.warning(f"궤도 행 수({len(df)})가 짧아 앞/뒤 구간 비교를 할 수 없습니다.")
            return None

        head = df.head(size)
        tail = df.tail(size)
        result = {}
        for column in ('dist_fixed', 'ratio_max'):
            head_mean = float(head[column].mean())
            tail_mean = float(tail[column].mean())
            result[column] = {
                'head_mean': head_mean,
                'tail_mean': tail_mean,
                'decay_ratio': tail_mean / head_mean if head_mean != 0 else float('nan'),
            }
        return result

    def analyze_orbit(self, orbit):
        """
        궤도 종합 분석

        Args:
            orbit (Orbit): 궤도

        Returns:
            dict: 분석 결과
        """
        df = self.series_frame(orbit)
        if df is None:
            return None

        analysis = {
            'rows': int(len(df)),
            't_range': {'start': int(df['t'].iloc[0]), 'end': int(df['t'].iloc[-1])},
            'statistics': {column: self.calculate_statistics(df[column]) for column in SERIES_COLUMNS},
            'tail': self.tail_estimates(df),
            'window_comparison': self.compare_windows(df),
            'boundary_flag': bool(orbit.boundary_flag),
        }
        return analysis

# modules/reports/visualizer.py
import os

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

from ..analysis.stability import to_normal_coords
from ..market.dynamics import SkewState
from ..market.families import eval_f_alpha
from ..utils.logger import setup_logger


class OrbitVisualizer:
    """
    궤도 / 사상족 시각화 클래스 (사후 PNG 출력 전용)
    """
    def __init__(self, output_dir="output", dpi=100, figsize=(12, 6)):
        """
        초기화

        Args:
            output_dir (str): 결과물 저장 디렉토리
            dpi (int): 저장 해상도
            figsize (tuple): 그림 크기 (인치)
        """
        self.logger = setup_logger()
        self.output_dir = output_dir
        self.dpi = dpi
        self.figsize = figsize

        # 출력 디렉토리가 없으면 생성
        if not os.path.exists(output_dir):
            os.makedirs(output_dir)

        # 한글 폰트 설정 (필요한 경우)
        try:
            plt.rcParams['font.family'] = 'NanumGothic'
            plt.rcParams['axes.unicode_minus'] = False
        except Exception:
            self.logger.warning("NanumGothic 이 없어 궤도 그래프 제목과 축 이름을 기본 폰트로 그립니다.")

    def save_plot(self, fig, filename):
        """
        그래프 저장

        Args:
            fig (matplotlib.figure.Figure): 그래프 객체
            filename (str): 파일 이름

        Returns:
            str: 저장된 파일 경로
        """
        if fig is None:
            return None

        filepath = os.path.join(self.output_dir, filename)
        fig.savefig(filepath, dpi=self.dpi)
        plt.close(fig)

        self.logger.info(f"그래프 저장 완료: {filepath}")
        return filepath

    def plot_ratio_series(self, orbit, prefix):
        """
        상대가격 rho_i 계열과 평균 고객 수 N<x> 삽입 그래프

        Args:
            orbit (Orbit): 궤도
            prefix (str): 파일 이름 접두사

        Returns:
            str: 저장된 파일 경로
        """
        if orbit is None or len(orbit) == 0:
            self.logger.warning("그래프를 그릴 궤도가 없습니다.")
            return None

        fig, ax = plt.subplots(figsize=self.figsize)
        for i in range(orbit.N - 1):
            ax.plot(orbit.t, orbit.rho[:, i], linewidth=0.8, label=f'rho_{i + 1}')
        ax.axhline(y=1.0, color='gray', linestyle='--', linewidth=0.8)
        ax.set_yscale('log')
        ax.set_title(f'상대가격 추이 (N={orbit.N})')
        ax.set_xlabel('t')
        ax.set_ylabel('p_i / p_N')
        ax.grid(True, linestyle='--', alpha=0.5)
        ax.legend(loc='upper left')

        # 평균 고객 수 삽입
        inset = ax.inset_axes([0.62, 0.62, 0.35, 0.33])
        inset.plot(orbit.t, orbit.N * orbit.mean_x, color='black', linewidth=0.8)
        inset.set_title('N<x>', fontsize=8)
        inset.tick_params(labelsize=7)

        plt.tight_layout()
        return self.save_plot(fig, f'{prefix}_ratio.png')

    def plot_normal_plane(self, model, orbit, prefix, stride=1):
        """
        (x, y) 정규 평면 산점도 (N = 2 타원형 모델)

        Args:
            model (ModelSpec): 모델
            orbit (Orbit): N = 2 궤도
            prefix (str): 파일 이름 접두사
            stride (int): 표본 간격

        Returns:
            str: 저장된 파일 경로
        """
        rows = range(0, len(orbit), max(1, int(stride)))
        z = np.array([to_normal_coords(model, SkewState(orbit.x[k], orbit.rho[k])).z for k in rows])

        fig, ax = plt.subplots(figsize=(self.figsize[1], self.figsize[1]))
        ax.scatter(z.real, z.imag, s=4, c=np.arange(len(z)), cmap='viridis')
        ax.plot([0.0], [0.0], 'r+', markersize=10)
        ax.set_aspect('equal', adjustable='datalim')
        ax.set_title('정규 평면 (x, y)')
        ax.set_xlabel('x')
        ax.set_ylabel('y')
        ax.grid(True, linestyle='--', alpha=0.5)

        plt.tight_layout()
        return self.save_plot(fig, f'{prefix}_normal_plane.png')

    def plot_f_family(self, fam, alpha, prefix, rhos=(0.25, 0.5, 1.0, 2.0, 4.0), points=201):
        """
        f_alpha(rho, .) 그래프 묶음

        Args:
            fam (FMapFamily): 사상족
            alpha (float): 충성도
            prefix (str): 파일 이름 접두사
            rhos (tuple): 그릴 rho 값
            points (int): x 격자 점 수

        Returns:
            str: 저장된 파일 경로
        """
        xs = np.linspace(0.0, 1.0, points)
        fig, ax = plt.subplots(figsize=(self.figsize[1], self.figsize[1]))
        for rho in rhos:
            ys = [eval_f_alpha(fam, alpha, rho, float(x)) for x in xs]
            ax.plot(xs, ys, label=f'rho={rho:g}')
        ax.plot([0.0, 1.0], [0.0, 1.0], color='gray', linestyle='--', linewidth=0.8)
        ax.set_title(f'{fam.kind} (alpha={alpha:.3g})')
        ax.set_xlabel('x')
        ax.set_ylabel('f_alpha(rho, x)')
        ax.grid(True, linestyle='--', alpha=0.5)
        ax.legend()

        plt.tight_layout()
        return self.save_plot(fig, f'{prefix}_f_family.png')

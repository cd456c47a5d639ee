# test_reports.py
import math

import numpy as np
import pandas as pd
import pytest

from modules.analysis.report import AuditReport
from modules.analysis.stability import alpha_for_theta, stability_margin
from modules.market.dynamics import MarketState, ModelSpec, SkewState, sample_state
from modules.market.families import FMapFamily, GMapFamily
from modules.market.orbit import simulate, simulate_skew
from modules.reports.data_processor import OrbitDataProcessor
from modules.reports.pdf_generator import ReportGenerator
from modules.reports.visualizer import OrbitVisualizer


@pytest.fixture
def orbit():
    model = ModelSpec(N=3, alpha=0.5, f=FMapFamily.piecewise_affine(), g=GMapFamily.linear(0.5))
    return simulate(model, sample_state(np.random.default_rng(12), 3), 300)


@pytest.fixture
def smooth_model():
    fam, gfam = FMapFamily.smooth_c4(), GMapFamily.linear(0.5)
    return ModelSpec(N=2, alpha=alpha_for_theta(fam, gfam, math.pi / 6.0), f=fam, g=gfam)


def test_calculate_statistics_ignores_non_finite():
    stats = OrbitDataProcessor().calculate_statistics(pd.Series([1.0, 2.0, 3.0, np.inf, np.nan]))
    assert stats['count'] == 3
    assert stats['mean'] == pytest.approx(2.0)
    assert stats['median'] == pytest.approx(2.0)
    assert stats['percentile_25'] == pytest.approx(1.5)


def test_calculate_statistics_empty():
    assert OrbitDataProcessor().calculate_statistics(pd.Series([np.nan])) is None


def test_tail_estimates_use_last_rows():
    df = pd.DataFrame({
        't': np.arange(20),
        'mean_x': np.linspace(0.9, 0.5, 20),
        'ratio_max': np.linspace(4.0, 1.0, 20),
        'dist_fixed': np.linspace(1.0, 0.0, 20),
        'price_product': np.ones(20),
    })
    tail = OrbitDataProcessor().tail_estimates(df, fraction=0.1)
    assert tail['tail_rows'] == 2
    assert tail['ratio_tail_max'] == pytest.approx(df['ratio_max'].iloc[-2])
    assert tail['dist_fixed_tail_max'] == pytest.approx(df['dist_fixed'].iloc[-2])


def test_compare_windows_reports_head_and_tail(orbit):
    processor = OrbitDataProcessor()
    comparison = processor.compare_windows(processor.series_frame(orbit))
    assert comparison['dist_fixed']['head_mean'] > 0.0
    assert comparison['ratio_max']['decay_ratio'] == pytest.approx(
        comparison['ratio_max']['tail_mean'] / comparison['ratio_max']['head_mean'])


def test_compare_windows_short_orbit():
    df = pd.DataFrame({'t': [0], 'mean_x': [0.5], 'ratio_max': [1.0],
                       'dist_fixed': [0.0], 'price_product': [1.0]})
    assert OrbitDataProcessor().compare_windows(df, fraction=0.6) is None


def test_analyze_orbit(orbit):
    analysis = OrbitDataProcessor().analyze_orbit(orbit)
    assert analysis['rows'] == 301
    assert analysis['t_range'] == {'start': 0, 'end': 300}
    assert set(analysis['statistics']) == {'mean_x', 'ratio_max', 'dist_fixed', 'price_product'}
    assert isinstance(analysis['boundary_flag'], bool)


def test_ratio_series_plot(orbit, tmp_path):
    path = OrbitVisualizer(output_dir=str(tmp_path), dpi=50).plot_ratio_series(orbit, 'demo')
    assert path.endswith('demo_ratio.png')
    assert (tmp_path / 'demo_ratio.png').stat().st_size > 0


def test_ratio_series_plot_without_orbit(tmp_path):
    assert OrbitVisualizer(output_dir=str(tmp_path)).plot_ratio_series(None, 'demo') is None


def test_normal_plane_plot(smooth_model, tmp_path):
    skew_orbit = simulate_skew(smooth_model, SkewState([0.51, 0.48], [1.1]), 240, record_every=4)
    path = OrbitVisualizer(output_dir=str(tmp_path), dpi=50).plot_normal_plane(smooth_model, skew_orbit, 'smooth')
    assert (tmp_path / 'smooth_normal_plane.png').exists()
    assert path.endswith('smooth_normal_plane.png')


def test_f_family_plot(tmp_path):
    path = OrbitVisualizer(output_dir=str(tmp_path), dpi=50).plot_f_family(
        FMapFamily.spefam(), 0.3, 'fam', points=21)
    assert path.endswith('fam_f_family.png')


def test_pdf_report_with_audit_and_stability(orbit, smooth_model, tmp_path):
    audit = AuditReport()
    audit.add_check('ratio_enters_bound', True, measured=3.0, tolerance=0.0, anchor='ratio bound')
    audit.not_applicable('uniform_bound', anchor='uniform ratio bound')
    audit.add_check('mean_volume_sign', False, measured=-0.1, anchor='mean volume')
    audit.set_constant('M', 3.0)
    stability = stability_margin(smooth_model)

    image = OrbitVisualizer(output_dir=str(tmp_path), dpi=50).plot_ratio_series(orbit, 'demo')
    path = ReportGenerator(output_dir=str(tmp_path)).generate_report(
        title='감사 보고서', config={'model.N': 3, 'model.alpha': 0.5, 'audit.bound': 'uniform'},
        analysis=OrbitDataProcessor().analyze_orbit(orbit), audit=audit, stability=stability,
        images=[image, str(tmp_path / 'missing.png')], filename='demo.pdf')
    assert path is not None
    with open(path, 'rb') as f:
        assert f.read(4) == b'%PDF'


def test_pdf_report_minimal(tmp_path):
    path = ReportGenerator(output_dir=str(tmp_path / 'pdf')).generate_report(
        title='validate', config={'f.kind': 'piecewise_affine'}, filename='minimal.pdf')
    assert (tmp_path / 'pdf' / 'minimal.pdf').exists()
    assert path.endswith('minimal.pdf')


def test_processor_handles_single_state():
    model = ModelSpec(N=2, alpha=0.0, f=FMapFamily.piecewise_affine(), g=GMapFamily.linear(0.5))
    one_step = simulate(model, MarketState([0.6, 0.4], [1.0, 1.0]), 1)
    analysis = OrbitDataProcessor().analyze_orbit(one_step)
    assert analysis['rows'] == 2
    assert analysis['tail']['tail_rows'] == 1
    assert analysis['statistics']['mean_x']['count'] == 2

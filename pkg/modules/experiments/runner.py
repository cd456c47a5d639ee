# modules/experiments/runner.py
"""
실험 명령 실행기: simulate, sweep, audit, stability, validate, find-periodic

각 run_* 함수는 ExperimentConfig 를 받아 출력 파일을 쓰고
{'command', 'exit_code', 'files', 'summary'} dict 를 돌려준다.
"""
import math
import os
from multiprocessing import Pool

import numpy as np
import pandas as pd

from ..analysis.audits import run_audits
from ..analysis.constants import compute_T_N, uniform_rho_bound
from ..analysis.periodic import find_periodic_orbit
from ..analysis.report import AuditReport, merge_reports
from ..analysis.stability import ELLIPTIC, corroborate_decay, measure_rotation, stability_margin
from ..market.families import SKEWED_QUADRATIC, SMOOTH_C4, validate_f, validate_g, validate_sandwich
from ..market.orbit import read_orbit_csv, simulate, simulate_skew
from ..reports.data_processor import OrbitDataProcessor
from ..reports.pdf_generator import ReportGenerator
from ..reports.visualizer import OrbitVisualizer
from ..utils.config_loader import DEFAULT_SETTINGS
from ..utils.errors import (
    EXIT_AUDIT_FAILURE, EXIT_OK, ConfigError, DivergenceError, MarketModelError,
)
from ..utils.logger import setup_logger
from ..utils.serialization import write_json

CSV = 'csv'
JSON = 'json'
FORMATS = (CSV, JSON)


def stability_method(fam):
    """smooth_c4 는 해석적 미분, 그 외는 유한차분"""
    return 'analytic' if fam.kind == SMOOTH_C4 else 'finite_difference'


def _output_path(output_dir, cfg, suffix):
    if not os.path.exists(output_dir):
        os.makedirs(output_dir)
    return os.path.join(output_dir, f"{cfg['output.prefix']}{suffix}")


def _write_table(frame, output_dir, cfg, suffix, fmt):
    """DataFrame 을 csv 또는 json 으로 저장"""
    if fmt == JSON:
        return write_json(frame.to_dict(orient='list'), _output_path(output_dir, cfg, f"{suffix}.json"))
    filepath = _output_path(output_dir, cfg, f"{suffix}.csv")
    frame.to_csv(filepath, index=False, lineterminator='\n')
    return filepath


def _metadata(cfg, command, settings, model, summary=None):
    return {
        'command': command,
        'config': cfg.to_flat(),
        'seed': cfg.get('init.seed'),
        'sampler': cfg.sampler_bounds(settings) if cfg.uses_sampler else None,
        'alpha': model.alpha,
        'summary': summary or {},
    }


def resolve_bound(cfg, model):
    """
    audit.bound 해석

    Returns:
        tuple: (상한 또는 None, 균일 상한 적용 여부 또는 None)
    """
    logger = setup_logger()
    setting = cfg['audit.bound']
    if setting != 'uniform':
        return float(setting), None
    try:
        bound, applicable = uniform_rho_bound(model)
    except DivergenceError as e:
        logger.warning(f"균일 상한 계산 실패: {str(e)}")
        return None, False
    return (bound if applicable else None), applicable


def audit_params(cfg, model):
    bound, applicable = resolve_bound(cfg, model)
    return {
        'bound': bound,
        'uniform_applicable': applicable,
        'window': cfg['audit.window'],
        'gamma_dev': cfg['audit.gamma_dev'],
        'seed': cfg.get('init.seed', 0),
    }


def orbit_summary(orbit):
    """마지막 상태 요약"""
    return {
        'rows': len(orbit),
        'T': int(orbit.t[-1]),
        'final_dist_fixed': float(orbit.dist_fixed[-1]),
        'final_mean_x': float(orbit.mean_x[-1]),
        'max_ratio': float(np.max(orbit.ratio_max)),
        'boundary_flag': bool(orbit.boundary_flag),
    }


def _post_artifacts(cfg, output_dir, settings, plot, pdf, orbit=None, model=None,
                    audit=None, stability=None, title=''):
    """선택 산출물 (PNG, PDF)"""
    logger = setup_logger()
    files = []
    plot = plot or cfg['output.plot']
    pdf = pdf or cfg['output.pdf']
    if not (plot or pdf):
        return files
    plot_settings = (settings or DEFAULT_SETTINGS).get('plot', DEFAULT_SETTINGS['plot'])
    visualizer = OrbitVisualizer(output_dir=output_dir, dpi=plot_settings.get('dpi', 100),
                                 figsize=tuple(plot_settings.get('figsize', (12, 6))))
    images = []
    try:
        if orbit is not None:
            images.append(visualizer.plot_ratio_series(orbit, cfg['output.prefix']))
            if orbit.N == 2 and model is not None and model.f.kind == SMOOTH_C4:
                images.append(visualizer.plot_normal_plane(model, orbit, cfg['output.prefix']))
        elif model is not None:
            images.append(visualizer.plot_f_family(model.f, model.alpha, cfg['output.prefix']))
    except MarketModelError as e:
        logger.error(f"그래프 생성 실패: {str(e)}")
    images = [path for path in images if path]
    if plot:
        files.extend(images)
    if pdf:
        analysis = OrbitDataProcessor().analyze_orbit(orbit) if orbit is not None else None
        generator = ReportGenerator(output_dir=output_dir)
        filepath = generator.generate_report(
            title=title or cfg['output.prefix'], config=cfg.to_flat(), analysis=analysis,
            audit=audit, stability=stability, images=images,
            filename=f"{cfg['output.prefix']}.pdf")
        if filepath:
            files.append(filepath)
    if not plot:
        for path in images:
            os.remove(path)
    return files


def run_simulate(cfg, output_dir='output', settings=None, fmt=CSV, plot=False, pdf=False):
    """
    궤도 생성과 CSV/JSON 저장

    Args:
        cfg (ExperimentConfig): 검증된 설정
        output_dir (str): 출력 디렉토리
        settings (dict): 공통 설정 (sampler 기본값, plot)
        fmt (str): 'csv' | 'json'

    Returns:
        dict: command, exit_code, files, summary, orbit
    """
    logger = setup_logger()
    model = cfg.build_model()
    s0 = cfg.initial_state(settings)
    logger.info(f"궤도 생성 시작: N={model.N}, alpha={model.alpha}, T={cfg['run.T']}")
    orbit = simulate(model, s0, cfg['run.T'], cfg['run.record_every'])
    summary = orbit_summary(orbit)

    files = [_write_table(orbit.to_frame(), output_dir, cfg, '', fmt)]
    files.append(write_json(_metadata(cfg, 'simulate', settings, model, summary),
                            _output_path(output_dir, cfg, '.meta.json')))
    files.extend(_post_artifacts(cfg, output_dir, settings, plot, pdf, orbit=orbit, model=model,
                                 title='궤도 시뮬레이션'))
    logger.info(f"궤도 요약: dist_fixed={summary['final_dist_fixed']:.6g}, "
                f"mean_x={summary['final_mean_x']:.6g}, max_ratio={summary['max_ratio']:.6g}")
    return {'command': 'simulate', 'exit_code': EXIT_OK, 'files': files,
            'summary': summary, 'orbit': orbit}


def _sweep_point(task):
    """
    sweep 격자 한 점 (작업 프로세스에서 실행)

    실패는 예외 대신 행의 error 열에 남긴다.
    """
    cfg, alpha, g_a, settings = task
    row = {'alpha': alpha, 'g_a': g_a, 'status': 'ok', 'error': ''}
    try:
        model = cfg.build_model(alpha=alpha, g_a=g_a)
        if cfg['sweep.audits']:
            orbit = simulate(model, cfg.initial_state(settings), cfg['run.T'], cfg['run.record_every'])
            summary = orbit_summary(orbit)
            for key in ('final_dist_fixed', 'final_mean_x', 'max_ratio'):
                row[key] = summary[key]
            report = run_audits(cfg['audit.names'], orbit, model, audit_params(cfg, model))
            row['audits_passed'] = report.passed
            row['failed_checks'] = ';'.join(check.name for check in report.failed_checks())
            for key, value in sorted(report.constants.items()):
                row[f'c.{key}'] = value
        if model.N == 2:
            stability = stability_margin(model, stability_method(model.f))
            row['classification'] = stability.classification
            row['stability_verdict'] = stability.verdict
            row['margin'] = stability.margin
            row['theta'] = stability.theta
    except MarketModelError as e:
        row['status'] = 'error'
        row['error'] = f"{type(e).__name__}: {str(e)}"
    return row


def sweep_table(cfg, settings=None, threads=1, chunk_size=1):
    """
    alpha x g.a 격자 실행

    행은 실행 순서와 무관하게 (alpha, g_a) 순으로 정렬된다.

    Returns:
        pandas.DataFrame: 격자점별 결과
    """
    logger = setup_logger()
    alphas = cfg.get('sweep.alpha') or [cfg.build_model().alpha]
    g_as = cfg.get('sweep.g_a') or [cfg['g.a']]
    tasks = [(cfg, float(a), float(g), settings) for a in sorted(set(alphas)) for g in sorted(set(g_as))]
    logger.info(f"sweep 시작: {len(tasks)} 점, 작업자 {threads}")
    if threads > 1 and len(tasks) > 1:
        with Pool(processes=min(threads, len(tasks))) as pool:
            rows = pool.map(_sweep_point, tasks, chunksize=max(1, int(chunk_size)))
    else:
        rows = [_sweep_point(task) for task in tasks]
    rows.sort(key=lambda row: (row['alpha'], row['g_a']))

    frame = pd.DataFrame(rows)
    leading = [c for c in ('alpha', 'g_a', 'status', 'error', 'audits_passed', 'failed_checks',
                           'classification', 'stability_verdict', 'margin', 'theta',
                           'final_dist_fixed', 'final_mean_x', 'max_ratio') if c in frame.columns]
    rest = sorted(c for c in frame.columns if c not in leading)
    errors = int((frame['status'] == 'error').sum())
    if errors:
        logger.warning(f"sweep 실패 점: {errors}/{len(frame)}")
    return frame[leading + rest]


def run_sweep(cfg, output_dir='output', settings=None, fmt=CSV, threads=None):
    """
    격자 sweep 표 저장

    Returns:
        dict: command, exit_code, files, summary, table
    """
    settings = settings or DEFAULT_SETTINGS
    sweep_settings = settings.get('sweep', DEFAULT_SETTINGS['sweep'])
    threads = threads or sweep_settings.get('threads', 1)
    table = sweep_table(cfg, settings, threads=int(threads),
                        chunk_size=sweep_settings.get('chunk_size', 1))
    model = cfg.build_model()
    summary = {'points': int(len(table)), 'errors': int((table['status'] == 'error').sum())}
    files = [_write_table(table, output_dir, cfg, '.sweep', fmt)]
    files.append(write_json(_metadata(cfg, 'sweep', settings, model, summary),
                            _output_path(output_dir, cfg, '.meta.json')))
    return {'command': 'sweep', 'exit_code': EXIT_OK, 'files': files,
            'summary': summary, 'table': table}


def _orbit_source(cfg, model, settings):
    logger = setup_logger()
    path = cfg.get('audit.orbit_csv')
    if path:
        orbit = read_orbit_csv(path)
        if orbit.N != model.N:
            raise ConfigError([(cfg.lines.get('audit.orbit_csv'),
                                f"궤도 CSV 의 N={orbit.N} 이 model.N={model.N} 과 다릅니다")])
        orbit.variant = model.variant
        logger.info(f"감사 대상 궤도: {path}")
        return orbit
    return simulate(model, cfg.initial_state(settings), cfg['run.T'], cfg['run.record_every'])


def run_audit(cfg, output_dir='output', settings=None, plot=False, pdf=False):
    """
    궤도 감사 보고서 저장

    Returns:
        dict: command, exit_code (적용 가능한 검사 실패 시 1), files, summary, report
    """
    logger = setup_logger()
    model = cfg.build_model()
    orbit = _orbit_source(cfg, model, settings)
    report = run_audits(cfg['audit.names'], orbit, model, audit_params(cfg, model))

    verified, worst = orbit.verify(model)
    if verified is not None:
        extra = AuditReport()
        extra.add_check('step_equations', verified, measured=worst, tolerance=1e-12,
                        anchor='recorded states satisfy the step equations')
        report = report.merge(extra, prefix='orbit')

    summary = orbit_summary(orbit)
    summary['passed'] = report.passed
    summary['failed_checks'] = [check.name for check in report.failed_checks()]
    files = [write_json(report, _output_path(output_dir, cfg, '.audit.json'))]
    files.append(write_json(_metadata(cfg, 'audit', settings, model, summary),
                            _output_path(output_dir, cfg, '.meta.json')))
    files.extend(_post_artifacts(cfg, output_dir, settings, plot, pdf, orbit=orbit, model=model,
                                 audit=report, title='궤도 감사'))
    if report.passed:
        logger.info("모든 적용 가능한 검사 통과")
    else:
        logger.error(f"실패한 검사: {summary['failed_checks']}")
    return {'command': 'audit', 'exit_code': EXIT_OK if report.passed else EXIT_AUDIT_FAILURE,
            'files': files, 'summary': summary, 'report': report}


def run_stability(cfg, output_dir='output', settings=None, plot=False, pdf=False):
    """
    고정점 안정성 보고서 저장 (판정이 inconclusive 여도 종료 코드 0)

    stability.corroborate 가 켜져 있고 타원형이면 시뮬레이션 감쇠와 회전각 측정을
    corroboration 에 덧붙인다.
    """
    logger = setup_logger()
    model = cfg.build_model()
    report = stability_margin(model, stability_method(model.f))
    orbit = None
    if cfg['stability.corroborate'] and report.classification == ELLIPTIC:
        s0 = cfg.skew_initial_state(settings)
        report.corroboration = corroborate_decay(model, s0, T=cfg['stability.corroborate_T'],
                                                 stride=cfg['stability.stride'])
        report.corroboration['measured_theta'] = measure_rotation(model)
        if plot or pdf or cfg['output.plot'] or cfg['output.pdf']:
            orbit = simulate_skew(model, s0, cfg['stability.corroborate_T'], cfg['stability.stride'])
    elif cfg['stability.corroborate']:
        logger.warning(f"{report.classification} 고정점은 감쇠 확인을 건너뜁니다")

    summary = {'classification': report.classification, 'verdict': report.verdict,
               'margin': report.margin, 'theta': report.theta, 'failing': report.failing}
    files = [write_json(report, _output_path(output_dir, cfg, '.stability.json'))]
    files.append(write_json(_metadata(cfg, 'stability', settings, model, summary),
                            _output_path(output_dir, cfg, '.meta.json')))
    files.extend(_post_artifacts(cfg, output_dir, settings, plot, pdf, orbit=orbit, model=model,
                                 stability=report, title='고정점 안정성'))
    return {'command': 'stability', 'exit_code': EXIT_OK, 'files': files,
            'summary': summary, 'report': report}


def validation_report(cfg):
    """f, g (그리고 비대칭 사상족이면 sandwich) 가정 검사 병합"""
    model = cfg.build_model()
    reports = {
        'f': validate_f(model.f, model.N),
        'g': validate_g(model.g, model.N, seed=cfg.get('init.seed', 0)),
    }
    if model.f.kind == SKEWED_QUADRATIC:
        reports['sandwich'] = validate_sandwich(model.f, model.f.gamma)
    report = merge_reports(reports)
    try:
        report.set_constant('T_N', compute_T_N(model))
    except DivergenceError:
        report.set_constant('T_N', math.inf)
    return model, report


def run_validate(cfg, output_dir='output', settings=None, plot=False, pdf=False):
    """사상족 가정 검사 보고서 저장"""
    model, report = validation_report(cfg)
    summary = {'passed': report.passed,
               'failed_checks': [check.name for check in report.failed_checks()]}
    files = [write_json(report, _output_path(output_dir, cfg, '.validate.json'))]
    files.extend(_post_artifacts(cfg, output_dir, settings, plot, pdf, model=model,
                                 audit=report, title='사상족 검증'))
    return {'command': 'validate', 'exit_code': EXIT_OK if report.passed else EXIT_AUDIT_FAILURE,
            'files': files, 'summary': summary, 'report': report}


def run_find_periodic(cfg, output_dir='output', settings=None):
    """
    periodic.rho 의 각 값에 대한 4-주기 궤도 탐색

    결과는 AuditReport 형태 (rho 별 검사 항목) 와 궤도 목록으로 저장한다.
    """
    logger = setup_logger()
    model = cfg.build_model()
    report = AuditReport()
    orbits = []
    for rho in cfg['periodic.rho']:
        result = find_periodic_orbit(model, rho, cfg['periodic.period'])
        orbits.append(result.to_dict())
        report.add_check(f'periodic_rho_{rho:g}', result.found, measured=result.residual,
                         tolerance=1e-9, anchor='period-4 orbit with ratio pattern (1, rho, 1, 1/rho)',
                         detail=result.message)
        report.set_constant(f'max_ratio_{rho:g}', result.max_ratio)
    payload = {**report.to_dict(), 'orbits': orbits}
    summary = {'found': [o['rho'] for o in orbits if o['found']],
               'missing': [o['rho'] for o in orbits if not o['found']]}
    if summary['missing']:
        logger.warning(f"주기 궤도를 찾지 못한 rho: {summary['missing']}")
    files = [write_json(payload, _output_path(output_dir, cfg, '.periodic.json'))]
    return {'command': 'find-periodic',
            'exit_code': EXIT_OK if report.passed else EXIT_AUDIT_FAILURE,
            'files': files, 'summary': summary, 'report': report}


# 명령 이름 -> (실행 함수, 받는 명령행 선택 인자)
COMMANDS = {
    'simulate': (run_simulate, ('fmt', 'plot', 'pdf')),
    'sweep': (run_sweep, ('fmt', 'threads')),
    'audit': (run_audit, ('plot', 'pdf')),
    'stability': (run_stability, ('plot', 'pdf')),
    'validate': (run_validate, ('plot', 'pdf')),
    'find-periodic': (run_find_periodic, ()),
}

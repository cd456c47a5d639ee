# test_experiments.py
import json
import math
import os

import pandas as pd
import pytest

from main import COMMAND_HELP, main
from modules.experiments.config import DEFAULTS, load_experiment_config, parse_config
from modules.experiments.runner import (
    COMMANDS, audit_params, run_audit, run_find_periodic, run_simulate, run_stability, run_sweep,
    run_validate, stability_method, sweep_table,
)
from modules.market.families import FMapFamily
from modules.utils.errors import ConfigError

BASIC = """
# 두 판매자 기본 실험
model.N = 2
model.alpha = 0.5
init.seed = 3
run.T = 200
output.prefix = basic
"""

SMOOTH = """
model.theta = 0.5235987755982988
f.kind = smooth_c4
init.x = [0.51, 0.48]
init.rho = [1.1]
run.T = 120
run.record_every = 12
stability.corroborate = true
stability.corroborate_T = 600
output.prefix = smooth
"""


def write_config(tmp_path, text, name='exp.conf'):
    path = tmp_path / name
    path.write_text(text, encoding='utf-8')
    return str(path)


def run_cli(tmp_path, command, config_text, *extra):
    config = write_config(tmp_path, config_text)
    out = tmp_path / 'out'
    code = main([command, '--config', config, '--out', str(out),
                 '--config-dir', str(tmp_path / 'no_settings'), *extra])
    return code, out


# ---------------------------------------------------------------------------
# 설정 파서
# ---------------------------------------------------------------------------

def test_parse_config_applies_defaults():
    cfg = parse_config(BASIC)
    assert cfg.N == 2
    assert cfg['g.a'] == DEFAULTS['g.a']
    assert cfg['audit.bound'] == 'uniform'
    assert cfg.lines['model.alpha'] == 4


def test_parse_config_collects_every_error_with_line_numbers():
    text = "model.N = 2\nmodel.alpha = 1.0\nfoo.bar = 3\ng.a = abc\nnot a pair\nmodel.N = 3\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert [line for line, _ in info.value.errors] == [2, 3, 4, 5, 6, None]
    assert '2행' in str(info.value)
    # 값이 잘못된 model.alpha 에 대해 "alpha 없음" 은 중복 보고하지 않는다
    assert 'init.seed' in info.value.errors[-1][1]


def test_parse_config_reports_line_and_cross_key_errors_together():
    with pytest.raises(ConfigError) as info:
        parse_config("model.alpha = 0.5\ninit.x = [0.5, 0.5, 0.5]\ng.a = 2\n")
    assert [line for line, _ in info.value.errors] == [3, 2]
    assert 'g.a' in info.value.errors[0][1]
    assert 'init.x' in info.value.errors[1][1]


def test_parse_config_skips_cross_checks_on_unparsed_keys():
    with pytest.raises(ConfigError) as info:
        parse_config("model.N = many\nmodel.alpha = 0.5\ninit.x = [0.5, 0.5, 0.5]\n")
    assert [line for line, _ in info.value.errors] == [1]


def test_parse_config_cross_key_checks():
    with pytest.raises(ConfigError) as info:
        parse_config("model.alpha = 0.5\nmodel.theta = 0.5\n")
    messages = ' '.join(message for _, message in info.value.errors)
    assert 'model.theta' in messages
    assert 'init.seed' in messages


@pytest.mark.parametrize('text', [
    "model.alpha = 0.5\ninit.x = [0.5, 0.5, 0.5]\n",
    "model.alpha = 0.5\ninit.x = [0.5, 0.5]\ninit.p = [1.0, 1.0]\ninit.rho = [1.0]\n",
    "model.alpha = 0.5\ninit.p = [1.0, 1.0]\n",
    "model.N = 3\nmodel.alpha = 0.5\nmodel.variant = alt2\ninit.seed = 1\n",
    "model.alpha = 0.5\ninit.seed = 1\ninit.x_low = 0.8\ninit.x_high = 0.2\n",
    "model.alpha = 0.5\ninit.seed = -1\n",
    "model.alpha = 0.5\ninit.seed = 1\naudit.names = [rho_bounds, unknown]\n",
])
def test_parse_config_rejects_inconsistent_settings(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_parse_config_reads_exponent_notation():
    cfg = parse_config("model.alpha = 0.5\ninit.seed = 1\ng.kind = quadratic\ng.b = -1e-2\n")
    assert cfg['g.b'] == pytest.approx(-0.01)


def test_theta_derives_alpha():
    model = parse_config(SMOOTH).build_model()
    assert model.alpha == pytest.approx(0.580, abs=1e-3)


def test_initial_state_lifts_rho():
    state = parse_config(SMOOTH).initial_state()
    assert state.p.tolist() == [1.1, 1.0]
    assert state.x.tolist() == [0.51, 0.48]


def test_initial_state_seeded_sampler():
    cfg = parse_config(BASIC)
    first, second = cfg.initial_state(), cfg.initial_state()
    assert first.x.tolist() == second.x.tolist()
    assert cfg.with_overrides({'init.seed': 4}).initial_state().x.tolist() != first.x.tolist()


def test_with_overrides_revalidates():
    with pytest.raises(ConfigError):
        parse_config(BASIC).with_overrides({'model.theta': 0.5})


def test_load_experiment_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_experiment_config(str(tmp_path / 'missing.conf'))


def test_shipped_experiment_configs_parse():
    directory = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'config', 'experiments')
    names = sorted(name for name in os.listdir(directory) if name.endswith('.conf'))
    assert names
    for name in names:
        load_experiment_config(os.path.join(directory, name)).build_model()


# ---------------------------------------------------------------------------
# 실행기
# ---------------------------------------------------------------------------

def test_stability_method_choice():
    assert stability_method(FMapFamily.smooth_c4()) == 'analytic'
    assert stability_method(FMapFamily.piecewise_affine()) == 'finite_difference'


def test_audit_params_uniform_bound():
    cfg = parse_config(BASIC)
    params = audit_params(cfg, cfg.build_model())
    assert params['uniform_applicable'] is True
    assert params['bound'] > 0.0


def test_run_simulate_single_step(tmp_path):
    cfg = parse_config(BASIC).with_overrides({'run.T': 1})
    result = run_simulate(cfg, str(tmp_path))
    frame = pd.read_csv(result['files'][0])
    assert len(frame) == 2
    assert result['summary']['rows'] == 2
    with open(result['files'][1], encoding='utf-8') as f:
        meta = json.load(f)
    assert meta['seed'] == 3
    assert meta['sampler']['x_low'] == pytest.approx(0.05)


def test_run_simulate_json_format(tmp_path):
    result = run_simulate(parse_config(BASIC), str(tmp_path), fmt='json')
    assert result['files'][0].endswith('basic.json')
    with open(result['files'][0], encoding='utf-8') as f:
        table = json.load(f)
    assert len(table['t']) == 201


def test_run_audit_passes_and_writes_report(tmp_path):
    cfg = parse_config(BASIC + "audit.names = [rho_bounds, mean_volume, fraction_bounds]\n")
    result = run_audit(cfg, str(tmp_path))
    assert result['exit_code'] == 0
    with open(os.path.join(str(tmp_path), 'basic.audit.json'), encoding='utf-8') as f:
        report = json.load(f)
    names = {check['name'] for check in report['checks']}
    assert 'step_equations' in names


def test_run_audit_from_orbit_csv(tmp_path):
    simulated = run_simulate(parse_config(BASIC), str(tmp_path / 'sim'))
    cfg = parse_config(BASIC + f"audit.orbit_csv = {simulated['files'][0]}\n"
                       "audit.names = [rho_bounds, mean_volume]\n")
    assert run_audit(cfg, str(tmp_path / 'audit'))['exit_code'] == 0


def test_run_audit_orbit_csv_size_mismatch(tmp_path):
    simulated = run_simulate(parse_config(BASIC), str(tmp_path / 'sim'))
    text = BASIC.replace('model.N = 2', 'model.N = 3')
    cfg = parse_config(text + f"audit.orbit_csv = {simulated['files'][0]}\n")
    with pytest.raises(ConfigError):
        run_audit(cfg, str(tmp_path / 'audit'))


def test_run_stability_with_corroboration(tmp_path):
    result = run_stability(parse_config(SMOOTH), str(tmp_path))
    assert result['exit_code'] == 0
    assert result['summary']['verdict'] == 'stable'
    corroboration = result['report'].corroboration
    assert corroboration['measured_theta'] == pytest.approx(math.pi / 6.0, abs=1e-3)
    assert os.path.exists(os.path.join(str(tmp_path), 'smooth.stability.json'))


def test_run_validate_flags_asymmetric_family(tmp_path):
    cfg = parse_config(BASIC + "f.kind = skewed_quadratic\n")
    result = run_validate(cfg, str(tmp_path))
    assert result['exit_code'] == 1
    assert 'hf3_symmetry' in result['summary']['failed_checks']
    assert result['report'].constants['S_g'] == pytest.approx(3.0)


def test_run_find_periodic(tmp_path):
    cfg = parse_config("model.alpha = 0.0\ng.a = 1.0\ninit.seed = 7\nperiodic.rho = [2.0, 50.0]\n")
    result = run_find_periodic(cfg, str(tmp_path))
    assert result['exit_code'] == 0
    assert result['summary']['found'] == [2.0, 50.0]


def test_sweep_serial_and_parallel_agree():
    text = BASIC.replace('run.T = 200', 'run.T = 100')
    cfg = parse_config(text + "sweep.alpha = [0.2, 0.6]\nsweep.g_a = [0.25, 0.5]\n"
                       "audit.names = [rho_bounds, fraction_bounds]\n")
    serial = sweep_table(cfg, threads=1)
    parallel = sweep_table(cfg, threads=2)
    pd.testing.assert_frame_equal(serial, parallel)
    assert list(zip(serial['alpha'], serial['g_a'])) == [(0.2, 0.25), (0.2, 0.5), (0.6, 0.25), (0.6, 0.5)]
    assert (serial['status'] == 'ok').all()
    assert 'classification' in serial.columns


def test_sweep_without_audits_keeps_stability_columns(tmp_path):
    cfg = parse_config("model.theta = 0.5\nf.kind = smooth_c4\ninit.seed = 1\nrun.T = 20\n"
                       "sweep.g_a = [0.0, 0.5]\nsweep.audits = false\n")
    result = run_sweep(cfg, str(tmp_path), threads=1)
    table = result['table']
    assert result['summary']['points'] == 2
    assert 'final_mean_x' not in table.columns
    assert set(table['classification']) <= {'parabolic', 'elliptic'}


# ---------------------------------------------------------------------------
# 명령행
# ---------------------------------------------------------------------------

def test_cli_simulate_is_byte_deterministic(tmp_path):
    first = tmp_path / 'a'
    second = tmp_path / 'b'
    first.mkdir()
    second.mkdir()
    code_a, out_a = run_cli(first, 'simulate', BASIC)
    code_b, out_b = run_cli(second, 'simulate', BASIC)
    assert code_a == code_b == 0
    for name in ('basic.csv', 'basic.meta.json'):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_cli_seed_override(tmp_path):
    code, out = run_cli(tmp_path, 'simulate', BASIC, '--seed', '99')
    assert code == 0
    with open(out / 'basic.meta.json', encoding='utf-8') as f:
        assert json.load(f)['seed'] == 99


def test_cli_config_error_exit_code(tmp_path):
    code, _ = run_cli(tmp_path, 'simulate', "model.alpha = 1.0\n")
    assert code == 2


def test_cli_rejects_negative_seed_and_threads(tmp_path):
    assert run_cli(tmp_path, 'simulate', BASIC, '--seed', '-1')[0] == 2
    assert run_cli(tmp_path, 'sweep', BASIC, '--threads', '0')[0] == 2


def test_cli_missing_config_file(tmp_path):
    code = main(['audit', '--config', str(tmp_path / 'nope.conf'),
                 '--config-dir', str(tmp_path), '--out', str(tmp_path / 'out')])
    assert code == 2


def test_cli_validate_failure_exit_code(tmp_path):
    code, out = run_cli(tmp_path, 'validate', BASIC + "f.kind = skewed_quadratic\n")
    assert code == 1
    assert (out / 'basic.validate.json').exists()


def test_cli_audit_with_plot_and_pdf(tmp_path):
    code, out = run_cli(tmp_path, 'audit', BASIC + "audit.names = [rho_bounds, fraction_bounds]\n",
                        '--plot', '--pdf')
    assert code == 0
    assert (out / 'basic_ratio.png').exists()
    assert (out / 'basic.pdf').exists()


def test_cli_requires_subcommand():
    with pytest.raises(SystemExit):
        main([])


def test_every_cli_command_has_a_runner():
    assert set(COMMAND_HELP) == set(COMMANDS)


def test_cli_find_periodic_and_stability(tmp_path):
    (tmp_path / 'periodic').mkdir()
    (tmp_path / 'stability').mkdir()
    periodic = "model.alpha = 0.0\ng.a = 1.0\ninit.seed = 7\nperiodic.rho = [2.0]\noutput.prefix = cycle\n"
    code, out = run_cli(tmp_path / 'periodic', 'find-periodic', periodic)
    assert code == 0
    assert (out / 'cycle.periodic.json').exists()
    code, out = run_cli(tmp_path / 'stability', 'stability', SMOOTH.replace('stability.corroborate = true',
                                                                            'stability.corroborate = false'))
    assert code == 0
    assert (out / 'smooth.stability.json').exists()


def test_cli_sweep_json_format(tmp_path):
    text = BASIC.replace('run.T = 200', 'run.T = 20')
    code, out = run_cli(tmp_path, 'sweep', text + "sweep.alpha = [0.2, 0.6]\n", '--format', 'json',
                        '--threads', '1')
    assert code == 0
    assert (out / 'basic.sweep.json').exists()

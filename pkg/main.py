# main.py
import os
import sys
import argparse
import warnings

# 모듈 경로 추가
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from modules.experiments.config import load_experiment_config
from modules.experiments.runner import COMMANDS, FORMATS
from modules.utils.config_loader import load_all_configs
from modules.utils.errors import EXIT_CONFIG_ERROR, ConfigError, MarketModelError
from modules.utils.logger import set_log_level, setup_logger
from modules.utils.serialization import dumps_report

COMMAND_HELP = {
    'simulate': '궤도 생성 후 CSV/JSON 저장',
    'sweep': 'alpha x g.a 격자 sweep 표 생성',
    'audit': '궤도 감사 (적용 가능한 검사 실패 시 종료 코드 1)',
    'stability': 'N = 2 고정점 안정성 보고서',
    'validate': '사상족 가정 (Hf*, Hg*) 검사',
    'find-periodic': 'N = 2 4-주기 궤도 탐색',
}


def build_parser():
    """
    명령행 파서 생성

    Returns:
        argparse.ArgumentParser: 하위 명령이 등록된 파서
    """
    parser = argparse.ArgumentParser(description='OTC 도매시장 개체군 동역학 실험 도구')
    subparsers = parser.add_subparsers(dest='command', required=True)

    for name, help_text in COMMAND_HELP.items():
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument('--config', required=True, help='실험 설정 파일 (key = value 형식)')
        sub.add_argument('--out', help='출력 디렉토리 (기본: settings.yaml 의 general.output_dir)')
        sub.add_argument('--seed', type=int, help='init.seed 덮어쓰기 (0 <= seed < 2^64)')
        sub.add_argument('--threads', type=int, help='sweep 작업자 수')
        sub.add_argument('--format', choices=FORMATS, default='csv', help='표 출력 형식')
        sub.add_argument('--plot', action='store_true', help='PNG 그래프 저장')
        sub.add_argument('--pdf', action='store_true', help='PDF 보고서 저장')
        sub.add_argument('--verbose', action='store_true', help='DEBUG 로그 출력')
        sub.add_argument('--config-dir', default='config', help='settings.yaml 디렉토리')
    return parser


def dispatch(args, cfg, settings, output_dir):
    """명령 이름에 맞는 run_* 호출"""
    func, options = COMMANDS[args.command]
    available = {'fmt': args.format, 'threads': args.threads, 'plot': args.plot, 'pdf': args.pdf}
    return func(cfg, output_dir, settings, **{name: available[name] for name in options})


def main(argv=None):
    """
    메인 함수

    Returns:
        int: 종료 코드 (0 정상, 1 감사 실패, 2 설정/입출력 오류, 3 수치 오류)
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    configs = load_all_configs(args.config_dir)
    settings = configs['settings']
    general = settings['general']
    logger = setup_logger(log_dir=general['log_dir'], log_level=general['log_level'])
    if args.verbose:
        set_log_level('DEBUG')

    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print(f"오류: --seed 는 [0, 2^64) 범위여야 합니다: {args.seed}")
        return EXIT_CONFIG_ERROR
    if args.threads is not None and args.threads < 1:
        print(f"오류: --threads 는 1 이상이어야 합니다: {args.threads}")
        return EXIT_CONFIG_ERROR

    output_dir = args.out or general['output_dir']
    try:
        cfg = load_experiment_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_overrides({'init.seed': args.seed})
        logger.info(f"'{args.command}' 실행: {args.config}")
        result = dispatch(args, cfg, settings, output_dir)
    except ConfigError as e:
        logger.error(f"설정 오류:\n{str(e)}")
        return e.exit_code
    except MarketModelError as e:
        logger.error(f"{type(e).__name__}: {str(e)}")
        return e.exit_code
    except OSError as e:
        logger.error(f"파일 입출력 오류: {str(e)}")
        return EXIT_CONFIG_ERROR

    # 요약 출력
    print(dumps_report(result['summary']), end='')
    for filepath in result['files']:
        print(f"저장: {os.path.abspath(filepath)}")
    return result['exit_code']


if __name__ == "__main__":
    # matplotlib 경고 무시
    warnings.filterwarnings("ignore", category=UserWarning)

    # 실행
    sys.exit(main())

# modules/utils/config_loader.py
import yaml
import os

# settings.yaml 이 없거나 일부 키가 빠졌을 때 쓰는 기본값
DEFAULT_SETTINGS = {
    'general': {
        'output_dir': 'output',
        'log_dir': 'logs',
        'log_level': 'INFO',
    },
    'sweep': {
        'threads': 1,
        'chunk_size': 1,
    },
    'sampler': {
        'x_low': 0.05,
        'x_high': 0.95,
        'p_low': 0.5,
        'p_high': 2.0,
    },
    'plot': {
        'dpi': 100,
        'figsize': [12, 6],
    },
}


def load_config(config_file):
    """
    YAML 설정 파일 로드

    Args:
        config_file (str): 설정 파일 경로

    Returns:
        dict: 설정 데이터
    """
    if not os.path.exists(config_file):
        raise FileNotFoundError(f"설정 파일을 찾을 수 없습니다: {config_file}")

    with open(config_file, 'r', encoding='utf-8') as file:
        config = yaml.safe_load(file)

    return config or {}


def merge_settings(defaults, overrides):
    """
    기본 설정 위에 사용자 설정을 재귀적으로 덮어쓰기

    Args:
        defaults (dict): 기본 설정
        overrides (dict): 사용자 설정

    Returns:
        dict: 병합된 설정 (입력은 변경하지 않음)
    """
    merged = {}
    for key, value in defaults.items():
        merged[key] = dict(value) if isinstance(value, dict) else value
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_settings(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_all_configs(config_dir="config"):
    """
    config 디렉토리의 공통 설정 파일 로드

    Args:
        config_dir (str): 설정 파일 디렉토리

    Returns:
        dict: 설정 데이터 (파일명을 키로 사용), settings 는 기본값과 병합됨
    """
    configs = {}

    config_files = {
        'settings': os.path.join(config_dir, 'settings.yaml'),
    }

    for key, file_path in config_files.items():
        try:
            configs[key] = load_config(file_path)
        except FileNotFoundError as e:
            print(f"경고: {e}")
            configs[key] = {}

    configs['settings'] = merge_settings(DEFAULT_SETTINGS, configs.get('settings'))
    return configs


def coerce_scalar(text):
    """
    평문 설정 값(`key = value` 의 value)을 YAML 규칙으로 해석

    '0.5' -> 0.5, '[0.6, 0.4]' -> [0.6, 0.4], 'true' -> True, 'linear' -> 'linear'

    Args:
        text (str): 원문 값

    Returns:
        해석된 값

    Raises:
        yaml.YAMLError: YAML 로 해석할 수 없는 경우
    """
    return _numeric_strings(yaml.safe_load(text))


def _numeric_strings(value):
    # YAML 1.1 은 '1e-4', '2E5' 같은 지수 표기를 문자열로 읽는다
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    if isinstance(value, list):
        return [_numeric_strings(item) for item in value]
    return value

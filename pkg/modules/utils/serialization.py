# modules/utils/serialization.py
import json
import math
import os
from dataclasses import asdict, is_dataclass

import numpy as np


def to_plain(value):
    """
    보고서 객체를 JSON 으로 직렬화 가능한 기본 타입으로 변환

    numpy 스칼라/배열, 복소수, dataclass, 비유한 실수를 처리한다.
    무한대는 문자열 'inf' / '-inf', NaN 은 'nan' 으로 표시한다.

    Args:
        value: 변환할 값

    Returns:
        변환된 값 (dict, list, str, int, float, bool, None)
    """
    if hasattr(value, 'to_dict') and not isinstance(value, (dict, type)):
        return to_plain(value.to_dict())
    if is_dataclass(value) and not isinstance(value, type):
        return to_plain(asdict(value))
    if isinstance(value, dict):
        return {str(key): to_plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return [to_plain(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {'re': to_plain(float(value.real)), 'im': to_plain(float(value.imag))}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        # 17 유효숫자로 정규화 (round-trip 보장, 같은 입력이면 같은 바이트)
        return float(format(value, '.17g'))
    return value


def dumps_report(report):
    """
    결정적 JSON 문자열 생성 (키 정렬, UTF-8, 마지막 줄바꿈)

    Args:
        report: AuditReport / StabilityReport / dict

    Returns:
        str: JSON 텍스트
    """
    return json.dumps(to_plain(report), sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def write_json(report, filepath):
    """
    보고서를 JSON 파일로 저장

    Args:
        report: 저장할 보고서
        filepath (str): 저장 경로

    Returns:
        str: 저장된 파일 경로
    """
    directory = os.path.dirname(filepath)
    if directory and not os.path.exists(directory):
        os.makedirs(directory)
    with open(filepath, 'w', encoding='utf-8', newline='\n') as f:
        f.write(dumps_report(report))
    return filepath

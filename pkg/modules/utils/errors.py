# modules/utils/errors.py
"""
시장 모델 예외 계층

CLI 종료 코드 규약: 0 정상, 1 감사 실패, 2 설정/입출력 오류, 3 수치 오류.
"""

EXIT_OK = 0
EXIT_AUDIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERIC_ERROR = 3


class MarketModelError(Exception):
    """모든 도메인 예외의 기반 클래스"""
    exit_code = EXIT_NUMERIC_ERROR


class DomainError(MarketModelError, ValueError):
    """
    매개변수/정의역 위반 (rho <= 0, alpha 범위 밖, |d| > 1 등)
    """
    exit_code = EXIT_CONFIG_ERROR


class NumericError(MarketModelError, ArithmeticError):
    """
    비유한 값, 오버플로, 허용 오차를 넘는 [0,1] 이탈

    Args:
        message (str): 오류 설명
        index (int): 문제가 된 판매자 인덱스 (0부터)
        t (int): 문제가 발생한 시각
    """
    exit_code = EXIT_NUMERIC_ERROR

    def __init__(self, message, index=None, t=None):
        self.base_message = message
        self.index = index
        self.t = t
        details = []
        if index is not None:
            details.append(f"index={index}")
        if t is not None:
            details.append(f"t={t}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)

    def at_time(self, t):
        """시각 정보를 붙인 새 예외 반환"""
        return type(self)(self.base_message, index=self.index, t=t)


class InversionError(NumericError):
    """단조 역함수 계산이 구간을 잡지 못함"""


class DivergenceError(NumericError):
    """반복 상한 초과 (잘못된 사상족의 신호)"""


class InconsistencyError(NumericError):
    """계산된 상수가 성립해야 할 범위를 벗어남 (예: gamma >= 1)"""


class ClassificationError(MarketModelError):
    """안정성 분석의 전제(타원형 고정점 등)가 성립하지 않음"""
    exit_code = EXIT_NUMERIC_ERROR


class ConfigError(MarketModelError):
    """
    설정 오류 모음 (fail-fast 하지 않고 모두 수집)

    Args:
        errors (list): (줄 번호 또는 None, 메시지) 튜플 목록
    """
    exit_code = EXIT_CONFIG_ERROR

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [(None, errors)]
        self.errors = list(errors)
        super().__init__(format_errors(self.errors))


class OrbitFormatError(ConfigError):
    """궤도 CSV 파싱 오류 (행 번호 포함)"""


def format_errors(errors):
    """
    수집된 오류를 한 줄씩 사람이 읽을 수 있는 문자열로 변환

    Args:
        errors (list): (줄 번호, 메시지) 튜플 목록

    Returns:
        str: 포맷된 오류 메시지
    """
    lines = []
    for line_no, message in errors:
        if line_no is None:
            lines.append(f"- {message}")
        else:
            lines.append(f"- {line_no}행: {message}")
    return "\n".join(lines)

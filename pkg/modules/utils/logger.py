# modules/utils/logger.py
import logging
import os
from datetime import datetime

LOGGER_NAME = 'otc_market_dynamics'
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def _resolve_level(log_level):
    """
    문자열/정수 로그 레벨을 logging 레벨 값으로 변환

    Args:
        log_level (int | str): 'DEBUG', 'INFO' 등의 이름 또는 logging 상수

    Returns:
        int: logging 레벨 값
    """
    if isinstance(log_level, str):
        level = logging.getLevelName(log_level.upper())
        # 알 수 없는 이름이면 getLevelName 은 문자열을 그대로 돌려준다
        return level if isinstance(level, int) else logging.INFO
    return int(log_level)


def setup_logger(log_dir="logs", log_level=logging.INFO):
    """
    시뮬레이션/감사 공통 로거 설정

    최초 호출에서만 핸들러가 붙고, 이후 호출은 같은 로거를 돌려준다.
    수치 커널(한 스텝 계산 등)에서는 호출하지 않고 궤도/감사/명령 단위에서만 사용한다.

    Args:
        log_dir (str): 로그 파일 저장 디렉토리
        log_level (int | str): 로깅 레벨

    Returns:
        logging.Logger: 설정된 로거 객체
    """
    logger = logging.getLogger(LOGGER_NAME)

    # 이미 핸들러가 있으면 중복 추가 방지
    if logger.handlers:
        return logger

    level = _resolve_level(log_level)
    logger.setLevel(level)

    # 로그 디렉토리가 없으면 생성
    if not os.path.exists(log_dir):
        os.makedirs(log_dir)

    # 로그 파일명 (현재 날짜 기준)
    log_filepath = os.path.join(log_dir, datetime.now().strftime('%Y-%m-%d') + '.log')

    formatter = logging.Formatter(LOG_FORMAT)

    file_handler = logging.FileHandler(log_filepath, encoding='utf-8')
    file_handler.setLevel(level)
    file_handler.setFormatter(formatter)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)

    logger.addHandler(file_handler)
    logger.addHandler(console_handler)
    return logger


def set_log_level(log_level):
    """
    이미 설정된 로거와 모든 핸들러의 레벨 변경 (--verbose 처리용)

    Args:
        log_level (int | str): 새 로깅 레벨
    """
    level = _resolve_level(log_level)
    logger = setup_logger()
    logger.setLevel(level)
    for handler in logger.handlers:
        handler.setLevel(level)

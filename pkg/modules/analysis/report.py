# modules/analysis/report.py
from dataclasses import dataclass, field


@dataclass
class AuditCheck:
    """
    단일 검사 항목

    Args:
        name (str): 검사 이름 (보고서 내에서 유일)
        passed (bool): 통과 여부
        measured (float): 측정값
        tolerance (float): 허용 오차
        anchor (str): 검사 대상 명제/가정 이름
        applicable (bool): 적용 가능 여부 (False 이면 실패로 치지 않음)
        detail (str): 부가 설명
    """
    name: str
    passed: bool
    measured: float = float('nan')
    tolerance: float = 0.0
    anchor: str = ''
    applicable: bool = True
    detail: str = ''

    def to_dict(self):
        return {
            'name': self.name,
            'pass': bool(self.passed),
            'measured': self.measured,
            'tolerance': self.tolerance,
            'anchor': self.anchor,
            'applicable': bool(self.applicable),
            'detail': self.detail,
        }


@dataclass
class AuditReport:
    """
    명제별 검사 결과와 측정 상수 모음

    checks 는 이름순으로 병합되고, constants 는 M, t_prime, T_N, S_g, bound,
    gamma, eps, eps_N 등 이름 붙은 스칼라를 담는다.
    """
    checks: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)

    def add_check(self, name, passed, measured=float('nan'), tolerance=0.0,
                  anchor='', applicable=True, detail=''):
        if not anchor:
            raise ValueError(f"검사 '{name}' 에 anchor 가 없습니다")
        check = AuditCheck(
            name=name,
            passed=bool(passed) if applicable else True,
            measured=_as_float(measured),
            tolerance=float(tolerance),
            anchor=anchor,
            applicable=bool(applicable),
            detail=detail,
        )
        self.checks.append(check)
        return check

    def not_applicable(self, name, anchor, detail=''):
        """적용 불가 항목 기록"""
        return self.add_check(name, True, anchor=anchor, applicable=False, detail=detail)

    def set_constant(self, name, value):
        self.constants[name] = _as_float(value) if not isinstance(value, (str, bool)) else value

    @property
    def passed(self):
        """적용 가능한 모든 검사가 통과했는지 여부"""
        return all(check.passed for check in self.checks if check.applicable)

    def failed_checks(self):
        return [check for check in self.checks if check.applicable and not check.passed]

    def get(self, name):
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def merge(self, other, prefix=None):
        """
        다른 보고서를 병합한 새 보고서 반환

        같은 이름의 검사/상수가 있으면 prefix 를 붙여 구분한다.
        """
        merged = AuditReport(checks=list(self.checks), constants=dict(self.constants))
        names = {check.name for check in merged.checks}
        for check in other.checks:
            if check.name in names and prefix:
                check = AuditCheck(**{**check.__dict__, 'name': f"{prefix}.{check.name}"})
            merged.checks.append(check)
            names.add(check.name)
        for key, value in other.constants.items():
            if key in merged.constants and prefix:
                key = f"{prefix}.{key}"
            merged.constants[key] = value
        merged.checks.sort(key=lambda check: check.name)
        return merged

    def to_dict(self):
        return {
            'checks': [check.to_dict() for check in self.checks],
            'constants': dict(sorted(self.constants.items())),
        }


def merge_reports(named_reports):
    """
    여러 감사 보고서를 이름 순서로 결정적으로 병합

    Args:
        named_reports (dict): 감사 이름 -> AuditReport

    Returns:
        AuditReport: 병합 결과
    """
    merged = AuditReport()
    for name in sorted(named_reports):
        merged = merged.merge(named_reports[name], prefix=name)
    return merged


def _as_float(value):
    if value is None:
        return float('nan')
    try:
        return float(value)
    except (TypeError, ValueError):
        return float('nan')

# modules/reports/pdf_generator.py
import math
import os
from datetime import datetime

from fpdf import FPDF

from ..utils.logger import setup_logger
from ..utils.serialization import to_plain


class AuditPDFReport(FPDF):
    """
    감사/안정성 PDF 보고서 클래스 (FPDF 확장)
    """
    def __init__(self, title="궤도 감사 보고서", format='A4', unit='mm', font='NanumGothic'):
        """
        PDF 보고서 초기화
        """
        super().__init__(orientation='P', unit=unit, format=format)
        self.title = title
        self.default_font = font
        self.unicode_font = False
        self.logger = setup_logger()

        # 기본 여백 설정
        self.set_margins(15, 15, 15)
        self.set_auto_page_break(True, margin=15)

        # 문서 정보 설정
        self.set_creator('otc-market-dynamics')
        self.set_title(title)

        # 한글 지원을 위한 폰트 추가
        try:
            self.add_font(font, '', os.path.join('fonts', f'{font}.ttf'), uni=True)
            self.unicode_font = True
            self.logger.info(f"감사 PDF 한글 폰트 '{font}' 사용 (fonts/{font}.ttf)")
        except Exception as e:
            self.logger.warning(f"fonts/{font}.ttf 를 쓸 수 없어 감사 PDF 를 Latin-1 기본 폰트로 출력합니다 (한글은 '?'): {str(e)}")

    def safe_text(self, value):
        # 기본 Latin-1 폰트에서는 표현 못 하는 글자를 '?' 로 바꾼다
        value = str(value)
        if self.unicode_font:
            return value
        return value.encode('latin-1', 'replace').decode('latin-1')

    def use_font(self, style='', size=9):
        if self.unicode_font:
            self.set_font(self.default_font, '', size)
        else:
            self.set_font('Arial', style, size)

    def header(self):
        """
        페이지 헤더
        """
        self.use_font('B', 15)
        self.cell(0, 10, self.safe_text(self.title), 0, 1, 'C')

        self.set_font('Arial', 'I', 8)
        now = datetime.now().strftime('%Y-%m-%d %H:%M:%S')
        self.cell(0, 5, f'Generated: {now}', 0, 1, 'R')

        # 구분선
        self.line(self.l_margin, self.get_y(), self.w - self.r_margin, self.get_y())
        self.ln(5)

    def footer(self):
        """
        페이지 푸터
        """
        self.set_y(-15)
        self.set_font('Arial', 'I', 8)
        self.cell(0, 10, f'Page {self.page_no()}', 0, 0, 'C')

    def chapter_title(self, title):
        self.use_font('B', 12)
        self.set_fill_color(200, 220, 255)
        self.cell(0, 6, self.safe_text(title), 0, 1, 'L', 1)
        self.ln(4)

    def section_title(self, title):
        self.use_font('B', 10)
        self.set_text_color(0, 0, 140)
        self.cell(0, 6, self.safe_text(title), 0, 1, 'L')
        self.set_text_color(0, 0, 0)
        self.ln(2)

    def body_text(self, text):
        self.use_font('', 9)
        self.multi_cell(0, 5, self.safe_text(text))
        self.ln(2)

    def key_value_table(self, data, widths=(70, 110)):
        """
        키-값 테이블 (실수는 유효숫자 6자리)
        """
        self.use_font('', 8)
        fill = False
        for key, value in data.items():
            self.set_fill_color(224, 235, 255)
            if isinstance(value, float):
                value = f'{value:.6g}' if math.isfinite(value) else str(value)
            elif value is None:
                value = '-'
            self.cell(widths[0], 6, self.safe_text(key), 1, 0, 'L', fill)
            self.cell(widths[1], 6, self.safe_text(value)[:80], 1, 1, 'L', fill)
            fill = not fill
        self.ln(4)

    def check_table(self, checks):
        """
        검사 항목 표 (이름, 결과, 측정값, 허용 오차)

        Args:
            checks (list): AuditCheck 목록
        """
        self.use_font('B', 8)
        widths = (70, 25, 45, 40)
        for title, width in zip(('check', 'result', 'measured', 'tolerance'), widths):
            self.cell(width, 6, title, 1, 0, 'C')
        self.ln()
        self.use_font('', 8)
        for check in checks:
            if not check.applicable:
                result = 'n/a'
                self.set_text_color(120, 120, 120)
            elif check.passed:
                result = 'pass'
            else:
                result = 'FAIL'
                self.set_text_color(200, 0, 0)
            self.cell(widths[0], 6, self.safe_text(check.name), 1, 0, 'L')
            self.cell(widths[1], 6, result, 1, 0, 'C')
            self.cell(widths[2], 6, f'{check.measured:.6g}', 1, 0, 'R')
            self.cell(widths[3], 6, f'{check.tolerance:.3g}', 1, 1, 'R')
            self.set_text_color(0, 0, 0)
        self.ln(4)

    def add_image(self, image_path, w=0, h=0, caption=None):
        """
        이미지 추가
        """
        if not os.path.exists(image_path):
            self.logger.warning(f"이미지 파일을 찾을 수 없습니다: {image_path}")
            return False

        try:
            current_y = self.get_y()
            if w == 0 and h == 0:
                max_width = self.w - self.l_margin - self.r_margin
                self.image(image_path, x=self.l_margin, y=current_y, w=max_width)
            else:
                self.image(image_path, x=self.l_margin, y=current_y, w=w, h=h)

            if caption:
                self.ln(2)
                self.use_font('I', 8)
                self.cell(0, 5, self.safe_text(caption), 0, 1, 'C')

            self.ln(5)
            return True

        except Exception as e:
            self.logger.error(f"이미지 추가 중 오류 발생: {str(e)}")
            return False


class ReportGenerator:
    """
    PDF 보고서 생성기 클래스
    """
    def __init__(self, output_dir="output"):
        """
        초기화

        Args:
            output_dir (str): 출력 디렉토리
        """
        self.logger = setup_logger()
        self.output_dir = output_dir

        if not os.path.exists(output_dir):
            os.makedirs(output_dir)

    def generate_report(self, title, config, analysis=None, audit=None, stability=None,
                        images=(), filename='report.pdf'):
        """
        설정, 궤도 통계, 감사 결과, 안정성 결과를 담은 PDF 생성

        Args:
            title (str): 보고서 제목
            config (dict): 평문 설정
            analysis (dict): OrbitDataProcessor.analyze_orbit 결과
            audit (AuditReport): 감사 보고서
            stability (StabilityReport): 안정성 보고서
            images (list): 삽입할 PNG 경로
            filename (str): 파일 이름

        Returns:
            str: 저장된 PDF 파일 경로, 실패 시 None
        """
        pdf = AuditPDFReport(title=title)
        pdf.add_page()

        pdf.chapter_title("1. 실험 설정")
        pdf.key_value_table({key: value for key, value in config.items()})

        chapter = 2
        if analysis:
            pdf.chapter_title(f"{chapter}. 궤도 통계")
            chapter += 1
            for column, stats in analysis['statistics'].items():
                if not stats:
                    continue
                pdf.section_title(column)
                pdf.key_value_table({key: stats[key] for key in
                                     ('count', 'min', 'max', 'mean', 'median', 'std')})
            if analysis.get('tail'):
                pdf.section_title("꼬리 추정")
                pdf.key_value_table(analysis['tail'])

        if audit is not None:
            pdf.chapter_title(f"{chapter}. 검사 결과")
            chapter += 1
            status = "통과" if audit.passed else "실패"
            pdf.body_text(f"적용 가능한 검사 전체: {status}")
            pdf.check_table(audit.checks)
            if audit.constants:
                pdf.section_title("측정 상수")
                pdf.key_value_table(dict(sorted(audit.constants.items())))

        if stability is not None:
            pdf.chapter_title(f"{chapter}. 고정점 안정성")
            chapter += 1
            pdf.key_value_table({
                'classification': stability.classification,
                'verdict': stability.verdict,
                'alpha': stability.alpha,
                'theta': stability.theta,
                'margin': stability.margin,
                'closed_form_margin': stability.closed_form_margin,
                'lambda_plus': str(to_plain(stability.lambda_plus)),
                'lambda_minus': str(to_plain(stability.lambda_minus)),
            })
            pdf.section_title("가정 검사")
            pdf.check_table(stability.hypotheses.checks)
            if stability.corroboration:
                pdf.section_title("시뮬레이션 감쇠 확인")
                pdf.key_value_table({key: value for key, value in stability.corroboration.items()
                                     if key != 'amplitudes'})

        for image_path in images:
            if pdf.get_y() > 180:
                pdf.add_page()
            pdf.add_image(image_path, caption=os.path.basename(image_path))

        pdf_path = os.path.join(self.output_dir, filename)
        try:
            pdf.output(pdf_path)
            self.logger.info(f"PDF 보고서 생성 완료: {pdf_path}")
            return pdf_path
        except Exception as e:
            self.logger.error(f"PDF 보고서 저장 중 오류 발생: {str(e)}")
            return None

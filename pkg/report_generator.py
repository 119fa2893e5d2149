import math
import logging
from pathlib import Path

import pandas as pd
from docx import Document

logger = logging.getLogger(__name__)

WORD_NAME = "report.docx"
EXCEL_NAME = "report.xlsx"


class ReportGenerator:
    """把收敛阶研究与诊断结果整理成 Word 报告和 Excel 工作簿"""

    def __init__(self):
        self.config = None
        self.output_dir = None
        self.studies = []
        self.checks = []

    def set_config(self, config):
        """设置实验配置"""
        self.config = config
        logger.info(f"实验配置已设置: alpha={config.alpha}, dim={config.dim}, n={config.n}")

    def set_output_dir(self, output_dir):
        """设置输出目录（不存在时逐级创建），返回两份报告的路径"""
        path = Path(output_dir)
        if path.exists() and not path.is_dir():
            raise NotADirectoryError(f"输出路径已存在且不是目录: {path}")
        path.mkdir(parents=True, exist_ok=True)
        self.output_dir = path
        targets = self.report_paths()
        existing = sorted(p.name for p in targets.values() if p.exists())
        if existing:
            logger.warning(f"将覆盖已有报告: {existing}")
        logger.info(f"报告输出目录: {path}")
        return targets

    def report_paths(self):
        return {"word": self.output_dir / WORD_NAME, "excel": self.output_dir / EXCEL_NAME}

    def add_rate_study(self, result):
        self.studies.append(result)

    def add_checks(self, checks):
        self.checks.extend(checks)

    def error_frame(self):
        if not self.studies:
            return pd.DataFrame(columns=["alpha", "h", "l1_error", "reference_kind", "grid_n", "domain_L", "seed"])
        return pd.concat([r.to_frame(self.config) for r in self.studies], ignore_index=True)

    def fit_frame(self):
        rows = []
        for r in self.studies:
            rows.append({
                "alpha": r.alpha,
                "slope": r.fit.slope if r.fit else None,
                "stderr": r.fit.stderr if r.fit else None,
                "r_squared": r.fit.r_squared if r.fit else None,
                "theoretical_slope": r.theoretical_slope,
                "reference_kind": r.reference_kind,
                "status": r.status,
            })
        return pd.DataFrame(rows, columns=["alpha", "slope", "stderr", "r_squared", "theoretical_slope",
                                           "reference_kind", "status"])

    def check_frame(self):
        return pd.DataFrame([c.to_dict() for c in self.checks],
                            columns=["name", "passed", "statistic", "threshold", "detail"])

    def config_frame(self):
        items = sorted(self.config.to_dict().items())
        return pd.DataFrame([(k, str(v)) for k, v in items], columns=["参数", "取值"])

    @staticmethod
    def _fill_table(doc, frame, formats=None):
        """按 DataFrame 填充一张带表头的 Word 表格"""
        formats = formats or {}
        table = doc.add_table(rows=1, cols=len(frame.columns))
        table.style = "Table Grid"
        for j, col in enumerate(frame.columns):
            table.rows[0].cells[j].text = str(col)
        for _, row in frame.iterrows():
            cells = table.add_row().cells
            for j, col in enumerate(frame.columns):
                value = row[col]
                if value is None or (isinstance(value, float) and math.isnan(value)):
                    text = "-"
                elif col in formats:
                    text = formats[col](value)
                else:
                    text = str(value)
                cells[j].text = text
        return table

    def write_word(self, path):
        doc = Document()
        doc.add_heading("Euler-Maruyama 格式收敛阶报告", level=0)

        doc.add_heading("实验配置", level=1)
        self._fill_table(doc, self.config_frame())

        if self.studies:
            doc.add_heading("收敛阶拟合", level=1)
            fits = self.fit_frame()
            fmt = lambda v: f"{v:.4f}"
            self._fill_table(doc, fits, {"slope": fmt, "stderr": fmt, "r_squared": fmt, "theoretical_slope": fmt})
            doc.add_heading("各步长误差", level=1)
            errors = self.error_frame()[["alpha", "h", "l1_error"]]
            self._fill_table(doc, errors, {"h": lambda v: f"{v:.6g}", "l1_error": lambda v: f"{v:.4e}"})

        if self.checks:
            doc.add_heading("诊断检查", level=1)
            checks = self.check_frame()
            passed = int(checks["passed"].sum())
            doc.add_paragraph(f"共 {len(checks)} 项检查，通过 {passed} 项，未通过 {len(checks) - passed} 项。")
            self._fill_table(doc, checks, {"passed": lambda v: "✅" if v else "❌",
                                           "statistic": lambda v: f"{v:.4e}",
                                           "threshold": lambda v: f"{v:.4e}"})
        doc.save(path)
        logger.info(f"Word 报告已保存: {path}")

    def write_excel(self, path):
        with pd.ExcelWriter(path, engine="openpyxl") as writer:
            self.config_frame().to_excel(writer, sheet_name="config", index=False)
            self.error_frame().to_excel(writer, sheet_name="errors", index=False)
            self.fit_frame().to_excel(writer, sheet_name="fits", index=False)
            self.check_frame().to_excel(writer, sheet_name="checks", index=False)
        logger.info(f"Excel 工作簿已保存: {path}")

    def generate_reports(self):
        """生成 report.docx 与 report.xlsx"""
        if self.config is None or self.output_dir is None:
            logger.error("尚未设置实验配置或输出目录")
            return False
        try:
            targets = self.report_paths()
            self.write_word(str(targets["word"]))
            self.write_excel(str(targets["excel"]))
            return True
        except Exception as e:
            logger.error(f"生成报告失败: {str(e)}")
            return False


def generate_study_reports(config, output_dir, studies=(), checks=(), log_callback=None):
    """生成实验报告，log_callback 接收进度消息"""
    if log_callback:
        def log_output(message, level='INFO'):
            if level == 'ERROR':
                logger.error(message)
            else:
                logger.info(message)
            log_callback(message)
    else:
        log_output = lambda msg, level='INFO': None

    try:
        generator = ReportGenerator()
        generator.set_config(config)
        generator.set_output_dir(output_dir)
        for study in studies:
            generator.add_rate_study(study)
        generator.add_checks(checks)

        log_output("开始生成实验报告...")
        if generator.generate_reports():
            log_output("实验报告生成成功！")
            return True
        log_output("实验报告生成失败！", 'ERROR')
        return False
    except Exception as e:
        log_output(f"生成实验报告时发生错误: {str(e)}", 'ERROR')
        return False

#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
测试 report_generator.py: Word 报告与 Excel 工作簿
"""

import os
import sys
import tempfile

import pandas as pd
from docx import Document

from config import SchemeConfig
from harness import CheckResult, RateFit, RateStudyResult
from report_generator import EXCEL_NAME, WORD_NAME, ReportGenerator, generate_study_reports
from testing import raises, run_all


def _study(status="OK"):
    fit = RateFit(0.41, -0.2, 0.01, 0.995) if status != "DEGENERATE" else None
    return RateStudyResult(1.5, (0.25, 0.125, 0.0625), (0.1, 0.075, 0.056), fit, 1.0 / 3.0, "self_convergence",
                           0.0625 / 8, status)


def _checks():
    return [CheckResult("mass_conservation", True, 1e-14, 1e-3),
            CheckResult("duhamel_residual", False, None, 1e-2, "DomainTooSmall: ...")]


def test_reports_are_written_and_readable():
    config = SchemeConfig()
    messages = []
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "report")
        assert generate_study_reports(config, out, [_study(), _study("DEGENERATE")], _checks(),
                                      log_callback=messages.append)
        doc = Document(os.path.join(out, WORD_NAME))
        sheets = pd.read_excel(os.path.join(out, EXCEL_NAME), sheet_name=None)

    assert len(doc.tables) == 4
    fit_table = doc.tables[1]
    assert fit_table.rows[1].cells[1].text == "0.4100"
    assert fit_table.rows[2].cells[1].text == "-"
    check_table = doc.tables[3]
    assert [row.cells[1].text for row in check_table.rows[1:]] == ["✅", "❌"]
    assert check_table.rows[2].cells[2].text == "-"

    assert set(sheets) == {"config", "errors", "fits", "checks"}
    assert len(sheets["errors"]) == 6
    assert list(sheets["fits"]["status"]) == ["OK", "DEGENERATE"]
    assert list(sheets["checks"]["name"]) == ["mass_conservation", "duhamel_residual"]
    assert "alpha" in set(sheets["config"]["参数"])
    assert messages[-1] == "实验报告生成成功！"


def test_checks_only_report():
    generator = ReportGenerator()
    generator.set_config(SchemeConfig())
    with tempfile.TemporaryDirectory() as tmp:
        generator.set_output_dir(tmp)
        generator.add_checks(_checks())
        assert generator.generate_reports()
        doc = Document(os.path.join(tmp, WORD_NAME))
    assert len(doc.tables) == 2
    assert generator.error_frame().empty


def test_output_dir_is_created_and_checked():
    generator = ReportGenerator()
    generator.set_config(SchemeConfig())
    with tempfile.TemporaryDirectory() as tmp:
        nested = os.path.join(tmp, "a", "b")
        targets = generator.set_output_dir(nested)
        assert os.path.isdir(nested)
        assert str(targets["word"]) == os.path.join(nested, WORD_NAME)
        assert str(targets["excel"]) == os.path.join(nested, EXCEL_NAME)
        assert generator.generate_reports()
        # 再次设置同一目录时覆盖已有报告
        assert generator.set_output_dir(nested) == targets
        assert generator.generate_reports()

        blocker = os.path.join(tmp, "not_a_dir")
        with open(blocker, "w", encoding="utf-8") as fh:
            fh.write("x")
        raises(NotADirectoryError, generator.set_output_dir, blocker)
        assert not generate_study_reports(SchemeConfig(), blocker, checks=_checks())


def test_missing_setup_fails():
    assert not ReportGenerator().generate_reports()


if __name__ == "__main__":
    sys.exit(run_all(dict(globals()), "测试 report_generator.py"))

import json

import pytest

from utility_rank.errors import ValidationError
from utility_rank.metrics import MetricReport
from utility_rank.report import (
    REPORT_COLUMNS,
    load_report,
    render_csv,
    render_report,
    report_payload,
    reports_from_payload,
    write_report_files,
)


def make_report(values, qid="q0"):
    named = dict(zip(REPORT_COLUMNS, values))
    return MetricReport(per_question={qid: named}, macro=named, evaluated=1)


# fixture rows (fractions as stored internally before x100 rendering)
OURS_HOTPOT = (0.8809, 0.8809, 0.8809, 0.9833, 0.9461, 0.8957, 0.8712)
BM25_HOTPOT = (0.5232, 0.5232, 0.5232, 0.7322, 0.7027, 0.5639, 0.5441)


class TestRenderReport:
    def test_ours_hotpot_row(self):
        text = render_report({"ours": make_report(OURS_HOTPOT)})
        row = next(line for line in text.splitlines() if line.startswith("ours"))
        for cell in ("88.09", "98.33", "94.61", "89.57", "87.12"):
            assert cell in row

    def test_bm25_row_endpoints(self):
        text = render_report({"bm25": make_report(BM25_HOTPOT)})
        row = next(line for line in text.splitlines() if line.startswith("bm25"))
        cells = row.split()
        assert cells[1] == "52.32"
        assert cells[-1] == "54.41"

    def test_single_method_unmarked(self):
        text = render_report({"only": make_report(OURS_HOTPOT)})
        assert "*" not in text

    def test_best_marked_per_column(self):
        text = render_report(
            {"ours": make_report(OURS_HOTPOT), "bm25": make_report(BM25_HOTPOT)}
        )
        ours_row = next(line for line in text.splitlines() if line.startswith("ours"))
        bm25_row = next(line for line in text.splitlines() if line.startswith("bm25"))
        assert ours_row.count("*") == len(REPORT_COLUMNS)
        assert "*" not in bm25_row

    def test_mismatched_columns_rejected(self):
        full = make_report(OURS_HOTPOT)
        partial = MetricReport(per_question={"q0": {"EM": 1.0}}, macro={"EM": 1.0}, evaluated=1)
        with pytest.raises(ValidationError):
            render_report({"a": full, "b": partial})

    def test_excluded_footer(self):
        report = MetricReport(
            per_question={"q0": dict(zip(REPORT_COLUMNS, OURS_HOTPOT))},
            macro=dict(zip(REPORT_COLUMNS, OURS_HOTPOT)),
            evaluated=1,
            excluded=("q9",),
        )
        text = render_report({"m": report})
        assert "excluded=1" in text


class TestCsvAndPayload:
    def test_csv_cells(self):
        csv_text = render_csv({"ours": make_report(OURS_HOTPOT)})
        header, row = csv_text.strip().splitlines()
        assert header == "method," + ",".join(REPORT_COLUMNS)
        assert row.split(",")[1] == "88.09"

    def test_payload_round_trip(self):
        reports = {"ours": make_report(OURS_HOTPOT), "bm25": make_report(BM25_HOTPOT)}
        restored = reports_from_payload(json.loads(json.dumps(report_payload(reports))))
        assert restored.keys() == reports.keys()
        for name in reports:
            assert restored[name].macro == pytest.approx(reports[name].macro)
            assert restored[name].evaluated == reports[name].evaluated


class TestFiles:
    def test_write_and_reload(self, tmp_path):
        reports = {"ours": make_report(OURS_HOTPOT)}
        paths = write_report_files(reports, tmp_path, figure=True)
        assert set(paths) == {"json", "txt", "csv", "png"}
        for path in paths.values():
            assert path.exists() and path.stat().st_size > 0
        reloaded = load_report(paths["json"])
        assert reloaded["ours"].macro == pytest.approx(reports["ours"].macro)

    def test_figure_deterministic(self, tmp_path):
        reports = {"ours": make_report(OURS_HOTPOT), "bm25": make_report(BM25_HOTPOT)}
        a = write_report_files(reports, tmp_path / "a", figure=True)["png"].read_bytes()
        b = write_report_files(reports, tmp_path / "b", figure=True)["png"].read_bytes()
        assert a == b

    def test_no_figure(self, tmp_path):
        paths = write_report_files({"m": make_report(OURS_HOTPOT)}, tmp_path, figure=False)
        assert "png" not in paths

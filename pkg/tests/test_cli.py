import json

import pytest

from utility_rank.cli import main
from utility_rank.corpus import write_canonical, Dataset

from conftest import HOTPOT_STYLE_ROWS, build_record


@pytest.fixture
def canonical(tmp_path):
    dataset = Dataset(
        name="d", records=tuple(build_record(f"q{i}", 10, {1, 4}, f"ans{i}") for i in range(3))
    )
    path = tmp_path / "canonical.jsonl"
    write_canonical(dataset, path)
    return path


def lines(path):
    return [json.loads(l) for l in path.read_text().splitlines()]


class TestIngest:
    def test_hotpot_to_canonical(self, tmp_path, hotpot_file, capsys):
        out = tmp_path / "out.jsonl"
        code = main(["ingest", "--format", "hotpotqa", "--in", str(hotpot_file), "--out", str(out)])
        assert code == 0
        rows = lines(out)
        assert len(rows) == 2
        assert len(rows[0]["passages"]) == 10
        assert "ingested 2 questions" in capsys.readouterr().out

    def test_bad_format_exits_1(self, hotpot_file, tmp_path, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["ingest", "--format", "nope", "--in", str(hotpot_file), "--out", str(tmp_path / "o")])
        assert excinfo.value.code == 1

    def test_missing_file_exits_1(self, tmp_path):
        code = main(["ingest", "--format", "hotpotqa", "--in", str(tmp_path / "missing.json"),
                     "--out", str(tmp_path / "o.jsonl")])
        assert code == 1


class TestTraceAnnotateExport:
    def test_mock_trace_annotate_export(self, tmp_path, canonical):
        traces = tmp_path / "traces.jsonl"
        assert main(["trace", "--in", str(canonical), "--out", str(traces),
                     "--mock", str(canonical)]) == 0
        assert len(lines(traces)) == 3

        annotations = tmp_path / "ann.jsonl"
        assert main(["annotate", "--in", str(canonical), "--traces", str(traces),
                     "--out", str(annotations), "--mock", str(canonical)]) == 0
        rows = lines(annotations)
        assert len(rows) == 30
        assert {r["score"] for r in rows} == {1, 5}

        pointwise = tmp_path / "pw.jsonl"
        assert main(["export-train", "--in", str(canonical), "--annotations", str(annotations),
                     "--mode", "pointwise", "--out", str(pointwise)]) == 0
        assert len(lines(pointwise)) == 30

        listwise = tmp_path / "lw.jsonl"
        assert main(["export-train", "--in", str(canonical), "--annotations", str(annotations),
                     "--mode", "listwise", "--out", str(listwise)]) == 0
        assert len(lines(listwise)) == 3

    def test_oracle_annotations(self, tmp_path, canonical):
        annotations = tmp_path / "ann.jsonl"
        assert main(["annotate", "--in", str(canonical), "--out", str(annotations),
                     "--oracle"]) == 0
        rows = lines(annotations)
        assert len(rows) == 30
        gold_rows = [r for r in rows if r["score"] == 5]
        assert len(gold_rows) == 6  # 2 golds x 3 questions

    def test_annotate_without_traces_or_oracle(self, tmp_path, canonical):
        code = main(["annotate", "--in", str(canonical), "--out", str(tmp_path / "a.jsonl")])
        assert code == 1

    def test_export_pairs(self, tmp_path, canonical):
        pairs = tmp_path / "pairs.jsonl"
        assert main(["export-pairs", "--in", str(canonical), "--out", str(pairs)]) == 0
        rows = lines(pairs)
        assert len(rows) == 30
        assert all(
            set(r) == {"question_id", "passage_id", "question", "passage"} for r in rows
        )


class TestRerankAnswer:
    def test_rerank_and_answer(self, tmp_path, canonical, capsys):
        ranked = tmp_path / "ranked.jsonl"
        assert main(["rerank", "--scorer", "oracle", "--in", str(canonical),
                     "--out", str(ranked)]) == 0
        rows = lines(ranked)
        assert len(rows) == 3
        assert all(set(r) == {"question_id", "scorer", "order"} for r in rows)

        answers = tmp_path / "answers.jsonl"
        assert main(["answer", "--in", str(canonical), "--ranked", str(ranked),
                     "--out", str(answers), "--k", "5", "--mock", str(canonical)]) == 0
        rows = lines(answers)
        assert [r["answer"] for r in rows] == ["ans0", "ans1", "ans2"]

    def test_external_requires_scores(self, tmp_path, canonical):
        code = main(["rerank", "--scorer", "external", "--in", str(canonical),
                     "--out", str(tmp_path / "r.jsonl")])
        assert code == 1


class TestEvalReport:
    def test_eval_writes_report_files(self, tmp_path, canonical, capsys):
        out_dir = tmp_path / "out"
        code = main(["eval", "--in", str(canonical), "--scorer", "oracle", "--scorer", "bm25",
                     "--out-dir", str(out_dir), "--mock", str(canonical)])
        assert code == 0
        for name in ("report.json", "report.txt", "report.csv", "report.png"):
            assert (out_dir / name).exists()
        stdout = capsys.readouterr().out
        assert "Method" in stdout and "oracle" in stdout and "bm25" in stdout
        payload = json.loads((out_dir / "report.json").read_text())
        assert payload["methods"]["oracle"]["macro"]["R@5"] == 1.0

    def test_report_rerenders(self, tmp_path, canonical, capsys):
        out_dir = tmp_path / "out"
        main(["eval", "--in", str(canonical), "--scorer", "oracle",
              "--out-dir", str(out_dir), "--mock", str(canonical), "--no-figure"])
        capsys.readouterr()
        second = tmp_path / "render"
        code = main(["report", "--in", str(out_dir / "report.json"), "--out-dir", str(second)])
        assert code == 0
        assert (second / "report.txt").read_text() == (out_dir / "report.txt").read_text()

    def test_eval_without_provider_or_mock_exits_1(self, tmp_path, canonical, monkeypatch):
        monkeypatch.delenv("OPENAI_BASE_URL", raising=False)
        code = main(["eval", "--in", str(canonical), "--scorer", "oracle",
                     "--out-dir", str(tmp_path / "o")])
        assert code == 1


class TestSynthesize:
    def test_synthesize_outputs(self, tmp_path, canonical, capsys):
        out_dir = tmp_path / "syn"
        code = main(["synthesize", "--in", str(canonical), "--out-dir", str(out_dir),
                     "--mock", str(canonical), "--seed", "3"])
        assert code == 0
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["rows"] == {"pointwise": 30, "listwise": 3}
        assert (out_dir / "traces.jsonl").exists()
        assert (out_dir / "train_pointwise.jsonl").exists()

    def test_config_file_drives_run(self, tmp_path, canonical):
        config = tmp_path / "run.toml"
        config.write_text(
            f'dataset = "{canonical}"\nmock = "{canonical}"\n', encoding="utf-8"
        )
        out_dir = tmp_path / "syn"
        code = main(["synthesize", "--config", str(config), "--in", str(canonical),
                     "--out-dir", str(out_dir)])
        assert code == 0


def test_hotpot_fixture_matches_paper_shape(hotpot_file):
    # 10 candidates with 2 gold supporting passages per question
    for row in HOTPOT_STYLE_ROWS:
        assert len(row["context"]) == 10
        assert len({t for t, _ in row["supporting_facts"]}) == 2

"""Batch inference: pair file in, core-format score file out."""

from __future__ import annotations

import json
from pathlib import Path

from .data import DataError
from .model import load_artifact

REQUIRED_FIELDS = ("question_id", "passage_id", "question", "passage")


def read_pair_rows(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    rows = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            missing = [f for f in REQUIRED_FIELDS if f not in row]
            if missing:
                raise DataError(f"{path}:{lineno}: row missing fields {missing}")
            rows.append({f: str(row[f]) for f in REQUIRED_FIELDS})
    if not rows:
        raise DataError(f"input file {path} is empty")
    return rows


def score_file(model_dir: str | Path, in_path: str | Path, out_path: str | Path) -> int:
    """Score every input row; output keys mirror the input, one row per row."""
    model = load_artifact(model_dir)
    rows = read_pair_rows(in_path)
    scores = model.predict_pairs([(r["question"], r["passage"]) for r in rows])
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as fh:
        for row, score in zip(rows, scores):
            fh.write(
                json.dumps(
                    {
                        "question_id": row["question_id"],
                        "passage_id": row["passage_id"],
                        "score": score,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return len(rows)

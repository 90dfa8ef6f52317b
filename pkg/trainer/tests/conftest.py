"""Synthetic separable corpus shared across trainer tests.

Targets are 5 when the passage contains the question's answer token and 1
otherwise, so a bag-of-words overlap already separates the classes; the
oracle check below asserts that before any training happens.
"""

from __future__ import annotations

import json
import random
import re
from pathlib import Path

import pytest

FILLERS = [
    "records", "archive", "summary", "section", "volume", "notes", "appendix",
    "chapter", "table", "index", "margin", "column", "draft", "edition",
]
ENTITIES = [f"entity{i}" for i in range(40)]

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokens(text: str) -> set[str]:
    return set(_TOKEN_RE.findall(text.lower()))


def question_for(answer: str) -> str:
    return f"find the report about {answer}"


def passage_for(topic: str, rng: random.Random) -> str:
    fill = " ".join(rng.choices(FILLERS, k=rng.randint(2, 6)))
    return f"this report covers {topic} in detail {fill}"


def make_training_rows(n_questions: int, seed: int) -> list[dict]:
    """One positive and one negative passage per question."""
    rng = random.Random(seed)
    rows = []
    for _ in range(n_questions):
        answer = rng.choice(ENTITIES)
        question = question_for(answer)
        rows.append(
            {"question": question, "passage": passage_for(answer, rng), "score": 5}
        )
        other = rng.choice([e for e in ENTITIES if e != answer])
        rows.append(
            {"question": question, "passage": passage_for(other, rng), "score": 1}
        )
    return rows


def make_heldout_questions(n_questions: int, seed: int) -> list[dict]:
    """Canonical-format question records: 2 gold + 8 distractor passages."""
    rng = random.Random(seed)
    records = []
    for i in range(n_questions):
        answer = rng.choice(ENTITIES)
        gold_positions = set(rng.sample(range(10), 2))
        passages = []
        for j in range(10):
            topic = answer if j in gold_positions else rng.choice(
                [e for e in ENTITIES if e != answer]
            )
            passages.append(
                {"id": f"p{j}", "title": "", "text": passage_for(topic, rng)}
            )
        records.append(
            {
                "question_id": f"h{i:03d}",
                "question": question_for(answer),
                "passages": passages,
                "gold_ids": [f"p{j}" for j in sorted(gold_positions)],
                "answers": [answer],
            }
        )
    return records


def bag_of_words_separable(rows: list[dict]) -> bool:
    """True when question/passage overlap separates targets 5 and 1."""
    overlaps = {5: [], 1: []}
    for row in rows:
        overlaps[row["score"]].append(len(tokens(row["question"]) & tokens(row["passage"])))
    return min(overlaps[5]) > max(overlaps[1])


def write_jsonl(rows: list[dict], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def training_file(tmp_path) -> Path:
    return write_jsonl(make_training_rows(32, seed=5), tmp_path / "train.jsonl")


@pytest.fixture
def quick_config():
    from utility_trainer.train import TrainerConfig

    return TrainerConfig(epochs=1, learning_rate=2e-3, seed=0, max_length=48)

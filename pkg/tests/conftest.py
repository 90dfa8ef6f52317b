"""Shared synthetic data builders for the test suite."""

from __future__ import annotations

import json
import random

import pytest

from utility_rank.corpus import CandidateSet, Dataset, Passage, QuestionRecord


def build_record(
    qid: str,
    n_candidates: int,
    gold_indices: set[int],
    answer: str,
) -> QuestionRecord:
    """One synthetic question whose gold passages contain the answer token."""
    passages = []
    for j in range(n_candidates):
        if j in gold_indices:
            text = f"Entry {j} of topic {qid} states that the result equals {answer}."
        else:
            text = f"Entry {j} of topic {qid} discusses unrelated background material."
        passages.append(
            Passage(
                passage_id=f"p{j}",
                title=f"Topic {qid} part {j}",
                text=text,
                original_index=j,
            )
        )
    return QuestionRecord(
        question_id=qid,
        question_text=f"What result does topic {qid} report?",
        candidates=CandidateSet(tuple(passages)),
        gold_passage_ids=frozenset(f"p{j}" for j in gold_indices),
        gold_answers=(answer,),
    )


def build_dataset(n_questions: int = 50, seed: int = 13) -> Dataset:
    """Mixed 10- and 20-candidate records with 2-4 gold passages each."""
    rng = random.Random(seed)
    records = []
    for i in range(n_questions):
        n = 10 if i % 2 == 0 else 20
        gold = set(rng.sample(range(n), rng.randint(2, 4)))
        records.append(build_record(f"q{i:03d}", n, gold, f"result{i}"))
    return Dataset(name="synthetic", records=tuple(records))


@pytest.fixture
def make_record():
    return build_record


@pytest.fixture
def mock_dataset() -> Dataset:
    return build_dataset()


@pytest.fixture
def small_dataset() -> Dataset:
    return build_dataset(n_questions=3, seed=7)


@pytest.fixture
def canonical_file(tmp_path, mock_dataset):
    from utility_rank.corpus import write_canonical

    path = tmp_path / "canonical.jsonl"
    write_canonical(mock_dataset, path)
    return path


HOTPOT_STYLE_ROWS = [
    {
        "_id": "hp1",
        "question": "Which city hosts the museum holding the sculpture Bronze Era?",
        "answer": "Karlsberg",
        "supporting_facts": [["Bronze Era", 0], ["Hallen Museum", 0]],
        "context": [
            ["Alpine Lakes", ["Alpine lakes form in glacial valleys."]],
            ["Bronze Era", ["Bronze Era is a sculpture displayed in the Hallen Museum."]],
            ["Cathedral Bells", ["Cathedral bells are cast from bronze alloys."]],
            ["Hallen Museum", ["The Hallen Museum is located in Karlsberg.", "It opened in 1902."]],
            ["Iron Age", ["The Iron Age followed the Bronze Age."]],
            ["Karlsberg Opera", ["The Karlsberg Opera stages winter festivals."]],
            ["Lake Commerce", ["Lake commerce shaped many alpine towns."]],
            ["Museum Funding", ["Museum funding often combines public and private sources."]],
            ["Sculpture Methods", ["Lost-wax casting is an ancient sculpture method."]],
            ["Valley Railways", ["Valley railways connected mining towns."]],
        ],
    },
    {
        "_id": "hp2",
        "question": "Who directed the film scored by the composer of Night Garden?",
        "answer": "Mira Olsen",
        "supporting_facts": [["Night Garden", 0], ["Harbor Lights", 0]],
        "context": [
            ["Night Garden", ["Night Garden is an album composed by Leo Brandt."]],
            ["Harbor Lights", ["Harbor Lights, scored by Leo Brandt, was directed by Mira Olsen."]],
            ["Folk Revival", ["The folk revival began in coastal towns."]],
            ["Studio Sessions", ["Studio sessions often run overnight."]],
            ["Film Festivals", ["Film festivals award juried prizes."]],
            ["Concert Halls", ["Concert halls are tuned for reverberation."]],
            ["Score Archives", ["Score archives preserve manuscript music."]],
            ["Director Guild", ["The director guild publishes annual lists."]],
            ["Sound Design", ["Sound design shapes a film's texture."]],
            ["Orchestra Pits", ["Orchestra pits sit below stage level."]],
        ],
    },
]


def musique_style_row(qid: str = "mu1", n: int = 20) -> dict:
    paragraphs = []
    for j in range(n):
        paragraphs.append(
            {
                "idx": j,
                "title": f"Paragraph {j}",
                "paragraph_text": (
                    f"Supporting paragraph {j} links the chain to the final answer Delta Station."
                    if j in (3, 11)
                    else f"Paragraph {j} covers assorted unrelated topics."
                ),
                "is_supporting": j in (3, 11),
            }
        )
    return {
        "id": qid,
        "question": "Through which station does the chain of facts lead?",
        "answer": "Delta Station",
        "answer_aliases": ["the Delta Station"],
        "paragraphs": paragraphs,
    }


@pytest.fixture
def hotpot_file(tmp_path):
    path = tmp_path / "hotpot.json"
    path.write_text(json.dumps(HOTPOT_STYLE_ROWS), encoding="utf-8")
    return path


@pytest.fixture
def musique_file(tmp_path):
    path = tmp_path / "musique.jsonl"
    path.write_text(json.dumps(musique_style_row()) + "\n", encoding="utf-8")
    return path

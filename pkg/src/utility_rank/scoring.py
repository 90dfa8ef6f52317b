"""Interchangeable per-question passage scorers and deterministic reranking.

Every scorer produces a complete ScoreTable over one question's candidates;
rerank turns a table into a permutation (descending score, ties broken by
original candidate order).
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional

from . import annotate
from .corpus import CandidateSet, Dataset, QuestionRecord
from .errors import ProviderError, ScoreParseError, ValidationError
from .gateway import ChatRequest, Provider, fan_out
from .text import tokenize

DEFAULT_K1 = 1.5
DEFAULT_B = 0.75


@dataclass(frozen=True)
class ScoreTable:
    question_id: str
    scores: Mapping[str, float]
    scorer_name: str

    def __post_init__(self):
        for pid, value in self.scores.items():
            if not math.isfinite(value):
                raise ValidationError(
                    f"non-finite score {value!r} for passage {pid!r} "
                    f"(question {self.question_id!r})"
                )


@dataclass(frozen=True)
class RankedList:
    question_id: str
    order: tuple[str, ...]


def bm25_scores(
    question: str,
    candidates: CandidateSet,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> ScoreTable:
    """Okapi BM25 over the question's own candidate set as the corpus.

    idf(t) = ln(1 + (N - n_t + 0.5) / (n_t + 0.5)), which stays positive
    even when a term occurs in most of the (tiny) corpus.
    """
    docs = [tokenize(p.full_text) for p in candidates]
    n_docs = len(docs)
    avgdl = sum(len(d) for d in docs) / n_docs
    doc_freq: Counter = Counter()
    for doc in docs:
        doc_freq.update(set(doc))
    scores = {}
    query_terms = tokenize(question)
    for p, doc in zip(candidates, docs):
        freqs = Counter(doc)
        norm = k1 * (1 - b + b * len(doc) / avgdl)
        score = 0.0
        for term in query_terms:
            f = freqs.get(term, 0)
            if f == 0:
                continue
            n_t = doc_freq[term]
            idf = math.log(1 + (n_docs - n_t + 0.5) / (n_t + 0.5))
            score += idf * f * (k1 + 1) / (f + norm)
        scores[p.passage_id] = score
    return ScoreTable(question_id="", scores=scores, scorer_name="bm25")


def overlap_scores(question: str, candidates: CandidateSet) -> ScoreTable:
    """Fraction of distinct question tokens present in the passage."""
    query_tokens = set(tokenize(question))
    if not query_tokens:
        raise ValidationError("question tokenizes to zero tokens")
    scores = {
        p.passage_id: len(query_tokens & set(tokenize(p.full_text))) / len(query_tokens)
        for p in candidates
    }
    return ScoreTable(question_id="", scores=scores, scorer_name="overlap")


def build_relevance_prompt(question: str, passage) -> str:
    return "\n".join(
        [
            "Rate how relevant the following passage is to the question on a",
            "scale of 1 to 5, where 1 means completely irrelevant and 5 means",
            "highly relevant and directly useful.",
            "",
            f"Question: {question}",
            "",
            "Passage:",
            passage.full_text,
            "",
            'Reply in the format "Relevance Score: <n>".',
        ]
    )


def llm_relevance_scores(
    question: str,
    candidates: CandidateSet,
    gateway: Provider,
    question_id: str = "",
    concurrency: int = 1,
) -> ScoreTable:
    """Zero-shot 1-5 relevance prompting, one gateway call per passage."""
    requests = {
        p.passage_id: ChatRequest(
            role_tag="relevance",
            prompt=build_relevance_prompt(question, p),
            metadata={"question_id": question_id, "passage_id": p.passage_id},
        )
        for p in candidates
    }
    responses = fan_out(gateway, requests, concurrency=concurrency)
    scores = {}
    for pid, outcome in responses.items():
        if isinstance(outcome, Exception):
            raise outcome
        try:
            scores[pid] = float(annotate.parse_score(outcome.text))
        except ScoreParseError:
            retry = gateway.complete(requests[pid], refresh=True)
            try:
                scores[pid] = float(annotate.parse_score(retry.text))
            except ScoreParseError as exc:
                raise ProviderError(
                    f"unparseable relevance response for passage {pid!r}: {exc}"
                ) from exc
    return ScoreTable(question_id=question_id, scores=scores, scorer_name="llm")


def oracle_scores(record: QuestionRecord) -> ScoreTable:
    """Scores from gold-derived oracle annotations (5 gold / 1 distractor)."""
    scores = {a.passage_id: float(a.score) for a in annotate.oracle_annotations(record)}
    return ScoreTable(question_id=record.question_id, scores=scores, scorer_name="oracle")


def load_external_scores(path: str | Path, dataset: Dataset) -> dict[str, ScoreTable]:
    """Assemble complete per-question ScoreTables from a score file.

    The file must cover every (question_id, passage_id) of the dataset;
    all gaps are reported at once.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"score file not found: {path}")
    known = {
        (record.question_id, pid)
        for record in dataset
        for pid in record.candidates.ids
    }
    raw: dict[tuple[str, str], float] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                key = (str(row["question_id"]), str(row["passage_id"]))
                value = float(row["score"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad score row: {exc}") from exc
            if not math.isfinite(value):
                raise ValidationError(f"{path}:{lineno}: non-finite score for {key}")
            if key not in known:
                raise ValidationError(f"{path}:{lineno}: unknown (question, passage) {key}")
            raw[key] = value
    missing = sorted(known - raw.keys())
    if missing:
        raise ValidationError(f"score file {path} missing {len(missing)} pairs: {missing[:10]}")
    tables = {}
    for record in dataset:
        tables[record.question_id] = ScoreTable(
            question_id=record.question_id,
            scores={pid: raw[(record.question_id, pid)] for pid in record.candidates.ids},
            scorer_name="external",
        )
    return tables


def rerank(table: ScoreTable, candidates: CandidateSet) -> RankedList:
    """Order candidates by descending score; ties by ascending original_index."""
    missing = [p.passage_id for p in candidates if p.passage_id not in table.scores]
    if missing:
        raise ValidationError(f"score table incomplete; missing {missing}")
    ordered = sorted(
        candidates.passages,
        key=lambda p: (-table.scores[p.passage_id], p.original_index),
    )
    return RankedList(
        question_id=table.question_id,
        order=tuple(p.passage_id for p in ordered),
    )


# --- scorer registry --------------------------------------------------------

Scorer = Callable[[QuestionRecord], ScoreTable]

SCORER_NAMES = ("bm25", "overlap", "llm", "external", "oracle")


def make_scorer(
    name: str,
    gateway: Optional[Provider] = None,
    external_tables: Optional[dict[str, ScoreTable]] = None,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    concurrency: int = 1,
) -> Scorer:
    """Resolve a scorer name to a per-record scoring callable."""
    if name == "bm25":
        def scorer(record: QuestionRecord) -> ScoreTable:
            table = bm25_scores(record.question_text, record.candidates, k1=k1, b=b)
            return ScoreTable(record.question_id, table.scores, "bm25")
    elif name == "overlap":
        def scorer(record: QuestionRecord) -> ScoreTable:
            table = overlap_scores(record.question_text, record.candidates)
            return ScoreTable(record.question_id, table.scores, "overlap")
    elif name == "llm":
        if gateway is None:
            raise ValidationError("llm scorer needs a configured gateway")
        def scorer(record: QuestionRecord) -> ScoreTable:
            return llm_relevance_scores(
                record.question_text,
                record.candidates,
                gateway,
                question_id=record.question_id,
                concurrency=concurrency,
            )
    elif name == "external":
        if external_tables is None:
            raise ValidationError("external scorer needs a score file (--scores)")
        def scorer(record: QuestionRecord) -> ScoreTable:
            table = external_tables.get(record.question_id)
            if table is None:
                raise ValidationError(f"no external scores for question {record.question_id!r}")
            return table
    elif name == "oracle":
        scorer = oracle_scores
    else:
        raise ValidationError(f"unknown scorer {name!r}; expected one of {SCORER_NAMES}")
    return scorer


# --- score / ranked file I/O ------------------------------------------------

def write_score_tables(tables: list[ScoreTable], dataset: Dataset, path: str | Path) -> int:
    """Write {"question_id","passage_id","score"} rows in candidate order."""
    by_qid = {t.question_id: t for t in tables}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        for record in dataset:
            table = by_qid.get(record.question_id)
            if table is None:
                raise ValidationError(f"no score table for question {record.question_id!r}")
            for pid in record.candidates.ids:
                row = {"question_id": record.question_id, "passage_id": pid, "score": table.scores[pid]}
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
                count += 1
    return count


def write_ranked(ranked: list[RankedList], scorer_name: str, path: str | Path) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for entry in ranked:
            row = {"question_id": entry.question_id, "scorer": scorer_name, "order": list(entry.order)}
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return len(ranked)


def read_ranked(path: str | Path) -> dict[str, RankedList]:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"ranked file not found: {path}")
    ranked = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                entry = RankedList(
                    question_id=str(row["question_id"]),
                    order=tuple(str(pid) for pid in row["order"]),
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad ranked row: {exc}") from exc
            ranked[entry.question_id] = entry
    return ranked

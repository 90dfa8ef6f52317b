"""Trace-conditioned utility annotation and training-data export.

A passage's score reflects its function inside the question's reasoning
trace, not just topical relevance; the gold-oracle variant (5 for gold
passages, 1 otherwise) gives the upper-bound labels.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Optional

from .corpus import Dataset, Passage, QuestionRecord
from .errors import ProviderError, ScoreParseError, ValidationError
from .gateway import ChatRequest, Provider, fan_out
from .trace import ReasoningTrace

SCALE_ANCHOR_LOW = "a passage not being used"
SCALE_ANCHOR_HIGH = "essential passage providing critical evidence"

_SCORE_AFTER_KEYWORD_RE = re.compile(
    r"score\D{0,40}?(\d+)(?!\d)(?!\.\d)", re.IGNORECASE | re.DOTALL
)
_BARE_INT_RE = re.compile(r"^\d+$")


@dataclass(frozen=True)
class UtilityAnnotation:
    question_id: str
    passage_id: str
    score: int
    rationale: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.score, int) or not 1 <= self.score <= 5:
            raise ValidationError(
                f"utility score must be an integer in [1,5], got {self.score!r}"
            )


@dataclass(frozen=True)
class AnnotationFailure:
    question_id: str
    passage_id: str
    reason: str


@dataclass(frozen=True)
class AnnotationResult:
    annotations: tuple[UtilityAnnotation, ...]
    failures: tuple[AnnotationFailure, ...]


@dataclass(frozen=True)
class TrainingFile:
    mode: Literal["pointwise", "listwise"]
    path: Path
    example_count: int


def parse_score(text: str) -> int:
    """Extract a 1-5 score from a model reply.

    Primary pattern: the first integer following a case-insensitive "score"
    token. Fallback: the trimmed text is a bare integer. Out-of-range values
    are an error, never clamped.
    """
    match = _SCORE_AFTER_KEYWORD_RE.search(text)
    if match is not None:
        value = int(match.group(1))
    else:
        stripped = text.strip()
        if not _BARE_INT_RE.match(stripped):
            raise ScoreParseError(f"no utility score found in {text!r}")
        value = int(stripped)
    if not 1 <= value <= 5:
        raise ScoreParseError(f"score {value} outside [1,5] in {text!r}")
    return value


def build_annotation_prompt(
    question_id: str,
    question: str,
    target: Passage,
    trace: ReasoningTrace,
) -> str:
    """Render the utility-annotation prompt for one target passage."""
    if trace.question_id != question_id:
        raise ValidationError(
            f"trace belongs to question {trace.question_id!r}, not {question_id!r}"
        )
    if target.tag is None:
        raise ValidationError(f"target passage {target.passage_id!r} is untagged")
    header = f"[Passage {target.tag}]"
    rendered = f"{header} {target.title}: {target.text}" if target.title else f"{header} {target.text}"
    return "\n".join(
        [
            "Evaluate how useful the target passage below was for answering the",
            "question, judging only by its usage in the given reasoning trace.",
            "",
            f"Question: {question}",
            "",
            "Target passage:",
            rendered,
            "",
            "Reasoning trace:",
            trace.trace_text,
            "",
            "Assess:",
            "1. whether the target passage was explicitly cited as evidence in the trace;",
            "2. the specific role it played there (e.g. providing initial facts,",
            "   bridging information, or supplying final evidence);",
            "3. how critical that contribution was to answering the question.",
            "",
            "Rate the passage's utility on a scale of 1 to 5, where 1 indicates",
            f"{SCALE_ANCHOR_LOW} to address the question, and 5 represents an",
            f"{SCALE_ANCHOR_HIGH} without which the answer could not be derived.",
            "",
            'Reply in the format "Utility Score: <n>", optionally followed by a brief rationale.',
        ]
    )


def annotate_candidates(
    record: QuestionRecord,
    trace: ReasoningTrace,
    gateway: Provider,
    concurrency: int = 1,
) -> AnnotationResult:
    """Score every candidate passage of one question.

    Failed parses are retried once (bypassing any cache); passages that still
    fail are recorded as failures so the rest of the question stays usable.
    """
    requests = {
        p.passage_id: ChatRequest(
            role_tag="annotate",
            prompt=build_annotation_prompt(record.question_id, record.question_text, p, trace),
            metadata={"question_id": record.question_id, "passage_id": p.passage_id},
        )
        for p in record.candidates
    }
    responses = fan_out(gateway, requests, concurrency=concurrency)
    annotations: list[UtilityAnnotation] = []
    failures: list[AnnotationFailure] = []
    for p in record.candidates:
        pid = p.passage_id
        outcome = responses[pid]
        if isinstance(outcome, ProviderError):
            failures.append(AnnotationFailure(record.question_id, pid, str(outcome)))
            continue
        if isinstance(outcome, Exception):
            raise outcome
        try:
            score = parse_score(outcome.text)
            text = outcome.text
        except ScoreParseError:
            try:
                retry = gateway.complete(requests[pid], refresh=True)
                score = parse_score(retry.text)
                text = retry.text
            except (ScoreParseError, ProviderError) as exc:
                failures.append(AnnotationFailure(record.question_id, pid, str(exc)))
                continue
        annotations.append(
            UtilityAnnotation(
                question_id=record.question_id,
                passage_id=pid,
                score=score,
                rationale=text,
            )
        )
    return AnnotationResult(annotations=tuple(annotations), failures=tuple(failures))


def oracle_annotations(record: QuestionRecord) -> list[UtilityAnnotation]:
    """Gold-derived labels: 5 for every supporting passage, 1 otherwise."""
    return [
        UtilityAnnotation(
            question_id=record.question_id,
            passage_id=p.passage_id,
            score=5 if p.passage_id in record.gold_passage_ids else 1,
        )
        for p in record.candidates
    ]


# --- annotation file I/O ----------------------------------------------------

def annotation_row(annotation: UtilityAnnotation) -> dict:
    return {
        "question_id": annotation.question_id,
        "passage_id": annotation.passage_id,
        "score": annotation.score,
        "rationale": annotation.rationale,
    }


def write_annotations(annotations: Iterable[UtilityAnnotation], path: str | Path) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        for annotation in annotations:
            fh.write(json.dumps(annotation_row(annotation), ensure_ascii=False) + "\n")
            count += 1
    return count


def read_annotations(path: str | Path) -> list[UtilityAnnotation]:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"annotation file not found: {path}")
    annotations = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                annotations.append(
                    UtilityAnnotation(
                        question_id=str(row["question_id"]),
                        passage_id=str(row["passage_id"]),
                        score=int(row["score"]),
                        rationale=row.get("rationale"),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad annotation row: {exc}") from exc
    return annotations


def index_annotations(
    annotations: Iterable[UtilityAnnotation],
) -> dict[tuple[str, str], UtilityAnnotation]:
    indexed: dict[tuple[str, str], UtilityAnnotation] = {}
    for annotation in annotations:
        key = (annotation.question_id, annotation.passage_id)
        if key in indexed:
            raise ValidationError(f"duplicate annotation for {key}")
        indexed[key] = annotation
    return indexed


# --- training-data export ---------------------------------------------------

def export_training_data(
    annotations: Iterable[UtilityAnnotation],
    records: Dataset,
    mode: Literal["pointwise", "listwise"],
    path: str | Path,
) -> TrainingFile:
    """Write pointwise or listwise training rows for the given questions.

    Every (question, passage) of ``records`` must be covered by an
    annotation; gaps are an error naming the missing pair.
    """
    if mode not in ("pointwise", "listwise"):
        raise ValidationError(f"unknown export mode {mode!r}")
    indexed = index_annotations(annotations)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            scores = []
            for p in record.candidates:
                key = (record.question_id, p.passage_id)
                if key not in indexed:
                    raise ValidationError(f"missing score for (question, passage) = {key}")
                scores.append(indexed[key].score)
            if mode == "pointwise":
                for p, score in zip(record.candidates, scores):
                    row = {
                        "question": record.question_text,
                        "passage": p.full_text,
                        "score": score,
                    }
                    fh.write(json.dumps(row, ensure_ascii=False) + "\n")
                    count += 1
            else:
                row = {
                    "question": record.question_text,
                    "passages": [p.full_text for p in record.candidates],
                    "scores": scores,
                }
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
                count += 1
    return TrainingFile(mode=mode, path=path, example_count=count)


def write_scoring_pairs(dataset: Dataset, path: str | Path) -> int:
    """Write the inference-input rows an external utility scorer consumes:
    one {"question_id","passage_id","question","passage"} object per pair."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        for record in dataset:
            for p in record.candidates:
                row = {
                    "question_id": record.question_id,
                    "passage_id": p.passage_id,
                    "question": record.question_text,
                    "passage": p.full_text,
                }
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
                count += 1
    return count

"""Dataset ingestion: canonical question records, passage tags, sampling.

Loaders normalize HotpotQA / MuSiQue / 2WikiMultiHopQA distractor files into
one canonical JSONL schema (see ``write_canonical``); everything downstream
consumes only the canonical form.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .errors import ValidationError

FORMATS = ("hotpotqa", "musique", "2wiki", "canonical")


@dataclass(frozen=True)
class Passage:
    """One candidate passage of one question."""

    passage_id: str
    title: str
    text: str
    original_index: int
    tag: Optional[str] = None

    def __post_init__(self):
        if not self.text:
            raise ValidationError(f"passage {self.passage_id!r} has empty text")
        if self.original_index < 0:
            raise ValidationError(f"passage {self.passage_id!r} has negative index")

    @property
    def full_text(self) -> str:
        """Title concatenated before the body; used by lexical scorers."""
        return f"{self.title}: {self.text}" if self.title else self.text


@dataclass(frozen=True)
class CandidateSet:
    """The ordered candidate passages of one question (dataset order)."""

    passages: tuple[Passage, ...]

    def __post_init__(self):
        if len(self.passages) < 2:
            raise ValidationError("candidate set needs at least 2 passages")
        ids = [p.passage_id for p in self.passages]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate passage_id in candidate set")
        if [p.original_index for p in self.passages] != list(range(len(ids))):
            raise ValidationError("original_index values must be 0..n-1 in order")
        tags = [p.tag for p in self.passages if p.tag is not None]
        if len(set(tags)) != len(tags):
            raise ValidationError("duplicate tag in candidate set")

    def __len__(self) -> int:
        return len(self.passages)

    def __iter__(self) -> Iterator[Passage]:
        return iter(self.passages)

    @property
    def ids(self) -> list[str]:
        return [p.passage_id for p in self.passages]

    @property
    def tagged(self) -> bool:
        return all(p.tag is not None for p in self.passages)

    def by_id(self, passage_id: str) -> Passage:
        for p in self.passages:
            if p.passage_id == passage_id:
                return p
        raise KeyError(passage_id)


@dataclass(frozen=True)
class QuestionRecord:
    question_id: str
    question_text: str
    candidates: CandidateSet
    gold_passage_ids: frozenset[str]
    gold_answers: tuple[str, ...]

    def __post_init__(self):
        if not self.gold_passage_ids:
            raise ValidationError(f"question {self.question_id!r} has no gold passages")
        missing = self.gold_passage_ids - set(self.candidates.ids)
        if missing:
            raise ValidationError(
                f"question {self.question_id!r}: gold ids not among candidates: {sorted(missing)}"
            )
        if not self.gold_answers or any(not a for a in self.gold_answers):
            raise ValidationError(f"question {self.question_id!r} needs non-empty gold answers")


@dataclass(frozen=True)
class Dataset:
    name: str
    records: tuple[QuestionRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        ids = [r.question_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"dataset {self.name!r} has duplicate question_ids")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[QuestionRecord]:
        return iter(self.records)

    def total_passages(self) -> int:
        return sum(len(r.candidates) for r in self.records)


# --- passage tags -----------------------------------------------------------

def index_to_tag(index: int) -> str:
    """0 -> A, 25 -> Z, 26 -> AA, ... (bijective base-26)."""
    if index < 0:
        raise ValueError("index must be >= 0")
    n = index + 1
    chars = []
    while n > 0:
        n, rem = divmod(n - 1, 26)
        chars.append(chr(ord("A") + rem))
    return "".join(reversed(chars))


def tag_to_index(tag: str) -> int:
    """Inverse of index_to_tag; raises ValueError on non-alphabetic tags."""
    if not tag or not all("A" <= c <= "Z" for c in tag):
        raise ValueError(f"not a passage tag: {tag!r}")
    n = 0
    for c in tag:
        n = n * 26 + (ord(c) - ord("A") + 1)
    return n - 1


def assign_passage_tags(candidates: CandidateSet) -> CandidateSet:
    """Tag passages A, B, ... in original_index order. Idempotent."""
    return CandidateSet(
        tuple(replace(p, tag=index_to_tag(p.original_index)) for p in candidates.passages)
    )


def tag_record(record: QuestionRecord) -> QuestionRecord:
    return replace(record, candidates=assign_passage_tags(record.candidates))


def tag_dataset(dataset: Dataset) -> Dataset:
    return replace(dataset, records=tuple(tag_record(r) for r in dataset.records))


# --- loaders ----------------------------------------------------------------

def load_dataset(path: str | Path, format: str) -> Dataset:
    """Load a dataset file in the named format into canonical records."""
    if format not in FORMATS:
        raise ValidationError(f"unknown format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"dataset file not found: {path}")
    loader = {
        "hotpotqa": _record_from_hotpot,
        "2wiki": _record_from_hotpot,
        "musique": _record_from_musique,
        "canonical": record_from_canonical_row,
    }[format]
    records = []
    for row in _read_rows(path):
        records.append(loader(row))
    if not records:
        raise ValidationError(f"no records in {path}")
    return Dataset(name=path.stem, records=tuple(records))


def _read_rows(path: Path) -> Iterable[dict]:
    """Yield row dicts from a JSON array or a JSONL file."""
    raw = path.read_text(encoding="utf-8")
    if not raw.strip():
        raise ValidationError(f"empty dataset file: {path}")
    head = raw.lstrip()[0]
    if head == "[":
        try:
            rows = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: malformed JSON: {exc}") from exc
        if not isinstance(rows, list):
            raise ValidationError(f"{path}: expected a JSON array of records")
        yield from rows
    else:
        for lineno, line in enumerate(raw.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: malformed JSON line: {exc}") from exc


def _record_from_hotpot(row: dict) -> QuestionRecord:
    """HotpotQA / 2WikiMultiHopQA distractor row -> QuestionRecord.

    Candidates come from ``context`` in file order; gold ids are the
    passages whose title appears in ``supporting_facts``.
    """
    try:
        qid = str(row.get("_id") or row["id"])
    except KeyError as exc:
        raise ValidationError(f"record missing _id/id: {row}") from exc
    context = row.get("context") or []
    passages = []
    for i, entry in enumerate(context):
        title, sentences = entry[0], entry[1]
        text = " ".join(s.strip() for s in sentences if s.strip()) if isinstance(sentences, list) else str(sentences)
        passages.append(Passage(passage_id=f"p{i}", title=str(title), text=text, original_index=i))
    supp_titles = {sf[0] for sf in row.get("supporting_facts") or []}
    gold = frozenset(p.passage_id for p in passages if p.title in supp_titles)
    missing = supp_titles - {p.title for p in passages}
    if missing:
        raise ValidationError(
            f"question {qid!r}: supporting titles not among candidates: {sorted(missing)}"
        )
    answer = str(row.get("answer") or "").strip()
    return QuestionRecord(
        question_id=qid,
        question_text=str(row["question"]),
        candidates=CandidateSet(tuple(passages)),
        gold_passage_ids=gold,
        gold_answers=(answer,) if answer else (),
    )


def _record_from_musique(row: dict) -> QuestionRecord:
    """MuSiQue row (``paragraphs`` with ``is_supporting``) -> QuestionRecord."""
    try:
        qid = str(row["id"])
    except KeyError as exc:
        raise ValidationError(f"record missing id: {row}") from exc
    passages = []
    gold = set()
    for i, para in enumerate(row.get("paragraphs") or []):
        pid = f"p{i}"
        passages.append(
            Passage(
                passage_id=pid,
                title=str(para.get("title") or ""),
                text=str(para["paragraph_text"]),
                original_index=i,
            )
        )
        if para.get("is_supporting"):
            gold.add(pid)
    answers = [str(row.get("answer") or "").strip()]
    answers += [str(a).strip() for a in row.get("answer_aliases") or []]
    answers = [a for a in dict.fromkeys(answers) if a]
    return QuestionRecord(
        question_id=qid,
        question_text=str(row["question"]),
        candidates=CandidateSet(tuple(passages)),
        gold_passage_ids=frozenset(gold),
        gold_answers=tuple(answers),
    )


def record_from_canonical_row(row: dict) -> QuestionRecord:
    try:
        passages = tuple(
            Passage(
                passage_id=str(p["id"]),
                title=str(p.get("title") or ""),
                text=str(p["text"]),
                original_index=i,
            )
            for i, p in enumerate(row["passages"])
        )
        return QuestionRecord(
            question_id=str(row["question_id"]),
            question_text=str(row["question"]),
            candidates=CandidateSet(passages),
            gold_passage_ids=frozenset(str(g) for g in row["gold_ids"]),
            gold_answers=tuple(str(a) for a in row["answers"]),
        )
    except KeyError as exc:
        raise ValidationError(f"canonical record missing field {exc}") from exc


def canonical_row(record: QuestionRecord) -> dict:
    return {
        "question_id": record.question_id,
        "question": record.question_text,
        "passages": [
            {"id": p.passage_id, "title": p.title, "text": p.text}
            for p in record.candidates
        ],
        "gold_ids": sorted(record.gold_passage_ids),
        "answers": list(record.gold_answers),
    }


def write_canonical(dataset: Dataset, path: str | Path) -> None:
    """Write the canonical one-JSON-object-per-line file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in dataset:
            fh.write(json.dumps(canonical_row(record), ensure_ascii=False) + "\n")


# --- sampling ---------------------------------------------------------------

def sample_training_questions(dataset: Dataset, target_pairs: int, seed: int) -> Dataset:
    """Seeded shuffle, then accumulate whole questions until the summed
    candidate count reaches target_pairs (last record included whole)."""
    if target_pairs < 1:
        raise ValidationError("target_pairs must be >= 1")
    if dataset.total_passages() < target_pairs:
        raise ValidationError(
            f"target_pairs={target_pairs} exceeds the {dataset.total_passages()} "
            f"passages available in {dataset.name!r}"
        )
    order = list(range(len(dataset.records)))
    random.Random(seed).shuffle(order)
    picked = []
    total = 0
    for idx in order:
        record = dataset.records[idx]
        picked.append(record)
        total += len(record.candidates)
        if total >= target_pairs:
            break
    return Dataset(name=dataset.name, records=tuple(picked))

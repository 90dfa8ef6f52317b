"""Reasoning-trace generation and citation parsing.

Traces cite passages with bracketed tags ("[Passage A]"); the parser
recovers the order in which passages are first used, which downstream
annotation conditions on.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .corpus import CandidateSet, Dataset, QuestionRecord
from .errors import ValidationError, ZeroCitationError
from .gateway import ChatRequest, Provider, fan_out

_CITATION_RE = re.compile(r"\[\s*passage\s+([A-Za-z]+)\s*\]", re.IGNORECASE)


@dataclass(frozen=True)
class ReasoningTrace:
    question_id: str
    trace_text: str
    first_use_order: tuple[str, ...]
    citation_counts: Mapping[str, int]

    def __post_init__(self):
        if len(set(self.first_use_order)) != len(self.first_use_order):
            raise ValidationError("first_use_order has duplicates")
        for tag in self.first_use_order:
            if self.citation_counts.get(tag, 0) < 1:
                raise ValidationError(f"tag {tag!r} in first_use_order but not counted")


@dataclass(frozen=True)
class CitationParse:
    first_use_order: tuple[str, ...]
    citation_counts: Mapping[str, int]
    ignored_mentions: Mapping[str, int]


def parse_citations(trace_text: str, valid_tags: set[str]) -> CitationParse:
    """Scan left-to-right for "[Passage <tag>]" citations.

    The keyword is case-insensitive and tags are normalized to upper case;
    mentions of tags outside ``valid_tags`` are kept in a separate
    ignored-mentions diagnostic.
    """
    order: list[str] = []
    counts: Counter = Counter()
    ignored: Counter = Counter()
    for match in _CITATION_RE.finditer(trace_text):
        tag = match.group(1).upper()
        if tag in valid_tags:
            if tag not in counts:
                order.append(tag)
            counts[tag] += 1
        else:
            ignored[tag] += 1
    return CitationParse(
        first_use_order=tuple(order),
        citation_counts=dict(counts),
        ignored_mentions=dict(ignored),
    )


def build_trace_prompt(question: str, candidates: CandidateSet) -> str:
    """Render the trace-generation prompt over a tagged candidate set."""
    if not candidates.tagged:
        raise ValidationError("candidate set must be tagged before prompting")
    lines = [
        "You are given a set of passages, each labelled with a unique tag.",
        "",
    ]
    for p in candidates:
        header = f"[Passage {p.tag}]"
        lines.append(f"{header} {p.title}: {p.text}" if p.title else f"{header} {p.text}")
    lines += [
        "",
        f"Question: {question}",
        "",
        "Write a detailed step-by-step reasoning trace that answers the question.",
        "For every inferential step, explicitly cite the passage(s) that support it",
        'using their bracketed tags, written exactly as "[Passage <tag>]".',
        "Cite one tag per bracket; never combine several tags inside one bracket.",
    ]
    return "\n".join(lines)


def generate_trace(record: QuestionRecord, gateway: Provider) -> ReasoningTrace:
    """Prompt the gateway and parse the returned trace's citations.

    Raises ZeroCitationError when no valid tag is cited, so callers can
    retry or skip the question instead of silently training on it.
    """
    prompt = build_trace_prompt(record.question_text, record.candidates)
    request = ChatRequest(
        role_tag="trace",
        prompt=prompt,
        metadata={"question_id": record.question_id},
    )
    response = gateway.complete(request)
    valid = {p.tag for p in record.candidates if p.tag is not None}
    parsed = parse_citations(response.text, valid)
    if not parsed.first_use_order:
        raise ZeroCitationError(record.question_id)
    return ReasoningTrace(
        question_id=record.question_id,
        trace_text=response.text,
        first_use_order=parsed.first_use_order,
        citation_counts=parsed.citation_counts,
    )


# --- trace file I/O ---------------------------------------------------------

def trace_row(trace: ReasoningTrace) -> dict:
    return {
        "question_id": trace.question_id,
        "trace": trace.trace_text,
        "first_use_order": list(trace.first_use_order),
        "citation_counts": {t: trace.citation_counts[t] for t in sorted(trace.citation_counts)},
    }


def write_traces(traces: list[ReasoningTrace], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for trace in traces:
            fh.write(json.dumps(trace_row(trace), ensure_ascii=False) + "\n")


def read_traces(path: str | Path) -> dict[str, ReasoningTrace]:
    """Load a trace file keyed by question_id."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"trace file not found: {path}")
    traces: dict[str, ReasoningTrace] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                trace = ReasoningTrace(
                    question_id=str(row["question_id"]),
                    trace_text=str(row["trace"]),
                    first_use_order=tuple(row["first_use_order"]),
                    citation_counts={str(k): int(v) for k, v in row["citation_counts"].items()},
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad trace row: {exc}") from exc
            traces[trace.question_id] = trace
    return traces


def generate_traces(
    dataset: Dataset,
    gateway: Provider,
    concurrency: int = 1,
) -> tuple[list[ReasoningTrace], list[tuple[str, str]]]:
    """Generate traces for every record; failures are collected, not raised.

    Returns (traces in dataset order, [(question_id, reason), ...]).
    """
    requests = {}
    prompts_failed: list[tuple[str, str]] = []
    for record in dataset:
        try:
            prompt = build_trace_prompt(record.question_text, record.candidates)
        except ValidationError as exc:
            prompts_failed.append((record.question_id, str(exc)))
            continue
        requests[record.question_id] = ChatRequest(
            role_tag="trace",
            prompt=prompt,
            metadata={"question_id": record.question_id},
        )
    responses = fan_out(gateway, requests, concurrency=concurrency)
    traces: list[ReasoningTrace] = []
    failures = list(prompts_failed)
    for record in dataset:
        if record.question_id not in responses:
            continue
        outcome = responses[record.question_id]
        if isinstance(outcome, Exception):
            failures.append((record.question_id, str(outcome)))
            continue
        valid = {p.tag for p in record.candidates if p.tag is not None}
        parsed = parse_citations(outcome.text, valid)
        if not parsed.first_use_order:
            failures.append((record.question_id, "zero-citation trace"))
            continue
        traces.append(
            ReasoningTrace(
                question_id=record.question_id,
                trace_text=outcome.text,
                first_use_order=parsed.first_use_order,
                citation_counts=parsed.citation_counts,
            )
        )
    return traces, failures

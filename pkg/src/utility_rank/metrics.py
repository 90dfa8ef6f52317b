"""Coverage, ranking, and answer metrics with macro aggregation.

All values live in [0, 1]; percentage rendering happens in the report
layer only.
"""

from __future__ import annotations

import math
import re
import string
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import ValidationError

DEFAULT_CUTOFFS = (1, 2, 5)
NDCG_CUTOFFS = (1, 5)

_ARTICLES_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def prf_at_k(
    ranked_ids: Sequence[str],
    gold_ids: Iterable[str],
    k: int,
) -> tuple[float, float, float]:
    """Precision, recall, and F1 over the top-k of a ranking.

    Lists shorter than k are evaluated over their available length.
    """
    gold = set(gold_ids)
    if k < 1:
        raise ValidationError("k must be >= 1")
    if not gold:
        raise ValidationError("gold set must be non-empty")
    effective_k = min(k, len(ranked_ids))
    hits = sum(1 for pid in ranked_ids[:effective_k] if pid in gold)
    precision = hits / effective_k if effective_k else 0.0
    recall = hits / len(gold)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def ndcg_at_k(ranked_ids: Sequence[str], gold_ids: Iterable[str], k: int) -> float:
    """Binary-gain NDCG: DCG over the top-k divided by the ideal DCG."""
    gold = set(gold_ids)
    if k < 1:
        raise ValidationError("k must be >= 1")
    if not gold:
        raise ValidationError("gold set must be non-empty")
    effective_k = min(k, len(ranked_ids))
    dcg = sum(
        1.0 / math.log2(i + 1)
        for i, pid in enumerate(ranked_ids[:effective_k], start=1)
        if pid in gold
    )
    idcg = sum(1.0 / math.log2(i + 1) for i in range(1, min(k, len(gold)) + 1))
    return dcg / idcg


def normalize_answer(text: str) -> str:
    """Lower-case, strip punctuation, drop whole-word articles, collapse spaces."""
    lowered = text.lower().translate(_PUNCT_TABLE)
    return " ".join(_ARTICLES_RE.sub(" ", lowered).split())


def exact_match(predicted: str, golds: Sequence[str]) -> int:
    """1 iff the normalized prediction equals any normalized gold answer."""
    if not golds:
        raise ValidationError("gold answer list must be non-empty")
    normalized = normalize_answer(predicted)
    return int(any(normalized == normalize_answer(g) for g in golds))


@dataclass(frozen=True)
class MetricReport:
    """Per-question metric values plus their unweighted macro means."""

    per_question: Mapping[str, Mapping[str, float]]
    macro: Mapping[str, float]
    evaluated: int
    excluded: tuple[str, ...] = field(default_factory=tuple)


def question_metrics(
    ranked_ids: Sequence[str],
    gold_ids: Iterable[str],
    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
    ndcg_cutoffs: Sequence[int] = NDCG_CUTOFFS,
    em: float | None = None,
) -> dict[str, float]:
    """All per-question metrics for one ranking (and optionally one answer)."""
    values: dict[str, float] = {}
    for k in cutoffs:
        p, r, f1 = prf_at_k(ranked_ids, gold_ids, k)
        values[f"P@{k}"] = p
        values[f"R@{k}"] = r
        values[f"F1@{k}"] = f1
    for k in ndcg_cutoffs:
        values[f"NDCG@{k}"] = ndcg_at_k(ranked_ids, gold_ids, k)
    if em is not None:
        values["EM"] = float(em)
    return values


def aggregate(
    per_question: Mapping[str, Mapping[str, float]],
    excluded: Sequence[str] = (),
) -> MetricReport:
    """Unweighted (macro) mean over questions, per metric."""
    if not per_question:
        raise ValidationError("nothing to aggregate: no evaluated questions")
    ordered = {qid: dict(per_question[qid]) for qid in sorted(per_question)}
    names = list(next(iter(ordered.values())).keys())
    for qid, values in ordered.items():
        if list(values.keys()) != names:
            raise ValidationError(f"question {qid!r} has mismatched metric set")
    macro = {name: sum(v[name] for v in ordered.values()) / len(ordered) for name in names}
    return MetricReport(
        per_question=ordered,
        macro=macro,
        evaluated=len(ordered),
        excluded=tuple(sorted(excluded)),
    )

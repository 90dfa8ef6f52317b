"""Training data: pointwise JSONL rows, vocabulary, and pair encoding."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

TARGET_MIN = 1.0
TARGET_MAX = 5.0

PAD, UNK, CLS, SEP = 0, 1, 2, 3
SPECIALS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]")

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class DataError(ValueError):
    """Malformed training or inference rows."""


@dataclass(frozen=True)
class TrainingExample:
    question: str
    passage: str
    target: float

    def __post_init__(self):
        if not TARGET_MIN <= self.target <= TARGET_MAX:
            raise DataError(f"target {self.target} outside [{TARGET_MIN}, {TARGET_MAX}]")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def load_pointwise(path: str | Path) -> list[TrainingExample]:
    """Read {"question","passage","score"} rows; row errors carry line numbers."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"training file not found: {path}")
    examples = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                example = TrainingExample(
                    question=str(row["question"]),
                    passage=str(row["passage"]),
                    target=float(row["score"]),
                )
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad training row: {exc}") from exc
            examples.append(example)
    if not examples:
        raise DataError(f"training file {path} is empty")
    return examples


@dataclass(frozen=True)
class Vocab:
    """Word-level vocabulary built from the training corpus."""

    token_to_id: dict[str, int]

    def __len__(self) -> int:
        return len(self.token_to_id)

    def encode(self, text: str) -> list[int]:
        return [self.token_to_id.get(t, UNK) for t in tokenize(text)]

    @classmethod
    def build(cls, examples: list[TrainingExample], max_size: int = 20_000) -> "Vocab":
        counts: dict[str, int] = {}
        for example in examples:
            for token in tokenize(example.question) + tokenize(example.passage):
                counts[token] = counts.get(token, 0) + 1
        # frequency order, ties alphabetical, so rebuilding is reproducible
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        token_to_id = {token: i for i, token in enumerate(SPECIALS)}
        for token, _ in ranked[: max_size - len(SPECIALS)]:
            token_to_id[token] = len(token_to_id)
        return cls(token_to_id=token_to_id)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.token_to_id, ensure_ascii=False, sort_keys=True),
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        return cls(token_to_id=json.loads(Path(path).read_text(encoding="utf-8")))


def encode_pair(
    vocab: Vocab,
    question: str,
    passage: str,
    max_length: int,
) -> tuple[list[int], list[int], list[int]]:
    """[CLS] question [SEP] passage [SEP] with the passage side truncated first.

    Returns (token_ids, segment_ids, match_flags). Segment 0 marks the
    question half; a match flag is 1 when the token also occurs on the other
    side of the pair (exact-match featurization in the neural-IR tradition),
    which lets a from-scratch encoder see cross-segment overlap immediately
    instead of having to discover it through attention.
    """
    q_tokens = tokenize(question)
    p_tokens = tokenize(passage)
    q_ids = [vocab.token_to_id.get(t, UNK) for t in q_tokens]
    p_ids = [vocab.token_to_id.get(t, UNK) for t in p_tokens]
    budget = max_length - 3  # CLS + 2 SEP
    if len(q_ids) + len(p_ids) > budget:
        keep = max(budget - len(q_ids), 0)
        p_ids, p_tokens = p_ids[:keep], p_tokens[:keep]
    if len(q_ids) + len(p_ids) > budget:
        q_ids, q_tokens = q_ids[:budget], q_tokens[:budget]
    q_set, p_set = set(q_tokens), set(p_tokens)
    ids = [CLS] + q_ids + [SEP] + p_ids + [SEP]
    segments = [0] * (len(q_ids) + 2) + [1] * (len(p_ids) + 1)
    flags = (
        [0]
        + [1 if t in p_set else 0 for t in q_tokens]
        + [0]
        + [1 if t in q_set else 0 for t in p_tokens]
        + [0]
    )
    return ids, segments, flags

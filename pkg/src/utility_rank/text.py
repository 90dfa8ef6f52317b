"""Shared lexical helpers: one tokenizer for every lexical scorer."""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lower-case and split on runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())

"""Text normalization shared by the matchmaker, surrogates, and taxonomy.

Everything downstream (novelty scores, salience, idea clustering) is defined
on the output of :func:`tokenize`, so the rules here are deliberately simple
and frozen: lowercase, drop punctuation, split on whitespace, remove
stopwords from the shipped list.
"""

from __future__ import annotations

import re
from collections import Counter
from functools import lru_cache
from importlib import resources
from typing import Iterable

import numpy as np

_PUNCT_RE = re.compile(r"[^\w\s]+", re.UNICODE)


def load_wordlist(name: str) -> tuple[str, ...]:
    text = resources.files("swarmchat.data").joinpath(name).read_text("utf-8")
    return tuple(
        line.strip()
        for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    )


STOPWORDS: frozenset[str] = frozenset(load_wordlist("stopwords.txt"))


def tokenize(text: str) -> Counter[str]:
    """Token multiset of *text*: lowercased, punctuation-stripped, stopword-free."""
    return Counter(content_tokens(text))


def content_tokens(text: str) -> list[str]:
    """Like :func:`tokenize` but keeps the original token order."""
    stripped = _PUNCT_RE.sub("", text.lower())
    return [t for t in stripped.split() if t not in STOPWORDS]


@lru_cache(maxsize=4096)
def _cached_tokens(text: str) -> tuple[str, ...]:
    return tuple(content_tokens(text))


def cached_content_tokens(text: str) -> tuple[str, ...]:
    """Memoized tokenizer for hot paths where texts repeat (bot scripts)."""
    return _cached_tokens(text)


class TokenInterner:
    """Maps token strings to dense int32 ids for the similarity kernels.

    One interner per session; ids are only meaningful within it and are
    never serialized.
    """

    def __init__(self) -> None:
        self._ids: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self._ids)

    def intern(self, token: str) -> int:
        tid = self._ids.get(token)
        if tid is None:
            tid = len(self._ids)
            self._ids[token] = tid
        return tid

    def intern_set(self, tokens: Iterable[str]) -> np.ndarray:
        """Sorted unique id array for a token collection."""
        ids = {self.intern(t) for t in tokens}
        arr = np.fromiter(ids, dtype=np.int32, count=len(ids))
        arr.sort()
        return arr


EMPTY_IDS = np.empty(0, dtype=np.int32)

"""Shared fixtures and independent oracle helpers.

The oracles deliberately avoid the library's tokenizer/kernel/selection
code paths: they re-read the shipped data files and recompute everything
with plain Python so tests catch divergence in the fast paths.
"""

from __future__ import annotations

import re
from pathlib import Path

import pytest

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "swarmchat" / "data"

_ORACLE_STOPWORDS = {
    line.strip()
    for line in (DATA_DIR / "stopwords.txt").read_text("utf-8").splitlines()
    if line.strip() and not line.startswith("#")
}
_ORACLE_PUNCT = re.compile(r"[^\w\s]+", re.UNICODE)


def oracle_tokens(text: str) -> list[str]:
    """Reference tokenizer: lowercase, strip punctuation, split, drop stopwords."""
    stripped = _ORACLE_PUNCT.sub("", text.lower())
    return [t for t in stripped.split() if t not in _ORACLE_STOPWORDS]


def oracle_novelty(insight_text: str, profile_tokens) -> float:
    a = set(oracle_tokens(insight_text))
    b = set(profile_tokens)
    if not a and not b:
        return 0.0
    if not a or not b:
        return 1.0
    return 1.0 - len(a & b) / len(a | b)


def oracle_gini(counts) -> float:
    n = len(counts)
    total = sum(counts)
    if n == 0 or total == 0:
        return 0.0
    diff_sum = sum(abs(x - y) for x in counts for y in counts)
    return diff_sum / (2 * n * n * (total / n))


@pytest.fixture
def small_config():
    from swarmchat.model import SessionConfig

    return SessionConfig(
        session_id="test",
        target_subgroup_size=5,
        duration=120.0,
        tick_interval=5.0,
        starvation_threshold=5.0,
        random_seed=7,
        distill_every_messages=3,
        distill_every_seconds=20.0,
    )

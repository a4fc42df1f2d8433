"""Pure-Python reference implementation of the similarity kernels.

Same contract as the compiled ``_speedups`` module; selected at import time
when the extension is unavailable or ``SWARMCHAT_PURE_PYTHON`` is set.
All inputs are sorted unique int32 arrays (see ``tokens.TokenInterner``).
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def jaccard_sorted(a: np.ndarray, b: np.ndarray) -> float:
    """Jaccard similarity of two sorted unique id arrays. Both empty -> 1.0."""
    na, nb = len(a), len(b)
    if na == 0 and nb == 0:
        return 1.0
    if na == 0 or nb == 0:
        return 0.0
    inter = len(np.intersect1d(a, b, assume_unique=True))
    return inter / (na + nb - inter)


def novelty_many(
    flat: np.ndarray, offsets: np.ndarray, other: np.ndarray, out: np.ndarray
) -> None:
    """out[i] = 1 - jaccard(flat[offsets[i]:offsets[i+1]], other)."""
    other_set = set(other.tolist())
    n_other = len(other_set)
    items = flat.tolist()
    offs = offsets.tolist()
    for i in range(len(offs) - 1):
        lo, hi = offs[i], offs[i + 1]
        size = hi - lo
        if size == 0 and n_other == 0:
            out[i] = 0.0
            continue
        if size == 0 or n_other == 0:
            out[i] = 1.0
            continue
        inter = 0
        for j in range(lo, hi):
            if items[j] in other_set:
                inter += 1
        out[i] = 1.0 - inter / (size + n_other - inter)


def best_jaccard(
    flat: np.ndarray,
    offsets: np.ndarray,
    query: np.ndarray,
    candidates: np.ndarray,
) -> tuple[int, float]:
    """(candidate index, score) maximizing jaccard(query, set_i).

    Ties keep the earliest candidate in the given order. Empty candidate
    list -> (-1, -1.0).
    """
    best_idx, best = -1, -1.0
    qset = set(query.tolist())
    nq = len(qset)
    items = flat.tolist()
    offs = offsets.tolist()
    for idx in candidates.tolist():
        lo, hi = offs[idx], offs[idx + 1]
        size = hi - lo
        if nq == 0 and size == 0:
            score = 1.0
        elif nq == 0 or size == 0:
            score = 0.0
        else:
            inter = 0
            for j in range(lo, hi):
                if items[j] in qset:
                    inter += 1
            score = inter / (size + nq - inter)
        if score > best:
            best_idx, best = idx, score
    return best_idx, best

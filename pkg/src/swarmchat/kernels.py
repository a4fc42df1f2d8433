"""Backend selection for the similarity kernels.

Prefers the compiled ``_speedups`` extension; falls back to the pure-Python
implementation when the extension was not built. Set ``SWARMCHAT_PURE_PYTHON``
(any non-empty value) to force the fallback, e.g. for benchmarking.
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("SWARMCHAT_PURE_PYTHON"):
    from swarmchat import _kernels_py as _backend
else:
    try:
        from swarmchat import _speedups as _backend  # type: ignore[no-redef]
    except ImportError:
        from swarmchat import _kernels_py as _backend  # type: ignore[no-redef]

BACKEND: str = _backend.BACKEND_NAME

jaccard_sorted = _backend.jaccard_sorted
novelty_many = _backend.novelty_many
best_jaccard = _backend.best_jaccard


class FlatSets:
    """Append-only arena of id sets stored flat for batch kernel calls.

    Keeps every set contiguous in one int32 array with an int64 offset
    table; the flat views rebuild lazily after appends.
    """

    def __init__(self) -> None:
        self._sets: list[np.ndarray] = []
        self._flat = np.empty(0, dtype=np.int32)
        self._offsets = np.zeros(1, dtype=np.int64)
        self._dirty = False

    def __len__(self) -> int:
        return len(self._sets)

    def append(self, ids: np.ndarray) -> int:
        self._sets.append(ids)
        self._dirty = True
        return len(self._sets) - 1

    def get(self, idx: int) -> np.ndarray:
        return self._sets[idx]

    def _rebuild(self) -> None:
        sizes = np.fromiter(
            (len(s) for s in self._sets), dtype=np.int64, count=len(self._sets)
        )
        self._offsets = np.zeros(len(self._sets) + 1, dtype=np.int64)
        np.cumsum(sizes, out=self._offsets[1:])
        self._flat = (
            np.concatenate(self._sets) if self._sets else np.empty(0, dtype=np.int32)
        )
        if self._flat.dtype != np.int32:
            self._flat = self._flat.astype(np.int32)
        self._dirty = False

    @property
    def flat(self) -> np.ndarray:
        if self._dirty:
            self._rebuild()
        return self._flat

    @property
    def offsets(self) -> np.ndarray:
        if self._dirty:
            self._rebuild()
        return self._offsets

    def novelty_against(self, other: np.ndarray) -> np.ndarray:
        """Vector of 1 - jaccard(set_i, other) over the whole arena."""
        out = np.empty(len(self._sets), dtype=np.float64)
        novelty_many(self.flat, self.offsets, other, out)
        return out

    def best_match(self, query: np.ndarray, candidates: np.ndarray) -> tuple[int, float]:
        """Highest-jaccard candidate index for *query*; (-1, -1.0) if none."""
        if len(candidates) == 0:
            return -1, -1.0
        return best_jaccard(self.flat, self.offsets, query, candidates)

"""Insight routing: who has content ready, who is starving, and which
pending insight would maximally change each receiving subgroup.

Novelty is 1 minus the Jaccard similarity between an insight's token set
and the receiver's recent-conversation token set. The scorer is pluggable
(see ``NoveltyScorer``); the token form here is the reference the tests
pin down.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass
from typing import Iterable, Optional, Protocol, Sequence

import numpy as np

from swarmchat import kernels
from swarmchat.model import Insight
from swarmchat.tokens import EMPTY_IDS, TokenInterner, tokenize


def novelty(insight_text: str, profile: Counter[str] | Iterable[str]) -> float:
    """1 - Jaccard(tokens(insight_text), set(profile)), in [0, 1].

    Both sides empty scores 0: nothing is novel about nothing.
    """
    a = set(tokenize(insight_text))
    b = set(profile)
    if not a and not b:
        return 0.0
    if not a or not b:
        return 1.0
    inter = len(a & b)
    return 1.0 - inter / (len(a) + len(b) - inter)


class NoveltyScorer(Protocol):
    """Batch scorer: novelty of every pool entry against one profile."""

    def scores(self, pool: "InsightPool", profile_ids: np.ndarray) -> np.ndarray: ...


class TokenNoveltyScorer:
    """Reference scorer: token-set novelty via the similarity kernels."""

    def scores(self, pool: "InsightPool", profile_ids: np.ndarray) -> np.ndarray:
        return pool.novelty_against(profile_ids)


class ContentProfile:
    """Sliding token multiset over the last *window* messages of a subgroup."""

    def __init__(self, interner: TokenInterner, window: int) -> None:
        self._interner = interner
        self._window = window
        self._messages: deque[list[int]] = deque()
        self._counts: Counter[int] = Counter()
        self._names: dict[int, str] = {}
        self._cached_ids: Optional[np.ndarray] = None

    def push(self, tokens: Sequence[str]) -> None:
        ids = []
        for tok in tokens:
            tid = self._interner.intern(tok)
            self._names[tid] = tok
            ids.append(tid)
        self._messages.append(ids)
        self._counts.update(ids)
        if len(self._messages) > self._window:
            for tid in self._messages.popleft():
                self._counts[tid] -= 1
                if self._counts[tid] == 0:
                    del self._counts[tid]
        self._cached_ids = None

    @property
    def ids(self) -> np.ndarray:
        """Sorted unique id array of the current window."""
        if self._cached_ids is None:
            arr = np.fromiter(self._counts.keys(), dtype=np.int32, count=len(self._counts))
            arr.sort()
            self._cached_ids = arr
        return self._cached_ids

    def as_multiset(self) -> Counter[str]:
        """String-token view (matches the public ``novelty`` signature)."""
        return Counter(
            {self._names[tid]: count for tid, count in self._counts.items()}
        )


@dataclass
class SubgroupRouting:
    """Mutable per-subgroup routing state, owned by the session sequencer."""

    subgroup_id: str
    profile: ContentProfile
    last_delivery_at: int = 0
    received_insight_ids: set[str] = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.received_insight_ids is None:
            self.received_insight_ids = set()


class InsightPool:
    """Pending insights, FIFO-bounded, with near-duplicate suppression."""

    def __init__(
        self,
        interner: TokenInterner,
        max_size: int = 64,
        dedup_floor: float = 0.2,
    ) -> None:
        self._interner = interner
        self.max_size = max_size
        self.dedup_floor = dedup_floor
        self._insights: list[Insight] = []  # insertion order == creation order
        self._token_sets: list[np.ndarray] = []
        self._flat: Optional[np.ndarray] = None
        self._offsets: Optional[np.ndarray] = None
        self._id_to_idx: Optional[dict[str, int]] = None

    def __len__(self) -> int:
        return len(self._insights)

    @property
    def pending(self) -> tuple[Insight, ...]:
        return tuple(self._insights)

    def pending_list(self) -> list[Insight]:
        return self._insights

    def index_of(self, insight_id: str) -> int:
        if self._id_to_idx is None:
            self._id_to_idx = {
                ins.insight_id: i for i, ins in enumerate(self._insights)
            }
        return self._id_to_idx[insight_id]

    def _invalidate(self) -> None:
        self._flat = None
        self._offsets = None
        self._id_to_idx = None

    def token_set(self, idx: int) -> np.ndarray:
        return self._token_sets[idx]

    def enqueue(self, insight: Insight) -> bool:
        """Add *insight* unless a near-duplicate from the same source exists.

        Evicts the oldest entry when the pool would exceed max_size.
        Returns True when the insight was accepted.
        """
        ids = self._interner.intern_set(tokenize(insight.text))
        for existing, existing_ids in zip(self._insights, self._token_sets):
            if existing.source_subgroup != insight.source_subgroup:
                continue
            if 1.0 - kernels.jaccard_sorted(ids, existing_ids) < self.dedup_floor:
                return False
        self._insights.append(insight)
        self._token_sets.append(ids)
        if len(self._insights) > self.max_size:
            del self._insights[0]
            del self._token_sets[0]
        self._invalidate()
        return True

    def replace(self, idx: int, insight: Insight) -> None:
        """Swap in an updated (post-delivery) copy; token set is unchanged."""
        self._insights[idx] = insight

    def remove_ids(self, insight_ids: set[str]) -> None:
        if not insight_ids:
            return
        keep = [
            (ins, ids)
            for ins, ids in zip(self._insights, self._token_sets)
            if ins.insight_id not in insight_ids
        ]
        self._insights = [ins for ins, _ in keep]
        self._token_sets = [ids for _, ids in keep]
        self._invalidate()

    def novelty_against(self, profile_ids: np.ndarray) -> np.ndarray:
        """Novelty of every pool entry versus one profile id set."""
        if self._flat is None:
            sizes = [len(s) for s in self._token_sets]
            self._offsets = np.zeros(len(sizes) + 1, dtype=np.int64)
            np.cumsum(np.asarray(sizes, dtype=np.int64), out=self._offsets[1:])
            self._flat = (
                np.concatenate(self._token_sets).astype(np.int32, copy=False)
                if self._token_sets
                else EMPTY_IDS
            )
        out = np.empty(len(self._insights), dtype=np.float64)
        kernels.novelty_many(self._flat, self._offsets, profile_ids, out)
        return out


class FullyConnectedTopology:
    """Any insight may go to any subgroup except its source (the default)."""

    def allows(self, insight: Insight, receiver_id: str) -> bool:
        return receiver_id != insight.source_subgroup


class RingTopology:
    """Neighbor-only baseline: an insight spreads hop by hop around a ring.

    A receiver qualifies only if it is a ring neighbor of some subgroup
    already holding the insight (the source or a prior receiver). Exists
    for simulator comparisons, never for live routing.
    """

    def __init__(self, subgroup_ids: Sequence[str]) -> None:
        self._order = sorted(subgroup_ids)
        self._pos = {gid: i for i, gid in enumerate(self._order)}

    def _neighbors(self, gid: str) -> tuple[str, str]:
        i = self._pos[gid]
        n = len(self._order)
        return self._order[(i - 1) % n], self._order[(i + 1) % n]

    def allows(self, insight: Insight, receiver_id: str) -> bool:
        if receiver_id == insight.source_subgroup:
            return False
        holders = {insight.source_subgroup, *insight.delivered_to}
        for holder in holders:
            if receiver_id in self._neighbors(holder):
                return True
        return False


@dataclass(frozen=True)
class Delivery:
    subgroup_id: str
    insight: Insight  # copy whose delivered_to already includes subgroup_id


class IneligibleSubgroupError(RuntimeError):
    """select_delivery was called for a subgroup that is not starving yet."""


class Matchmaker:
    """Single logical sequencer for all routing decisions of one session."""

    def __init__(
        self,
        interner: TokenInterner,
        subgroup_ids: Sequence[str],
        *,
        profile_window: int = 30,
        starvation_threshold_ms: int = 45_000,
        novelty_floor: float = 0.3,
        dedup_floor: float = 0.2,
        pool_max_size: int = 64,
        topology=None,
        scorer: NoveltyScorer | None = None,
    ) -> None:
        self.interner = interner
        self.starvation_threshold_ms = starvation_threshold_ms
        self.novelty_floor = novelty_floor
        self.pool = InsightPool(interner, max_size=pool_max_size, dedup_floor=dedup_floor)
        self.topology = topology or FullyConnectedTopology()
        self.scorer: NoveltyScorer = scorer or TokenNoveltyScorer()
        self.routing: dict[str, SubgroupRouting] = {
            gid: SubgroupRouting(gid, ContentProfile(interner, profile_window))
            for gid in subgroup_ids
        }
        self._all_ids = set(subgroup_ids)

    def add_subgroup(self, subgroup_id: str, now: int, profile_window: int = 30) -> None:
        """Register a subgroup opened mid-session (late-join rule)."""
        self.routing[subgroup_id] = SubgroupRouting(
            subgroup_id, ContentProfile(self.interner, profile_window), last_delivery_at=now
        )
        self._all_ids.add(subgroup_id)

    def observe_message(self, subgroup_id: str, tokens: Sequence[str]) -> None:
        self.routing[subgroup_id].profile.push(tokens)

    def enqueue_insight(self, insight: Insight) -> bool:
        return self.pool.enqueue(insight)

    def is_eligible(self, subgroup_id: str, now: int) -> bool:
        state = self.routing[subgroup_id]
        return now - state.last_delivery_at >= self.starvation_threshold_ms

    def select_delivery(self, subgroup_id: str, now: int) -> Optional[Insight]:
        """Best qualifying insight for a starving subgroup, or None.

        Qualifying: foreign source, not yet received here, topology allows
        it, novelty >= floor. Maximal novelty wins; ties fall to older
        created_at, then lexicographic insight_id.
        """
        if not self.is_eligible(subgroup_id, now):
            raise IneligibleSubgroupError(
                f"{subgroup_id} is not eligible at t={now}; scheduler bug"
            )
        state = self.routing[subgroup_id]
        if len(self.pool) == 0:
            return None
        scores = self.scorer.scores(self.pool, state.profile.ids)
        best: Optional[tuple[float, int, str]] = None
        best_insight: Optional[Insight] = None
        for idx, insight in enumerate(self.pool.pending_list()):
            if insight.insight_id in state.received_insight_ids:
                continue
            if not self.topology.allows(insight, subgroup_id):
                continue
            score = float(scores[idx])
            if score < self.novelty_floor:
                continue
            key = (-score, insight.created_at, insight.insight_id)
            if best is None or key < best:
                best = key
                best_insight = insight
        return best_insight

    def tick(self, now: int) -> list[Delivery]:
        """One matchmaking pass: serve starving subgroups, most-starved first.

        A single insight may fan out to several receivers in one tick. Fully
        propagated insights leave the pool afterwards.
        """
        order = sorted(
            self.routing.values(), key=lambda s: (s.last_delivery_at, s.subgroup_id)
        )
        deliveries: list[Delivery] = []
        for state in order:
            if now - state.last_delivery_at < self.starvation_threshold_ms:
                continue
            chosen = self.select_delivery(state.subgroup_id, now)
            if chosen is None:
                continue
            updated = chosen.with_delivery(state.subgroup_id)
            self.pool.replace(self.pool.index_of(chosen.insight_id), updated)
            state.received_insight_ids.add(updated.insight_id)
            state.last_delivery_at = now
            deliveries.append(Delivery(state.subgroup_id, updated))

        exhausted = {
            ins.insight_id
            for ins in self.pool.pending_list()
            if not (self._all_ids - {ins.source_subgroup} - ins.delivered_to)
        }
        self.pool.remove_ids(exhausted)
        return deliveries

"""Roster partitioning into conversation-sized subgroups of 4-7 members."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

MIN_SIZE = 4
MAX_SIZE = 7


class RosterTooSmallError(ValueError):
    """Raised when a roster cannot support swarm mode (n < 4)."""


@dataclass(frozen=True)
class PartitionPlan:
    subgroups: tuple[frozenset[str], ...]
    target_size: int

    @property
    def sizes(self) -> list[int]:
        return [len(g) for g in self.subgroups]


def group_count(n: int, target_size: int) -> int:
    """round(n / target), clamped so every group size stays in [4, 7].

    Uses round-half-up so the count does not depend on banker's rounding.
    """
    k = math.floor(n / target_size + 0.5)
    k_min = max(1, math.ceil(n / MAX_SIZE))
    k_max = max(1, n // MIN_SIZE)
    return min(max(k, k_min), k_max)


def partition(roster: Sequence[str], target_size: int, seed: int) -> PartitionPlan:
    """Split *roster* into group_count() subgroups via a seeded shuffle.

    Group sizes differ by at most one; all sizes land in [4, 7] whenever
    n >= 8 (and for 4 <= n <= 7 the single group is the whole roster).
    """
    n = len(roster)
    if n < MIN_SIZE:
        raise RosterTooSmallError(
            f"roster too small for swarm mode: {n} < {MIN_SIZE}"
        )
    if not MIN_SIZE <= target_size <= MAX_SIZE:
        raise ValueError(f"target_size must be in [4, 7], got {target_size}")

    shuffled = list(roster)
    random.Random(seed).shuffle(shuffled)

    k = group_count(n, target_size)
    base, extra = divmod(n, k)
    groups = []
    pos = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        groups.append(frozenset(shuffled[pos : pos + size]))
        pos += size
    return PartitionPlan(subgroups=tuple(groups), target_size=target_size)


def choose_subgroup_for_late_join(sizes: Mapping[str, int]) -> str | None:
    """Smallest subgroup that can take one more member without exceeding 7.

    Ties break on subgroup id so live assignment is replayable. Returns
    None when every subgroup is full; the caller queues the joiner until
    enough queue up to open a new subgroup at size >= 4.
    """
    candidates = [(size, gid) for gid, size in sizes.items() if size < MAX_SIZE]
    if not candidates:
        return None
    return min(candidates)[1]

"""Session metrics recomputable from the event log alone."""

from __future__ import annotations

from collections import Counter
from typing import Iterable, Mapping, Sequence

from swarmchat.model import SessionEvent


def gini(counts: Sequence[float]) -> float:
    """Gini coefficient over contribution counts; 0 = perfectly balanced.

    Defined as 0 for empty input or an all-zero vector.
    """
    n = len(counts)
    if n == 0:
        return 0.0
    total = float(sum(counts))
    if total == 0.0:
        return 0.0
    ordered = sorted(counts)
    # sum_i (2i - n - 1) x_i / (n * total), with i starting at 1
    weighted = sum((2 * i - n - 1) * x for i, x in enumerate(ordered, start=1))
    return weighted / (n * total)


def message_counts(
    events: Iterable[SessionEvent], roster: Iterable[str] = ()
) -> dict[str, int]:
    """Human messages per participant; roster members with no posts count 0."""
    counts: Counter[str] = Counter({pid: 0 for pid in roster})
    for ev in events:
        if ev.kind != "message_posted":
            continue
        if ev.data.get("author_kind") != "human":
            continue
        counts[str(ev.data["author_id"])] += 1
    return dict(counts)


def participation_metrics(
    events: Sequence[SessionEvent], roster: Iterable[str] = ()
) -> dict:
    """Per-participant counts, max-min spread, and Gini coefficient."""
    counts = message_counts(events, roster)
    values = list(counts.values())
    spread = (max(values) - min(values)) if values else 0
    return {
        "counts": dict(sorted(counts.items())),
        "spread": spread,
        "gini": gini(values),
    }


def propagation_metrics(events: Sequence[SessionEvent]) -> dict[str, dict]:
    """Per-insight coverage and delivery latency, scanned from the log.

    For each insight: the set of receiving subgroups, time from creation to
    each delivery (ascending), and the eligible receiver count (subgroups
    present at creation time, minus the source).
    """
    subgroups: set[str] = set()
    created: dict[str, SessionEvent] = {}
    eligible: dict[str, int] = {}
    deliveries: dict[str, list[tuple[int, str]]] = {}
    for ev in events:
        if ev.kind == "session_started":
            subgroups.update(g["subgroup_id"] for g in ev.data["partition"])
        elif ev.kind == "participant_joined":
            new_group = ev.data.get("new_subgroup")
            if new_group:
                subgroups.add(new_group["subgroup_id"])
        elif ev.kind == "insight_created":
            iid = str(ev.data["insight_id"])
            created[iid] = ev
            eligible[iid] = len(subgroups - {str(ev.data["source_subgroup"])})
            deliveries[iid] = []
        elif ev.kind == "insight_delivered":
            iid = str(ev.data["insight_id"])
            deliveries[iid].append((ev.wall_time, str(ev.data["subgroup_id"])))

    out: dict[str, dict] = {}
    for iid, ev in created.items():
        times = sorted(deliveries[iid])
        out[iid] = {
            "source_subgroup": ev.data["source_subgroup"],
            "created_at": ev.wall_time,
            "eligible_receivers": eligible[iid],
            "subgroups_reached": len({gid for _, gid in times}),
            "delivery_latencies_ms": [t - ev.wall_time for t, _ in times],
        }
    return out


def time_to_full_coverage(events: Sequence[SessionEvent]) -> dict[str, float]:
    """Per-insight ms from creation until every eligible subgroup was reached.

    Insights that never fully cover map to +inf, so medians compare cleanly
    across routing topologies.
    """
    per_insight = propagation_metrics(events)
    out: dict[str, float] = {}
    for iid, m in per_insight.items():
        if m["eligible_receivers"] > 0 and m["subgroups_reached"] >= m["eligible_receivers"]:
            out[iid] = float(m["delivery_latencies_ms"][m["eligible_receivers"] - 1])
        else:
            out[iid] = float("inf")
    return out


def median(values: Sequence[float]) -> float:
    """Median; +inf entries are ordinary values (inf averages to inf)."""
    ordered = sorted(values)
    n = len(ordered)
    if n == 0:
        raise ValueError("median of empty sequence")
    mid = n // 2
    if n % 2:
        return float(ordered[mid])
    return (ordered[mid - 1] + ordered[mid]) / 2.0

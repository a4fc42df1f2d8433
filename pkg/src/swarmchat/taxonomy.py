"""Real-time idea taxonomy and the post-session forensic report.

Ideas are greedy token-overlap clusters built in message order; the order
dependence is deliberate (the live store and the offline report run the
same incremental algorithm over the same ordered log, so they always
agree). Stances come from shipped marker lexicons; impact is a token
overlap follow-on count within a fixed window after each delivery.
"""

from __future__ import annotations

import re
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from swarmchat import metrics
from swarmchat.kernels import FlatSets
from swarmchat.model import AuthorKind, ChatMessage, SessionEvent
from swarmchat.tokens import TokenInterner, cached_content_tokens, load_wordlist


class Stance(str, Enum):
    SUPPORT = "support"
    OPPOSE = "oppose"
    NEUTRAL = "neutral"


@dataclass(frozen=True)
class StanceLink:
    message_id: str
    idea_id: str
    stance: Stance


@dataclass
class IdeaNode:
    idea_id: str
    canonical_tokens: frozenset[str]
    first_message_id: str
    mention_message_ids: list[str] = field(default_factory=list)
    subgroups_mentioning: set[str] = field(default_factory=set)
    mention_times: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class ImpactRecord:
    insight_id: str
    receiving_subgroup: str
    follow_on_count: int


_NON_WORD_RE = re.compile(r"[^0-9a-z+]+")  # "+" survives so "+1" stays a marker


def _marker_regex(entries: Iterable[str]) -> re.Pattern[str]:
    """One word-boundary regex per lexicon; entries are normalized to plain
    word sequences first ("won't work" matches as "won t work")."""
    sequences = []
    for entry in entries:
        words = _NON_WORD_RE.sub(" ", entry.lower()).strip()
        if words:
            sequences.append(re.escape(words))
    sequences.sort(key=len, reverse=True)
    return re.compile(r"(?<![0-9a-z+])(?:" + "|".join(sequences) + r")(?![0-9a-z+])")


SUPPORT_RE = _marker_regex(load_wordlist("stance_support.txt"))
OPPOSE_RE = _marker_regex(load_wordlist("stance_oppose.txt"))


def classify_stance(text: str) -> Stance:
    """Marker-lexicon stub; matches whole-word sequences so "agree" never
    fires inside "disagree". An LLM classifier can replace this behind the
    same signature."""
    normalized = _NON_WORD_RE.sub(" ", text.lower())
    if SUPPORT_RE.search(normalized):
        return Stance.SUPPORT
    if OPPOSE_RE.search(normalized):
        return Stance.OPPOSE
    return Stance.NEUTRAL


class IdeaIndex:
    """Greedy incremental clustering of human messages into idea nodes."""

    def __init__(
        self,
        interner: Optional[TokenInterner] = None,
        *,
        merge_threshold: float = 0.5,
        min_tokens: int = 3,
        thread_window_ms: int = 120_000,
    ) -> None:
        self.merge_threshold = merge_threshold
        self.min_tokens = min_tokens
        self.thread_window_ms = thread_window_ms
        self._interner = interner or TokenInterner()
        self.nodes: list[IdeaNode] = []
        self.stance_links: list[StanceLink] = []
        self._node_sets = FlatSets()
        self._token_to_nodes: dict[int, list[int]] = {}
        # Per subgroup: (time, node index) of the latest mention, for linking
        # short stance-only replies to the idea under discussion.
        self._last_mention: dict[str, tuple[int, int]] = {}

    def _candidate_nodes(self, ids: np.ndarray) -> np.ndarray:
        hits: set[int] = set()
        for tid in ids.tolist():
            hits.update(self._token_to_nodes.get(tid, ()))
        if not hits:
            return np.empty(0, dtype=np.int64)
        arr = np.fromiter(hits, dtype=np.int64, count=len(hits))
        arr.sort()  # ascending index == creation order, keeps ties earliest
        return arr

    def record_assertion(self, message: ChatMessage) -> Optional[IdeaNode]:
        """Attach *message* to the best-matching idea node, or open a new one.

        Messages below the content-token floor produce no node but may still
        contribute a stance toward the idea most recently mentioned in their
        subgroup (thread-window rule).
        """
        if message.author.kind is not AuthorKind.HUMAN:
            return None
        tokens = cached_content_tokens(message.text)
        token_set = set(tokens)
        if len(token_set) == 0 or len(tokens) < self.min_tokens:
            self._link_thread_stance(message)
            return None
        ids = self._interner.intern_set(token_set)
        best_idx, best_score = self._node_sets.best_match(ids, self._candidate_nodes(ids))
        if best_idx >= 0 and best_score >= self.merge_threshold:
            node_idx = best_idx
            node = self.nodes[node_idx]
        else:
            node = IdeaNode(
                idea_id=f"idea{len(self.nodes) + 1:04d}",
                canonical_tokens=frozenset(token_set),
                first_message_id=message.message_id,
            )
            self.nodes.append(node)
            node_idx = self._node_sets.append(ids)
            for tid in ids.tolist():
                self._token_to_nodes.setdefault(tid, []).append(node_idx)
        node.mention_message_ids.append(message.message_id)
        node.subgroups_mentioning.add(message.subgroup_id)
        node.mention_times.append(message.timestamp)
        self._last_mention[message.subgroup_id] = (message.timestamp, node_idx)
        self.stance_links.append(
            StanceLink(message.message_id, node.idea_id, classify_stance(message.text))
        )
        return node

    def _link_thread_stance(self, message: ChatMessage) -> None:
        last = self._last_mention.get(message.subgroup_id)
        if last is None:
            return
        t, node_idx = last
        if message.timestamp - t > self.thread_window_ms:
            return
        stance = classify_stance(message.text)
        if stance is Stance.NEUTRAL:
            return
        self.stance_links.append(
            StanceLink(message.message_id, self.nodes[node_idx].idea_id, stance)
        )

    def stance_totals(self) -> dict[str, Counter]:
        totals: dict[str, Counter] = {node.idea_id: Counter() for node in self.nodes}
        for link in self.stance_links:
            totals[link.idea_id][link.stance.value] += 1
        return totals

    def ranked_ideas(self) -> list[IdeaNode]:
        """Breadth of subgroup mention first, then net support, then age."""
        totals = self.stance_totals()

        def key(node: IdeaNode):
            t = totals[node.idea_id]
            net_support = t["support"] - t["oppose"]
            return (-len(node.subgroups_mentioning), -net_support, node.idea_id)

        return sorted(self.nodes, key=key)


def _message_from_event(ev: SessionEvent) -> Optional[ChatMessage]:
    if ev.kind != "message_posted":
        return None
    from swarmchat.model import Author, Provenance, ProvenanceKind

    data = ev.data
    kind = AuthorKind(str(data["author_kind"]))
    prov = data["provenance"]
    provenance = (
        Provenance(ProvenanceKind.RELAYED, str(prov["insight_id"]))
        if prov["kind"] == "relayed"
        else Provenance.original()
    )
    return ChatMessage(
        message_id=str(data["message_id"]),
        subgroup_id=str(data["subgroup_id"]),
        author=Author(kind, str(data["author_id"])),
        timestamp=ev.wall_time,
        text=str(data["text"]),
        provenance=provenance,
    )


def build_index_from_events(
    events: Sequence[SessionEvent],
    *,
    merge_threshold: float = 0.5,
    min_tokens: int = 3,
    thread_window_ms: int = 120_000,
) -> IdeaIndex:
    """Recompute the live clustering from the ordered log (same algorithm)."""
    index = IdeaIndex(
        merge_threshold=merge_threshold,
        min_tokens=min_tokens,
        thread_window_ms=thread_window_ms,
    )
    for ev in events:
        msg = _message_from_event(ev)
        if msg is not None:
            index.record_assertion(msg)
    return index


def impact_records(
    events: Sequence[SessionEvent], window_ms: int = 120_000
) -> list[ImpactRecord]:
    """Follow-on counts: human messages in the receiving subgroup within the
    window after a delivery that share >= 2 content tokens with the insight.

    Only human follow-ons count; in particular the relay message that voiced
    the insight never counts as its own impact.
    """
    insight_tokens: dict[str, set[str]] = {}
    # Per subgroup, human messages ordered by time for windowed lookups.
    msg_times: dict[str, list[int]] = {}
    msg_tokens: dict[str, list[frozenset[str]]] = {}
    deliveries: list[tuple[str, str, int]] = []
    for ev in events:
        if ev.kind == "insight_created":
            insight_tokens[str(ev.data["insight_id"])] = set(
                cached_content_tokens(str(ev.data["text"]))
            )
        elif ev.kind == "message_posted" and ev.data.get("author_kind") == "human":
            gid = str(ev.data["subgroup_id"])
            msg_times.setdefault(gid, []).append(ev.wall_time)
            msg_tokens.setdefault(gid, []).append(
                frozenset(cached_content_tokens(str(ev.data["text"])))
            )
        elif ev.kind == "insight_delivered":
            deliveries.append(
                (str(ev.data["insight_id"]), str(ev.data["subgroup_id"]), ev.wall_time)
            )

    out: list[ImpactRecord] = []
    for iid, gid, at in deliveries:
        tokens = insight_tokens.get(iid, set())
        times = msg_times.get(gid, [])
        sets = msg_tokens.get(gid, [])
        # window messages strictly postdate the delivery
        lo = bisect_right(times, at)
        hi = bisect_right(times, at + window_ms)
        count = sum(1 for k in range(lo, hi) if len(tokens & sets[k]) >= 2)
        out.append(ImpactRecord(iid, gid, count))
    return out


def forensic_report(
    events: Sequence[SessionEvent],
    *,
    merge_threshold: float = 0.5,
    min_tokens: int = 3,
    impact_window_ms: int = 120_000,
    top_ideas: int = 0,
) -> dict:
    """Structured post-session document: ranked ideas, mention timelines,
    the insight propagation graph with impact counts, and participation.

    A pure function of the event log; identical logs yield identical
    reports byte for byte once serialized canonically.
    """
    index = build_index_from_events(
        events, merge_threshold=merge_threshold, min_tokens=min_tokens
    )
    totals = index.stance_totals()
    ranked = index.ranked_ideas()
    if top_ideas:
        ranked = ranked[:top_ideas]

    ideas = []
    for node in ranked:
        t = totals[node.idea_id]
        ideas.append(
            {
                "idea_id": node.idea_id,
                "canonical_tokens": sorted(node.canonical_tokens),
                "first_message_id": node.first_message_id,
                "subgroups_mentioning": sorted(node.subgroups_mentioning),
                "mention_count": len(node.mention_message_ids),
                "support": t["support"],
                "oppose": t["oppose"],
                "neutral": t["neutral"],
                "timeline": [
                    {"t": when, "message_id": mid}
                    for when, mid in zip(node.mention_times, node.mention_message_ids)
                ],
            }
        )

    impacts = impact_records(events, window_ms=impact_window_ms)
    impact_by_edge = {(r.insight_id, r.receiving_subgroup): r.follow_on_count for r in impacts}
    edges = []
    insight_sources: dict[str, str] = {}
    for ev in events:
        if ev.kind == "insight_created":
            insight_sources[str(ev.data["insight_id"])] = str(ev.data["source_subgroup"])
        elif ev.kind == "insight_delivered":
            iid = str(ev.data["insight_id"])
            gid = str(ev.data["subgroup_id"])
            edges.append(
                {
                    "insight_id": iid,
                    "source": insight_sources.get(iid, ""),
                    "receiver": gid,
                    "t": ev.wall_time,
                    "follow_on_count": impact_by_edge.get((iid, gid), 0),
                }
            )

    roster = [
        str(ev.data["participant_id"])
        for ev in events
        if ev.kind == "participant_joined"
    ]
    participation = metrics.participation_metrics(events, roster)

    session_id = ""
    for ev in events:
        if ev.kind == "session_started":
            session_id = str(ev.data["config"]["session_id"])
            break

    return {
        "session_id": session_id,
        "event_count": len(events),
        "ideas": ideas,
        "propagation_edges": edges,
        "participation": participation,
    }


def render_report_text(report: dict) -> str:
    """Human-readable view of a forensic report."""
    lines = [
        f"Forensic report for session {report['session_id'] or '(unknown)'}",
        f"Events: {report['event_count']}",
        "",
        "Ideas by breadth of support:",
    ]
    for i, idea in enumerate(report["ideas"], start=1):
        lines.append(
            f"{i:3d}. [{idea['idea_id']}] groups={len(idea['subgroups_mentioning'])} "
            f"mentions={idea['mention_count']} +{idea['support']}/-{idea['oppose']} "
            f"tokens: {' '.join(idea['canonical_tokens'])}"
        )
    lines.append("")
    lines.append(f"Insight deliveries: {len(report['propagation_edges'])}")
    for edge in report["propagation_edges"]:
        lines.append(
            f"  {edge['insight_id']}: {edge['source']} -> {edge['receiver']} "
            f"at {edge['t']} ms (follow-on {edge['follow_on_count']})"
        )
    part = report["participation"]
    lines.append("")
    lines.append(
        f"Participation: {len(part['counts'])} participants, "
        f"spread={part['spread']}, gini={part['gini']:.4f}"
    )
    return "\n".join(lines) + "\n"

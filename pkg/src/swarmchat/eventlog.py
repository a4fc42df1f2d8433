"""Append-only event log: canonical serialization, parsing, and replay.

One JSON object per line, canonical form (sorted keys, compact separators,
ASCII-escaped), so identical sessions produce byte-identical logs and the
log is the single source of truth for replay and forensics.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path
from typing import IO, Iterable, Optional, Sequence

from swarmchat.matchmaker import ContentProfile
from swarmchat.model import (
    DistillerBackend,
    Mode,
    SessionConfig,
    SessionEvent,
)
from swarmchat.taxonomy import IdeaIndex, build_index_from_events
from swarmchat.tokens import TokenInterner, cached_content_tokens


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_to_dict(config: SessionConfig) -> dict:
    d = asdict(config)
    d["mode"] = config.mode.value
    d["distiller_backend"] = config.distiller_backend.value
    return d


def config_from_dict(d: dict) -> SessionConfig:
    kwargs = dict(d)
    kwargs["mode"] = Mode(kwargs["mode"])
    kwargs["distiller_backend"] = DistillerBackend(kwargs["distiller_backend"])
    return SessionConfig(**kwargs)


def encode_event(event: SessionEvent) -> str:
    record = {"kind": event.kind, "seq": event.sequence_no, "wall_time": event.wall_time}
    for key, value in event.data.items():
        if key in record:
            raise ValueError(f"payload field {key!r} collides with envelope")
        record[key] = value
    return canonical_json(record)


def decode_event(line: str) -> SessionEvent:
    record = json.loads(line)
    kind = record.pop("kind")
    seq = record.pop("seq")
    wall_time = record.pop("wall_time")
    return SessionEvent(sequence_no=seq, kind=kind, data=record, wall_time=wall_time)


def write_log(events: Iterable[SessionEvent], fp: IO[str]) -> None:
    for event in events:
        fp.write(encode_event(event) + "\n")


def log_bytes(events: Iterable[SessionEvent]) -> bytes:
    return "".join(encode_event(ev) + "\n" for ev in events).encode("utf-8")


def read_log(path: str | Path) -> list[SessionEvent]:
    events = []
    with open(path, "r", encoding="utf-8") as fp:
        for line in fp:
            line = line.strip()
            if line:
                events.append(decode_event(line))
    return events


def validate_sequence(events: Sequence[SessionEvent]) -> None:
    """Sequence numbers must be gapless and strictly increasing from 1."""
    for i, ev in enumerate(events, start=1):
        if ev.sequence_no != i:
            raise ValueError(f"event sequence gap: expected {i}, got {ev.sequence_no}")


def build_snapshot(
    *,
    config: Optional[SessionConfig],
    phase: str,
    clock_ms: int,
    participants: Sequence[tuple[str, str, str]],
    subgroups: Sequence[tuple[str, Sequence[str], str]],
    messages: Sequence[dict],
    insights: Sequence[dict],
    routing: dict[str, tuple[int, set[str], dict[str, int]]],
    idea_index: Optional[IdeaIndex],
) -> dict:
    """Canonical state snapshot used for live-vs-replay equality checks.

    Covers everything the event log determines: roster, topology, messages,
    insights with delivery history, routing clocks/receipts/profiles, and
    the idea taxonomy. Transient scheduler internals (pending pool order,
    surrogate buffers) are excluded on purpose.
    """
    ideas = []
    if idea_index is not None:
        totals = idea_index.stance_totals()
        for node in idea_index.nodes:
            t = totals[node.idea_id]
            ideas.append(
                {
                    "idea_id": node.idea_id,
                    "canonical_tokens": sorted(node.canonical_tokens),
                    "first_message_id": node.first_message_id,
                    "mentions": list(node.mention_message_ids),
                    "subgroups": sorted(node.subgroups_mentioning),
                    "support": t["support"],
                    "oppose": t["oppose"],
                    "neutral": t["neutral"],
                }
            )
    return {
        "config": config_to_dict(config) if config else None,
        "phase": phase,
        "clock_ms": clock_ms,
        "participants": [
            {"participant_id": pid, "display_name": name, "subgroup_id": gid}
            for pid, name, gid in participants
        ],
        "subgroups": [
            {
                "subgroup_id": gid,
                "member_ids": sorted(members),
                "surrogate_id": surrogate,
            }
            for gid, members, surrogate in subgroups
        ],
        "messages": list(messages),
        "insights": list(insights),
        "routing": {
            gid: {
                "last_delivery_at": last,
                "received": sorted(received),
                "profile": dict(sorted(profile.items())),
            }
            for gid, (last, received, profile) in sorted(routing.items())
        },
        "ideas": ideas,
    }


class ReplayedSession:
    """Final session state reconstructed purely from an ordered event log."""

    def __init__(self, events: Sequence[SessionEvent]) -> None:
        validate_sequence(events)
        self.events = list(events)
        self.config: Optional[SessionConfig] = None
        self.phase = "lobby"
        self.clock_ms = 0
        self.participants: dict[str, tuple[str, str]] = {}  # pid -> (name, gid)
        self.subgroups: dict[str, tuple[list[str], str]] = {}  # gid -> (members, surrogate)
        self.messages: list[dict] = []
        self.insights: dict[str, dict] = {}
        self.insight_order: list[str] = []
        self.routing: dict[str, tuple[int, set[str], ContentProfile]] = {}
        self._interner = TokenInterner()
        self._apply_all()
        self.idea_index = (
            build_index_from_events(
                self.events,
                merge_threshold=self.config.idea_merge_threshold,
                min_tokens=self.config.idea_min_tokens,
                thread_window_ms=int(self.config.impact_window_seconds * 1000),
            )
            if self.config
            else None
        )

    def _ensure_subgroup(
        self, gid: str, surrogate: str, members: Iterable[str], opened_at: int = 0
    ) -> None:
        if gid not in self.subgroups:
            self.subgroups[gid] = ([], surrogate)
            window = self.config.profile_window if self.config else 30
            self.routing[gid] = (opened_at, set(), ContentProfile(self._interner, window))
        mem, _ = self.subgroups[gid]
        for pid in members:
            if pid not in mem:
                mem.append(pid)
            name, _ = self.participants[pid]
            self.participants[pid] = (name, gid)

    def _apply_all(self) -> None:
        for ev in self.events:
            self.clock_ms = max(self.clock_ms, ev.wall_time)
            data = ev.data
            if ev.kind == "participant_joined":
                pid = str(data["participant_id"])
                self.participants[pid] = (str(data["display_name"]), str(data["subgroup_id"]))
                new_group = data.get("new_subgroup")
                if new_group:
                    self._ensure_subgroup(
                        str(new_group["subgroup_id"]),
                        str(new_group["surrogate_id"]),
                        [str(m) for m in new_group["member_ids"]],
                        opened_at=ev.wall_time,
                    )
                elif data["subgroup_id"]:
                    self._ensure_subgroup(str(data["subgroup_id"]), "", [pid])
                    # keep the existing surrogate when joining a known group
            elif ev.kind == "session_started":
                self.config = config_from_dict(dict(data["config"]))
                self.phase = "running"
                fresh: dict[str, tuple[int, set[str], ContentProfile]] = {}
                for group in data["partition"]:
                    gid = str(group["subgroup_id"])
                    members = [str(m) for m in group["member_ids"]]
                    self.subgroups[gid] = (members, str(group["surrogate_id"]))
                    fresh[gid] = (0, set(), ContentProfile(self._interner, self.config.profile_window))
                    for pid in members:
                        name, _ = self.participants[pid]
                        self.participants[pid] = (name, gid)
                self.routing = fresh
            elif ev.kind == "message_posted":
                msg = {
                    "message_id": str(data["message_id"]),
                    "subgroup_id": str(data["subgroup_id"]),
                    "author_kind": str(data["author_kind"]),
                    "author_id": str(data["author_id"]),
                    "timestamp": ev.wall_time,
                    "text": str(data["text"]),
                    "provenance": data["provenance"],
                }
                self.messages.append(msg)
                _, _, profile = self.routing[msg["subgroup_id"]]
                profile.push(cached_content_tokens(msg["text"]))
            elif ev.kind == "insight_created":
                iid = str(data["insight_id"])
                self.insights[iid] = {
                    "insight_id": iid,
                    "source_subgroup": str(data["source_subgroup"]),
                    "text": str(data["text"]),
                    "source_message_ids": [str(m) for m in data["source_message_ids"]],
                    "created_at": ev.wall_time,
                    "delivered_to": [],
                }
                self.insight_order.append(iid)
            elif ev.kind == "insight_delivered":
                iid = str(data["insight_id"])
                gid = str(data["subgroup_id"])
                self.insights[iid]["delivered_to"].append(gid)
                last, received, profile = self.routing[gid]
                received.add(iid)
                self.routing[gid] = (ev.wall_time, received, profile)
            elif ev.kind == "session_ended":
                self.phase = "ended"

    def snapshot(self) -> dict:
        insights = []
        for iid in self.insight_order:
            rec = dict(self.insights[iid])
            rec["delivered_to"] = sorted(rec["delivered_to"])
            insights.append(rec)
        return build_snapshot(
            config=self.config,
            phase=self.phase,
            clock_ms=self.clock_ms,
            participants=[
                (pid, name, gid) for pid, (name, gid) in sorted(self.participants.items())
            ],
            subgroups=[
                (gid, members, surrogate)
                for gid, (members, surrogate) in sorted(self.subgroups.items())
            ],
            messages=self.messages,
            insights=insights,
            routing={
                gid: (last, received, dict(profile.as_multiset()))
                for gid, (last, received, profile) in self.routing.items()
            },
            idea_index=self.idea_index,
        )


def replay_events(events: Sequence[SessionEvent]) -> ReplayedSession:
    return ReplayedSession(events)

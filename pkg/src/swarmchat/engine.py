"""The session core: lifecycle, roster, fan-out, and the scheduler pass
that weaves distillation and insight routing together.

This is a sans-IO state machine. Every mutation happens through one of the
methods below with an explicit millisecond clock, appends to the event
log, and queues outbound wire records; transports (the network server, the
simulation harness) drain the outbox and own real time. All mutations of
one session are serialized by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from swarmchat import wire
from swarmchat.eventlog import build_snapshot, canonical_json, config_to_dict
from swarmchat.matchmaker import FullyConnectedTopology, Matchmaker, RingTopology
from swarmchat.model import (
    Author,
    ChatMessage,
    DistillerBackend,
    Insight,
    Mode,
    Participant,
    Provenance,
    SessionConfig,
    SessionEvent,
    Subgroup,
    validate_config,
)
from swarmchat.partition import (
    MIN_SIZE,
    choose_subgroup_for_late_join,
    partition,
)
from swarmchat.surrogate import (
    Distiller,
    DistillerPolicy,
    SurrogateState,
    make_distiller,
    observe,
    render_insight,
    should_trigger,
)
from swarmchat.taxonomy import IdeaIndex, build_index_from_events, forensic_report
from swarmchat.tokens import TokenInterner, cached_content_tokens

SURROGATE_DISPLAY_NAME = "Relay"


class SessionError(RuntimeError):
    pass


class InvalidConfigError(SessionError):
    def __init__(self, violations: list[str]) -> None:
        super().__init__("invalid config: " + "; ".join(violations))
        self.violations = violations


class WrongPhaseError(SessionError):
    pass


@dataclass
class JoinResult:
    participant_id: str
    subgroup_id: str  # "" while unassigned (lobby or late-join queue)


@dataclass
class _Counters:
    participant: int = 0
    subgroup: int = 0
    message: int = 0
    insight: int = 0

    def next_participant(self) -> str:
        self.participant += 1
        return f"p{self.participant:03d}"

    def next_subgroup(self) -> str:
        self.subgroup += 1
        return f"g{self.subgroup:02d}"

    def next_message(self) -> str:
        self.message += 1
        return f"m{self.message:05d}"

    def next_insight(self) -> str:
        self.insight += 1
        return f"i{self.insight:04d}"


@dataclass
class _SurrogateSlot:
    state: SurrogateState
    policy: DistillerPolicy


class SessionEngine:
    """One deliberation session. ``routing_topology`` widens to "ring" only
    for simulator baselines; live sessions always run fully connected."""

    def __init__(
        self,
        config: SessionConfig,
        *,
        routing_topology: str = "full",
        distiller: Optional[Distiller] = None,
        defer_analytics: bool = False,
    ) -> None:
        violations = validate_config(config)
        if violations:
            raise InvalidConfigError(violations)
        if not config.session_id:
            raise InvalidConfigError(["session_id must be set before engine creation"])
        self.config = config
        self.session_id = config.session_id
        self.phase = "lobby"
        self.clock_ms = 0
        self.events: list[SessionEvent] = []
        self.participants: dict[str, Participant] = {}
        self.join_order: list[str] = []
        self.subgroups: dict[str, Subgroup] = {}
        self.insights: dict[str, Insight] = {}
        self.insight_order: list[str] = []
        self.messages: list[ChatMessage] = []
        self.surveys: dict[str, dict[str, str]] = {}
        self.interner = TokenInterner()
        self.matchmaker: Optional[Matchmaker] = None
        # defer_analytics trades the live idea index for lazy recomputation
        # from the log (identical algorithm); bulk simulations use it.
        self.defer_analytics = defer_analytics
        self.idea_index: Optional[IdeaIndex] = (
            None
            if defer_analytics
            else IdeaIndex(
                merge_threshold=config.idea_merge_threshold,
                min_tokens=config.idea_min_tokens,
                thread_window_ms=int(config.impact_window_seconds * 1000),
            )
        )
        self._report: Optional[dict] = None
        self.report_ref = f"/sessions/{self.session_id}/report"
        self._routing_topology = routing_topology
        self._distiller = distiller or make_distiller(
            config.distiller_backend,
            endpoint=config.llm_endpoint,
            model=config.llm_model,
            timeout=config.llm_timeout,
        )
        self._surrogates: dict[str, _SurrogateSlot] = {}  # keyed by subgroup
        self._late_join_queue: list[str] = []
        self._counters = _Counters()
        self._outbox: list[tuple[str, dict]] = []
        self._seq = 0

    # ------------------------------------------------------------------ events

    def _emit(self, kind: str, data: dict, now: int) -> SessionEvent:
        self._seq += 1
        event = SessionEvent(sequence_no=self._seq, kind=kind, data=data, wall_time=now)
        self.events.append(event)
        # The clock is event-driven so a replayed log reconstructs it exactly.
        self.clock_ms = max(self.clock_ms, now)
        return event

    def drain_outbox(self) -> list[tuple[str, dict]]:
        out, self._outbox = self._outbox, []
        return out

    def _send(self, participant_id: str, record: dict) -> None:
        self._outbox.append((participant_id, record))

    def _broadcast_subgroup(self, subgroup_id: str, record: dict) -> None:
        for pid in sorted(self.subgroups[subgroup_id].member_ids):
            self._send(pid, record)

    def system_record(self, now: int) -> dict:
        remaining = max(0.0, (self.config.duration_ms - now) / 1000.0)
        if self.phase != "running":
            remaining = 0.0 if self.phase == "ended" else self.config.duration
        return wire.system(self.phase, remaining, self.config.task_prompt)

    # ------------------------------------------------------------------ lifecycle

    def join(self, display_name: str, now: int = 0) -> JoinResult:
        if self.phase == "ended":
            raise WrongPhaseError("session has ended")
        pid = self._counters.next_participant()
        if self.phase == "lobby":
            self.participants[pid] = Participant(pid, display_name)
            self.join_order.append(pid)
            self._emit(
                "participant_joined",
                {"participant_id": pid, "display_name": display_name, "subgroup_id": ""},
                now,
            )
            self._send(pid, wire.welcome(pid, "", []))
            return JoinResult(pid, "")
        return self._late_join(pid, display_name, now)

    def _late_join(self, pid: str, display_name: str, now: int) -> JoinResult:
        self.participants[pid] = Participant(pid, display_name)
        self.join_order.append(pid)
        sizes = {gid: len(g.member_ids) for gid, g in self.subgroups.items()}
        target = choose_subgroup_for_late_join(sizes)
        if target is not None:
            group = self.subgroups[target]
            self.subgroups[target] = Subgroup(
                target, group.member_ids | {pid}, group.surrogate_id
            )
            self.participants[pid] = Participant(pid, display_name, target)
            self._emit(
                "participant_joined",
                {"participant_id": pid, "display_name": display_name, "subgroup_id": target},
                now,
            )
            self._send(pid, self.welcome_record(pid))
            self._send(pid, self.system_record(now))
            return JoinResult(pid, target)

        self._late_join_queue.append(pid)
        if len(self._late_join_queue) < MIN_SIZE:
            self._emit(
                "participant_joined",
                {"participant_id": pid, "display_name": display_name, "subgroup_id": ""},
                now,
            )
            self._send(pid, wire.welcome(pid, "", []))
            return JoinResult(pid, "")

        members, self._late_join_queue = self._late_join_queue, []
        gid = self._counters.next_subgroup()
        surrogate_id = self._new_surrogate(gid, now) if self.config.mode is Mode.CSI else ""
        self.subgroups[gid] = Subgroup(gid, frozenset(members), surrogate_id)
        for member in members:
            existing = self.participants[member]
            self.participants[member] = Participant(member, existing.display_name, gid)
        if self.matchmaker is not None:
            self.matchmaker.add_subgroup(gid, now, self.config.profile_window)
        self._emit(
            "participant_joined",
            {
                "participant_id": pid,
                "display_name": display_name,
                "subgroup_id": gid,
                "new_subgroup": {
                    "subgroup_id": gid,
                    "member_ids": list(members),
                    "surrogate_id": surrogate_id,
                },
            },
            now,
        )
        for member in members:
            self._send(member, self.welcome_record(member))
            self._send(member, self.system_record(now))
        return JoinResult(pid, gid)

    def _new_surrogate(self, subgroup_id: str, now: int) -> str:
        surrogate_id = f"a{subgroup_id[1:]}"
        slot = _SurrogateSlot(
            state=SurrogateState(
                surrogate_id,
                subgroup_id,
                min_tokens=self.config.distill_min_tokens,
                last_trigger_at=now,
            ),
            policy=DistillerPolicy(
                backend=self.config.distiller_backend,
                min_tokens=self.config.distill_min_tokens,
                trigger_messages=self.config.distill_every_messages,
                trigger_seconds=self.config.distill_every_seconds,
            ),
        )
        self._surrogates[subgroup_id] = slot
        return surrogate_id

    def welcome_record(self, pid: str) -> dict:
        participant = self.participants[pid]
        gid = participant.subgroup_id
        roster = []
        if gid:
            group = self.subgroups[gid]
            for member in sorted(group.member_ids):
                roster.append(
                    {
                        "id": member,
                        "name": self.participants[member].display_name,
                        "kind": "human",
                    }
                )
            if group.surrogate_id:
                roster.append(
                    {
                        "id": group.surrogate_id,
                        "name": SURROGATE_DISPLAY_NAME,
                        "kind": "surrogate",
                    }
                )
        return wire.welcome(pid, gid, roster)

    def start(self, now: int = 0) -> None:
        if self.phase != "lobby":
            raise WrongPhaseError(f"cannot start from phase {self.phase}")
        roster = list(self.join_order)
        if self.config.mode is Mode.CSI:
            if len(roster) < MIN_SIZE:
                raise SessionError(
                    f"roster too small for swarm mode: {len(roster)} < {MIN_SIZE}"
                )
            plan = partition(roster, self.config.target_subgroup_size, self.config.random_seed)
            group_sets = plan.subgroups
        else:
            if not roster:
                raise SessionError("cannot start an empty session")
            group_sets = (frozenset(roster),)

        partition_payload = []
        for members in group_sets:
            gid = self._counters.next_subgroup()
            surrogate_id = self._new_surrogate(gid, now) if self.config.mode is Mode.CSI else ""
            self.subgroups[gid] = Subgroup(gid, members, surrogate_id)
            ordered = sorted(members)
            for pid in ordered:
                existing = self.participants[pid]
                self.participants[pid] = Participant(pid, existing.display_name, gid)
            partition_payload.append(
                {"subgroup_id": gid, "member_ids": ordered, "surrogate_id": surrogate_id}
            )

        topology = (
            RingTopology(list(self.subgroups))
            if self._routing_topology == "ring"
            else FullyConnectedTopology()
        )
        self.matchmaker = Matchmaker(
            self.interner,
            list(self.subgroups),
            profile_window=self.config.profile_window,
            starvation_threshold_ms=self.config.starvation_threshold_ms,
            novelty_floor=self.config.novelty_floor,
            dedup_floor=self.config.dedup_floor,
            pool_max_size=self.config.pool_max_size,
            topology=topology,
        )
        self.phase = "running"
        self.clock_ms = now
        self._emit(
            "session_started",
            {"config": config_to_dict(self.config), "partition": partition_payload},
            now,
        )
        for pid in self.join_order:
            self._send(pid, self.welcome_record(pid))
            self._send(pid, self.system_record(now))

    def _auto_end_if_due(self, now: int) -> bool:
        if self.phase == "running" and now >= self.config.duration_ms:
            self.end(self.config.duration_ms, reason="duration")
            return True
        return False

    # ------------------------------------------------------------------ messaging

    def post_message(self, participant_id: str, text: str, now: int) -> ChatMessage:
        self._auto_end_if_due(now)
        if self.phase != "running":
            raise WrongPhaseError(f"cannot post in phase {self.phase}")
        if participant_id not in self.participants:
            raise SessionError(f"unknown participant {participant_id}")
        participant = self.participants[participant_id]
        if not participant.subgroup_id:
            raise SessionError(f"participant {participant_id} is not assigned a subgroup")
        if not text.strip():
            raise SessionError("empty message")
        message = ChatMessage(
            message_id=self._counters.next_message(),
            subgroup_id=participant.subgroup_id,
            author=Author.human(participant_id),
            timestamp=now,
            text=text,
            provenance=Provenance.original(),
        )
        self._ingest_message(message, author_name=participant.display_name)
        return message

    def _ingest_message(self, message: ChatMessage, author_name: str) -> None:
        self.messages.append(message)
        provenance: dict = {"kind": message.provenance.kind.value}
        if message.provenance.insight_id is not None:
            provenance["insight_id"] = message.provenance.insight_id
        event = self._emit(
            "message_posted",
            {
                "message_id": message.message_id,
                "subgroup_id": message.subgroup_id,
                "author_kind": message.author.kind.value,
                "author_id": message.author.author_id,
                "text": message.text,
                "provenance": provenance,
            },
            message.timestamp,
        )
        if self.matchmaker is not None:
            self.matchmaker.observe_message(
                message.subgroup_id, cached_content_tokens(message.text)
            )
        slot = self._surrogates.get(message.subgroup_id)
        if slot is not None:
            observe(slot.state, message)
        if self.idea_index is not None:
            self.idea_index.record_assertion(message)
        self._broadcast_subgroup(
            message.subgroup_id, wire.chat(message, author_name, event.sequence_no)
        )

    # ------------------------------------------------------------------ scheduler

    def tick(self, now: int) -> None:
        """One scheduler pass: distillation triggers, then insight routing,
        then surrogate renderings of each delivery."""
        if self.phase != "running":
            return
        if self._auto_end_if_due(now):
            return

        for gid in sorted(self._surrogates):
            slot = self._surrogates[gid]
            if not should_trigger(slot.state, slot.policy, now):
                continue
            slot.state.messages_since_trigger = 0
            slot.state.last_trigger_at = now
            distillation = self._distiller.distill(slot.state, slot.policy)
            if distillation is None:
                continue
            insight = Insight(
                insight_id=self._counters.next_insight(),
                source_subgroup=gid,
                text=distillation.text,
                source_message_ids=distillation.source_message_ids,
                created_at=now,
            )
            assert self.matchmaker is not None
            if self.matchmaker.enqueue_insight(insight):
                self.insights[insight.insight_id] = insight
                self.insight_order.append(insight.insight_id)
                self._emit(
                    "insight_created",
                    {
                        "insight_id": insight.insight_id,
                        "source_subgroup": gid,
                        "text": insight.text,
                        "source_message_ids": list(insight.source_message_ids),
                    },
                    now,
                )
            else:
                self._counters.insight -= 1  # rejected duplicate never existed

        if self.matchmaker is None:
            return
        for delivery in self.matchmaker.tick(now):
            insight = delivery.insight
            self.insights[insight.insight_id] = insight
            self._emit(
                "insight_delivered",
                {"insight_id": insight.insight_id, "subgroup_id": delivery.subgroup_id},
                now,
            )
            group = self.subgroups[delivery.subgroup_id]
            message = ChatMessage(
                message_id=self._counters.next_message(),
                subgroup_id=delivery.subgroup_id,
                author=Author.surrogate(group.surrogate_id),
                timestamp=now,
                text=render_insight(insight, self.config.random_seed),
                provenance=Provenance.relayed(insight.insight_id),
            )
            self._ingest_message(message, author_name=SURROGATE_DISPLAY_NAME)

    # ------------------------------------------------------------------ shutdown

    def end(self, now: int, reason: str = "manual") -> str:
        if self.phase == "ended":
            return self.report_ref  # idempotent
        if self.phase != "running":
            raise WrongPhaseError("cannot end a session that never started")
        self.phase = "ended"
        self._emit("session_ended", {"reason": reason}, now)
        if not self.defer_analytics:
            self._report = self._build_report()
        for pid in self.join_order:
            self._send(pid, self.system_record(now))
            self._send(pid, wire.ended(self.report_ref))
        return self.report_ref

    def _build_report(self) -> dict:
        return forensic_report(
            self.events,
            merge_threshold=self.config.idea_merge_threshold,
            min_tokens=self.config.idea_min_tokens,
            impact_window_ms=int(self.config.impact_window_seconds * 1000),
        )

    def get_report(self) -> dict:
        """The forensic report for an ended session (cached)."""
        if self.phase != "ended":
            raise WrongPhaseError("report is available after the session ends")
        if self._report is None:
            self._report = self._build_report()
        return self._report

    def idea_index_view(self) -> IdeaIndex:
        """Live index, or an on-demand rebuild from the log when deferred."""
        if self.idea_index is not None:
            return self.idea_index
        return build_index_from_events(
            self.events,
            merge_threshold=self.config.idea_merge_threshold,
            min_tokens=self.config.idea_min_tokens,
            thread_window_ms=int(self.config.impact_window_seconds * 1000),
        )

    def submit_survey(self, participant_id: str, answers: dict[str, str]) -> None:
        if self.phase != "ended":
            raise WrongPhaseError("surveys open after the session ends")
        if participant_id not in self.participants:
            raise SessionError(f"unknown participant {participant_id}")
        expected = {f"q{i}" for i in range(1, 8)}
        if set(answers) != expected:
            raise SessionError("survey must answer exactly q1..q7")
        clean = {}
        for qid in sorted(expected):
            value = answers[qid]
            if value not in ("csi", "chat"):
                raise SessionError(f"answer for {qid} must be 'csi' or 'chat'")
            clean[qid] = value
        self.surveys[participant_id] = clean

    # ------------------------------------------------------------------ views

    def snapshot(self) -> dict:
        insights = []
        for iid in self.insight_order:
            ins = self.insights[iid]
            insights.append(
                {
                    "insight_id": ins.insight_id,
                    "source_subgroup": ins.source_subgroup,
                    "text": ins.text,
                    "source_message_ids": list(ins.source_message_ids),
                    "created_at": ins.created_at,
                    "delivered_to": sorted(ins.delivered_to),
                }
            )
        messages = []
        for msg in self.messages:
            provenance: dict = {"kind": msg.provenance.kind.value}
            if msg.provenance.insight_id is not None:
                provenance["insight_id"] = msg.provenance.insight_id
            messages.append(
                {
                    "message_id": msg.message_id,
                    "subgroup_id": msg.subgroup_id,
                    "author_kind": msg.author.kind.value,
                    "author_id": msg.author.author_id,
                    "timestamp": msg.timestamp,
                    "text": msg.text,
                    "provenance": provenance,
                }
            )
        routing = {}
        if self.matchmaker is not None:
            for gid, state in self.matchmaker.routing.items():
                routing[gid] = (
                    state.last_delivery_at,
                    set(state.received_insight_ids),
                    dict(state.profile.as_multiset()),
                )
        return build_snapshot(
            config=self.config,
            phase=self.phase,
            clock_ms=self.clock_ms,
            participants=[
                (p.participant_id, p.display_name, p.subgroup_id)
                for p in sorted(self.participants.values(), key=lambda p: p.participant_id)
            ],
            subgroups=[
                (g.subgroup_id, sorted(g.member_ids), g.surrogate_id)
                for g in sorted(self.subgroups.values(), key=lambda g: g.subgroup_id)
            ],
            messages=messages,
            insights=insights,
            routing=routing,
            idea_index=self.idea_index_view(),
        )

    def snapshot_json(self) -> str:
        return canonical_json(self.snapshot())

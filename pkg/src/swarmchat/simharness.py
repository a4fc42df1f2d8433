"""Desk-scale session simulation: scripted bots, a virtual clock, and
metrics over the resulting event logs.

Runs the real engine in-process, single-threaded, so a scenario plus a
seed fully determines the event log byte for byte. A 12-minute session
takes well under a second of wall time.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from swarmchat import metrics
from swarmchat.engine import SessionEngine
from swarmchat.eventlog import log_bytes
from swarmchat.matchmaker import novelty
from swarmchat.model import Mode, SessionConfig, SessionEvent
from swarmchat.surrogate import strip_framing
from swarmchat.tokens import cached_content_tokens, load_wordlist

# Re-exported log metrics (definitions live in swarmchat.metrics).
propagation_metrics = metrics.propagation_metrics
participation_metrics = metrics.participation_metrics
time_to_full_coverage = metrics.time_to_full_coverage


@dataclass(frozen=True)
class ReplyPolicy:
    kind: str = "silent"  # "silent" | "echo_topic"
    probability: float = 0.0


@dataclass(frozen=True)
class BotScript:
    bot_id: str
    schedule: tuple[tuple[int, str], ...]  # (offset_ms, text), offsets nondecreasing
    reply_policy: ReplyPolicy = ReplyPolicy()

    def __post_init__(self) -> None:
        offsets = [t for t, _ in self.schedule]
        if offsets != sorted(offsets):
            raise ValueError(f"bot {self.bot_id}: schedule offsets must be nondecreasing")


@dataclass(frozen=True)
class Scenario:
    """Named, serializable description of a simulated session."""

    name: str = "default_15x5"
    mode: str = "csi"
    bots: int = 75
    target_subgroup_size: int = 5
    duration: float = 720.0
    tick_interval: float = 5.0
    starvation_threshold: float = 5.0
    novelty_floor: float = 0.3
    dedup_floor: float = 0.2
    pool_max_size: int = 64
    distill_every_messages: int = 30
    distill_every_seconds: float = 110.0
    distill_min_tokens: int = 5
    message_period: float = 20.0
    posting_stop: float = 560.0
    phrase_set: str = "mixed"  # traffic_cones | toilet_plungers | mixed
    idea_rate: float = 1.0  # fraction of posts drawn from the idea lists
    reply_probability: float = 0.25
    reply_delay: float = 4.0
    routing_topology: str = "full"  # full | ring
    task_prompt: str = "List unconventional product uses for the item in inventory."

    def to_config(self, seed: int) -> SessionConfig:
        return SessionConfig(
            session_id=f"sim-{self.name}-{seed}",
            mode=Mode(self.mode),
            target_subgroup_size=self.target_subgroup_size,
            task_prompt=self.task_prompt,
            duration=self.duration,
            tick_interval=self.tick_interval,
            starvation_threshold=self.starvation_threshold,
            novelty_floor=self.novelty_floor,
            dedup_floor=self.dedup_floor,
            pool_max_size=self.pool_max_size,
            distill_every_messages=self.distill_every_messages,
            distill_every_seconds=self.distill_every_seconds,
            distill_min_tokens=self.distill_min_tokens,
            random_seed=seed,
        )


def load_scenario(source: str | Path) -> Scenario:
    """Scenario from a JSON file path or a shipped scenario name."""
    path = Path(source)
    if path.exists():
        data = json.loads(path.read_text("utf-8"))
    else:
        packaged = resources.files("swarmchat.data.scenarios").joinpath(f"{source}.json")
        if not packaged.is_file():
            raise FileNotFoundError(f"no scenario file or shipped scenario named {source!r}")
        data = json.loads(packaged.read_text("utf-8"))
    return Scenario(**data)


def _phrases(phrase_set: str) -> list[str]:
    cones = list(load_wordlist("aut_traffic_cones.txt"))
    plungers = list(load_wordlist("aut_toilet_plungers.txt"))
    if phrase_set == "traffic_cones":
        return cones
    if phrase_set == "toilet_plungers":
        return plungers
    if phrase_set == "mixed":
        return cones + plungers
    raise ValueError(f"unknown phrase_set {phrase_set!r}")


def build_scripts(scenario: Scenario, seed: int) -> list[BotScript]:
    """Schedule-driven bots drawing from the shipped brainstorm phrase lists.

    ``idea_rate`` < 1 mixes in short chatter lines (never distillable), which
    thins the insight stream the way quiet stretches of real sessions do.
    """
    phrases = _phrases(scenario.phrase_set)
    chatter = list(load_wordlist("chatter.txt"))
    period_ms = int(scenario.message_period * 1000)
    stop_ms = int(min(scenario.posting_stop, scenario.duration) * 1000)
    scripts = []
    for i in range(scenario.bots):
        rng = random.Random((seed * 1_000_003 + i) & 0xFFFFFFFF)
        offsets = []
        t = rng.randrange(500, period_ms + 500)
        while t < stop_ms:
            offsets.append(t)
            t += period_ms + rng.randrange(-period_ms // 4, period_ms // 4 + 1)
        def pick(rng=rng):
            if rng.random() < scenario.idea_rate:
                return rng.choice(phrases)
            return rng.choice(chatter)
        schedule = tuple((off, pick()) for off in sorted(offsets))
        policy = (
            ReplyPolicy("echo_topic", scenario.reply_probability)
            if scenario.reply_probability > 0
            else ReplyPolicy()
        )
        scripts.append(BotScript(bot_id=f"bot{i + 1:03d}", schedule=schedule, reply_policy=policy))
    return scripts


_REPLY_TEMPLATES = (
    "great idea, we could also try {topic}",
    "i agree, {topic} sounds promising",
    "building on {topic}, maybe bundle it with our idea",
    "love it, {topic} would sell fast",
    "hmm, {topic} might be hard to make cheaply",
)


@dataclass
class ScenarioResult:
    scenario: Scenario
    seed: int
    events: list[SessionEvent]
    log: bytes
    propagation: dict[str, dict]
    participation: dict
    report: dict
    snapshot: dict
    receive_logs: dict[str, list[dict]]
    starvation_violations: list[dict] = field(default_factory=list)

    @property
    def insight_count(self) -> int:
        return sum(1 for ev in self.events if ev.kind == "insight_created")


class ScriptRosterMismatch(ValueError):
    pass


def _audit_starvation(engine: SessionEngine, now: int, violations: list[dict]) -> None:
    """Independent post-tick check: nobody may stay starved while a
    qualifying candidate for them sits in the pool."""
    mm = engine.matchmaker
    if mm is None:
        return
    pending = mm.pool.pending
    if not pending:
        return
    for gid, state in mm.routing.items():
        if now - state.last_delivery_at < mm.starvation_threshold_ms:
            continue
        profile = state.profile.as_multiset()
        for insight in pending:
            if insight.source_subgroup == gid:
                continue
            if insight.insight_id in state.received_insight_ids:
                continue
            if not mm.topology.allows(insight, gid):
                continue
            if novelty(insight.text, profile) >= mm.novelty_floor:
                violations.append(
                    {"t": now, "subgroup": gid, "insight": insight.insight_id}
                )
                break


def run_scenario(
    scenario: Scenario,
    seed: int,
    *,
    scripts: Optional[Sequence[BotScript]] = None,
    record_receives: bool = True,
    audit_starvation: bool = False,
    build_report: bool = True,
) -> ScenarioResult:
    """Deterministic full-session run; same scenario and seed give a
    byte-identical event log."""
    scripts = list(scripts) if scripts is not None else build_scripts(scenario, seed)
    if len(scripts) != scenario.bots:
        raise ScriptRosterMismatch(
            f"scenario expects {scenario.bots} bots, got {len(scripts)} scripts"
        )
    config = scenario.to_config(seed)
    engine = SessionEngine(
        config, routing_topology=scenario.routing_topology, defer_analytics=True
    )

    pid_by_bot: dict[str, str] = {}
    bot_by_pid: dict[str, str] = {}
    for script in scripts:
        result = engine.join(script.bot_id)
        pid_by_bot[script.bot_id] = result.participant_id
        bot_by_pid[result.participant_id] = script.bot_id
    engine.start(0)

    policies = {s.bot_id: s.reply_policy for s in scripts}
    reply_rng = random.Random(seed ^ 0x5EED)
    reply_delay_ms = int(scenario.reply_delay * 1000)
    duration_ms = config.duration_ms
    stop_ms = int(min(scenario.posting_stop, scenario.duration) * 1000)
    tick_ms = config.tick_interval_ms
    receive_logs: dict[str, list[dict]] = {s.bot_id: [] for s in scripts}
    violations: list[dict] = []

    # Virtual clock: (time, kind-priority, sequence) orders all activity;
    # posts at a given instant happen before that instant's scheduler tick.
    counter = 0
    queue: list[tuple[int, int, int, str, tuple]] = []
    for script in scripts:
        for offset, text in script.schedule:
            heapq.heappush(queue, (offset, 0, counter, "post", (script.bot_id, text)))
            counter += 1
    t = tick_ms
    while t <= duration_ms:
        heapq.heappush(queue, (t, 1, counter, "tick", ()))
        counter += 1
        t += tick_ms
    if not queue or max(q[0] for q in queue) < duration_ms:
        heapq.heappush(queue, (duration_ms, 1, counter, "tick", ()))
        counter += 1

    def drain(now: int) -> None:
        nonlocal counter
        for pid, record in engine.drain_outbox():
            bot_id = bot_by_pid.get(pid)
            if bot_id is None:
                continue
            if record_receives:
                receive_logs[bot_id].append(record)
            if record.get("type") != "chat" or record.get("author_kind") != "surrogate":
                continue
            policy = policies[bot_id]
            if policy.kind != "echo_topic":
                continue
            if reply_rng.random() >= policy.probability:
                continue
            body = strip_framing(record["text"]) or record["text"]
            topic_tokens = cached_content_tokens(body)[:3]
            if not topic_tokens:
                continue
            template = reply_rng.choice(_REPLY_TEMPLATES)
            reply = template.format(topic=" ".join(topic_tokens))
            when = now + reply_delay_ms + reply_rng.randrange(0, 2000)
            if when < stop_ms:  # replies respect the posting window too
                heapq.heappush(queue, (when, 0, counter, "post", (bot_id, reply)))
                counter += 1

    while queue:
        now, _prio, _c, kind, payload = heapq.heappop(queue)
        if engine.phase == "ended":
            break
        if kind == "post":
            bot_id, text = payload
            if now >= duration_ms:
                continue
            engine.post_message(pid_by_bot[bot_id], text, now)
        else:
            engine.tick(now)
            if audit_starvation and engine.phase == "running":
                _audit_starvation(engine, now, violations)
        drain(now)

    if engine.phase != "ended":
        engine.end(duration_ms, reason="duration")
        drain(duration_ms)

    events = list(engine.events)
    roster = list(pid_by_bot.values())
    return ScenarioResult(
        scenario=scenario,
        seed=seed,
        events=events,
        log=log_bytes(events),
        propagation=metrics.propagation_metrics(events),
        participation=metrics.participation_metrics(events, roster),
        report=engine.get_report() if build_report else {},
        snapshot=engine.snapshot() if build_report else {},
        receive_logs=receive_logs,
        starvation_violations=violations,
    )


def coverage_summary(result: ScenarioResult) -> dict:
    """Fraction of insights reaching >= 10 of their eligible receivers plus
    distribution facts used by the acceptance suite."""
    per_insight = result.propagation
    if not per_insight:
        return {"insights": 0, "frac_reaching_10": 0.0, "full_coverage": 0}
    reached_10 = sum(1 for m in per_insight.values() if m["subgroups_reached"] >= 10)
    full = sum(
        1
        for m in per_insight.values()
        if m["subgroups_reached"] >= m["eligible_receivers"]
    )
    return {
        "insights": len(per_insight),
        "frac_reaching_10": reached_10 / len(per_insight),
        "full_coverage": full,
    }

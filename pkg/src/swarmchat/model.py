"""Domain types shared by every module: sessions, subgroups, messages,
insights, and the event-log vocabulary.

All values are immutable after construction and safe to share across
concurrent activities. Constructors enforce the authorship/provenance
invariants: relay agents only ever speak relayed content, humans only
original content.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Optional

UNASSIGNED = ""


class Mode(str, Enum):
    CSI = "csi"
    SINGLE_ROOM = "single_room"


class DistillerBackend(str, Enum):
    STUB_EXTRACTIVE = "stub_extractive"
    EXTERNAL_LLM = "external_llm"


class AuthorKind(str, Enum):
    HUMAN = "human"
    SURROGATE = "surrogate"


class ProvenanceKind(str, Enum):
    ORIGINAL = "original"
    RELAYED = "relayed"


EVENT_KINDS = (
    "session_started",
    "participant_joined",
    "message_posted",
    "insight_created",
    "insight_delivered",
    "session_ended",
)


@dataclass(frozen=True)
class SessionConfig:
    """Per-session parameters. Durations are seconds; internal clocks are ms."""

    session_id: str = ""
    mode: Mode = Mode.CSI
    target_subgroup_size: int = 5
    task_prompt: str = ""
    duration: float = 720.0
    tick_interval: float = 5.0
    starvation_threshold: float = 45.0
    novelty_floor: float = 0.3
    distiller_backend: DistillerBackend = DistillerBackend.STUB_EXTRACTIVE
    random_seed: int = 0
    # Routing and distillation knobs (invented defaults, all overridable).
    dedup_floor: float = 0.2
    pool_max_size: int = 64
    profile_window: int = 30
    distill_every_messages: int = 6
    distill_every_seconds: float = 60.0
    distill_min_tokens: int = 5
    idea_merge_threshold: float = 0.5
    idea_min_tokens: int = 3
    impact_window_seconds: float = 120.0
    # External completion endpoint (used when distiller_backend=external_llm).
    llm_endpoint: str = ""
    llm_model: str = ""
    llm_timeout: float = 10.0

    @property
    def duration_ms(self) -> int:
        return int(round(self.duration * 1000))

    @property
    def tick_interval_ms(self) -> int:
        return int(round(self.tick_interval * 1000))

    @property
    def starvation_threshold_ms(self) -> int:
        return int(round(self.starvation_threshold * 1000))


def validate_config(config: SessionConfig) -> list[str]:
    """Every violated invariant as a message; an empty list means valid."""
    violations = []
    if config.mode is Mode.CSI and not 4 <= config.target_subgroup_size <= 7:
        violations.append(
            f"target_subgroup_size must be in [4, 7] in csi mode, got "
            f"{config.target_subgroup_size}"
        )
    if config.duration <= 0:
        violations.append(f"duration must be > 0, got {config.duration}")
    if config.tick_interval <= 0:
        violations.append(f"tick_interval must be > 0, got {config.tick_interval}")
    if config.starvation_threshold < config.tick_interval:
        violations.append(
            "starvation_threshold must be >= tick_interval, got "
            f"{config.starvation_threshold} < {config.tick_interval}"
        )
    if not 0.0 <= config.novelty_floor <= 1.0:
        violations.append(f"novelty_floor must be in [0, 1], got {config.novelty_floor}")
    if not 0.0 <= config.dedup_floor <= 1.0:
        violations.append(f"dedup_floor must be in [0, 1], got {config.dedup_floor}")
    if config.pool_max_size < 1:
        violations.append(f"pool_max_size must be >= 1, got {config.pool_max_size}")
    if config.profile_window < 1:
        violations.append(f"profile_window must be >= 1, got {config.profile_window}")
    if config.distill_every_messages < 1:
        violations.append(
            f"distill_every_messages must be >= 1, got {config.distill_every_messages}"
        )
    if config.distill_every_seconds <= 0:
        violations.append(
            f"distill_every_seconds must be > 0, got {config.distill_every_seconds}"
        )
    return violations


@dataclass(frozen=True)
class Participant:
    participant_id: str
    display_name: str
    subgroup_id: str = UNASSIGNED  # empty string until assigned


@dataclass(frozen=True)
class Subgroup:
    subgroup_id: str
    member_ids: frozenset[str]
    surrogate_id: str = ""  # empty in single_room mode


@dataclass(frozen=True)
class Author:
    kind: AuthorKind
    author_id: str

    @staticmethod
    def human(participant_id: str) -> "Author":
        return Author(AuthorKind.HUMAN, participant_id)

    @staticmethod
    def surrogate(surrogate_id: str) -> "Author":
        return Author(AuthorKind.SURROGATE, surrogate_id)


@dataclass(frozen=True)
class Provenance:
    kind: ProvenanceKind
    insight_id: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind is ProvenanceKind.RELAYED and not self.insight_id:
            raise ValueError("relayed provenance requires an insight_id")
        if self.kind is ProvenanceKind.ORIGINAL and self.insight_id is not None:
            raise ValueError("original provenance carries no insight_id")

    @staticmethod
    def original() -> "Provenance":
        return Provenance(ProvenanceKind.ORIGINAL)

    @staticmethod
    def relayed(insight_id: str) -> "Provenance":
        return Provenance(ProvenanceKind.RELAYED, insight_id)


@dataclass(frozen=True)
class ChatMessage:
    message_id: str
    subgroup_id: str
    author: Author
    timestamp: int  # ms since session start, server clock
    text: str
    provenance: Provenance

    def __post_init__(self) -> None:
        if (
            self.author.kind is AuthorKind.SURROGATE
            and self.provenance.kind is not ProvenanceKind.RELAYED
        ):
            raise ValueError("surrogate messages must carry relayed provenance")
        if (
            self.author.kind is AuthorKind.HUMAN
            and self.provenance.kind is not ProvenanceKind.ORIGINAL
        ):
            raise ValueError("human messages must carry original provenance")


@dataclass(frozen=True)
class Insight:
    insight_id: str
    source_subgroup: str
    text: str
    source_message_ids: tuple[str, ...]
    created_at: int  # ms
    delivered_to: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if not self.source_message_ids:
            raise ValueError("insight requires at least one source message")
        if self.source_subgroup in self.delivered_to:
            raise ValueError("insight may not be delivered to its source subgroup")

    def with_delivery(self, subgroup_id: str) -> "Insight":
        """Functional update recording one delivery."""
        return replace(self, delivered_to=self.delivered_to | {subgroup_id})


@dataclass(frozen=True)
class SessionEvent:
    sequence_no: int
    kind: str
    data: Mapping[str, object]
    wall_time: int  # ms since session start, server clock

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")

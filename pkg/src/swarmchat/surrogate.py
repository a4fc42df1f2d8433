"""Per-subgroup relay agents: observe the local conversation, distill
salient human content into insights, and voice incoming insights as chat.

The extractive backend is the deterministic reference: its output is always
a verbatim human message, which is what makes the no-agent-ideas guarantee
checkable. An external completion endpoint can substitute behind the same
interface.
"""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import requests

from swarmchat.model import AuthorKind, ChatMessage, DistillerBackend, Insight
from swarmchat.tokens import cached_content_tokens, load_wordlist

logger = logging.getLogger(__name__)

FRAMING_PHRASES: tuple[str, ...] = load_wordlist("framing_phrases.txt")


@dataclass(frozen=True)
class DistillerPolicy:
    backend: DistillerBackend = DistillerBackend.STUB_EXTRACTIVE
    min_tokens: int = 5
    trigger_messages: int = 6
    trigger_seconds: float = 60.0

    @property
    def trigger_ms(self) -> int:
        return int(round(self.trigger_seconds * 1000))


@dataclass
class SurrogateState:
    """Observation state; one owner (the session sequencer) mutates it."""

    surrogate_id: str
    subgroup_id: str
    min_tokens: int = 5
    observation_buffer: list[ChatMessage] = field(default_factory=list)
    covered_message_ids: set[str] = field(default_factory=set)
    pending_candidate_ids: set[str] = field(default_factory=set)
    messages_since_trigger: int = 0
    last_trigger_at: int = 0


class CrossSubgroupMessageError(ValueError):
    """A surrogate was fed a message from a foreign subgroup."""


def observe(state: SurrogateState, message: ChatMessage) -> None:
    """Buffer human messages from the surrogate's own subgroup.

    Surrogate-authored messages are ignored so relayed content can never be
    re-distilled into a second-hand insight.
    """
    if message.subgroup_id != state.subgroup_id:
        raise CrossSubgroupMessageError(
            f"surrogate {state.surrogate_id} (subgroup {state.subgroup_id}) "
            f"received message for {message.subgroup_id}"
        )
    if message.author.kind is not AuthorKind.HUMAN:
        return
    state.observation_buffer.append(message)
    state.messages_since_trigger += 1
    if salience(message.text) >= state.min_tokens:
        state.pending_candidate_ids.add(message.message_id)


def salience(text: str) -> int:
    """Content-token count after stopword removal."""
    return len(cached_content_tokens(text))


def _candidates(state: SurrogateState, min_tokens: int) -> list[ChatMessage]:
    if min_tokens == state.min_tokens:
        return [
            m
            for m in state.observation_buffer
            if m.message_id in state.pending_candidate_ids
        ]
    return [
        m
        for m in state.observation_buffer
        if m.message_id not in state.covered_message_ids
        and salience(m.text) >= min_tokens
    ]


def should_trigger(state: SurrogateState, policy: DistillerPolicy, now: int) -> bool:
    """K-messages-or-T-seconds trigger.

    Fires only off fresh qualifying activity: at least one human message
    since the last firing and at least one uncovered distillable message,
    so an idle subgroup never dribbles stale insights forever.
    """
    if state.messages_since_trigger < 1 or not state.pending_candidate_ids:
        return False
    return (
        state.messages_since_trigger >= policy.trigger_messages
        or now - state.last_trigger_at >= policy.trigger_ms
    )


@dataclass(frozen=True)
class Distillation:
    """Distiller output: insight text plus the human messages it came from."""

    text: str
    source_message_ids: tuple[str, ...]


class Distiller(Protocol):
    def distill(
        self, state: SurrogateState, policy: DistillerPolicy
    ) -> Optional[Distillation]: ...


class StubExtractiveDistiller:
    """Reference backend: emit the highest-salience uncovered message verbatim.

    Ties go to the earliest buffered message. Output text is always an exact
    human utterance, so provenance purity is provable.
    """

    def distill(
        self, state: SurrogateState, policy: DistillerPolicy
    ) -> Optional[Distillation]:
        candidates = _candidates(state, policy.min_tokens)
        if not candidates:
            return None
        best = max(candidates, key=lambda m: salience(m.text))  # max keeps first tie
        state.covered_message_ids.add(best.message_id)
        state.pending_candidate_ids.discard(best.message_id)
        return Distillation(text=best.text, source_message_ids=(best.message_id,))


DISTILL_PROMPT_TEMPLATE = (
    "You are a relay observing one brainstorming subgroup. Distill the most "
    "important new idea or argument from the transcript below into one "
    "sentence, quoting participants where possible. Do not add ideas of "
    "your own.\n\nTranscript:\n{transcript}\n\nDistillation:"
)


class ExternalLLMDistiller:
    """Completion-endpoint backend: POST a prompt document, read plain text.

    One retry on failure; a failed cycle returns None and the session
    carries on (degradation is logged, never fatal).
    """

    def __init__(
        self,
        endpoint: str,
        model: str = "",
        timeout: float = 10.0,
        session: Optional[requests.Session] = None,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self._http = session or requests.Session()

    def distill(
        self, state: SurrogateState, policy: DistillerPolicy
    ) -> Optional[Distillation]:
        candidates = _candidates(state, policy.min_tokens)
        if not candidates:
            return None
        transcript = "\n".join(f"[{m.message_id}] {m.text}" for m in candidates)
        payload = {
            "model": self.model,
            "prompt": DISTILL_PROMPT_TEMPLATE.format(transcript=transcript),
        }
        text = None
        for attempt in (1, 2):
            try:
                resp = self._http.post(self.endpoint, json=payload, timeout=self.timeout)
                resp.raise_for_status()
                text = resp.text.strip()
                break
            except requests.RequestException as exc:
                logger.warning(
                    "distiller endpoint failed (attempt %d/2) for %s: %s",
                    attempt,
                    state.surrogate_id,
                    exc,
                )
        if not text:
            return None
        ids = tuple(m.message_id for m in candidates)
        state.covered_message_ids.update(ids)
        state.pending_candidate_ids.difference_update(ids)
        return Distillation(text=text, source_message_ids=ids)


def make_distiller(
    backend: DistillerBackend,
    *,
    endpoint: str = "",
    model: str = "",
    timeout: float = 10.0,
) -> Distiller:
    if backend is DistillerBackend.EXTERNAL_LLM:
        return ExternalLLMDistiller(endpoint, model=model, timeout=timeout)
    return StubExtractiveDistiller()


def framing_phrase(insight_id: str, template_seed: int) -> str:
    """Stable framing choice: same insight and seed always frame alike."""
    digest = zlib.crc32(f"{template_seed}:{insight_id}".encode("utf-8"))
    return FRAMING_PHRASES[digest % len(FRAMING_PHRASES)]


def render_insight(insight: Insight, template_seed: int) -> str:
    """Framing phrase, a space, then the insight text verbatim."""
    return framing_phrase(insight.insight_id, template_seed) + " " + insight.text


def strip_framing(text: str) -> Optional[str]:
    """Insight body if *text* starts with a shipped framing phrase, else None."""
    for phrase in FRAMING_PHRASES:
        if text.startswith(phrase) and len(text) > len(phrase):
            return text[len(phrase) + 1:]
    return None

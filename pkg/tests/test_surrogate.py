import random
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from swarmchat.model import Author, ChatMessage, DistillerBackend, Insight, Provenance
from swarmchat.surrogate import (
    FRAMING_PHRASES,
    CrossSubgroupMessageError,
    DistillerPolicy,
    ExternalLLMDistiller,
    StubExtractiveDistiller,
    SurrogateState,
    framing_phrase,
    make_distiller,
    observe,
    render_insight,
    salience,
    should_trigger,
    strip_framing,
)


def human(mid, gid, text, t=0):
    return ChatMessage(mid, gid, Author.human("p1"), t, text, Provenance.original())


def relay(mid, gid, text, t=0):
    return ChatMessage(mid, gid, Author.surrogate("a1"), t, text, Provenance.relayed("i9"))


def fresh_state(**kwargs):
    return SurrogateState("a1", "g1", **kwargs)


class TestObserve:
    def test_human_message_buffers(self):
        state = fresh_state()
        observe(state, human("m1", "g1", "use cones as megaphones at games"))
        assert len(state.observation_buffer) == 1
        assert state.messages_since_trigger == 1

    def test_surrogate_message_ignored(self):
        state = fresh_state()
        observe(state, relay("m1", "g1", "Another group suggested: something"))
        assert state.observation_buffer == []

    def test_cross_subgroup_rejected(self):
        state = fresh_state()
        with pytest.raises(CrossSubgroupMessageError):
            observe(state, human("m1", "g2", "hello out there"))


class TestStubDistill:
    def test_single_buffered_message_emitted_verbatim(self):
        state = fresh_state()
        text = "stack cones into a giant orange tree for the office lobby"
        observe(state, human("m1", "g1", text))
        out = StubExtractiveDistiller().distill(state, DistillerPolicy())
        assert out is not None
        assert out.text == text
        assert out.source_message_ids == ("m1",)
        assert "m1" in state.covered_message_ids

    def test_empty_buffer_gives_none(self):
        state = fresh_state()
        assert StubExtractiveDistiller().distill(state, DistillerPolicy()) is None

    def test_short_messages_filtered_by_min_tokens(self):
        state = fresh_state()
        # all messages <= 4 content tokens with min_tokens=5 -> none
        for k, text in enumerate(["ok sure", "nice idea folks", "cones cones cones go"]):
            observe(state, human(f"m{k}", "g1", text))
        assert salience("cones cones cones go") == 4
        assert StubExtractiveDistiller().distill(state, DistillerPolicy(min_tokens=5)) is None

    def test_highest_salience_wins_ties_earliest(self):
        state = fresh_state()
        observe(state, human("m1", "g1", "paint cones gold for quirky trophies today"))  # 6
        observe(state, human("m2", "g1", "use cones as megaphones for cheering games"))  # 5
        observe(state, human("m3", "g1", "drill holes making garden sprinkler towers"))  # 6
        out = StubExtractiveDistiller().distill(state, DistillerPolicy())
        assert out.source_message_ids == ("m1",)  # tie with m3, earliest wins

    def test_covered_messages_not_reused(self):
        state = fresh_state()
        observe(state, human("m1", "g1", "paint cones gold for quirky trophies today"))
        observe(state, human("m2", "g1", "use cones as megaphones for cheering games"))
        d = StubExtractiveDistiller()
        first = d.distill(state, DistillerPolicy())
        second = d.distill(state, DistillerPolicy())
        assert first.source_message_ids == ("m1",)
        assert second.source_message_ids == ("m2",)
        assert d.distill(state, DistillerPolicy()) is None


class TestTrigger:
    def test_fires_on_message_count(self):
        state = fresh_state()
        policy = DistillerPolicy(trigger_messages=3, trigger_seconds=999)
        for k in range(3):
            observe(state, human(f"m{k}", "g1", "use cones as megaphones for cheering games"))
        assert should_trigger(state, policy, now=1000)

    def test_fires_on_elapsed_time_with_activity(self):
        state = fresh_state()
        policy = DistillerPolicy(trigger_messages=99, trigger_seconds=60)
        observe(state, human("m1", "g1", "use cones as megaphones for cheering games"))
        assert not should_trigger(state, policy, now=59_000)
        assert should_trigger(state, policy, now=60_000)

    def test_never_fires_without_new_activity(self):
        state = fresh_state()
        policy = DistillerPolicy(trigger_messages=3, trigger_seconds=60)
        observe(state, human("m1", "g1", "use cones as megaphones for games"))
        state.messages_since_trigger = 0  # scheduler just fired
        assert not should_trigger(state, policy, now=10_000_000)

    def test_never_fires_without_distillable_content(self):
        state = fresh_state()
        policy = DistillerPolicy(trigger_messages=1, trigger_seconds=1)
        observe(state, human("m1", "g1", "ok"))  # below min_tokens
        assert not should_trigger(state, policy, now=10_000_000)


def make_insight(text, iid="i1"):
    return Insight(iid, "g2", text, ("m-src",), 0)


class TestRendering:
    def test_render_contains_verbatim_body_and_framing(self):
        ins = make_insight("use cones as megaphones")
        text = render_insight(ins, template_seed=3)
        assert text.endswith("use cones as megaphones")
        assert any(text.startswith(p) for p in FRAMING_PHRASES)

    def test_same_insight_same_seed_identical(self):
        ins = make_insight("use cones as megaphones")
        assert render_insight(ins, 7) == render_insight(ins, 7)

    def test_different_seed_can_change_framing(self):
        ins = make_insight("use cones as megaphones")
        phrases = {framing_phrase(ins.insight_id, seed) for seed in range(40)}
        assert len(phrases) > 1

    def test_strip_framing_recovers_exact_insight_text(self):
        rng = random.Random(0)
        vocab = "cone plunger horn paint gold circus suction garden".split()
        for k in range(100):
            body = " ".join(rng.choices(vocab, k=rng.randint(1, 8)))
            ins = make_insight(body, iid=f"i{k}")
            rendered = render_insight(ins, template_seed=k % 13)
            assert strip_framing(rendered) == body

    def test_strip_framing_rejects_unframed_text(self):
        assert strip_framing("just a human message") is None


class _Completion(BaseHTTPRequestHandler):
    fail_first = {"remaining": 0}

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        self.rfile.read(length)
        if _Completion.fail_first["remaining"] > 0:
            _Completion.fail_first["remaining"] -= 1
            self.send_response(500)
            self.end_headers()
            return
        body = b"Participants suggested using cones as megaphones."
        self.send_response(200)
        self.send_header("Content-Type", "text/plain")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def completion_server():
    server = HTTPServer(("127.0.0.1", 0), _Completion)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/complete"
    server.shutdown()


class TestExternalLLMDistiller:
    def test_returns_endpoint_text_and_covers_sources(self, completion_server):
        state = fresh_state()
        observe(state, human("m1", "g1", "use cones as megaphones for cheering games"))
        _Completion.fail_first["remaining"] = 0
        d = ExternalLLMDistiller(completion_server, model="test", timeout=5)
        out = d.distill(state, DistillerPolicy(backend=DistillerBackend.EXTERNAL_LLM))
        assert out is not None
        assert "megaphones" in out.text
        assert out.source_message_ids == ("m1",)
        assert state.covered_message_ids == {"m1"}

    def test_retries_once_then_succeeds(self, completion_server):
        state = fresh_state()
        observe(state, human("m1", "g1", "use cones as megaphones for cheering games"))
        _Completion.fail_first["remaining"] = 1
        d = ExternalLLMDistiller(completion_server, timeout=5)
        assert d.distill(state, DistillerPolicy()) is not None

    def test_degrades_to_none_after_two_failures(self, completion_server):
        state = fresh_state()
        observe(state, human("m1", "g1", "use cones as megaphones for cheering games"))
        _Completion.fail_first["remaining"] = 2
        d = ExternalLLMDistiller(completion_server, timeout=5)
        assert d.distill(state, DistillerPolicy()) is None
        # nothing covered: the cycle can retry next trigger
        assert state.covered_message_ids == set()

    def test_factory_picks_backend(self):
        assert isinstance(
            make_distiller(DistillerBackend.STUB_EXTRACTIVE), StubExtractiveDistiller
        )
        assert isinstance(
            make_distiller(DistillerBackend.EXTERNAL_LLM, endpoint="http://x"),
            ExternalLLMDistiller,
        )

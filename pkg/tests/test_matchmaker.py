import random

import pytest

from swarmchat.matchmaker import (
    FullyConnectedTopology,
    IneligibleSubgroupError,
    InsightPool,
    Matchmaker,
    RingTopology,
    novelty,
)
from swarmchat.model import Insight
from swarmchat.tokens import TokenInterner

from conftest import oracle_novelty, oracle_tokens


class TestNovelty:
    def test_identical_text_scores_zero(self):
        profile = set(oracle_tokens("use cones as megaphones"))
        assert novelty("use cones as megaphones", profile) == pytest.approx(0.0)

    def test_disjoint_scores_one(self):
        assert novelty("red cone", {"plunger", "handle"}) == pytest.approx(1.0)

    def test_hand_computed_jaccard(self):
        # tokens {red, cone, hat} vs profile {red, cone}: 1 - 2/3
        assert novelty("red cone hat", {"red", "cone"}) == pytest.approx(1 - 2 / 3)

    def test_both_empty_scores_zero(self):
        assert novelty("", set()) == 0.0
        assert novelty("a the of", set()) == 0.0  # stopwords only


def make_insight(iid, source, text, created_at=0, delivered=()):
    return Insight(
        insight_id=iid,
        source_subgroup=source,
        text=text,
        source_message_ids=(f"m-{iid}",),
        created_at=created_at,
        delivered_to=frozenset(delivered),
    )


class TestInsightPool:
    def test_enqueue_into_empty(self):
        pool = InsightPool(TokenInterner())
        assert pool.enqueue(make_insight("i1", "g1", "use cones as megaphones"))
        assert len(pool) == 1

    def test_same_source_duplicate_rejected(self):
        pool = InsightPool(TokenInterner())
        pool.enqueue(make_insight("i1", "g1", "use cones as megaphones"))
        assert not pool.enqueue(make_insight("i2", "g1", "use cones as megaphones"))
        assert len(pool) == 1

    def test_duplicate_text_from_other_source_allowed(self):
        pool = InsightPool(TokenInterner())
        pool.enqueue(make_insight("i1", "g1", "use cones as megaphones"))
        assert pool.enqueue(make_insight("i2", "g2", "use cones as megaphones"))

    def test_fifo_eviction_at_max_size(self):
        pool = InsightPool(TokenInterner(), max_size=64)
        # 65 clearly-distinct insights: oldest must leave, newest 64 stay
        for k in range(65):
            ok = pool.enqueue(
                make_insight(f"i{k:03d}", "g1", f"idea alpha{k} beta{k} gamma{k}", created_at=k)
            )
            assert ok
        assert len(pool) == 64
        ids = [ins.insight_id for ins in pool.pending]
        assert ids[0] == "i001"  # i000 evicted
        assert ids[-1] == "i064"

    def test_near_duplicate_threshold_uses_dedup_floor(self):
        pool = InsightPool(TokenInterner(), dedup_floor=0.5)
        pool.enqueue(make_insight("i1", "g1", "alpha beta gamma delta"))
        # 3/5 overlap -> novelty 0.4 < 0.5 -> rejected
        assert not pool.enqueue(make_insight("i2", "g1", "alpha beta gamma epsilon"))
        # disjoint -> novelty 1.0 -> accepted
        assert pool.enqueue(make_insight("i3", "g1", "zeta eta theta iota"))


def build_matchmaker(subgroups, **kwargs):
    interner = TokenInterner()
    defaults = dict(
        profile_window=30,
        starvation_threshold_ms=5000,
        novelty_floor=0.3,
        dedup_floor=0.2,
        pool_max_size=64,
    )
    defaults.update(kwargs)
    return Matchmaker(interner, subgroups, **defaults)


class TestSelectDelivery:
    def test_sole_candidate_selected(self):
        mm = build_matchmaker(["g1", "g2"])
        mm.observe_message("g2", ["plunger", "handle"])
        mm.enqueue_insight(make_insight("i1", "g1", "use cones as megaphones"))
        chosen = mm.select_delivery("g2", now=10_000)
        assert chosen is not None and chosen.insight_id == "i1"

    def test_own_insight_never_selected(self):
        mm = build_matchmaker(["g1", "g2"])
        mm.enqueue_insight(make_insight("i1", "g1", "use cones as megaphones"))
        assert mm.select_delivery("g1", now=10_000) is None

    def test_highest_novelty_wins(self):
        mm = build_matchmaker(["g1", "g2"], novelty_floor=0.0)
        mm.observe_message("g2", ["cones", "megaphones", "stadium"])
        mm.enqueue_insight(make_insight("i1", "g1", "cones megaphones stadium cheering"))
        mm.enqueue_insight(make_insight("i2", "g1", "plunger stilts circus party"))
        chosen = mm.select_delivery("g2", now=10_000)
        assert chosen.insight_id == "i2"

    def test_novelty_floor_blocks(self):
        mm = build_matchmaker(["g1", "g2"], novelty_floor=0.9)
        mm.observe_message("g2", ["cones", "megaphones"])
        mm.enqueue_insight(make_insight("i1", "g1", "cones megaphones cheering"))
        assert mm.select_delivery("g2", now=10_000) is None

    def test_already_received_excluded(self):
        mm = build_matchmaker(["g1", "g2"])
        mm.enqueue_insight(make_insight("i1", "g1", "use cones as megaphones"))
        mm.routing["g2"].received_insight_ids.add("i1")
        assert mm.select_delivery("g2", now=10_000) is None

    def test_tie_breaks_older_then_id(self):
        mm = build_matchmaker(["g1", "g2"], novelty_floor=0.0)
        mm.enqueue_insight(make_insight("i2", "g1", "alpha beta", created_at=5))
        mm.enqueue_insight(make_insight("i1", "g1", "gamma delta", created_at=5))
        chosen = mm.select_delivery("g2", now=10_000)
        assert chosen.insight_id == "i1"  # same novelty, same age: id decides

    def test_ineligible_subgroup_is_contract_violation(self):
        mm = build_matchmaker(["g1", "g2"])
        mm.routing["g2"].last_delivery_at = 9000
        with pytest.raises(IneligibleSubgroupError):
            mm.select_delivery("g2", now=10_000)


class TestTick:
    def test_no_eligible_subgroups_no_deliveries(self):
        mm = build_matchmaker(["g1", "g2"], starvation_threshold_ms=60_000)
        mm.enqueue_insight(make_insight("i1", "g1", "use cones as megaphones"))
        assert mm.tick(now=1000) == []

    def test_single_insight_fans_out_to_all_but_source(self):
        ids = [f"g{k:02d}" for k in range(1, 16)]
        mm = build_matchmaker(ids)
        mm.enqueue_insight(make_insight("i1", "g01", "use cones as megaphones today folks"))
        deliveries = mm.tick(now=10_000)
        receivers = {d.subgroup_id for d in deliveries}
        assert len(deliveries) == 14
        assert receivers == set(ids) - {"g01"}

    def test_fully_propagated_insight_leaves_pool(self):
        mm = build_matchmaker(["g1", "g2", "g3"])
        mm.enqueue_insight(make_insight("i1", "g1", "use cones as megaphones"))
        mm.tick(now=10_000)
        assert len(mm.pool) == 0
        assert mm.tick(now=20_000) == []

    def test_no_duplicate_deliveries_across_ticks(self):
        mm = build_matchmaker(["g1", "g2"])
        mm.enqueue_insight(make_insight("i1", "g1", "use cones as megaphones"))
        first = mm.tick(now=10_000)
        second = mm.tick(now=20_000)
        assert len(first) == 1 and second == []

    def test_most_starved_served_first(self):
        mm = build_matchmaker(["g1", "g2", "g3"])
        mm.routing["g2"].last_delivery_at = 1000
        mm.routing["g3"].last_delivery_at = 500
        mm.enqueue_insight(make_insight("i1", "g1", "use cones as megaphones"))
        deliveries = mm.tick(now=60_000)
        assert [d.subgroup_id for d in deliveries] == ["g3", "g2"]

    def test_monotone_last_delivery(self):
        mm = build_matchmaker(["g1", "g2"])
        mm.enqueue_insight(make_insight("i1", "g1", "alpha beta gamma"))
        mm.tick(now=10_000)
        before = mm.routing["g2"].last_delivery_at
        mm.enqueue_insight(make_insight("i2", "g1", "delta epsilon zeta"))
        mm.tick(now=20_000)
        assert mm.routing["g2"].last_delivery_at >= before


class TestRingTopology:
    def test_insight_spreads_only_to_neighbors_first(self):
        ids = [f"g{k}" for k in range(1, 6)]  # ring order g1..g5
        topo = RingTopology(ids)
        ins = make_insight("i1", "g1", "alpha")
        assert topo.allows(ins, "g2") and topo.allows(ins, "g5")
        assert not topo.allows(ins, "g3") and not topo.allows(ins, "g4")

    def test_delivered_groups_extend_the_frontier(self):
        ids = [f"g{k}" for k in range(1, 6)]
        topo = RingTopology(ids)
        ins = make_insight("i1", "g1", "alpha", delivered=("g2",))
        assert topo.allows(ins, "g3")  # neighbor of g2
        assert not topo.allows(ins, "g4")

    def test_never_back_to_source(self):
        topo = RingTopology(["g1", "g2", "g3"])
        ins = make_insight("i1", "g1", "alpha", delivered=("g2",))
        assert not topo.allows(ins, "g1")


def oracle_select(pool_insights, receiver_id, received_ids, profile_tokens, floor, topology):
    """Spec-text reimplementation: filter, max novelty, tie older then id."""
    best = None
    for ins in pool_insights:
        if ins.source_subgroup == receiver_id:
            continue
        if ins.insight_id in received_ids:
            continue
        if not topology.allows(ins, receiver_id):
            continue
        score = oracle_novelty(ins.text, profile_tokens)
        if score < floor:
            continue
        key = (-score, ins.created_at, ins.insight_id)
        if best is None or key < best[0]:
            best = (key, ins)
    return None if best is None else best[1]


VOCAB = (
    "cone plunger megaphone stadium circus handle suction paint gold garden "
    "sprinkler lamp boot dryer funnel oil tower rocket costume anchor beach "
    "umbrella sand speaker horn tree mower popcorn rope ladder scooter snow"
).split()


@pytest.mark.parametrize("trial_seed", range(25))
def test_select_agrees_with_bruteforce_oracle(trial_seed):
    rng = random.Random(trial_seed)
    n_groups = rng.randint(2, 6)
    ids = [f"g{k}" for k in range(1, n_groups + 1)]
    floor = rng.choice([0.0, 0.2, 0.3, 0.5])
    mm = build_matchmaker(ids, novelty_floor=floor)
    for gid in ids:
        for _ in range(rng.randint(0, 6)):
            mm.observe_message(gid, rng.sample(VOCAB, rng.randint(1, 6)))
    insights = []
    for k in range(rng.randint(1, 10)):
        ins = make_insight(
            f"i{k:02d}",
            rng.choice(ids),
            " ".join(rng.sample(VOCAB, rng.randint(2, 7))),
            created_at=rng.randint(0, 3),
        )
        if mm.enqueue_insight(ins):
            insights.append(ins)
    for gid in ids:
        for ins in insights:
            if rng.random() < 0.2 and ins.source_subgroup != gid:
                mm.routing[gid].received_insight_ids.add(ins.insight_id)

    for gid in ids:
        expected = oracle_select(
            mm.pool.pending,
            gid,
            mm.routing[gid].received_insight_ids,
            set(mm.routing[gid].profile.as_multiset()),
            floor,
            FullyConnectedTopology(),
        )
        got = mm.select_delivery(gid, now=10_000)
        if expected is None:
            assert got is None
        else:
            assert got is not None and got.insight_id == expected.insight_id

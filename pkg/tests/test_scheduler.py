import pytest
from hypothesis import given, settings, strategies as st

from conftest import full_graph, scenario
from sdn_evb.events import enabled_on_switch, event_catalog
from sdn_evb.kernel import EventInstance, apply, enabled_instances
from sdn_evb.scheduler import (
    MESSAGE_CONSUMERS, SHIPPED_ORDER, BranchRequired, CyclicOrder, EmptyChoice,
    Exhaustive, MissingPriority, PriorityOrder, PriorityThenSeed, Scheduler,
    SeededRandom, filter_priority, message_dequeue_order, parse_policy, pick,
)
from sdn_evb.state import Level, Message, MessageKind


def ev(name, *args):
    return EventInstance(name, tuple(args))


def test_shipped_order_pairs():
    expected = {
        ("sw_newFTentry", "sw_sendPckt2sw"),
        ("sw_sndPk2ctrl", "sw_sendPckt2sw"),
        ("sw_sndPk2ctrl", "sw_newFTentry"),
        ("sw_sendPckt2sw", "sw_delFTentry"),
    } | {(n, "sw_barrierRp") for n in MESSAGE_CONSUMERS}
    assert SHIPPED_ORDER.pairs == expected
    assert all(a != b for a, b in SHIPPED_ORDER.closure())


def test_add_waits_for_forwarding():
    enabled = [ev("sw_newFTentry", "s1", "m1"), ev("sw_sendPckt2sw", "s1", "p1", "s2")]
    assert filter_priority(enabled) == [ev("sw_sendPckt2sw", "s1", "p1", "s2")]


def test_lone_packet_in_survives():
    enabled = [ev("sw_sndPk2ctrl", "s1", "n1")]
    assert filter_priority(enabled) == enabled


def test_other_switches_are_not_filtered():
    enabled = [ev("sw_sendPckt2sw", "s1", "p1", "s2"), ev("sw_newFTentry", "s2", "m1")]
    assert filter_priority(enabled) == enabled


def test_controller_events_never_filtered():
    enabled = [ev("ctl_emitPkt", "s1", "p1", "m1"), ev("sw_sendPckt2sw", "s1", "p1", "s2"),
               ev("sw_sndPk2ctrl", "s1", "n1")]
    assert filter_priority(enabled) == enabled[:2]


def test_transitive_domination():
    # sndPk2ctrl < newFTentry < sendPckt2sw < delFTentry
    enabled = [ev("sw_sndPk2ctrl", "s1", "n1"), ev("sw_delFTentry", "s1", "m2")]
    assert filter_priority(enabled) == [ev("sw_delFTentry", "s1", "m2")]


def test_cycle_is_rejected():
    bad = PriorityOrder(frozenset({("a", "b"), ("b", "c"), ("c", "a")}))
    with pytest.raises(CyclicOrder):
        filter_priority([ev("sw_x", "s1")], bad)


def test_different_switch_steps_commute_in_s2():
    """Forwarding on one switch and installing an entry on another reach the
    same state in either order, and neither is filtered."""
    l2 = event_catalog("L2")
    g = full_graph("s2", Level.L2)
    found = 0
    for s in g.nodes:
        en = enabled_instances(s, l2)
        fwd = [i for i in en if i.name == "sw_sendPckt2sw"]
        add = [i for i in en if i.name == "sw_newFTentry"]
        for f in fwd:
            for a in add:
                if f.args[0] == a.args[0]:
                    continue
                assert set(filter_priority([f, a])) == {f, a}
                ab = apply(apply(s, f, l2), a, l2)
                ba = apply(apply(s, a, l2), f, l2)
                assert ab == ba
                found += 1
    assert found > 0


@pytest.mark.parametrize("name", ["s1", "s2"])
def test_filtered_l2_equals_l3_enabled(name):
    l2, l3 = event_catalog("L2"), event_catalog("L3")
    g = full_graph(name, Level.L3)
    step = 1 if name == "s1" else 29
    for s in g.nodes[::step]:
        assert filter_priority(enabled_instances(s, l2), SHIPPED_ORDER, s) == enabled_instances(s, l3)


def _dominated_steps(graph, l2, low, highs):
    bad = []
    defs = [l2[h].event for h in highs]
    for src, inst, _ in graph.edges:
        if inst.name == low:
            s = graph.nodes[src]
            if any(enabled_on_switch(s, d, inst.args[0]) for d in defs):
                bad.append((src, inst))
    return bad


def test_l3_never_takes_a_dominated_step_on_s2():
    l2 = event_catalog("L2")
    g = full_graph("s2", Level.L3)
    assert _dominated_steps(g, l2, "sw_newFTentry", ["sw_sendPckt2sw"]) == []
    assert _dominated_steps(g, l2, "sw_sndPk2ctrl", ["sw_sendPckt2sw", "sw_newFTentry"]) == []
    for consumer in MESSAGE_CONSUMERS:
        assert _dominated_steps(g, l2, consumer, ["sw_barrierRp"]) == []


_NAMES = sorted({n for pair in SHIPPED_ORDER.pairs for n in pair})


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(_NAMES), st.sampled_from(["s1", "s2", "s3"])),
                min_size=1, max_size=12, unique=True))
def test_filter_keeps_something_on_each_switch(pairs):
    enabled = [ev(name, sw, "x") for name, sw in pairs]
    kept = filter_priority(enabled)
    assert set(kept) <= set(enabled)
    for sw in {sw for _, sw in pairs}:
        assert any(i.args[0] == sw for i in kept)


def test_pick_singleton_and_empty():
    only = [ev("ctl_havePacket", "p1")]
    for policy in (Exhaustive(), SeededRandom(3), PriorityThenSeed(3)):
        assert pick(only, policy) == only[0]
    with pytest.raises(EmptyChoice):
        pick([], SeededRandom(7))


def test_exhaustive_asks_the_caller_to_branch():
    with pytest.raises(BranchRequired):
        pick([ev("a"), ev("b")], Exhaustive())


def test_seeded_pick_is_reproducible():
    options = [ev("ctl_emitPkt", sw, "p1", m) for sw in ("s1", "s2") for m in ("m1", "m2", "m3")]
    first = [Scheduler(SeededRandom(42)).pick(options) for _ in range(3)]
    a, b = Scheduler(SeededRandom(42)), Scheduler(SeededRandom(42))
    assert [a.pick(options) for _ in range(10)] == [b.pick(options) for _ in range(10)]
    assert len(set(first)) == 1


def test_priority_policy_prefers_high_priority_messages():
    g = full_graph("s2", Level.L2)
    l2 = event_catalog("L2")
    sched = Scheduler(PriorityThenSeed(0))
    checked = 0
    for s in g.nodes[::40]:
        en = enabled_instances(s, l2)
        if len(en) < 2:
            continue
        chosen = sched.pick(en, s)

        def prio(inst):
            for a in inst.args:
                m = s.find_message(a)
                if m is not None:
                    return m.priority or 0
            return 0

        top = max(prio(i) for i in en)
        assert prio(chosen) == top
        assert chosen == min(i for i in en if prio(i) == top)
        checked += 1
    assert checked


def test_parse_policy():
    assert parse_policy("exhaustive") == Exhaustive()
    assert parse_policy("seeded", 5) == SeededRandom(5)
    assert parse_policy("priority", 2) == PriorityThenSeed(2)
    with pytest.raises(ValueError):
        parse_policy("fair")


def test_dequeue_order():
    m1 = Message("m1", MessageKind.Add, priority=2)
    m2 = Message("m2", MessageKind.Add, priority=5)
    assert message_dequeue_order([m1, m2]) == [m2, m1]
    assert message_dequeue_order([]) == []


def test_dequeue_ties_by_id_whatever_the_input_order():
    m1 = Message("m1", MessageKind.Del, priority=3)
    m2 = Message("m2", MessageKind.Del, priority=3)
    assert message_dequeue_order([m2, m1]) == [m1, m2]
    assert message_dequeue_order([m1, m2]) == [m1, m2]


def test_dequeue_needs_priorities():
    with pytest.raises(MissingPriority):
        message_dequeue_order([Message("m1", MessageKind.Add)])

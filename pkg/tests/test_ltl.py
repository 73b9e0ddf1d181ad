import pytest

from conftest import full_graph, scenario
from sdn_evb.checker import BOUND_EXCEEDED, FAILS, HOLDS, StateGraph, explore
from sdn_evb.kernel import EventInstance, Trace, replay
from sdn_evb.ltl import (
    LP_DELIV, LP_OKMACH, LP_OKSTATUS, LIVENESS, And, EventAtom, Finally,
    Globally, Implies, MalformedPredicate, Next, Not, ParseError, Pred,
    StateAtom, TrueF, UnknownEventAtom, check_ltl, check_trace, format_ltl,
    load_formulas, parse_ltl, validate,
)
from sdn_evb.mutants import remove_event
from sdn_evb.state import Level


def test_okmach_structure():
    f = parse_ltl("e(ctl_emitPkt) => X(e(sw_rcv_machingPkt))")
    assert f == Implies(EventAtom("ctl_emitPkt"), Next(EventAtom("sw_rcv_machingPkt")))


@pytest.mark.parametrize("text", [LP_OKSTATUS, LP_DELIV, LP_OKMACH])
def test_table_formulas_round_trip(text):
    assert format_ltl(parse_ltl(text)) == text


@pytest.mark.parametrize("text", [
    "G(e(ctl_askBarrier) => F(e(ctl_rcvBarrierRp)))",
    "not e(a) and e(b) => X(G({dataChan <: ctlSentPkts \\/ swSentPkts}))",
    "(e(a) => e(b)) => e(c)",
    "{dataChan = {}}",
    "G(true) and not false",
])
def test_printing_is_stable(text):
    once = format_ltl(parse_ltl(text))
    assert format_ltl(parse_ltl(once)) == once
    assert parse_ltl(once) == parse_ltl(text)


def test_implication_is_right_associative():
    assert parse_ltl("e(a) => e(b) => e(c)") == Implies(
        EventAtom("a"), Implies(EventAtom("b"), EventAtom("c")))


def test_state_predicate():
    f = parse_ltl("{dataChan <: ctlSentPkts \\/ swSentPkts}")
    assert f == StateAtom(Pred(("dataChan",), "<:", ("ctlSentPkts", "swSentPkts")))


@pytest.mark.parametrize("text", ["F(", "e()", "e(a) =>", "G e(a))", "X(e(a)", "e(a) e(b)"])
def test_parse_errors_have_positions(text):
    with pytest.raises(ParseError) as info:
        parse_ltl(text)
    assert info.value.position >= 0


def test_unknown_event_atom():
    with pytest.raises(UnknownEventAtom):
        validate(parse_ltl("F(e(ctl_teleport))"))
    g = full_graph("s1", Level.L0)
    with pytest.raises(UnknownEventAtom):
        check_ltl(g, "F(e(ctl_teleport))")


def test_malformed_predicate():
    with pytest.raises(MalformedPredicate):
        validate(parse_ltl("{fooSet = {}}"))


def test_tautology_holds():
    assert check_ltl(full_graph("s1", Level.L0), "G(true)").holds
    assert check_ltl(explore(scenario("s0").initial_state("L0")), "G(true)").holds


@pytest.mark.parametrize("name", ["s1", "s2"])
@pytest.mark.parametrize("level", list(Level))
@pytest.mark.parametrize("formula", ["LP_deliv", "LP_OKstatus"])
def test_table_liveness_holds(name, level, formula):
    v = check_ltl(full_graph(name, level), LIVENESS[formula], formula)
    assert v.outcome == HOLDS, str(v)


def test_removing_emit_breaks_delivery():
    cat = remove_event("L0", "ctl_emitPkt")
    init = scenario("s1").initial_state("L0")
    g = explore(init, "L0", catalogue=cat)
    v = check_ltl(g, LP_DELIV, "LP_deliv")
    assert v.outcome == FAILS
    assert v.trace.events[0].name == "ctl_havePacket"
    assert "ctl_emitPkt" not in [i.name for i in v.trace.events]
    assert replay(init, v.trace.events, cat).final == v.trace.final


def test_first_step_only_without_g():
    g = full_graph("s2", Level.L0)
    # evaluated at the first position: the first step is never a barrier request
    assert check_ltl(g, "e(ctl_askBarrier) => F(e(ctl_rcvBarrierRp))").holds
    assert not check_ltl(g, "G(e(ctl_emitPkt) => X(e(sw_rcv_machingPkt)))").holds


def test_finally_fails_on_runs_that_end_without_it():
    g = full_graph("s1", Level.L0)
    v = check_ltl(g, "F(e(ctl_askStatusMsg))")
    assert v.outcome == FAILS and v.loop_start is None


def test_bound_exceeded_when_truncated():
    g = explore(scenario("s1").initial_state("L0"), "L0", depth_bound=2)
    assert check_ltl(g, LP_DELIV).outcome == BOUND_EXCEEDED


def _cyclic_graph():
    """a -x-> b -y-> a, plus a -z-> c with c a dead end."""
    g = StateGraph()
    for name in "abc":
        g.add_node(name, None, 0)
    g.add_edge(0, EventInstance("x"), 1)
    g.add_edge(1, EventInstance("y"), 0)
    g.add_edge(0, EventInstance("z"), 2)
    return g


def test_lasso_found_on_a_cycle():
    g = _cyclic_graph()
    v = check_ltl(g, "F(e(z))", known_events={"x", "y", "z"})
    assert v.outcome == FAILS
    assert v.loop_start is not None
    assert [i.name for i in v.trace.events] in (["x", "y"], ["x", "y", "x", "y"])
    assert check_ltl(g, "G(e(x) => X(e(y)))", known_events={"x", "y", "z"}).holds
    assert not check_ltl(g, "G(F(e(x)))", known_events={"x", "y", "z"}).holds


def test_check_trace_returns_the_run_as_witness():
    g = full_graph("s1", Level.L0)
    path = g.trace_to(g.terminal()[0])
    v = check_trace(path, LP_DELIV, complete=True)
    assert v.holds and v.trace is path


def test_formula_file(tmp_path):
    p = tmp_path / "f.ltl"
    p.write_text("# shipped set\nLP_deliv: e(ctl_havePacket) => F(e(ctl_emitPkt))\n\nG(true)\n")
    assert load_formulas(p) == [("LP_deliv", LP_DELIV), ("formula4", "G(true)")]

import pytest

from conftest import scenario
from sdn_evb.decomposer import (
    SHARED, check_component, check_recomposition, check_write_sets, decompose,
)
from sdn_evb.events import DOWN, PRIORITY, event_catalog
from sdn_evb.mutants import leaky_external
from sdn_evb.state import Level


def test_partition_by_prefix():
    ctl, sws = decompose("L0")
    assert len(ctl.own) == 11 and all(n.startswith("ctl_") for n in ctl.own)
    assert len(sws.own) == 13 and all(n.startswith("sw_") for n in sws.own)
    assert set(ctl.own) | set(sws.own) == set(event_catalog("L0"))


def test_shared_variables():
    assert SHARED == {"secure_chan_down", "secure_chan_up", "data_chan",
                      "ctl_sent_pkts", "sw_sent_pkts"}


def test_switches_see_the_emit_as_an_external_event():
    _, sws = decompose("L0")
    ext = sws.external["ext_ctl_emitPkt"]
    assert DOWN in ext.write_set
    # the priority rides on the message it mints, not on a separate field
    assert ext.write_set - {PRIORITY} <= SHARED
    assert ext.stands_for == "ctl_emitPkt"
    assert not ext.refinable


def test_private_only_events_have_no_mirror():
    ctl, sws = decompose("L0")
    mirrored = {e.stands_for for c in (ctl, sws) for e in c.external.values()}
    assert "sw_newFTentry" not in mirrored
    assert "ctl_havePacket" not in mirrored
    assert "ctl_decideRule" not in mirrored


def test_external_events_only_write_shared_state():
    for comp in decompose("L3"):
        assert check_write_sets(comp) == []


@pytest.mark.parametrize("level", [Level.L0, Level.L3])
def test_s1_recomposes(level):
    v = check_recomposition(level, scenario("s1"))
    assert v.holds, str(v)


def test_s0_recomposes():
    assert check_recomposition("L0", scenario("s0"), depth=10).holds


def test_components_keep_their_safety_properties():
    for comp in decompose("L1"):
        verdicts = check_component(comp, scenario("s1"), "L1", depth=4)
        assert verdicts and all(v.holds for v in verdicts), [str(v) for v in verdicts]


def test_leaky_external_event_fails():
    comps = leaky_external("L0")
    assert check_write_sets(comps[1])
    v = check_recomposition("L0", scenario("s1"), components=comps)
    assert not v.holds
    assert "not shared" in v.detail


def test_leak_is_caught_even_when_undeclared():
    from dataclasses import replace
    ctl, sws = leaky_external("L0")
    ext = sws.external["ext_ctl_emitPkt"]
    hidden = replace(ext, write_set=ext.write_set - {"switches"})
    sws = replace(sws, external={**sws.external, "ext_ctl_emitPkt": hidden})
    verdicts = check_component(sws, scenario("s1"), "L0", depth=4)
    assert any(not v.holds and "private" in v.name for v in verdicts)

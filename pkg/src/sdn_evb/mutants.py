"""Deliberately broken variants of the model, used to show that the checks
can fail."""
from __future__ import annotations

from dataclasses import replace

from .decomposer import Component, ExternalEvent, decompose
from .events import SWITCHES, CatalogueRow, _send_pckt, event_catalog
from .state import Level, match_entry, ms_remove


def drop_sw_sent_ghost(level) -> dict[str, CatalogueRow]:
    """sw_sendPckt2sw no longer records the hop in swSentPkts."""
    level = Level.parse(level)
    cat = event_catalog(level)
    row = cat["sw_sendPckt2sw"]
    base = _send_pckt(Level.L2 if level == Level.L3 else level, ghost=False)
    ev = replace(base, guard=row.event.guard) if level == Level.L3 else base
    cat["sw_sendPckt2sw"] = replace(row, event=ev)
    return cat


def remove_event(level, name: str) -> dict[str, CatalogueRow]:
    cat = event_catalog(level)
    del cat[name]
    return cat


def weaken_matching_guard(level=Level.L3) -> dict[str, CatalogueRow]:
    """sw_rcv_machingPkt accepts any packet on the data channel, matched or
    not; an unmatched packet is stored without an entry and later dropped."""
    level = Level.parse(level)
    cat = event_catalog(level)
    row = cat["sw_rcv_machingPkt"]

    def guard(s, a):
        sw, pkt = a
        return s.switch(sw) is not None and (pkt, sw) in s.data_chan

    def action(s, a):
        sw, pkt = a
        st = s.switch(sw)
        e = match_entry(st, s.net.packets[pkt], level)
        return s.with_switch(replace(st, ipk=st.ipk | {(pkt, e)}),
                             data_chan=ms_remove(s.data_chan, (pkt, sw)))

    cat["sw_rcv_machingPkt"] = replace(row, event=replace(row.event, guard=guard, action=action))
    return cat


def leaky_external(level) -> tuple[Component, Component]:
    """The switches component's ext_ctl_emitPkt delivers its PKOut straight
    into the switch's incoming buffer, a private variable, and declares
    that write."""
    ctl, sws = decompose(level)
    ext = sws.external["ext_ctl_emitPkt"]
    inner = ext.event.action

    def action(s, a):
        t = inner(s, a)
        sw, _, msg = a
        m, _ = t.down_msg(msg, sw)
        st = t.switch(sw)
        return t.with_switch(replace(st, incoming=st.incoming | {m}),
                             secure_chan_down=ms_remove(t.secure_chan_down, (m, sw)))

    leaked = ExternalEvent(replace(ext.event, action=action), ext.write_set | {SWITCHES},
                           ext.stands_for)
    external = dict(sws.external)
    external["ext_ctl_emitPkt"] = leaked
    return ctl, replace(sws, external=external)

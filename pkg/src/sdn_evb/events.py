"""Event catalogue of the global SDN model at each refinement level.

L0 is the abstract model; L1 adds multi-field matching and per-port
action queues; L2 stamps a priority on every minted message; L3
strengthens switch guards with the per-switch priority order.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, replace
from typing import Optional

from .kernel import EventDef
from .scheduler import SHIPPED_ORDER, PriorityOrder
from .state import (
    HOST, FlowEntry, GlobalState, Level, Message, MessageKind as K, Order,
    SwitchState, down_add, evolve, match_entry, ms_remove, up_add,
)

SWITCH = "Switch"
CONTROLLER = "Controller"

SW, PKT, MSG, ENTRY = "switch", "packet", "message", "entry"

# public names, spelled as in the model (including its spellings)
EVENT_NAMES = (
    "sw_rcv_machingPkt", "sw_rcv_unmachingPkt", "sw_sndPk2ctrl", "sw_sndMsg2ctrl",
    "sw_fwdLookup", "sw_sendPckt2sw", "sw_rcv_Msg", "sw_newFTentry",
    "sw_modFTentry", "sw_delFTentry", "sw_handlePkOut", "sw_barrierRp",
    "sw_statusRp",
    "ctl_havePacket", "ctl_emitPkt", "ctl_rcvPacketIn", "ctl_decideRule",
    "ctl_sendAdd", "ctl_sendModf", "ctl_sendDel", "ctl_askBarrier",
    "ctl_rcvBarrierRp", "ctl_askStatusMsg", "ctl_rcvStatus",
)
ROW_NUMBER = {name: i + 1 for i, name in enumerate(EVENT_NAMES)}

# state fields, as named on GlobalState
SWITCHES = "switches"
CTL = "controller"
SW_POOL = "sw_msg_pool"
DOWN = "secure_chan_down"
UP = "secure_chan_up"
DATA = "data_chan"
CTL_SENT = "ctl_sent_pkts"
SW_SENT = "sw_sent_pkts"
STATE_FIELDS = (SWITCHES, CTL, SW_POOL, DOWN, UP, DATA, CTL_SENT, SW_SENT)
PRIORITY = "message priority"


class LevelError(ValueError):
    pass


@dataclass(frozen=True)
class CatalogueRow:
    event: EventDef
    family: str
    introduced_at: Level
    refines: Optional[str]
    write_set: frozenset[str]

    @property
    def name(self) -> str:
        return self.event.name


# ---------------------------------------------------------------------------
# shared helpers

def _fresh(pool: tuple[str, ...], branch: bool) -> tuple[str, ...]:
    return pool if branch else pool[:1]


def _mint(state: GlobalState, level: Level, msg_id: str, kind: K, **payload) -> Message:
    prio = None
    if level >= Level.L2:
        prio = state.net.priority(kind, payload.get("packet"))
    return Message(msg_id, kind, priority=prio, **payload)


def _forward(state: GlobalState, s: SwitchState, pkt: str, entry: Optional[FlowEntry],
             level: Level) -> SwitchState:
    """Place ``pkt`` on the outputs of ``entry``; host ports deliver it."""
    if entry is None:
        return s
    net = state.net
    for port in entry.actions:
        target = net.target(s.id, port)
        if target is None or target == HOST:
            continue
        if level >= Level.L1:
            s = s.with_queue(port, s.queue(port) | {pkt})
        else:
            s = evolve(s, opk=s.opk | {(pkt, target)})
    return s


def _sw_msgs(state: GlobalState, attr: str):
    for s in state.switches:
        for m in getattr(s, attr):
            yield (s.id, m.id)


def _with_ctl(state: GlobalState, **changes) -> GlobalState:
    return evolve(state, controller=evolve(state.controller, **changes))


# ---------------------------------------------------------------------------
# switch family

def _rcv_matching(level: Level) -> EventDef:
    def bindings(s):
        return [(sw, p) for p, sw in s.data_chan]

    def guard(s, a):
        sw, pkt = a
        st = s.switch(sw)
        pk = s.net.packets.get(pkt)
        return (st is not None and pk is not None and (pkt, sw) in s.data_chan
                and match_entry(st, pk, level) is not None)

    def action(s, a):
        sw, pkt = a
        st = s.switch(sw)
        e = match_entry(st, s.net.packets[pkt], level)
        return s.with_switch(evolve(st, ipk=st.ipk | {(pkt, e)}),
                             data_chan=ms_remove(s.data_chan, (pkt, sw)))

    return EventDef("sw_rcv_machingPkt", (SW, PKT), bindings, guard, action)


def _rcv_unmatching(level: Level) -> EventDef:
    def bindings(s):
        return [(sw, p) for p, sw in s.data_chan]

    def guard(s, a):
        sw, pkt = a
        st = s.switch(sw)
        pk = s.net.packets.get(pkt)
        return (st is not None and pk is not None and (pkt, sw) in s.data_chan
                and match_entry(st, pk, level) is None and bool(s.sw_msg_pool))

    def action(s, a):
        sw, pkt = a
        st = s.switch(sw)
        m = _mint(s, level, s.sw_msg_pool[0], K.PacketIn, packet=pkt)
        return s.with_switch(evolve(st, omsg=st.omsg | {m}),
                             data_chan=ms_remove(s.data_chan, (pkt, sw)),
                             sw_msg_pool=s.sw_msg_pool[1:])

    return EventDef("sw_rcv_unmachingPkt", (SW, PKT), bindings, guard, action)


def _send_up(name: str, kinds: frozenset) -> EventDef:
    def bindings(s):
        return list(_sw_msgs(s, "omsg"))

    def guard(s, a):
        sw, msg = a
        st = s.switch(sw)
        m = st.outgoing_msg(msg) if st is not None else None
        return m is not None and m.kind in kinds

    def action(s, a):
        sw, msg = a
        st = s.switch(sw)
        m = st.outgoing_msg(msg)
        return s.with_switch(evolve(st, omsg=st.omsg - {m}),
                             secure_chan_up=up_add(s.secure_chan_up, m, sw))

    return EventDef(name, (SW, MSG), bindings, guard, action)


def _fwd_lookup(level: Level) -> EventDef:
    def bindings(s):
        return [(st.id, p) for st in s.switches for p, _ in st.ipk]

    def _pair(st, pkt):
        for p, e in st.ipk:
            if p == pkt:
                return p, e
        return None

    def guard(s, a):
        sw, pkt = a
        st = s.switch(sw)
        return st is not None and _pair(st, pkt) is not None

    def action(s, a):
        sw, pkt = a
        st = s.switch(sw)
        pair = _pair(st, pkt)
        st = evolve(st, ipk=st.ipk - {pair})
        return s.with_switch(_forward(s, st, pkt, pair[1], level))

    return EventDef("sw_fwdLookup", (SW, PKT), bindings, guard, action)


def _send_pckt(level: Level, ghost: bool = True) -> EventDef:
    def bindings(s):
        out = []
        for st in s.switches:
            if level >= Level.L1:
                for port, pkts in st.queues:
                    target = s.net.target(st.id, port)
                    if target is not None and target != HOST:
                        out.extend((st.id, p, target) for p in pkts)
            else:
                out.extend((st.id, p, d) for p, d in st.opk)
        return out

    def guard(s, a):
        sw, pkt, dst = a
        st = s.switch(sw)
        if st is None:
            return False
        if level >= Level.L1:
            port = s.net.port_towards(sw, dst)
            return port is not None and pkt in st.queue(port)
        return (pkt, dst) in st.opk

    def action(s, a):
        sw, pkt, dst = a
        st = s.switch(sw)
        if level >= Level.L1:
            port = s.net.port_towards(sw, dst)
            st = st.with_queue(port, st.queue(port) - {pkt})
        else:
            st = evolve(st, opk=st.opk - {(pkt, dst)})
        sent = s.sw_sent_pkts | {(pkt, dst)} if ghost else s.sw_sent_pkts
        data = tuple(sorted(s.data_chan + ((pkt, dst),)))
        return s.with_switch(st, data_chan=data, sw_sent_pkts=sent)

    return EventDef("sw_sendPckt2sw", (SW, PKT, SW), bindings, guard, action)


def _rcv_msg() -> EventDef:
    def bindings(s):
        return [(sw, m.id) for m, sw in s.secure_chan_down]

    def guard(s, a):
        sw, msg = a
        return s.switch(sw) is not None and s.down_msg(msg, sw) is not None

    def action(s, a):
        sw, msg = a
        pair = s.down_msg(msg, sw)
        st = s.switch(sw)
        return s.with_switch(evolve(st, incoming=st.incoming | {pair[0]}),
                             secure_chan_down=ms_remove(s.secure_chan_down, pair))

    return EventDef("sw_rcv_Msg", (SW, MSG), bindings, guard, action)


def _consume(name: str, kind: K, effect, needs_id=lambda s, st, m: False) -> EventDef:
    """A switch event processing one received message of ``kind``.

    ``effect(state, switch_after_consume, msg)`` returns the new state;
    ``needs_id`` tells whether the effect mints a message (then the switch
    message pool must not be empty).
    """
    def bindings(s):
        return list(_sw_msgs(s, "incoming"))

    def guard(s, a):
        sw, msg = a
        st = s.switch(sw)
        m = st.incoming_msg(msg) if st is not None else None
        if m is None or m.kind != kind:
            return False
        return bool(s.sw_msg_pool) or not needs_id(s, st, m)

    def action(s, a):
        sw, msg = a
        st = s.switch(sw)
        m = st.incoming_msg(msg)
        return effect(s, evolve(st, incoming=st.incoming - {m}), m)

    return EventDef(name, (SW, MSG), bindings, guard, action)


def _install(st: SwitchState, entry: FlowEntry) -> SwitchState:
    table = {e.id: e for e in st.table}
    table[entry.id] = entry
    return evolve(st, table=tuple(table[k] for k in sorted(table)))


def _new_entry(level):
    return _consume("sw_newFTentry", K.Add,
                    lambda s, st, m: s.with_switch(_install(st, m.entry)))


def _mod_entry(level):
    def effect(s, st, m):
        if st.entry(m.entry.id) is not None:
            st = _install(st, m.entry)
        return s.with_switch(st)
    return _consume("sw_modFTentry", K.Modf, effect)


def _del_entry(level):
    def effect(s, st, m):
        table = tuple(e for e in st.table if e.id != m.entry.id)
        return s.with_switch(evolve(st, table=table))
    return _consume("sw_delFTentry", K.Del, effect)


def _reply(s, st, level, kind, **payload):
    m = _mint(s, level, s.sw_msg_pool[0], kind, **payload)
    return s.with_switch(evolve(st, omsg=st.omsg | {m}), sw_msg_pool=s.sw_msg_pool[1:])


def _handle_pkout(level):
    def miss(s, st, m):
        return match_entry(st, s.net.packets[m.packet], level) is None

    def effect(s, st, m):
        e = match_entry(st, s.net.packets[m.packet], level)
        if e is None:
            # table miss: the packet goes back to the controller
            return _reply(s, st, level, K.PacketIn, packet=m.packet)
        return s.with_switch(_forward(s, st, m.packet, e, level))

    return _consume("sw_handlePkOut", K.PKOut, effect, needs_id=miss)


def _answer(s, st, level, kind, request, **payload):
    # a reply echoes the id of the request it answers, which is consumed here
    m = _mint(s, level, request.id, kind, **payload)
    return s.with_switch(evolve(st, omsg=st.omsg | {m}))


def _barrier_rp(level):
    return _consume("sw_barrierRp", K.Barrier,
                    lambda s, st, m: _answer(s, st, level, K.BarrierAck, m))


def _status_rp(level):
    return _consume("sw_statusRp", K.StatusReq,
                    lambda s, st, m: _answer(s, st, level, K.StatusRep, m, status=st.status))


# ---------------------------------------------------------------------------
# controller family

def _have_packet() -> EventDef:
    def bindings(s):
        return [(p,) for p in s.controller.env_packets]

    def guard(s, a):
        return a[0] in s.controller.env_packets

    def action(s, a):
        c = s.controller
        return _with_ctl(s, env_packets=c.env_packets - {a[0]}, outgoing=c.outgoing | {a[0]})

    return EventDef("ctl_havePacket", (PKT,), bindings, guard, action)


def _emit_pkt(level: Level, branch: bool) -> EventDef:
    def bindings(s):
        c = s.controller
        return [(sw, p, m) for sw in s.net.switch_ids for p in c.outgoing
                for m in _fresh(c.msg_pool, branch)]

    def guard(s, a):
        sw, pkt, msg = a
        c = s.controller
        return (sw in s.net.switch_ids and pkt in c.outgoing
                and msg in _fresh(c.msg_pool, branch))

    def action(s, a):
        sw, pkt, msg = a
        c = s.controller
        m = _mint(s, level, msg, K.PKOut, packet=pkt)
        s = _with_ctl(s, outgoing=c.outgoing - {pkt},
                      msg_pool=tuple(x for x in c.msg_pool if x != msg))
        return evolve(s, secure_chan_down=down_add(s.secure_chan_down, m, sw),
                       ctl_sent_pkts=s.ctl_sent_pkts | {(pkt, sw)})

    return EventDef("ctl_emitPkt", (SW, PKT, MSG), bindings, guard, action)


def _receive_up(name: str, kind: K, effect) -> EventDef:
    def bindings(s):
        return [(m.id,) for m, _ in s.secure_chan_up]

    def guard(s, a):
        pair = s.up_msg(a[0])
        return pair is not None and pair[0].kind == kind

    def action(s, a):
        pair = s.up_msg(a[0])
        s = evolve(s, secure_chan_up=ms_remove(s.secure_chan_up, pair))
        return effect(s, s.controller, pair[0], pair[1])

    return EventDef(name, (MSG,), bindings, guard, action)


def _rcv_packet_in():
    return _receive_up("ctl_rcvPacketIn", K.PacketIn,
                       lambda s, c, m, sw: _with_ctl(s, incoming=c.incoming | {(m.packet, sw)}))


def _rules_needed(s: GlobalState, pkt: str):
    c = s.controller
    header = s.net.packets[pkt].header
    for p, origin in sorted(c.incoming):
        if p != pkt or (origin, header) in c.decided:
            continue
        actions = s.net.routes.get((origin, header))
        if actions:
            yield origin, header, actions


def _decide_rule() -> EventDef:
    def bindings(s):
        return [(p,) for p in s.controller.incoming_pkts]

    def guard(s, a):
        pkt = a[0]
        if pkt not in s.controller.incoming_pkts or pkt not in s.net.packets:
            return False
        return len(list(_rules_needed(s, pkt))) <= len(s.controller.entry_pool)

    def action(s, a):
        pkt = a[0]
        c = s.controller
        orders, decided, pool = set(c.orders), set(c.decided), list(c.entry_pool)
        for origin, header, actions in _rules_needed(s, pkt):
            entry = FlowEntry(pool.pop(0), header, (), tuple(actions))
            orders.add(Order(K.Add, origin, entry))
            decided.add((origin, header))
        return _with_ctl(
            s, orders=frozenset(orders), decided=frozenset(decided),
            entry_pool=tuple(pool),
            incoming=frozenset(x for x in c.incoming if x[0] != pkt),
            outgoing=c.outgoing | {pkt},
        )

    return EventDef("ctl_decideRule", (PKT,), bindings, guard, action)


def _send_order(name: str, kind: K, level: Level, branch: bool) -> EventDef:
    def _order(c, sw, entry_id):
        for o in c.orders:
            if o.kind == kind and o.switch == sw and o.entry.id == entry_id:
                return o
        return None

    def bindings(s):
        c = s.controller
        return [(o.switch, o.entry.id, m) for o in c.orders if o.kind == kind
                for m in _fresh(c.msg_pool, branch)]

    def guard(s, a):
        sw, entry_id, msg = a
        c = s.controller
        return _order(c, sw, entry_id) is not None and msg in _fresh(c.msg_pool, branch)

    def action(s, a):
        sw, entry_id, msg = a
        c = s.controller
        o = _order(c, sw, entry_id)
        m = _mint(s, level, msg, kind, entry=o.entry)
        s = _with_ctl(s, orders=c.orders - {o},
                      msg_pool=tuple(x for x in c.msg_pool if x != msg))
        return evolve(s, secure_chan_down=down_add(s.secure_chan_down, m, sw))

    return EventDef(name, (SW, ENTRY, MSG), bindings, guard, action)


def _ask(name: str, kind: K, requests: str, pending: str, level: Level, branch: bool) -> EventDef:
    def bindings(s):
        c = s.controller
        return [(sw, m) for sw in getattr(c, requests) for m in _fresh(c.msg_pool, branch)]

    def guard(s, a):
        sw, msg = a
        c = s.controller
        return (sw in getattr(c, requests) and sw not in getattr(c, pending)
                and msg in _fresh(c.msg_pool, branch))

    def action(s, a):
        sw, msg = a
        c = s.controller
        m = _mint(s, level, msg, kind)
        s = _with_ctl(s, **{
            requests: getattr(c, requests) - {sw},
            pending: getattr(c, pending) | {sw},
            "msg_pool": tuple(x for x in c.msg_pool if x != msg),
        })
        return evolve(s, secure_chan_down=down_add(s.secure_chan_down, m, sw))

    return EventDef(name, (SW, MSG), bindings, guard, action)


def _rcv_reply(name: str, kind: K, pending: str) -> EventDef:
    return _receive_up(name, kind, lambda s, c, m, sw: _with_ctl(
        s, **{pending: getattr(c, pending) - {sw}}))


# ---------------------------------------------------------------------------
# catalogue assembly

_W = {
    "sw_rcv_machingPkt": {DATA, SWITCHES},
    "sw_rcv_unmachingPkt": {DATA, SWITCHES, SW_POOL},
    "sw_sndPk2ctrl": {SWITCHES, UP},
    "sw_sndMsg2ctrl": {SWITCHES, UP},
    "sw_fwdLookup": {SWITCHES},
    "sw_sendPckt2sw": {SWITCHES, DATA, SW_SENT},
    "sw_rcv_Msg": {DOWN, SWITCHES},
    "sw_newFTentry": {SWITCHES},
    "sw_modFTentry": {SWITCHES},
    "sw_delFTentry": {SWITCHES},
    "sw_handlePkOut": {SWITCHES, SW_POOL},
    "sw_barrierRp": {SWITCHES},
    "sw_statusRp": {SWITCHES},
    "ctl_havePacket": {CTL},
    "ctl_emitPkt": {CTL, DOWN, CTL_SENT},
    "ctl_rcvPacketIn": {UP, CTL},
    "ctl_decideRule": {CTL},
    "ctl_sendAdd": {CTL, DOWN},
    "ctl_sendModf": {CTL, DOWN},
    "ctl_sendDel": {CTL, DOWN},
    "ctl_askBarrier": {CTL, DOWN},
    "ctl_rcvBarrierRp": {UP, CTL},
    "ctl_askStatusMsg": {CTL, DOWN},
    "ctl_rcvStatus": {UP, CTL},
}
# rows minting messages write a priority from L2 on
_MINTING = {
    "sw_rcv_unmachingPkt", "sw_handlePkOut", "sw_barrierRp", "sw_statusRp",
    "ctl_emitPkt", "ctl_sendAdd", "ctl_sendModf", "ctl_sendDel",
    "ctl_askBarrier", "ctl_askStatusMsg",
}


def write_set(name: str, level: Level) -> frozenset[str]:
    ws = set(_W[name])
    if level >= Level.L2 and name in _MINTING:
        ws.add(PRIORITY)
    return frozenset(ws)


def _defs(level: Level, branch: bool) -> list[EventDef]:
    return [
        _rcv_matching(level),
        _rcv_unmatching(level),
        _send_up("sw_sndPk2ctrl", frozenset({K.PacketIn})),
        _send_up("sw_sndMsg2ctrl", frozenset({K.BarrierAck, K.StatusRep})),
        _fwd_lookup(level),
        _send_pckt(level),
        _rcv_msg(),
        _new_entry(level),
        _mod_entry(level),
        _del_entry(level),
        _handle_pkout(level),
        _barrier_rp(level),
        _status_rp(level),
        _have_packet(),
        _emit_pkt(level, branch),
        _rcv_packet_in(),
        _decide_rule(),
        _send_order("ctl_sendAdd", K.Add, level, branch),
        _send_order("ctl_sendModf", K.Modf, level, branch),
        _send_order("ctl_sendDel", K.Del, level, branch),
        _ask("ctl_askBarrier", K.Barrier, "barrier_requests", "pending_barrier", level, branch),
        _rcv_reply("ctl_rcvBarrierRp", K.BarrierAck, "pending_barrier"),
        _ask("ctl_askStatusMsg", K.StatusReq, "status_requests", "pending_status", level, branch),
        _rcv_reply("ctl_rcvStatus", K.StatusRep, "pending_status"),
    ]


def enabled_on_switch(state, ev: EventDef, sw: str) -> bool:
    return any(a[0] == sw and ev.guard(state, a) for a in ev.bindings(state))


def strengthen(defs: dict[str, EventDef], order: PriorityOrder) -> dict[str, EventDef]:
    """Guard-strengthened copies: an event on switch ``sw`` is disabled while
    any event above it in ``order`` is enabled on ``sw`` under ``defs``."""
    above = order.above()
    out = dict(defs)
    for name, ev in defs.items():
        higher = [defs[h] for h in sorted(above.get(name, ())) if h in defs]
        if not higher:
            continue

        def guard(s, a, _base=ev.guard, _higher=tuple(higher)):
            if not _base(s, a):
                return False
            return not any(enabled_on_switch(s, h, a[0]) for h in _higher)

        out[name] = replace(ev, guard=guard)
    return out


def _rows(level: Level, defs: dict[str, EventDef]) -> dict[str, CatalogueRow]:
    return {
        name: CatalogueRow(
            event=defs[name],
            family=SWITCH if name.startswith("sw_") else CONTROLLER,
            introduced_at=Level.L0,
            refines=None if level == Level.L0 else name,
            write_set=write_set(name, level),
        )
        for name in EVENT_NAMES
    }


@functools.lru_cache(maxsize=None)
def _catalog(level: Level, branch_fresh: bool) -> tuple:
    base = Level.L2 if level == Level.L3 else level
    defs = {ev.name: ev for ev in _defs(base, branch_fresh)}
    if level == Level.L3:
        defs = strengthen(defs, SHIPPED_ORDER)
    return tuple(_rows(level, defs).items())


def event_catalog(level, branch_fresh: bool = False) -> dict[str, CatalogueRow]:
    """The 24 rows of the global model at ``level``.

    With ``branch_fresh`` the controller branches over every unused message
    id instead of taking the smallest one.
    """
    return dict(_catalog(Level.parse(level), bool(branch_fresh)))


def refines_map(level) -> dict[str, str]:
    level = Level.parse(level)
    if level == Level.L0:
        raise LevelError("L0 is the most abstract level; it refines nothing")
    return {name: row.refines for name, row in event_catalog(level).items()
            if row.refines is not None}

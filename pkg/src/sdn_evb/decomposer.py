"""Splits the global model in two, controller side and switch side, that
interact only through shared variables.

Each component owns its private state, runs its own events on a view in
which the peer's private state is blanked, and sees the peer only through
external events that over-approximate what the peer may do to the shared
variables. Recomposition runs both components' own events on the views
and must give back the global graph.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Optional

from .checker import (
    FAILS, HOLDS, SP_A, SP_B, SP_C, TYPING, InvariantDef, Verdict,
    check_each, explore,
)
from .events import (
    CONTROLLER, CTL, CTL_SENT, DATA, DOWN, MSG, PKT, PRIORITY, SW, SW_POOL,
    SW_SENT, SWITCHES, UP, CatalogueRow, event_catalog,
)
from .kernel import EventDef, Trace, event_def
from .state import (
    ACTIVE, HOST, ControllerState, FlowEntry, GlobalState, Level, Message,
    MessageKind as K, Order, SwitchState, down_add, ms_remove, up_add,
)

SHARED = frozenset({DOWN, UP, DATA, CTL_SENT, SW_SENT})


class PrivateWrite(Exception):
    """An event changed state its component does not own."""


@dataclass(frozen=True)
class ExternalEvent:
    """Stand-in for a peer event: reads the shared variables (and the
    static network), writes only ``write_set``."""

    event: EventDef
    write_set: frozenset[str]
    stands_for: str
    refinable: bool = False


@dataclass(frozen=True)
class Component:
    name: str
    private: frozenset[str]
    shared: frozenset[str]
    own: Mapping[str, CatalogueRow]
    external: Mapping[str, ExternalEvent]
    blank: Callable[[GlobalState], GlobalState] = field(compare=False)
    invariants: tuple[InvariantDef, ...] = ()

    def view(self, state: GlobalState) -> GlobalState:
        return self.blank(state)

    def catalogue(self, with_external: bool = True) -> dict[str, EventDef]:
        out = {name: event_def(row) for name, row in self.own.items()}
        if with_external:
            out.update({name: ext.event for name, ext in self.external.items()})
        return out

    def owned(self) -> frozenset[str]:
        return self.private | self.shared


def _blank_switches(state: GlobalState) -> GlobalState:
    return replace(state, switches=tuple(SwitchState(s.id) for s in state.switches),
                   sw_msg_pool=())


def _blank_controller(state: GlobalState) -> GlobalState:
    return replace(state, controller=ControllerState())


# ---------------------------------------------------------------------------
# over-approximating external events

def _visible_ids(s: GlobalState) -> set[str]:
    return {m.id for _, m in s.all_messages()}


def _first_free(universe: Iterable[str], used: set[str]) -> Optional[str]:
    for x in universe:
        if x not in used:
            return x
    return None


def _mint(s: GlobalState, msg_id: str, kind: K, **payload) -> Message:
    prio = s.net.priority(kind, payload.get("packet")) if s.level >= Level.L2 else None
    return Message(msg_id, kind, priority=prio, **payload)


def _ext(name, sorts, bindings, action, writes, stands_for) -> ExternalEvent:
    """Guard = the arguments are among the current bindings."""
    def guard(s, a):
        return tuple(a) in set(bindings(s))
    return ExternalEvent(EventDef(name, sorts, bindings, guard, action),
                         frozenset(writes), stands_for)


def _reached(s: GlobalState) -> list[tuple[str, str]]:
    """(packet, switch) pairs some packet may have reached."""
    return sorted(s.ctl_sent_pkts | s.sw_sent_pkts)


def _switch_side_events() -> dict[str, ExternalEvent]:
    """What the switches may do, as seen by the controller."""

    def take_data(s):
        return [(sw, p) for p, sw in s.data_chan]

    def drop_data(s, a):
        sw, p = a
        return replace(s, data_chan=ms_remove(s.data_chan, (p, sw)))

    def packet_in_b(s):
        n = _first_free(s.net.sw_msg_ids, _visible_ids(s))
        return [] if n is None else [(sw, n, p) for p, sw in _reached(s)]

    def packet_in(s, a):
        sw, n, p = a
        return replace(s, secure_chan_up=up_add(s.secure_chan_up, _mint(s, n, K.PacketIn, packet=p), sw))

    def reply_b(s):
        # a reply echoes a request id the controller has already spent
        spent = set(s.net.ctl_msg_ids) - set(s.controller.msg_pool) - _visible_ids(s)
        n = next((x for x in s.net.ctl_msg_ids if x in spent), None)
        if n is None:
            return []
        out = []
        for sw in s.net.switch_ids:
            for kind in (K.BarrierAck, K.StatusRep):
                if not any(m.kind == kind and to == sw for m, to in s.secure_chan_up):
                    out.append((sw, kind.value, n))
        return out

    def reply(s, a):
        sw, kind, n = a
        kind = K(kind)
        extra = {"status": ACTIVE} if kind == K.StatusRep else {}
        return replace(s, secure_chan_up=up_add(s.secure_chan_up, _mint(s, n, kind, **extra), sw))

    def hop_b(s):
        out = []
        for p, sw in _reached(s):
            for (src, _), dst in sorted(s.net.ports.items()):
                if src == sw and dst != HOST and (p, dst) not in s.sw_sent_pkts:
                    out.append((sw, p, dst))
        return sorted(set(out))

    def hop(s, a):
        sw, p, dst = a
        return replace(s, data_chan=tuple(sorted(s.data_chan + ((p, dst),))),
                       sw_sent_pkts=s.sw_sent_pkts | {(p, dst)})

    def take_msg_b(s):
        return [(sw, m.id) for m, sw in s.secure_chan_down]

    def take_msg(s, a):
        sw, msg = a
        return replace(s, secure_chan_down=ms_remove(s.secure_chan_down, s.down_msg(msg, sw)))

    return {
        "ext_sw_rcv_machingPkt": _ext("ext_sw_rcv_machingPkt", (SW, PKT), take_data, drop_data,
                                      {DATA}, "sw_rcv_machingPkt"),
        "ext_sw_rcv_unmachingPkt": _ext("ext_sw_rcv_unmachingPkt", (SW, PKT), take_data, drop_data,
                                        {DATA}, "sw_rcv_unmachingPkt"),
        "ext_sw_sndPk2ctrl": _ext("ext_sw_sndPk2ctrl", (SW, MSG, PKT), packet_in_b, packet_in,
                                  {UP, PRIORITY}, "sw_sndPk2ctrl"),
        "ext_sw_sndMsg2ctrl": _ext("ext_sw_sndMsg2ctrl", (SW, "kind", MSG), reply_b, reply,
                                   {UP, PRIORITY}, "sw_sndMsg2ctrl"),
        "ext_sw_sendPckt2sw": _ext("ext_sw_sendPckt2sw", (SW, PKT, SW), hop_b, hop,
                                   {DATA, SW_SENT}, "sw_sendPckt2sw"),
        "ext_sw_rcv_Msg": _ext("ext_sw_rcv_Msg", (SW, MSG), take_msg_b, take_msg,
                               {DOWN}, "sw_rcv_Msg"),
    }


def _pending(s: GlobalState, kind: K, sw: str) -> bool:
    if any(m.kind == kind and to == sw for m, to in s.secure_chan_down):
        return True
    st = s.switch(sw)
    return st is not None and any(m.kind == kind for m in st.incoming)


def _controller_side_events() -> dict[str, ExternalEvent]:
    """What the controller may do, as seen by the switches."""

    def free_ctl(s):
        return _first_free(s.net.ctl_msg_ids, _visible_ids(s))

    def emit_b(s):
        m = free_ctl(s)
        return [] if m is None else [(sw, p, m) for sw in s.net.switch_ids for p in sorted(s.net.packets)]

    def emit(s, a):
        sw, p, m = a
        return replace(s, secure_chan_down=down_add(s.secure_chan_down, _mint(s, m, K.PKOut, packet=p), sw),
                       ctl_sent_pkts=s.ctl_sent_pkts | {(p, sw)})

    def take_up(kind):
        def b(s):
            return [(m.id,) for m, _ in s.secure_chan_up if m.kind == kind]

        def act(s, a):
            return replace(s, secure_chan_up=ms_remove(s.secure_chan_up, s.up_msg(a[0])))
        return b, act

    def candidate_orders(s, kind):
        orders = [o for o in s.net.env_orders if o.kind == kind]
        if kind == K.Add:
            used = {e.id for st in s.switches for e in st.table}
            used |= {m.entry.id for _, m in s.all_messages() if m.entry is not None}
            x = _first_free(s.net.entry_ids, used)
            if x is not None:
                for (sw, header), actions in sorted(s.net.routes.items()):
                    orders.append(Order(K.Add, sw, FlowEntry(x, header, (), tuple(actions))))
        if s.level < Level.L1:
            orders = [Order(o.kind, o.switch, o.entry.stripped()) for o in orders]
        return orders

    def order_events(kind):
        def b(s):
            m = free_ctl(s)
            if m is None:
                return []
            return sorted({(o.switch, o.entry.id, m) for o in candidate_orders(s, kind)})

        def act(s, a):
            sw, eid, m = a
            o = next(o for o in sorted(candidate_orders(s, kind), key=repr)
                     if o.switch == sw and o.entry.id == eid)
            msg = _mint(s, m, kind, entry=o.entry)
            return replace(s, secure_chan_down=down_add(s.secure_chan_down, msg, sw))
        return b, act

    def ask(kind):
        def b(s):
            m = free_ctl(s)
            if m is None:
                return []
            return [(sw, m) for sw in s.net.switch_ids if not _pending(s, kind, sw)]

        def act(s, a):
            sw, m = a
            return replace(s, secure_chan_down=down_add(s.secure_chan_down, _mint(s, m, kind), sw))
        return b, act

    out = {"ext_ctl_emitPkt": _ext("ext_ctl_emitPkt", (SW, PKT, MSG), emit_b, emit,
                                   {DOWN, CTL_SENT, PRIORITY}, "ctl_emitPkt")}
    for name, kind in (("ctl_rcvPacketIn", K.PacketIn), ("ctl_rcvBarrierRp", K.BarrierAck),
                       ("ctl_rcvStatus", K.StatusRep)):
        b, act = take_up(kind)
        out["ext_" + name] = _ext("ext_" + name, (MSG,), b, act, {UP}, name)
    for name, kind in (("ctl_sendAdd", K.Add), ("ctl_sendModf", K.Modf), ("ctl_sendDel", K.Del)):
        b, act = order_events(kind)
        out["ext_" + name] = _ext("ext_" + name, (SW, "entry", MSG), b, act, {DOWN, PRIORITY}, name)
    for name, kind in (("ctl_askBarrier", K.Barrier), ("ctl_askStatusMsg", K.StatusReq)):
        b, act = ask(kind)
        out["ext_" + name] = _ext("ext_" + name, (SW, MSG), b, act, {DOWN, PRIORITY}, name)
    return out


def decompose(level) -> tuple[Component, Component]:
    level = Level.parse(level)
    cat = event_catalog(level)
    ctl = Component(
        name="controller",
        private=frozenset({CTL}),
        shared=SHARED,
        own={n: r for n, r in cat.items() if r.family == CONTROLLER},
        external=_switch_side_events(),
        blank=_blank_switches,
        invariants=(SP_A, SP_C, TYPING),
    )
    sws = Component(
        name="switches",
        private=frozenset({SWITCHES, SW_POOL}),
        shared=SHARED,
        own={n: r for n, r in cat.items() if r.family != CONTROLLER},
        external=_controller_side_events(),
        blank=_blank_controller,
        invariants=(SP_A, SP_B, SP_C, TYPING),
    )
    return ctl, sws


# ---------------------------------------------------------------------------
# checks

def check_write_sets(comp: Component) -> list[str]:
    """Declared write sets of external events that reach private state."""
    out = []
    for name, ext in sorted(comp.external.items()):
        bad = (ext.write_set - {PRIORITY}) - comp.shared
        if bad:
            out.append(f"{name} writes {', '.join(sorted(bad))}, which is not shared")
    return out


def _guarded_external(comp: Component) -> dict[str, EventDef]:
    """Own and external events; external actions that touch private
    fields raise PrivateWrite."""
    cat = comp.catalogue(with_external=False)
    for name, ext in comp.external.items():
        def action(s, a, _ev=ext.event, _name=name):
            t = _ev.action(s, a)
            changed = [f for f in sorted(comp.private) if getattr(t, f) != getattr(s, f)]
            if changed:
                raise PrivateWrite(f"{_name}{tuple(a)} changed {', '.join(changed)}")
            return t
        cat[name] = replace(ext.event, action=action)
    return cat


COMPONENT_DEPTH = 5


def check_component(comp: Component, scenario, level, depth: int = COMPONENT_DEPTH) -> list[Verdict]:
    """Standalone check: the component with its external events, explored
    to ``depth`` from the view of the initial state."""
    level = Level.parse(level)
    out = []
    for problem in check_write_sets(comp):
        out.append(Verdict(FAILS, f"{comp.name}: write set", detail=problem))
    init = comp.view(scenario.initial_state(level))
    try:
        graph = explore(init, level, depth_bound=depth, catalogue=_guarded_external(comp))
    except PrivateWrite as exc:
        return out + [Verdict(FAILS, f"{comp.name}: private state", detail=str(exc))]
    for v in check_each(graph, comp.invariants):
        out.append(replace(v, name=f"{comp.name}: {v.name}"))
    return out


def _product_catalogue(components: Iterable[Component]) -> dict[str, EventDef]:
    """Each own event of each component, run on that component's view and
    merged back: the component's private and shared fields come from the
    view, the peer's private fields are kept."""
    out: dict[str, EventDef] = {}
    for comp in components:
        keep = comp.owned()
        for name, row in comp.own.items():
            ev = event_def(row)

            def bindings(s, _ev=ev, _c=comp):
                return _ev.bindings(_c.view(s))

            def guard(s, a, _ev=ev, _c=comp):
                return _ev.guard(_c.view(s), a)

            def action(s, a, _ev=ev, _c=comp, _keep=keep, _name=name):
                v = _c.view(s)
                t = _ev.action(v, a)
                for f in (CTL, SWITCHES, SW_POOL):
                    if f not in _keep and getattr(t, f) != getattr(v, f):
                        raise PrivateWrite(f"{_name}{tuple(a)} of {_c.name} changed the peer's {f}")
                return replace(s, **{f: getattr(t, f) for f in _keep})

            out[name] = EventDef(name, ev.parameter_sorts, bindings, guard, action)
    return out


def check_recomposition(level, scenario, depth: Optional[int] = None,
                        components: Optional[tuple[Component, ...]] = None,
                        component_depth: int = COMPONENT_DEPTH) -> Verdict:
    """Holds when the product of the components gives exactly the global
    graph (same states, same labelled steps) from the initial state, and
    each component on its own, with its external events, keeps its part
    of the safety suite up to ``component_depth`` steps."""
    level = Level.parse(level)
    components = components or decompose(level)
    name = f"recomposition at {level.name}"
    owners: dict[str, list[str]] = {}
    for comp in components:
        for n in comp.own:
            owners.setdefault(n, []).append(comp.name)
        for problem in check_write_sets(comp):
            return Verdict(FAILS, name, detail=problem)
    missing = set(event_catalog(level)) - set(owners)
    doubled = [n for n, cs in owners.items() if len(cs) > 1]
    if missing or doubled:
        return Verdict(FAILS, name, detail=f"events not partitioned: missing {sorted(missing)}, doubled {sorted(doubled)}")
    init = scenario.initial_state(level)
    glob = explore(init, level, depth_bound=depth)
    try:
        prod = explore(init, level, depth_bound=depth, catalogue=_product_catalogue(components))
    except PrivateWrite as exc:
        return Verdict(FAILS, name, detail=str(exc))
    if set(prod.nodes) != set(glob.nodes):
        return Verdict(FAILS, name, detail=f"product has {len(prod.nodes)} states, global {len(glob.nodes)}")
    ge, pe = glob.edge_set(), prod.edge_set()
    if ge != pe:
        diff = sorted(ge ^ pe, key=lambda e: str(e[1]))[0]
        node = glob.index.get(diff[0])
        trace = glob.trace_to(node) if node is not None else None
        return Verdict(FAILS, name, trace,
                       detail=f"step {diff[1]} is in only one of the graphs")
    for comp in components:
        for v in check_component(comp, scenario, level, component_depth):
            if not v.holds:
                return Verdict(FAILS, name, v.trace, detail=f"{v.name}: {v.detail}")
    return Verdict(HOLDS, name, detail=f"{len(glob.nodes)} states, {len(glob.edges)} steps; "
                                       f"components safe to depth {component_depth}")

"""SDN state space: packets, messages, flow entries, switch and controller
buffers, channels and the ghost history relations.

Every value here is immutable. Per-switch buffers are stored on the switch;
folding them back together gives the global relations (``swIPk``,
``swOPk`` ...) used by the invariants and the LTL state predicates.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Optional

HOST = "host"

L1_FIELDS = (
    "macSrc", "macDst", "ipSrc", "ipDst", "ipProto",
    "tpSrc", "tpDst", "tpSrcPt", "tpDstPt",
)

ACTIVE = "Active"
INACTIVE = "Inactive"
SW_STATES = (ACTIVE, INACTIVE)

MAX_PRIORITY = 7


class Level(enum.IntEnum):
    L0 = 0
    L1 = 1
    L2 = 2
    L3 = 3

    @classmethod
    def parse(cls, text: "str | Level") -> "Level":
        if isinstance(text, Level):
            return text
        if isinstance(text, int) or str(text).isdigit():
            text = f"L{int(text)}"
        try:
            return cls[str(text).upper()]
        except KeyError:
            raise ValueError(f"unknown refinement level {text!r}") from None


class MessageKind(str, enum.Enum):
    PKOut = "PKOut"
    PacketIn = "PacketIn"
    Add = "Add"
    Modf = "Modf"
    Del = "Del"
    Barrier = "Barrier"
    BarrierAck = "BarrierAck"
    StatusReq = "StatusReq"
    StatusRep = "StatusRep"


PACKET_KINDS = frozenset({MessageKind.PKOut, MessageKind.PacketIn})
ENTRY_KINDS = frozenset({MessageKind.Add, MessageKind.Modf, MessageKind.Del})


def evolve(obj, **changes):
    """``dataclasses.replace`` without re-running ``__init__``; the records
    here have no post-init logic, and a cached hash is dropped."""
    new = object.__new__(type(obj))
    d = new.__dict__
    d.update(obj.__dict__)
    d.update(changes)
    if "_hash" in d:
        d["_hash"] = None
    return new


@dataclass(frozen=True)
class Packet:
    id: str
    header: str
    fields: tuple[tuple[str, str], ...] = ()
    priority: Optional[int] = None

    def field(self, name: str) -> Optional[str]:
        for key, value in self.fields:
            if key == name:
                return value
        return None


@dataclass(frozen=True)
class FlowEntry:
    id: str
    header: str
    # non-wildcard L1 match fields; an absent field matches anything
    match: tuple[tuple[str, str], ...] = ()
    actions: tuple[str, ...] = ()

    def stripped(self) -> "FlowEntry":
        return replace(self, match=()) if self.match else self


@dataclass(frozen=True)
class Message:
    id: str
    kind: MessageKind
    packet: Optional[str] = None
    entry: Optional[FlowEntry] = None
    priority: Optional[int] = None
    status: Optional[str] = None


@dataclass(frozen=True)
class Order:
    """A control order queued at the controller, waiting for ctl_send*."""

    kind: MessageKind
    switch: str
    entry: FlowEntry


@dataclass(frozen=True)
class SwitchState:
    id: str
    status: str = ACTIVE
    table: tuple[FlowEntry, ...] = ()
    incoming: frozenset[Message] = frozenset()
    # (packet, matched entry): the entry is kept so forwarding never re-matches
    ipk: frozenset[tuple[str, FlowEntry]] = frozenset()
    omsg: frozenset[Message] = frozenset()
    # (packet, destination switch), used up to L0
    opk: frozenset[tuple[str, str]] = frozenset()
    # port -> packets, used from L1 on; empty queues are dropped
    queues: tuple[tuple[str, frozenset[str]], ...] = ()

    def entry(self, entry_id: str) -> Optional[FlowEntry]:
        for e in self.table:
            if e.id == entry_id:
                return e
        return None

    def incoming_msg(self, msg_id: str) -> Optional[Message]:
        for m in self.incoming:
            if m.id == msg_id:
                return m
        return None

    def outgoing_msg(self, msg_id: str) -> Optional[Message]:
        for m in self.omsg:
            if m.id == msg_id:
                return m
        return None

    def queue(self, port: str) -> frozenset[str]:
        for p, pkts in self.queues:
            if p == port:
                return pkts
        return frozenset()

    def with_queue(self, port: str, pkts: frozenset[str]) -> "SwitchState":
        rest = {p: q for p, q in self.queues if p != port}
        if pkts:
            rest[port] = pkts
        return evolve(self, queues=tuple(sorted(rest.items())))

    def outgoing_packets(self) -> set[str]:
        out = {p for p, _ in self.opk}
        for _, pkts in self.queues:
            out |= pkts
        return out


@dataclass(frozen=True)
class ControllerState:
    env_packets: frozenset[str] = frozenset()
    incoming: frozenset[tuple[str, str]] = frozenset()  # (packet, origin switch)
    outgoing: frozenset[str] = frozenset()
    orders: frozenset[Order] = frozenset()
    decided: frozenset[tuple[str, str]] = frozenset()  # (switch, header)
    pending_barrier: frozenset[str] = frozenset()
    pending_status: frozenset[str] = frozenset()
    barrier_requests: frozenset[str] = frozenset()
    status_requests: frozenset[str] = frozenset()
    msg_pool: tuple[str, ...] = ()
    entry_pool: tuple[str, ...] = ()

    @property
    def incoming_pkts(self) -> frozenset[str]:
        return frozenset(p for p, _ in self.incoming)


@dataclass(eq=False, frozen=True)
class Network:
    """Static context of a scenario: everything events read but never write."""

    switch_ids: tuple[str, ...]
    packets: Mapping[str, Packet]
    ports: Mapping[tuple[str, str], str]
    routes: Mapping[tuple[str, str], tuple[str, ...]] = field(default_factory=dict)
    priorities: Mapping[str, int] = field(default_factory=dict)
    ctl_msg_ids: tuple[str, ...] = ()
    sw_msg_ids: tuple[str, ...] = ()
    entry_ids: tuple[str, ...] = ()
    env_orders: tuple[Order, ...] = ()

    def target(self, sw: str, port: str) -> Optional[str]:
        return self.ports.get((sw, port))

    def port_towards(self, sw: str, dst: str) -> Optional[str]:
        for (s, port), target in self.ports.items():
            if s == sw and target == dst:
                return port
        return None

    def priority(self, kind: MessageKind, packet: Optional[str] = None) -> int:
        if packet is not None:
            pk = self.packets.get(packet)
            if pk is not None and pk.priority is not None:
                return pk.priority
        return self.priorities.get(kind.value, 0)


def _msg_key(pair):
    return (pair[0].id, pair[1])


@dataclass(frozen=True)
class GlobalState:
    net: Network = field(compare=False, repr=False)
    switches: tuple[SwitchState, ...]
    controller: ControllerState
    secure_chan_down: tuple[tuple[Message, str], ...] = ()
    secure_chan_up: tuple[tuple[Message, str], ...] = ()
    data_chan: tuple[tuple[str, str], ...] = ()
    ctl_sent_pkts: frozenset[tuple[str, str]] = frozenset()
    sw_sent_pkts: frozenset[tuple[str, str]] = frozenset()
    sw_msg_pool: tuple[str, ...] = ()
    level: Level = field(default=Level.L0, compare=False)
    _hash: Optional[int] = field(default=None, compare=False, repr=False, init=False)

    def __hash__(self) -> int:
        h = self._hash
        if h is None:
            h = hash((
                self.switches, self.controller, self.secure_chan_down,
                self.secure_chan_up, self.data_chan, self.ctl_sent_pkts,
                self.sw_sent_pkts, self.sw_msg_pool,
            ))
            object.__setattr__(self, "_hash", h)
        return h

    # -- switch access ---------------------------------------------------
    def switch(self, sw: str) -> Optional[SwitchState]:
        for s in self.switches:
            if s.id == sw:
                return s
        return None

    def with_switch(self, new: SwitchState, **changes) -> "GlobalState":
        switches = tuple(new if s.id == new.id else s for s in self.switches)
        return evolve(self, switches=switches, **changes)

    # -- channel helpers (channels are multisets kept as sorted tuples) ----
    def down_msg(self, msg_id: str, sw: Optional[str] = None) -> Optional[tuple[Message, str]]:
        return _find_msg(self.secure_chan_down, msg_id, sw)

    def up_msg(self, msg_id: str, sw: Optional[str] = None) -> Optional[tuple[Message, str]]:
        return _find_msg(self.secure_chan_up, msg_id, sw)

    # -- folded global relations -----------------------------------------
    def sw_ipk(self) -> set[tuple[str, str]]:
        return {(p, s.id) for s in self.switches for p, _ in s.ipk}

    def sw_opk(self) -> set[tuple[str, str]]:
        """swOPk as (packet, switch) pairs, whichever level stores it."""
        return {(p, s.id) for s in self.switches for p in s.outgoing_packets()}

    def sw_incoming_msgs(self) -> set[str]:
        return {m.id for s in self.switches for m in s.incoming}

    def sw_outgoing_msgs(self) -> set[str]:
        return {m.id for s in self.switches for m in s.omsg}

    def all_messages(self) -> Iterator[tuple[str, Message]]:
        """Every message in flight or buffered, tagged with its location."""
        for m, sw in self.secure_chan_down:
            yield f"secure_chan_down[{sw}]", m
        for m, sw in self.secure_chan_up:
            yield f"secure_chan_up[{sw}]", m
        for s in self.switches:
            for m in s.incoming:
                yield f"swIncomingMsg[{s.id}]", m
            for m in s.omsg:
                yield f"swOMsg[{s.id}]", m

    def message_store(self) -> dict[str, Message]:
        return {m.id: m for _, m in self.all_messages()}

    def find_message(self, msg_id: str) -> Optional[Message]:
        for _, m in self.all_messages():
            if m.id == msg_id:
                return m
        return None


def _find_msg(chan, msg_id, sw):
    for m, target in chan:
        if m.id == msg_id and (sw is None or target == sw):
            return m, target
    return None


def ms_add(chan: tuple, item, key=None) -> tuple:
    return tuple(sorted(chan + (item,), key=key))


def ms_remove(chan: tuple, item) -> tuple:
    items = list(chan)
    items.remove(item)
    return tuple(items)


def down_add(chan, msg: Message, sw: str):
    return ms_add(chan, (msg, sw), key=_msg_key)


up_add = down_add


# ---------------------------------------------------------------------------
# matching

def match_entry(sw: SwitchState, pkt: Packet, level: Level) -> Optional[FlowEntry]:
    """Lowest-id entry of ``sw`` matching ``pkt`` at ``level``, or None."""
    best = None
    for e in sw.table:
        if e.header != pkt.header:
            continue
        if level >= Level.L1 and any(pkt.field(k) != v for k, v in e.match):
            continue
        if best is None or e.id < best.id:
            best = e
    return best


# ---------------------------------------------------------------------------
# typing invariants

@dataclass(frozen=True)
class Violation:
    invariant: str
    ids: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.invariant}: {', '.join(self.ids)}"


def _packet_refs(state: GlobalState) -> Iterable[tuple[str, str]]:
    for p, _ in state.data_chan:
        yield "dataChan", p
    for p, _ in state.ctl_sent_pkts | state.sw_sent_pkts:
        yield "ghost", p
    ctl = state.controller
    for p in ctl.env_packets | ctl.outgoing | ctl.incoming_pkts:
        yield "controller", p
    for s in state.switches:
        for p, _ in s.ipk:
            yield f"swIPk[{s.id}]", p
        for p in s.outgoing_packets():
            yield f"swOPk[{s.id}]", p
    for where, m in state.all_messages():
        if m.packet is not None:
            yield f"{where}/{m.id}", m.packet


def typing_invariants(state: GlobalState) -> list[Violation]:
    """All violated typing invariants of ``state``; empty when well-typed."""
    net = state.net
    level = state.level
    out: list[Violation] = []
    switch_ids = set(net.switch_ids)

    # store closure
    for where, p in _packet_refs(state):
        if p not in net.packets:
            out.append(Violation("store-closure: packet resolves in packetStore", (where, p)))
    refs = [sw for _, sw in state.data_chan]
    refs += [sw for _, sw in state.secure_chan_down + state.secure_chan_up]
    refs += [sw for _, sw in state.ctl_sent_pkts | state.sw_sent_pkts]
    for sw in refs:
        if sw not in switch_ids:
            out.append(Violation("store-closure: switch is declared", (sw,)))

    # one message per id across all locations
    seen: dict[str, str] = {}
    for where, m in state.all_messages():
        if m.id in seen:
            out.append(Violation("messageStore is functional", (m.id, seen[m.id], where)))
        seen[m.id] = where
        if m.kind in PACKET_KINDS and m.packet is None:
            out.append(Violation("mesgPk defined for PKOut/PacketIn", (m.id,)))
        if m.kind in ENTRY_KINDS and m.entry is None:
            out.append(Violation("entry payload defined for Add/Modf/Del", (m.id,)))
        if m.priority is not None and not 0 <= m.priority <= MAX_PRIORITY:
            out.append(Violation("msgPriority in MSG_PRIORITY", (m.id,)))
    if level >= Level.L2:
        for m, _ in state.secure_chan_down + state.secure_chan_up:
            if m.priority is None:
                out.append(Violation("msgPriority defined for channel messages", (m.id,)))

    # dom(swStatus) = switches
    present = [s.id for s in state.switches]
    if sorted(present) != sorted(switch_ids):
        out.append(Violation("dom(swStatus) = switches", tuple(sorted(set(present) ^ switch_ids))))
    owner: dict[str, str] = {}
    for s in state.switches:
        if s.status not in SW_STATES:
            out.append(Violation("swStatus in SW_STATE", (s.id, str(s.status))))
        ids = [e.id for e in s.table]
        if len(ids) != len(set(ids)):
            out.append(Violation("flowTable is a function", (s.id,)))
        for eid in ids:
            if eid in owner and owner[eid] != s.id:
                out.append(Violation("entry owned by one switch", (eid, owner[eid], s.id)))
            owner[eid] = s.id
        if level >= Level.L1:
            for e in s.table:
                if not e.actions:
                    out.append(Violation("dom(actions) = dom(flowTable)", (s.id, e.id)))
        inp = {p for p, _ in s.ipk}
        outp = s.outgoing_packets()
        if inp & outp:
            out.append(Violation("switch buffers are disjoint", (s.id, *sorted(inp & outp))))
        if level < Level.L1 and s.queues:
            out.append(Violation("actionsQueues absent before L1", (s.id,)))
        if level >= Level.L1 and s.opk:
            out.append(Violation("swOPk refined into actionsQueues", (s.id,)))
    return out

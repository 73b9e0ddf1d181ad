"""Scenario files: a TOML description of one finite SDN instance.

Sections: ``[run]``, ``[pools]``, ``[environment]``, ``[priorities]`` and
the arrays ``[[switches]]``, ``[[entries]]``, ``[[packets]]``,
``[[routes]]``, ``[[orders]]``. See ``scenarios/s1.toml``.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .state import (
    HOST, L1_FIELDS, MAX_PRIORITY, SW_STATES, ControllerState, FlowEntry,
    GlobalState, Level, MessageKind, Network, Order, Packet, SwitchState,
    typing_invariants,
)


class ScenarioError(Exception):
    pass


class ParseError(ScenarioError):
    pass


class ValidationError(ScenarioError):
    pass


@dataclass(frozen=True)
class SwitchDecl:
    id: str
    status: str
    ports: dict[str, str]


@dataclass(frozen=True)
class EntryDecl:
    switch: str
    entry: FlowEntry


@dataclass(frozen=True)
class RunConfig:
    level: Level = Level.L0
    depth: Optional[int] = None
    branch: Optional[int] = None
    policy: str = "seeded"
    seed: int = 0
    max_steps: int = 200


@dataclass(frozen=True)
class Scenario:
    name: str
    switches: tuple[SwitchDecl, ...]
    entries: tuple[EntryDecl, ...]
    packets: tuple[Packet, ...]
    routes: dict[tuple[str, str], tuple[str, ...]] = field(default_factory=dict)
    env_packets: tuple[str, ...] = ()
    barrier_requests: tuple[str, ...] = ()
    status_requests: tuple[str, ...] = ()
    orders: tuple[Order, ...] = ()
    ctl_messages: int = 4
    sw_messages: int = 4
    entry_ids: tuple[str, ...] = ()
    priorities: dict[str, int] = field(default_factory=dict)
    run: RunConfig = RunConfig()

    def network(self) -> Network:
        ports = {(s.id, p): t for s in self.switches for p, t in s.ports.items()}
        return Network(
            switch_ids=tuple(s.id for s in self.switches),
            packets={p.id: p for p in self.packets},
            ports=ports,
            routes=dict(self.routes),
            priorities=dict(self.priorities),
            ctl_msg_ids=tuple(f"m{i}" for i in range(1, self.ctl_messages + 1)),
            sw_msg_ids=tuple(f"n{i}" for i in range(1, self.sw_messages + 1)),
            entry_ids=self.entry_ids,
            env_orders=self.orders,
        )

    def initial_state(self, level=None, net: Optional[Network] = None) -> GlobalState:
        level = self.run.level if level is None else Level.parse(level)
        net = net or self.network()

        def shape(e: FlowEntry) -> FlowEntry:
            return e if level >= Level.L1 else e.stripped()

        switches = []
        for s in self.switches:
            table = sorted((shape(d.entry) for d in self.entries if d.switch == s.id),
                           key=lambda e: e.id)
            switches.append(SwitchState(s.id, s.status, tuple(table)))
        orders = frozenset(Order(o.kind, o.switch, shape(o.entry)) for o in self.orders)
        controller = ControllerState(
            env_packets=frozenset(self.env_packets),
            orders=orders,
            barrier_requests=frozenset(self.barrier_requests),
            status_requests=frozenset(self.status_requests),
            msg_pool=net.ctl_msg_ids,
            entry_pool=self.entry_ids,
        )
        return GlobalState(net=net, switches=tuple(switches), controller=controller,
                           sw_msg_pool=net.sw_msg_ids, level=level)


# ---------------------------------------------------------------------------
# loading

def _str(value: Any, where: str) -> str:
    if not isinstance(value, (str, int)) or isinstance(value, bool):
        raise ValidationError(f"{where}: expected an identifier, got {value!r}")
    return str(value)


def _nat(value: Any, where: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise ValidationError(f"{where}: expected a non-negative integer, got {value!r}")
    return value


def _fields(raw: dict, where: str) -> tuple[tuple[str, str], ...]:
    out = []
    for k, v in raw.items():
        if k not in L1_FIELDS:
            raise ValidationError(f"{where}: unknown header field {k!r}")
        out.append((k, _str(v, f"{where}.{k}")))
    return tuple(sorted(out))


def _entry(raw: dict, where: str) -> FlowEntry:
    try:
        return FlowEntry(
            id=_str(raw["id"], f"{where}.id"),
            header=_str(raw.get("header", ""), f"{where}.header"),
            match=_fields(raw.get("match", {}), f"{where}.match"),
            actions=tuple(sorted(_str(a, f"{where}.actions") for a in raw.get("actions", []))),
        )
    except KeyError as exc:
        raise ValidationError(f"{where}: missing key {exc}") from None


def scenario_from_dict(doc: dict, name: str = "scenario") -> Scenario:
    run = doc.get("run", {})
    pools = doc.get("pools", {})
    env = doc.get("environment", {})
    try:
        level = Level.parse(run.get("level", "L0"))
    except ValueError as exc:
        raise ValidationError(f"run.level: {exc}") from None
    cfg = RunConfig(
        level=level,
        depth=run.get("depth"),
        branch=run.get("branch"),
        policy=str(run.get("policy", "seeded")),
        seed=_nat(run.get("seed", 0), "run.seed"),
        max_steps=_nat(run.get("max_steps", 200), "run.max_steps"),
    )

    switches = []
    for i, raw in enumerate(doc.get("switches", [])):
        where = f"switches[{i}]"
        if "id" not in raw:
            raise ValidationError(f"{where}: missing id")
        ports = {_str(p, f"{where}.ports"): _str(t, f"{where}.ports.{p}")
                 for p, t in raw.get("ports", {}).items()}
        switches.append(SwitchDecl(_str(raw["id"], f"{where}.id"),
                                   str(raw.get("status", "Active")), ports))

    entries = []
    for i, raw in enumerate(doc.get("entries", [])):
        where = f"entries[{i}]"
        if "switch" not in raw:
            raise ValidationError(f"{where}: missing switch")
        entries.append(EntryDecl(_str(raw["switch"], f"{where}.switch"), _entry(raw, where)))

    packets = []
    for i, raw in enumerate(doc.get("packets", [])):
        where = f"packets[{i}]"
        if "id" not in raw or "header" not in raw:
            raise ValidationError(f"{where}: packets need id and header")
        prio = raw.get("priority")
        packets.append(Packet(_str(raw["id"], f"{where}.id"), _str(raw["header"], f"{where}.header"),
                              _fields(raw.get("fields", {}), f"{where}.fields"),
                              None if prio is None else _nat(prio, f"{where}.priority")))

    routes = {}
    for i, raw in enumerate(doc.get("routes", [])):
        where = f"routes[{i}]"
        key = (_str(raw.get("switch"), f"{where}.switch"), _str(raw.get("header"), f"{where}.header"))
        routes[key] = tuple(sorted(_str(a, f"{where}.actions") for a in raw.get("actions", [])))

    orders = []
    for i, raw in enumerate(doc.get("orders", [])):
        where = f"orders[{i}]"
        try:
            kind = MessageKind(raw.get("kind"))
        except ValueError:
            raise ValidationError(f"{where}: kind must be Add, Modf or Del") from None
        if kind not in (MessageKind.Add, MessageKind.Modf, MessageKind.Del):
            raise ValidationError(f"{where}: kind must be Add, Modf or Del")
        orders.append(Order(kind, _str(raw.get("switch"), f"{where}.switch"), _entry(raw, where)))

    n_entries = _nat(pools.get("entries", 0), "pools.entries")
    declared = {d.entry.id for d in entries} | {o.entry.id for o in orders}
    entry_ids = []
    i = 1
    while len(entry_ids) < n_entries:
        if f"x{i}" not in declared:
            entry_ids.append(f"x{i}")
        i += 1

    priorities = {}
    for k, v in doc.get("priorities", {}).items():
        try:
            MessageKind(k)
        except ValueError:
            raise ValidationError(f"priorities: unknown message kind {k!r}") from None
        priorities[k] = _nat(v, f"priorities.{k}")

    return Scenario(
        name=str(doc.get("name", name)),
        switches=tuple(switches),
        entries=tuple(entries),
        packets=tuple(packets),
        routes=routes,
        env_packets=tuple(_str(p, "environment.packets") for p in env.get("packets", [])),
        barrier_requests=tuple(_str(s, "environment.barrier") for s in env.get("barrier", [])),
        status_requests=tuple(_str(s, "environment.status") for s in env.get("status", [])),
        orders=tuple(orders),
        ctl_messages=_nat(pools.get("controller_messages", 4), "pools.controller_messages"),
        sw_messages=_nat(pools.get("switch_messages", 4), "pools.switch_messages"),
        entry_ids=tuple(entry_ids),
        priorities=priorities,
        run=cfg,
    )


def validate(sc: Scenario) -> None:
    """Raise ValidationError naming the first broken rule."""
    sw_ids = [s.id for s in sc.switches]
    if len(set(sw_ids)) != len(sw_ids):
        raise ValidationError("switch ids must be unique")
    known = set(sw_ids)
    for s in sc.switches:
        if s.status not in SW_STATES:
            raise ValidationError(f"switch {s.id}: status must be one of {SW_STATES}")
        neighbours = [t for t in s.ports.values() if t != HOST]
        for t in neighbours:
            if t not in known:
                raise ValidationError(f"switch {s.id}: port targets undeclared switch {t}")
        if len(set(neighbours)) != len(neighbours):
            raise ValidationError(f"switch {s.id}: at most one port per neighbour")
    pkt_ids = [p.id for p in sc.packets]
    if len(set(pkt_ids)) != len(pkt_ids):
        raise ValidationError("packet ids must be unique")
    for p in sc.packets:
        if p.priority is not None and p.priority > MAX_PRIORITY:
            raise ValidationError(f"packet {p.id}: priority above {MAX_PRIORITY}")
    for k, v in sc.priorities.items():
        if v > MAX_PRIORITY:
            raise ValidationError(f"priorities.{k}: above {MAX_PRIORITY}")

    def check_actions(sw, actions, where):
        ports = next(s.ports for s in sc.switches if s.id == sw)
        for a in actions:
            if a not in ports:
                raise ValidationError(f"{where}: switch {sw} has no port {a}")
        targets = [ports[a] for a in actions if ports[a] != HOST]
        if len(set(targets)) != len(targets):
            raise ValidationError(f"{where}: two actions lead to the same switch")

    entry_ids = [d.entry.id for d in sc.entries]
    if len(set(entry_ids)) != len(entry_ids):
        raise ValidationError("entry ids must be unique across switches")
    for d in sc.entries:
        if d.switch not in known:
            raise ValidationError(f"entry {d.entry.id}: undeclared switch {d.switch}")
        check_actions(d.switch, d.entry.actions, f"entry {d.entry.id}")
    for (sw, header), actions in sc.routes.items():
        if sw not in known:
            raise ValidationError(f"route ({sw}, {header}): undeclared switch {sw}")
        if not actions:
            raise ValidationError(f"route ({sw}, {header}): needs at least one action")
        check_actions(sw, actions, f"route ({sw}, {header})")
    for o in sc.orders:
        if o.switch not in known:
            raise ValidationError(f"order {o.kind.value} {o.entry.id}: undeclared switch {o.switch}")
        check_actions(o.switch, o.entry.actions, f"order {o.entry.id}")
    for p in sc.env_packets:
        if p not in pkt_ids:
            raise ValidationError(f"environment.packets: undeclared packet {p}")
    for sw in sc.barrier_requests + sc.status_requests:
        if sw not in known:
            raise ValidationError(f"environment: undeclared switch {sw}")
    for level in Level:
        violations = typing_invariants(sc.initial_state(level))
        if violations:
            raise ValidationError(f"initial state at {level.name} breaks {violations[0]}")


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    sc = scenario_from_dict(doc, name=path.stem)
    validate(sc)
    return sc


def shipped(name: str) -> Scenario:
    """One of the scenarios bundled with the package (``s0``, ``s1``, ``s2`` ...)."""
    ref = resources.files("sdn_evb") / "scenarios" / f"{name}.toml"
    with resources.as_file(ref) as path:
        return load_scenario(path)


def shipped_path(name: str) -> Path:
    return Path(str(resources.files("sdn_evb") / "scenarios" / f"{name}.toml"))

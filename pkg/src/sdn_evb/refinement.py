"""Projection of concrete states onto more abstract levels and the
forward-simulation check between two levels."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Mapping, Optional

from .checker import FAILS, HOLDS, Verdict, explore
from .events import event_catalog
from .kernel import Trace, event_def
from .state import GlobalState, Level, Message, Order, SwitchState


class LevelMismatch(Exception):
    pass


def _strip_priority(m: Message) -> Message:
    return replace(m, priority=None) if m.priority is not None else m


def _strip_match(m: Message) -> Message:
    return replace(m, entry=m.entry.stripped()) if m.entry is not None else m


def _map_messages(state: GlobalState, f: Callable[[Message], Message], sw_extra=None) -> GlobalState:
    switches = []
    for s in state.switches:
        s = replace(s, incoming=frozenset(map(f, s.incoming)), omsg=frozenset(map(f, s.omsg)))
        if sw_extra is not None:
            s = sw_extra(state, s)
        switches.append(s)
    return replace(
        state,
        switches=tuple(switches),
        secure_chan_down=tuple(sorted(((f(m), sw) for m, sw in state.secure_chan_down),
                                      key=lambda p: (p[0].id, p[1]))),
        secure_chan_up=tuple(sorted(((f(m), sw) for m, sw in state.secure_chan_up),
                                    key=lambda p: (p[0].id, p[1]))),
    )


def _l3_to_l2(state: GlobalState) -> GlobalState:
    return replace(state, level=Level.L2)


def _l2_to_l1(state: GlobalState) -> GlobalState:
    return replace(_map_messages(state, _strip_priority), level=Level.L1)


def _switch_to_l0(state: GlobalState, s: SwitchState) -> SwitchState:
    opk = set(s.opk)
    for port, pkts in s.queues:
        target = state.net.target(s.id, port)
        opk |= {(p, target) for p in pkts}
    return replace(
        s,
        table=tuple(e.stripped() for e in s.table),
        ipk=frozenset((p, e.stripped() if e is not None else None) for p, e in s.ipk),
        opk=frozenset(opk),
        queues=(),
    )


def _l1_to_l0(state: GlobalState) -> GlobalState:
    state = _map_messages(state, _strip_match, _switch_to_l0)
    c = state.controller
    orders = frozenset(Order(o.kind, o.switch, o.entry.stripped()) for o in c.orders)
    return replace(state, controller=replace(c, orders=orders), level=Level.L0)


@dataclass(frozen=True)
class ProjectionMap:
    """Maps states of ``source`` onto states of ``target`` (one level down
    per step, composed for larger gaps)."""

    source: Level
    target: Level

    def __post_init__(self):
        if self.target > self.source:
            raise LevelMismatch(f"cannot project {self.source.name} onto the more concrete {self.target.name}")

    def __call__(self, state: GlobalState) -> GlobalState:
        return project_state(state, self.source, self.target)


_STEPS = {Level.L3: _l3_to_l2, Level.L2: _l2_to_l1, Level.L1: _l1_to_l0}


def project_state(state: GlobalState, source, target) -> GlobalState:
    source, target = Level.parse(source), Level.parse(target)
    if target > source:
        raise LevelMismatch(f"cannot project {source.name} onto the more concrete {target.name}")
    level = source
    while level > target:
        state = _STEPS[level](state)
        level = Level(level - 1)
    return state


def project_trace(trace: Trace, source, target) -> Trace:
    source = Level.parse(source)
    if trace.initial.level != source:
        raise LevelMismatch(f"trace is at {trace.initial.level.name}, not {source.name}")
    return Trace(project_state(trace.initial, source, target),
                 tuple((inst, project_state(s, source, target)) for inst, s in trace.steps))


def check_refinement(source, target, scenario, depth: Optional[int] = None,
                     concrete_catalogue: Optional[Mapping] = None,
                     abstract_catalogue: Optional[Mapping] = None,
                     workers: Optional[int] = None) -> Verdict:
    """Forward simulation of ``target`` by ``source`` through the projection.

    The concrete graph is explored up to ``depth``. The projected initial
    state must be the abstract initial state; every concrete step must be
    enabled in the abstract model at the projected source state (each event
    refines the abstract event of the same name) and must land on the
    projection of the concrete successor. The first failing step is
    reported with the concrete trace leading to it.
    """
    source, target = Level.parse(source), Level.parse(target)
    if target >= source:
        raise LevelMismatch(f"{source.name} does not refine {target.name}")
    name = f"{source.name} refines {target.name}"
    conc = concrete_catalogue if concrete_catalogue is not None else event_catalog(source)
    abst = abstract_catalogue if abstract_catalogue is not None else event_catalog(target)
    init_c = scenario.initial_state(source)
    init_a = scenario.initial_state(target, net=init_c.net)
    proj = ProjectionMap(source, target)
    if proj(init_c) != init_a:
        return Verdict(FAILS, name, Trace(init_c, ()), detail="initial states do not correspond")
    graph = explore(init_c, source, depth_bound=depth, catalogue=conc, workers=workers)
    projected = [proj(s) for s in graph.nodes]
    for src, inst, dst in graph.edges:
        ev = abst.get(inst.name)
        a_src = projected[src]
        problem = None
        if ev is None:
            problem = f"{inst.name} has no abstract counterpart"
        elif not event_def(ev).guard(a_src, inst.args):
            problem = f"abstract guard of {inst} is false at the projected state"
        elif event_def(ev).action(a_src, inst.args) != projected[dst]:
            problem = f"abstract effect of {inst} differs from the projected successor"
        if problem:
            steps = graph.trace_to(src).steps + ((inst, graph.nodes[dst]),)
            return Verdict(FAILS, name, Trace(graph.nodes[0], steps), detail=problem)
    detail = f"{len(graph.edges)} steps over {len(graph.nodes)} states"
    if graph.truncated:
        detail += f", explored to depth {depth}"
    return Verdict(HOLDS, name, detail=detail)

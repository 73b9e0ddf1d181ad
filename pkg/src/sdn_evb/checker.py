"""Bounded explicit-state exploration and safety checking."""
from __future__ import annotations

import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

from .events import event_catalog
from .kernel import EventInstance, Trace, enabled_instances, event_def
from .state import GlobalState, Level, typing_invariants

WORKERS_ENV = "SDN_EVB_WORKERS"

HOLDS = "Holds"
FAILS = "Fails"
BOUND_EXCEEDED = "BoundExceeded"


class InvariantViolationAtInit(Exception):
    pass


@dataclass(frozen=True)
class Verdict:
    outcome: str
    name: str = ""
    trace: Optional[Trace] = None
    # index into trace.steps where the repeated cycle starts (lasso runs)
    loop_start: Optional[int] = None
    detail: str = ""

    @property
    def holds(self) -> bool:
        return self.outcome == HOLDS

    def __str__(self) -> str:
        text = f"{self.name}: {self.outcome}" if self.name else self.outcome
        return f"{text} ({self.detail})" if self.detail else text


@dataclass(frozen=True)
class InvariantDef:
    name: str
    predicate: Callable[[GlobalState], bool]


@dataclass
class StateGraph:
    nodes: list = field(default_factory=list)
    index: dict = field(default_factory=dict)
    edges: list[tuple[int, EventInstance, int]] = field(default_factory=list)
    out: list[list[int]] = field(default_factory=list)  # node -> edge ids
    parent: list[Optional[int]] = field(default_factory=list)  # node -> edge id
    depth: list[int] = field(default_factory=list)
    truncated: set[int] = field(default_factory=set)
    level: Level = Level.L0

    @property
    def initial(self):
        return self.nodes[0]

    def add_node(self, state, parent_edge: Optional[int], depth: int) -> tuple[int, bool]:
        idx = self.index.get(state)
        if idx is not None:
            return idx, False
        idx = len(self.nodes)
        self.nodes.append(state)
        self.index[state] = idx
        self.out.append([])
        self.parent.append(parent_edge)
        self.depth.append(depth)
        return idx, True

    def add_edge(self, src: int, inst: EventInstance, dst: int) -> int:
        eid = len(self.edges)
        self.edges.append((src, inst, dst))
        self.out[src].append(eid)
        return eid

    def terminal(self) -> list[int]:
        return [i for i in range(len(self.nodes)) if not self.out[i] and i not in self.truncated]

    def edge_set(self) -> set[tuple]:
        return {(self.nodes[a], inst, self.nodes[b]) for a, inst, b in self.edges}

    def trace_to(self, node: int) -> Trace:
        """Shortest trace from the initial state (BFS parents)."""
        steps = []
        while self.parent[node] is not None:
            src, inst, dst = self.edges[self.parent[node]]
            steps.append((inst, self.nodes[dst]))
            node = src
        steps.reverse()
        return Trace(self.nodes[0], tuple(steps))

    @classmethod
    def from_trace(cls, trace: Trace, complete: bool = True) -> "StateGraph":
        """A linear graph, one node per position, for checking a single run.
        ``complete`` says whether the run ended in deadlock."""
        g = cls(level=getattr(trace.initial, "level", Level.L0))
        prev, _ = g._append(trace.initial, None, 0)
        for i, (inst, state) in enumerate(trace.steps):
            cur, _ = g._append(state, None, i + 1)
            g.parent[cur] = g.add_edge(prev, inst, cur)
            prev = cur
        if not complete:
            g.truncated.add(prev)
        return g

    def _append(self, state, parent, depth):
        idx = len(self.nodes)
        self.nodes.append(state)
        self.index.setdefault(state, idx)
        self.out.append([])
        self.parent.append(parent)
        self.depth.append(depth)
        return idx, True


def worker_count(workers: Optional[int] = None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, workers)


def _expand(args):
    state, catalogue, branch_bound = args
    insts = enabled_instances(state, catalogue)
    cut = branch_bound is not None and len(insts) > branch_bound
    if cut:
        insts = insts[:branch_bound]
    return [(inst, event_def(catalogue[inst.name]).action(state, inst.args)) for inst in insts], cut


def explore(initial: GlobalState, level=None, depth_bound: Optional[int] = None,
            branch_bound: Optional[int] = None, catalogue: Optional[Mapping] = None,
            workers: Optional[int] = None, check_init: bool = True) -> StateGraph:
    """Breadth-first state graph from ``initial``.

    At L3 the catalogue guards already carry the priority order, which is
    the same as filtering the L2 successors with ``filter_priority``.
    Successors of one BFS layer may be computed by several threads; the
    merge is sequential in frontier order, so the graph does not depend on
    the worker count.
    """
    level = Level.parse(level) if level is not None else initial.level
    if catalogue is None:
        catalogue = event_catalog(level)
    if check_init:
        bad = typing_invariants(initial)
        if bad:
            raise InvariantViolationAtInit("; ".join(map(str, bad)))
    graph = StateGraph(level=level)
    graph.add_node(initial, None, 0)
    frontier = [0]
    depth = 0
    n = worker_count(workers)
    pool = ThreadPoolExecutor(n) if n > 1 else None
    try:
        while frontier:
            if depth_bound is not None and depth >= depth_bound:
                for i in frontier:
                    if enabled_instances(graph.nodes[i], catalogue):
                        graph.truncated.add(i)
                break
            jobs = [(graph.nodes[i], catalogue, branch_bound) for i in frontier]
            results = pool.map(_expand, jobs, chunksize=64) if pool else map(_expand, jobs)
            nxt = []
            for src, (succ, cut) in zip(frontier, results):
                if cut:
                    graph.truncated.add(src)
                for inst, state in succ:
                    dst, new = graph.add_node(state, None, depth + 1)
                    eid = graph.add_edge(src, inst, dst)
                    if new:
                        graph.parent[dst] = eid
                        nxt.append(dst)
            frontier = nxt
            depth += 1
    finally:
        if pool:
            pool.shutdown()
    return graph


# ---------------------------------------------------------------------------
# safety suite

def sp_a(state: GlobalState) -> bool:
    """Every (packet, switch) on the data channel is a recorded send."""
    sent = state.ctl_sent_pkts | state.sw_sent_pkts
    return all(pair in sent for pair in state.data_chan)


def sp_b(state: GlobalState) -> bool:
    """Every packet buffered at a switch arrived through a recorded send."""
    sent = state.ctl_sent_pkts | state.sw_sent_pkts
    return state.sw_ipk() <= sent


def sp_c(state: GlobalState) -> bool:
    """PKOut payloads heading down were recorded as controller sends."""
    return all((m.packet, sw) in state.ctl_sent_pkts
               for m, sw in state.secure_chan_down if m.packet is not None)


def well_typed(state: GlobalState) -> bool:
    return not typing_invariants(state)


SP_A = InvariantDef("SP_a", sp_a)
SP_B = InvariantDef("SP_b", sp_b)
SP_C = InvariantDef("SP_c", sp_c)
TYPING = InvariantDef("typing", well_typed)
SAFETY_SUITE = (SP_A, SP_B, SP_C, TYPING)


def check_invariants(graph: StateGraph, invs: Iterable[InvariantDef]) -> Verdict:
    """Holds iff every node satisfies every invariant; otherwise the
    shortest trace to the first violating node (nodes are in BFS order)."""
    invs = list(invs)
    for i, state in enumerate(graph.nodes):
        for inv in invs:
            if not inv.predicate(state):
                detail = f"violated at depth {graph.depth[i]}"
                if inv is TYPING or inv.name == "typing":
                    detail += ": " + "; ".join(map(str, typing_invariants(state)))
                return Verdict(FAILS, inv.name, graph.trace_to(i), detail=detail)
    return Verdict(HOLDS, ",".join(inv.name for inv in invs))


def check_each(graph: StateGraph, invs: Iterable[InvariantDef]) -> list[Verdict]:
    out = []
    for inv in invs:
        v = check_invariants(graph, [inv])
        out.append(v if v.name == inv.name else Verdict(v.outcome, inv.name, v.trace, v.loop_start, v.detail))
    return out


def graph_stats(graph: StateGraph) -> dict:
    return {
        "nodes": len(graph.nodes),
        "edges": len(graph.edges),
        "terminal": len(graph.terminal()),
        "truncated": len(graph.truncated),
        "max_depth": max(graph.depth) if graph.depth else 0,
        "level": graph.level.name,
    }

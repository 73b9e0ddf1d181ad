"""LTL with event atoms, checked over explored state graphs.

A run is a sequence of positions; each position is one step of the graph
(its source state and the event taken). ``e(name)`` holds at a position
whose step is labelled ``name``; ``{pred}`` is evaluated on the source
state. A run that ends in deadlock is extended by stuttering on its last
state with no event, so ``F(e(x))`` fails on a terminating run where ``x``
never happens and ``X`` at the end sees no event.

Formulas are negated, put in negation normal form, turned into a
generalised Büchi automaton (the on-the-fly tableau of Gerth, Peled, Vardi
and Wolper) and intersected with the graph; an accepting lasso is a
counterexample.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .checker import BOUND_EXCEEDED, FAILS, HOLDS, StateGraph, Verdict
from .events import EVENT_NAMES
from .kernel import Trace


class LtlError(Exception):
    pass


class ParseError(LtlError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownEventAtom(LtlError):
    pass


class MalformedPredicate(LtlError):
    pass


# ---------------------------------------------------------------------------
# syntax

@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class FalseF:
    pass


@dataclass(frozen=True)
class EventAtom:
    name: str


@dataclass(frozen=True)
class Pred:
    """``lhs op rhs`` over unions of named sets; an empty union is ``{}``."""

    lhs: tuple[str, ...]
    op: str
    rhs: tuple[str, ...]


@dataclass(frozen=True)
class StateAtom:
    pred: Pred


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Next:
    arg: "Formula"


@dataclass(frozen=True)
class Finally:
    arg: "Formula"


@dataclass(frozen=True)
class Globally:
    arg: "Formula"


# negation normal form only
@dataclass(frozen=True)
class NegAtom:
    atom: Union[EventAtom, StateAtom]


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Release:
    left: "Formula"
    right: "Formula"


Formula = Union[TrueF, FalseF, EventAtom, StateAtom, Not, And, Implies, Next,
                Finally, Globally, NegAtom, Or, Until, Release]

LP_OKSTATUS = "e(ctl_askStatusMsg) => F(e(ctl_rcvStatus))"
LP_DELIV = "e(ctl_havePacket) => F(e(ctl_emitPkt))"
LP_OKMACH = "e(ctl_emitPkt) => X(e(sw_rcv_machingPkt))"
LIVENESS = {"LP_OKstatus": LP_OKSTATUS, "LP_deliv": LP_DELIV, "LP_OKMach": LP_OKMACH}


# named packet/message/switch sets usable inside {...}
STATE_SETS: dict[str, Callable] = {
    "ctlSentPkts": lambda s: {p for p, _ in s.ctl_sent_pkts},
    "swSentPkts": lambda s: {p for p, _ in s.sw_sent_pkts},
    "swIncomingPk": lambda s: {p for p, _ in s.sw_ipk()},
    "swOutgoingPk": lambda s: {p for p, _ in s.sw_opk()},
    "ctlIncomingPk": lambda s: set(s.controller.incoming_pkts),
    "ctlOutgoingPk": lambda s: set(s.controller.outgoing),
    "dataChan": lambda s: {p for p, _ in s.data_chan},
    "swIncomingMsg": lambda s: s.sw_incoming_msgs(),
    "swOutgoingMsg": lambda s: s.sw_outgoing_msgs(),
    "pendingBarrier": lambda s: set(s.controller.pending_barrier),
    "pendingStatus": lambda s: set(s.controller.pending_status),
}
PRED_OPS = ("/<:", "<:", "/=", "=")


_TOKEN = re.compile(r"\s*(?:(=>)|(&)|([()])|([A-Za-z_][A-Za-z_0-9]*))")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> Optional[str]:
        self._skip()
        if self.pos >= len(self.text):
            return None
        if self.text[self.pos] == "{":
            return "{"
        m = _TOKEN.match(self.text, self.pos)
        if not m:
            raise ParseError(f"unexpected character {self.text[self.pos]!r}", self.pos)
        return m.group(m.lastindex)

    def take(self, expected: Optional[str] = None) -> str:
        tok = self.peek()
        if tok is None:
            raise ParseError(f"expected {expected or 'a formula'}, got end of input", self.pos)
        if expected is not None and tok != expected:
            raise ParseError(f"expected {expected!r}, got {tok!r}", self.pos)
        self._skip()
        self.pos += len(tok)
        return tok

    def parse(self) -> Formula:
        f = self.implication()
        if self.peek() is not None:
            raise ParseError(f"unexpected {self.peek()!r}", self.pos)
        return f

    def implication(self) -> Formula:
        left = self.conjunction()
        if self.peek() == "=>":
            self.take()
            return Implies(left, self.implication())
        return left

    def conjunction(self) -> Formula:
        left = self.unary()
        while self.peek() in ("and", "&"):
            self.take()
            left = And(left, self.unary())
        return left

    def unary(self) -> Formula:
        if self.peek() == "not":
            self.take()
            return Not(self.unary())
        return self.primary()

    def primary(self) -> Formula:
        tok = self.peek()
        start = self.pos
        if tok == "(":
            self.take()
            f = self.implication()
            self.take(")")
            return f
        if tok == "{":
            return StateAtom(self.predicate())
        if tok == "true":
            self.take()
            return TrueF()
        if tok == "false":
            self.take()
            return FalseF()
        if tok == "e":
            self.take()
            self.take("(")
            name = self.take()
            if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", name):
                raise ParseError("expected an event name", start)
            self.take(")")
            return EventAtom(name)
        if tok in ("X", "F", "G"):
            self.take()
            self.take("(")
            arg = self.implication()
            self.take(")")
            return {"X": Next, "F": Finally, "G": Globally}[tok](arg)
        if tok is None:
            raise ParseError("expected a formula, got end of input", self.pos)
        raise ParseError(f"unexpected {tok!r}", start)

    def predicate(self) -> Pred:
        self._skip()
        start = self.pos
        depth = 0
        for i in range(self.pos, len(self.text)):
            if self.text[i] == "{":
                depth += 1
            elif self.text[i] == "}":
                depth -= 1
                if depth == 0:
                    body = self.text[start + 1:i]
                    self.pos = i + 1
                    return parse_predicate(body, start + 1)
        raise ParseError("unclosed '{'", start)


def parse_predicate(body: str, offset: int = 0) -> Pred:
    for op in PRED_OPS:
        idx = body.find(op)
        if idx >= 0:
            if op == "=" and body[idx - 1:idx] in ("/", "<"):
                continue
            return Pred(_set_expr(body[:idx], offset), op,
                        _set_expr(body[idx + len(op):], offset + idx + len(op)))
    raise ParseError("state predicate needs one of = /= <: /<:", offset)


def _set_expr(text: str, offset: int) -> tuple[str, ...]:
    names = []
    for part in text.split("\\/"):
        part = part.strip()
        if part == "{}":
            continue
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", part):
            raise ParseError(f"bad set expression {part!r}", offset)
        names.append(part)
    return tuple(names)


def parse_ltl(text: str) -> Formula:
    return _Parser(text).parse()


def _set_text(names: tuple[str, ...]) -> str:
    return " \\/ ".join(names) if names else "{}"


def format_ltl(f: Formula) -> str:
    return _fmt(f, 0)


def _fmt(f: Formula, need: int) -> str:
    # precedence: implication 1, conjunction 2, prefix 3
    if isinstance(f, Implies):
        text, prec = f"{_fmt(f.left, 2)} => {_fmt(f.right, 1)}", 1
    elif isinstance(f, And):
        text, prec = f"{_fmt(f.left, 2)} and {_fmt(f.right, 3)}", 2
    elif isinstance(f, Not):
        text, prec = f"not {_fmt(f.arg, 3)}", 3
    elif isinstance(f, (Next, Finally, Globally)):
        op = {Next: "X", Finally: "F", Globally: "G"}[type(f)]
        text, prec = f"{op}({_fmt(f.arg, 0)})", 4
    elif isinstance(f, EventAtom):
        text, prec = f"e({f.name})", 4
    elif isinstance(f, StateAtom):
        p = f.pred
        text, prec = f"{{{_set_text(p.lhs)} {p.op} {_set_text(p.rhs)}}}", 4
    elif isinstance(f, TrueF):
        text, prec = "true", 4
    elif isinstance(f, FalseF):
        text, prec = "false", 4
    else:
        raise LtlError(f"{type(f).__name__} has no surface syntax")
    return f"({text})" if prec < need else text


def load_formulas(path) -> list[tuple[str, str]]:
    """One formula per line; ``NAME: formula`` names it, ``#`` comments."""
    out = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            name, sep, body = line.partition(":")
            if sep and re.fullmatch(r"\s*[A-Za-z_][A-Za-z_0-9]*\s*", name):
                out.append((name.strip(), body.strip()))
            else:
                out.append((f"formula{n}", line))
    return out


# ---------------------------------------------------------------------------
# semantics helpers

def atoms(f: Formula) -> Iterable:
    if isinstance(f, (EventAtom, StateAtom)):
        yield f
    for attr in ("arg", "left", "right", "atom"):
        sub = getattr(f, attr, None)
        if sub is not None:
            yield from atoms(sub)


def validate(f: Formula, known_events: Iterable[str] = EVENT_NAMES) -> None:
    known = set(known_events)
    for a in atoms(f):
        if isinstance(a, EventAtom) and a.name not in known:
            raise UnknownEventAtom(a.name)
        if isinstance(a, StateAtom):
            for name in a.pred.lhs + a.pred.rhs:
                if name not in STATE_SETS:
                    raise MalformedPredicate(f"unknown state set {name!r}")


def eval_pred(pred: Pred, state) -> bool:
    lhs = set().union(*(STATE_SETS[n](state) for n in pred.lhs))
    rhs = set().union(*(STATE_SETS[n](state) for n in pred.rhs))
    if pred.op == "=":
        return lhs == rhs
    if pred.op == "/=":
        return lhs != rhs
    if pred.op == "<:":
        return lhs <= rhs
    return not lhs <= rhs


def nnf(f: Formula, neg: bool = False) -> Formula:
    if isinstance(f, TrueF):
        return FalseF() if neg else f
    if isinstance(f, FalseF):
        return TrueF() if neg else f
    if isinstance(f, (EventAtom, StateAtom)):
        return NegAtom(f) if neg else f
    if isinstance(f, NegAtom):
        return f.atom if neg else f
    if isinstance(f, Not):
        return nnf(f.arg, not neg)
    if isinstance(f, And):
        cls = Or if neg else And
        return cls(nnf(f.left, neg), nnf(f.right, neg))
    if isinstance(f, Or):
        cls = And if neg else Or
        return cls(nnf(f.left, neg), nnf(f.right, neg))
    if isinstance(f, Implies):
        if neg:
            return And(nnf(f.left), nnf(f.right, True))
        return Or(nnf(f.left, True), nnf(f.right))
    if isinstance(f, Next):
        return Next(nnf(f.arg, neg))
    if isinstance(f, Finally):
        return Release(FalseF(), nnf(f.arg, True)) if neg else Until(TrueF(), nnf(f.arg))
    if isinstance(f, Globally):
        return Until(TrueF(), nnf(f.arg, True)) if neg else Release(FalseF(), nnf(f.arg))
    if isinstance(f, Until):
        if neg:
            return Release(nnf(f.left, True), nnf(f.right, True))
        return Until(nnf(f.left), nnf(f.right))
    if isinstance(f, Release):
        if neg:
            return Until(nnf(f.left, True), nnf(f.right, True))
        return Release(nnf(f.left), nnf(f.right))
    raise LtlError(f"cannot normalise {f!r}")


# ---------------------------------------------------------------------------
# tableau: NNF formula -> generalised Büchi automaton

_INIT = -1
_LITERALS = (TrueF, FalseF, EventAtom, StateAtom, NegAtom)


@dataclass
class _Node:
    id: int
    incoming: set
    old: frozenset
    next: frozenset

    def literals(self):
        return [f for f in self.old if isinstance(f, (EventAtom, StateAtom, NegAtom))]


def _negate_literal(f):
    return f.atom if isinstance(f, NegAtom) else NegAtom(f)


def _subformulas(f) -> Iterable:
    yield f
    for attr in ("arg", "left", "right"):
        sub = getattr(f, attr, None)
        if sub is not None:
            yield from _subformulas(sub)


@dataclass
class Automaton:
    nodes: list[_Node]
    acceptance: list[frozenset[int]]

    @property
    def initial(self) -> list[int]:
        return [n.id for n in self.nodes if _INIT in n.incoming]

    def successors(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.nodes]
        for n in self.nodes:
            for src in n.incoming:
                if src != _INIT:
                    out[src].append(n.id)
        return out


def build_automaton(phi: Formula) -> Automaton:
    nodes: list[_Node] = []
    stack = [(frozenset({_INIT}), frozenset({phi}), frozenset(), frozenset())]
    while stack:
        incoming, new, old, nxt = stack.pop()
        if not new:
            for nd in nodes:
                if nd.old == old and nd.next == nxt:
                    nd.incoming |= incoming
                    break
            else:
                nd = _Node(len(nodes), set(incoming), old, nxt)
                nodes.append(nd)
                stack.append((frozenset({nd.id}), nxt, frozenset(), frozenset()))
            continue
        f = min(new, key=repr)
        new = new - {f}
        if f in old:
            stack.append((incoming, new, old, nxt))
            continue
        if isinstance(f, _LITERALS):
            if isinstance(f, FalseF) or (not isinstance(f, TrueF) and _negate_literal(f) in old):
                continue
            stack.append((incoming, new, old | {f}, nxt))
        elif isinstance(f, And):
            stack.append((incoming, new | ({f.left, f.right} - old), old | {f}, nxt))
        elif isinstance(f, Next):
            stack.append((incoming, new, old | {f}, nxt | {f.arg}))
        elif isinstance(f, Or):
            stack.append((incoming, new | ({f.left} - old), old | {f}, nxt))
            stack.append((incoming, new | ({f.right} - old), old | {f}, nxt))
        elif isinstance(f, Until):
            stack.append((incoming, new | ({f.left} - old), old | {f}, nxt | {f}))
            stack.append((incoming, new | ({f.right} - old), old | {f}, nxt))
        elif isinstance(f, Release):
            stack.append((incoming, new | ({f.right} - old), old | {f}, nxt | {f}))
            stack.append((incoming, new | ({f.left, f.right} - old), old | {f}, nxt))
        else:
            raise LtlError(f"not in negation normal form: {f!r}")
    untils = sorted({g for g in _subformulas(phi) if isinstance(g, Until)}, key=repr)
    acceptance = [frozenset(n.id for n in nodes if u not in n.old or u.right in n.old)
                  for u in untils]
    return Automaton(nodes, acceptance)


# ---------------------------------------------------------------------------
# product with the graph

class _Kripke:
    """Positions of a state graph: one per edge, plus a stutter position
    for every deadlocked node."""

    def __init__(self, graph: StateGraph):
        self.graph = graph
        self.n_edges = len(graph.edges)
        self.stutter = {node: self.n_edges + k for k, node in enumerate(graph.terminal())}
        self.stutter_node = {v: k for k, v in self.stutter.items()}
        self._preds: dict = {}

    def node_positions(self, node: int) -> list[int]:
        out = list(self.graph.out[node])
        if node in self.stutter:
            out.append(self.stutter[node])
        return out

    def initial(self) -> list[int]:
        return self.node_positions(0)

    def successors(self, pos: int) -> list[int]:
        if pos >= self.n_edges:
            return [pos]
        return self.node_positions(self.graph.edges[pos][2])

    def source(self, pos: int) -> int:
        if pos >= self.n_edges:
            return self.stutter_node[pos]
        return self.graph.edges[pos][0]

    def event(self, pos: int) -> Optional[str]:
        return None if pos >= self.n_edges else self.graph.edges[pos][1].name

    def holds(self, lit, pos: int) -> bool:
        if isinstance(lit, NegAtom):
            return not self.holds(lit.atom, pos)
        if isinstance(lit, EventAtom):
            return self.event(pos) == lit.name
        key = (lit.pred, self.source(pos))
        val = self._preds.get(key)
        if val is None:
            val = eval_pred(lit.pred, self.graph.nodes[key[1]])
            self._preds[key] = val
        return val


def _lasso(kripke: _Kripke, aut: Automaton):
    """An accepting lasso of the product as a list of (position, node) plus
    the index where the cycle starts, or None."""
    succ_q = aut.successors()
    lits = [n.literals() for n in aut.nodes]

    def ok(pos, q):
        return all(kripke.holds(l, pos) for l in lits[q])

    ids: dict[tuple[int, int], int] = {}
    keys: list[tuple[int, int]] = []
    parent: list[int] = []
    rows: list[int] = []
    cols: list[int] = []
    queue = deque()
    for pos in kripke.initial():
        for q in aut.initial:
            if (pos, q) not in ids and ok(pos, q):
                ids[(pos, q)] = len(keys)
                keys.append((pos, q))
                parent.append(-1)
                queue.append(len(keys) - 1)
    while queue:
        i = queue.popleft()
        pos, q = keys[i]
        for pos2 in kripke.successors(pos):
            for q2 in succ_q[q]:
                if not ok(pos2, q2):
                    continue
                j = ids.get((pos2, q2))
                if j is None:
                    j = len(keys)
                    ids[(pos2, q2)] = j
                    keys.append((pos2, q2))
                    parent.append(i)
                    queue.append(j)
                rows.append(i)
                cols.append(j)
    n = len(keys)
    if n == 0:
        return None
    adj = csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    _, comp = connected_components(adj, directed=True, connection="strong")
    size = np.bincount(comp)
    loops = {r for r, c in zip(rows, cols) if r == c}
    nontrivial = set(np.nonzero(size > 1)[0].tolist()) | {int(comp[i]) for i in loops}
    sets = aut.acceptance or [frozenset(range(len(aut.nodes)))]
    good = set()
    for c in nontrivial:
        members = np.nonzero(comp == c)[0]
        qs = {keys[m][1] for m in members}
        if all(qs & acc for acc in sets):
            good.add(c)
    if not good:
        return None
    # BFS order of ``keys`` makes the first member the closest one
    start = next(i for i in range(n) if comp[i] in good)
    prefix = []
    i = start
    while i != -1:
        prefix.append(i)
        i = parent[i]
    prefix.reverse()

    c = comp[start]
    out_adj: dict[int, list[int]] = {}
    for r, col in zip(rows, cols):
        if comp[r] == c and comp[col] == c:
            out_adj.setdefault(r, []).append(col)

    def path(src, goal, allow_empty):
        if allow_empty and goal(src):
            return [src]
        prev = {}
        dq = deque()
        for nb in out_adj.get(src, ()):
            if nb not in prev:
                prev[nb] = src
                dq.append(nb)
        while dq:
            cur = dq.popleft()
            if goal(cur):
                seq = [cur]
                while seq[-1] != src or len(seq) == 1:
                    seq.append(prev[seq[-1]])
                    if seq[-1] == src:
                        break
                return seq[::-1]
            for nb in out_adj.get(cur, ()):
                if nb not in prev:
                    prev[nb] = cur
                    dq.append(nb)
        raise LtlError("accepting component is not strongly connected")

    cycle = [start]
    for acc in sets:
        seg = path(cycle[-1], lambda k: keys[k][1] in acc, True)
        cycle.extend(seg[1:])
    seg = path(cycle[-1], lambda k: k == start, False)
    cycle.extend(seg[1:-1])
    run = [keys[k] for k in prefix] + [keys[k] for k in cycle[1:]]
    return run, len(prefix) - 1


def _trace_of(kripke: _Kripke, run, loop_at: int) -> tuple[Trace, Optional[int]]:
    g = kripke.graph
    steps = []
    loop_start = None
    for k, (pos, _) in enumerate(run):
        if k == loop_at and pos < kripke.n_edges:
            loop_start = len(steps)
        if pos < kripke.n_edges:
            _, inst, dst = g.edges[pos]
            steps.append((inst, g.nodes[dst]))
    return Trace(g.nodes[0], tuple(steps)), loop_start


def check_ltl(graph: StateGraph, phi: Union[Formula, str], name: str = "",
              known_events: Optional[Iterable[str]] = None) -> Verdict:
    if isinstance(phi, str):
        phi = parse_ltl(phi)
    if known_events is None:
        known_events = set(EVENT_NAMES) | {inst.name for _, inst, _ in graph.edges}
    validate(phi, known_events)
    name = name or format_ltl(phi)
    kripke = _Kripke(graph)
    aut = build_automaton(nnf(phi, neg=True))
    found = _lasso(kripke, aut)
    if found is not None:
        trace, loop_start = _trace_of(kripke, *found)
        kind = "terminating run" if loop_start is None else f"lasso from step {loop_start}"
        return Verdict(FAILS, name, trace, loop_start, detail=f"counterexample: {kind}")
    if graph.truncated:
        return Verdict(BOUND_EXCEEDED, name, detail=f"{len(graph.truncated)} states cut by the bound")
    return Verdict(HOLDS, name)


def check_trace(trace: Trace, phi: Union[Formula, str], complete: bool = True,
                name: str = "") -> Verdict:
    """Check a single run; ``complete`` says it ended in deadlock."""
    graph = StateGraph.from_trace(trace, complete)
    v = check_ltl(graph, phi, name)
    if v.holds:
        return Verdict(HOLDS, v.name, trace, detail="witness: the run itself")
    return v

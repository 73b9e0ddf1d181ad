"""Choice among enabled events: the per-switch priority order and the
simulation policies."""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union


class SchedulerError(Exception):
    pass


class CyclicOrder(SchedulerError):
    pass


class EmptyChoice(SchedulerError):
    pass


class MissingPriority(SchedulerError):
    pass


class BranchRequired(SchedulerError):
    """Raised by ``pick`` under the exhaustive policy: the caller branches."""


@dataclass(frozen=True)
class PriorityOrder:
    """Strict partial order on switch event names.

    A pair ``(low, high)`` reads ``low ≺ high``: when both are enabled on
    the same switch, ``high`` goes first and ``low`` waits.
    """

    pairs: frozenset[tuple[str, str]]

    def closure(self) -> frozenset[tuple[str, str]]:
        rel = set(self.pairs)
        while True:
            extra = {(a, d) for a, b in rel for c, d in rel if b == c} - rel
            if not extra:
                break
            rel |= extra
        if any(a == b for a, b in rel):
            raise CyclicOrder(f"priority order has a cycle through {sorted(a for a, b in rel if a == b)}")
        return frozenset(rel)

    def above(self) -> dict[str, frozenset[str]]:
        out: dict[str, set[str]] = {}
        for low, high in self.closure():
            out.setdefault(low, set()).add(high)
        return {k: frozenset(v) for k, v in out.items()}


MESSAGE_CONSUMERS = (
    "sw_newFTentry", "sw_modFTentry", "sw_delFTentry", "sw_handlePkOut", "sw_statusRp",
)

SHIPPED_ORDER = PriorityOrder(frozenset({
    ("sw_newFTentry", "sw_sendPckt2sw"),
    ("sw_sndPk2ctrl", "sw_sendPckt2sw"),
    ("sw_sndPk2ctrl", "sw_newFTentry"),
    ("sw_sendPckt2sw", "sw_delFTentry"),
    *((name, "sw_barrierRp") for name in MESSAGE_CONSUMERS),
}))


def _switch_of(inst) -> Optional[str]:
    return inst.args[0] if inst.name.startswith("sw_") and inst.args else None


def filter_priority(enabled: Iterable, order: PriorityOrder = SHIPPED_ORDER, state=None) -> list:
    """Drop every switch instance dominated by an enabled instance on the
    same switch. Controller instances are never filtered."""
    enabled = list(enabled)
    above = order.above()
    names_on: dict[str, set[str]] = {}
    for inst in enabled:
        sw = _switch_of(inst)
        if sw is not None:
            names_on.setdefault(sw, set()).add(inst.name)
    out = []
    for inst in enabled:
        sw = _switch_of(inst)
        if sw is not None and above.get(inst.name, frozenset()) & names_on[sw]:
            continue
        out.append(inst)
    return out


# ---------------------------------------------------------------------------
# policies

@dataclass(frozen=True)
class Exhaustive:
    pass


@dataclass(frozen=True)
class SeededRandom:
    seed: int = 0


@dataclass(frozen=True)
class PriorityThenSeed:
    seed: int = 0


Policy = Union[Exhaustive, SeededRandom, PriorityThenSeed]


def parse_policy(name: str, seed: int = 0) -> Policy:
    name = name.lower()
    if name == "exhaustive":
        return Exhaustive()
    if name in ("seeded", "random", "seededrandom"):
        return SeededRandom(seed)
    if name in ("priority", "prioritythenseed"):
        return PriorityThenSeed(seed)
    raise ValueError(f"unknown policy {name!r}")


def message_dequeue_order(msgs: Iterable) -> list:
    """Highest priority first; equal priorities by ascending message id."""
    msgs = list(msgs)
    for m in msgs:
        if m.priority is None:
            raise MissingPriority(f"message {m.id} carries no priority")
    return sorted(msgs, key=lambda m: (-m.priority, m.id))


def _instance_priority(state, inst) -> int:
    if state is None:
        return 0
    for arg in inst.args:
        m = state.find_message(arg)
        if m is not None:
            return m.priority or 0
    return 0


class Scheduler:
    """Owns the random generator of one run."""

    def __init__(self, policy: Policy):
        self.policy = policy
        self._rng = random.Random(getattr(policy, "seed", 0))

    def pick(self, enabled: Sequence, state=None):
        if not enabled:
            raise EmptyChoice("no enabled instance to choose from")
        options = sorted(enabled)
        if len(options) == 1:
            return options[0]
        if isinstance(self.policy, Exhaustive):
            raise BranchRequired(f"{len(options)} enabled instances")
        if isinstance(self.policy, PriorityThenSeed):
            # highest message priority first, ties to the smallest (name, args)
            return min(options, key=lambda inst: (-_instance_priority(state, inst), inst))
        return options[self._rng.randrange(len(options))]


def pick(enabled: Sequence, policy: Policy, state=None):
    return Scheduler(policy).pick(enabled, state)

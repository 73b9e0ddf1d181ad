"""Guarded-event machine: parameterised events as guard/action pairs.

The kernel never chooses between enabled events; callers (the scheduler or
the explorer) do. States are opaque values here, so the same machinery runs
the global model, component views and mutants.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Optional


class KernelError(Exception):
    pass


class GuardViolation(KernelError):
    pass


class UnknownEvent(KernelError):
    pass


class ArityError(KernelError):
    pass


@dataclass(frozen=True)
class EventDef:
    """One event: ``bindings`` proposes candidate argument tuples drawn from
    the finite pools of a state; ``guard`` decides; ``action`` rewrites."""

    name: str
    parameter_sorts: tuple[str, ...]
    bindings: Callable[[Any], Iterable[tuple]] = field(compare=False)
    guard: Callable[[Any, tuple], bool] = field(compare=False)
    action: Callable[[Any, tuple], Any] = field(compare=False)


@dataclass(frozen=True, order=True)
class EventInstance:
    name: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"{self.name}({', '.join(self.args)})"


@dataclass(frozen=True)
class Trace:
    initial: Any
    steps: tuple[tuple[EventInstance, Any], ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def final(self) -> Any:
        return self.steps[-1][1] if self.steps else self.initial

    @property
    def events(self) -> list[EventInstance]:
        return [inst for inst, _ in self.steps]

    def states(self) -> list[Any]:
        return [self.initial] + [s for _, s in self.steps]


def event_def(row) -> EventDef:
    """Accept a bare EventDef or anything carrying one as ``.event``."""
    return getattr(row, "event", row)


def _lookup(catalogue: Mapping[str, Any], name: str) -> EventDef:
    try:
        return event_def(catalogue[name])
    except KeyError:
        raise UnknownEvent(name) from None


def is_enabled(state, instance: EventInstance, catalogue: Mapping[str, Any]) -> bool:
    ev = _lookup(catalogue, instance.name)
    if len(instance.args) != len(ev.parameter_sorts):
        raise ArityError(f"{instance.name} takes {len(ev.parameter_sorts)} arguments")
    return bool(ev.guard(state, instance.args))


def enabled_instances(state, catalogue: Mapping[str, Any]) -> list[EventInstance]:
    """Every enabled instance, in canonical (name, args) order."""
    out = []
    for name in sorted(catalogue):
        ev = event_def(catalogue[name])
        seen = set()
        for args in ev.bindings(state):
            if args in seen:
                continue
            seen.add(args)
            if ev.guard(state, args):
                out.append(EventInstance(name, tuple(args)))
    out.sort()
    return out


def apply(state, instance: EventInstance, catalogue: Mapping[str, Any]):
    if not is_enabled(state, instance, catalogue):
        raise GuardViolation(f"{instance} is not enabled")
    return _lookup(catalogue, instance.name).action(state, instance.args)


def detect_deadlock(state, catalogue: Mapping[str, Any]) -> bool:
    for name in catalogue:
        ev = event_def(catalogue[name])
        for args in ev.bindings(state):
            if ev.guard(state, args):
                return False
    return True


def successors(state, catalogue: Mapping[str, Any]) -> list[tuple[EventInstance, Any]]:
    return [(inst, _lookup(catalogue, inst.name).action(state, inst.args))
            for inst in enabled_instances(state, catalogue)]


def replay(initial, events: Iterable[EventInstance], catalogue: Mapping[str, Any],
           check: Optional[Callable[[int, Any], None]] = None) -> Trace:
    """Re-run ``events`` from ``initial``; GuardViolation on the first
    disabled step."""
    steps = []
    state = initial
    for i, inst in enumerate(events):
        state = apply(state, inst, catalogue)
        steps.append((inst, state))
        if check is not None:
            check(i + 1, state)
    return Trace(initial, tuple(steps))

"""Canonical state encoding, JSON-lines trace files, replay and seeded
simulation."""
from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Union

from .events import event_catalog
from .kernel import EventInstance, Trace, enabled_instances, event_def, replay
from .scheduler import Exhaustive, Policy, Scheduler
from .state import GlobalState

_SKIP = {"net", "level", "_hash"}


class TraceMismatch(Exception):
    pass


def canonical(obj: Any) -> Any:
    """JSON-ready form with every set sorted, so equal states encode to
    equal text."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: canonical(getattr(obj, f.name))
                for f in dataclasses.fields(obj) if f.name not in _SKIP}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (frozenset, set)):
        items = [canonical(x) for x in obj]
        return sorted(items, key=lambda x: json.dumps(x, sort_keys=True))
    if isinstance(obj, (tuple, list)):
        return [canonical(x) for x in obj]
    if isinstance(obj, Mapping):
        return {str(k): canonical(v) for k, v in obj.items()}
    return obj


def state_to_dict(state: GlobalState) -> dict:
    return canonical(state)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest(state: GlobalState) -> str:
    return hashlib.sha256(_dumps(state_to_dict(state)).encode()).hexdigest()


def trace_records(trace: Trace, full_states: bool = False) -> list[dict]:
    """Step 0 describes the initial state; step i > 0 the event taken and
    the state it leads to."""
    recs = [{"step": 0, "event": None, "args": [], "digest": digest(trace.initial)}]
    if full_states:
        recs[0]["state"] = state_to_dict(trace.initial)
    for i, (inst, state) in enumerate(trace.steps, 1):
        rec = {"step": i, "event": inst.name, "args": list(inst.args), "digest": digest(state)}
        if full_states:
            rec["state"] = state_to_dict(state)
        recs.append(rec)
    return recs


def write_trace(trace: Trace, path: Union[str, Path], full_states: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in trace_records(trace, full_states):
            fh.write(_dumps(rec) + "\n")
    return path


def read_trace(path: Union[str, Path]) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def replay_records(records: Iterable[dict], initial: GlobalState,
                   catalogue: Optional[Mapping] = None) -> Trace:
    """Re-run the recorded events and check every digest on the way."""
    records = list(records)
    catalogue = catalogue if catalogue is not None else event_catalog(initial.level)
    if records and records[0]["event"] is None:
        if records[0]["digest"] != digest(initial):
            raise TraceMismatch("initial state differs from the recorded one")
        records = records[1:]
    events = [EventInstance(r["event"], tuple(r["args"])) for r in records]
    trace = replay(initial, events, catalogue)
    for rec, (_, state) in zip(records, trace.steps):
        if rec["digest"] != digest(state):
            raise TraceMismatch(f"state after step {rec['step']} differs from the recorded one")
    return trace


def replay_file(path, initial: GlobalState, catalogue: Optional[Mapping] = None) -> Trace:
    return replay_records(read_trace(path), initial, catalogue)


@dataclasses.dataclass(frozen=True)
class SimulationResult:
    trace: Trace
    # "deadlock" when nothing was enabled at the end, else "step bound"
    stopped: str

    @property
    def complete(self) -> bool:
        return self.stopped == "deadlock"


def simulate(initial: GlobalState, policy: Policy, max_steps: int = 1000,
             catalogue: Optional[Mapping] = None) -> SimulationResult:
    """One run under ``policy``; at L3 the catalogue guards carry the
    priority order."""
    if isinstance(policy, Exhaustive):
        raise ValueError("simulation needs a seeded or priority policy")
    catalogue = catalogue if catalogue is not None else event_catalog(initial.level)
    sched = Scheduler(policy)
    state = initial
    steps = []
    for _ in range(max_steps):
        enabled = enabled_instances(state, catalogue)
        if not enabled:
            return SimulationResult(Trace(initial, tuple(steps)), "deadlock")
        inst = sched.pick(enabled, state)
        state = event_def(catalogue[inst.name]).action(state, inst.args)
        steps.append((inst, state))
    stopped = "step bound" if enabled_instances(state, catalogue) else "deadlock"
    return SimulationResult(Trace(initial, tuple(steps)), stopped)

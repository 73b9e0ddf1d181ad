"""Independent reachable-graph oracle.

Plain BFS over every argument tuple drawn from the full cartesian product
of the declared universes (all switches, packets, message ids, entry ids),
feeding each through the event's guard and action. It does not use the
explorer nor the events' own candidate enumeration, and it keys states by
a JSON encoding of their own, so it shares no deduplication code with the
checker.

Run as a script to regenerate ``goldens.json``:

    python tests/oracle.py
"""
from __future__ import annotations

import dataclasses
import enum
import hashlib
import itertools
import json
import sys
from collections import deque
from pathlib import Path

from sdn_evb.events import ENTRY, MSG, PKT, SW, event_catalog
from sdn_evb.scenario import shipped

GOLDENS = Path(__file__).with_name("goldens.json")


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return [[f.name, _plain(getattr(obj, f.name))] for f in dataclasses.fields(obj)
                if f.name not in ("net", "level", "_hash")]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (set, frozenset)):
        return sorted((_plain(x) for x in obj), key=json.dumps)
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    return obj


def key(state) -> str:
    return hashlib.sha1(json.dumps(_plain(state)).encode()).hexdigest()


def universes(scenario, state) -> dict:
    net = state.net
    entries = set(net.entry_ids) | {d.entry.id for d in scenario.entries}
    entries |= {o.entry.id for o in scenario.orders}
    return {
        SW: sorted(net.switch_ids),
        PKT: sorted(net.packets),
        MSG: sorted(net.ctl_msg_ids + net.sw_msg_ids),
        ENTRY: sorted(entries),
    }


def reachable(scenario, level) -> dict:
    init = scenario.initial_state(level)
    events = [row.event for row in event_catalog(level).values()]
    uni = universes(scenario, init)
    seen = {key(init)}
    queue = deque([init])
    edges = terminal = 0
    while queue:
        s = queue.popleft()
        out = 0
        for ev in events:
            for args in itertools.product(*(uni[sort] for sort in ev.parameter_sorts)):
                if not ev.guard(s, args):
                    continue
                out += 1
                t = ev.action(s, args)
                k = key(t)
                if k not in seen:
                    seen.add(k)
                    queue.append(t)
        edges += out
        terminal += out == 0
    return {"nodes": len(seen), "edges": edges, "terminal": terminal}


def main(names=("s1", "s2")) -> dict:
    data = json.loads(GOLDENS.read_text()) if GOLDENS.exists() else {}
    for name in names:
        sc = shipped(name)
        for level in ("L0", "L1", "L2", "L3"):
            data.setdefault(name, {})[level] = reachable(sc, level)
            print(name, level, data[name][level], flush=True)
    GOLDENS.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return data


if __name__ == "__main__":
    main(tuple(sys.argv[1:]) or ("s1", "s2"))

"""Run orchestration behind the command line: one mode per invocation,
every output under the chosen directory."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from .checker import SAFETY_SUITE, StateGraph, Verdict, check_each, explore, graph_stats
from .decomposer import check_recomposition, decompose
from .ltl import LP_OKMACH, check_ltl, check_trace, load_formulas, parse_ltl, validate
from .refinement import check_refinement
from .scenario import Scenario, load_scenario
from .scheduler import Exhaustive, PriorityThenSeed, SeededRandom, parse_policy
from .state import Level
from .traces import digest, simulate, write_trace

log = logging.getLogger("sdn_evb")

MODES = ("simulate", "explore", "check", "refine-check", "decompose-check")
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunOptions:
    scenario: str
    out: str = "out"
    level: Optional[str] = None
    depth: Optional[int] = None
    branch: Optional[int] = None
    policy: Optional[str] = None
    seed: Optional[int] = None
    ltl: Optional[str] = None
    abstract: Optional[str] = None
    verbose: bool = False


def default_formulas_path() -> Path:
    return Path(str(resources.files("sdn_evb") / "liveness.ltl"))


class _Run:
    def __init__(self, opts: RunOptions):
        self.opts = opts
        self.scenario: Scenario = load_scenario(opts.scenario)
        cfg = self.scenario.run
        self.level = Level.parse(opts.level) if opts.level is not None else cfg.level
        self.depth = opts.depth if opts.depth is not None else cfg.depth
        self.branch = opts.branch if opts.branch is not None else cfg.branch
        self.seed = opts.seed if opts.seed is not None else cfg.seed
        self.policy = parse_policy(opts.policy or cfg.policy, self.seed)
        self.out = Path(opts.out)
        self.out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text, encoding="utf-8")
        log.info("wrote %s", path)
        return path

    def graph(self, level=None) -> StateGraph:
        level = self.level if level is None else level
        return explore(self.scenario.initial_state(level), level,
                       depth_bound=self.depth, branch_bound=self.branch)

    def header(self) -> list[str]:
        return [f"scenario: {self.scenario.name}", f"level: {self.level.name}"]


def _stats_line(stats: dict) -> str:
    return " ".join(f"{k}={stats[k]}" for k in ("nodes", "edges", "terminal", "truncated"))


def _save_trace(run: _Run, v: Verdict, stem: str) -> str:
    if v.trace is None:
        return ""
    path = write_trace(v.trace, run.out / "traces" / f"{stem}.jsonl", run.opts.verbose)
    return f" trace={path.relative_to(run.out)}"


def _simulate(run: _Run) -> int:
    res = simulate(run.scenario.initial_state(run.level), run.policy, run.scenario.run.max_steps)
    path = write_trace(res.trace, run.out / "trace.jsonl", run.opts.verbose)
    print(f"{len(res.trace)} steps, stopped by {res.stopped}; trace in {path}")
    return EXIT_OK


def _explore(run: _Run) -> int:
    g = run.graph()
    stats = graph_stats(g)
    stats.update(scenario=run.scenario.name, depth_bound=run.depth, branch_bound=run.branch)
    run.write("stats.json", json.dumps(stats, indent=2, sort_keys=True) + "\n")
    print(_stats_line(stats))
    return EXIT_OK


def _okmach_by_policy(run: _Run, graph: StateGraph) -> list[str]:
    lines = []
    v = check_ltl(graph, LP_OKMACH, "LP_OKMach")
    lines.append(f"exhaustive: {v.outcome}{_save_trace(run, v, 'LP_OKMach-exhaustive')}")
    for label, policy in (("seeded", SeededRandom(run.seed)), ("priority", PriorityThenSeed(run.seed))):
        res = simulate(run.scenario.initial_state(run.level), policy, run.scenario.run.max_steps)
        v = check_trace(res.trace, LP_OKMACH, res.complete, "LP_OKMach")
        names = [inst.name for inst in res.trace.events]
        lines.append(
            f"{label}(seed={run.seed}): {v.outcome} steps={len(names)} "
            f"rcv_machingPkt={names.count('sw_rcv_machingPkt')} "
            f"rcv_unmachingPkt={names.count('sw_rcv_unmachingPkt')} "
            f"final={digest(res.trace.final)[:16]}"
            f"{_save_trace(run, v, f'LP_OKMach-{label}')}"
        )
    return lines


def _check(run: _Run) -> int:
    formulas = load_formulas(run.opts.ltl or default_formulas_path())
    parsed = []
    for name, text in formulas:
        f = parse_ltl(text)
        validate(f)
        parsed.append((name, f, text))
    g = run.graph()
    lines = run.header() + [f"graph: {_stats_line(graph_stats(g))}", "", "[safety]"]
    ok = True
    for v in check_each(g, SAFETY_SUITE):
        ok &= v.holds
        extra = f" ({v.detail})" if v.detail else ""
        lines.append(f"{v.name}: {v.outcome}{extra}{_save_trace(run, v, v.name)}")
    lines += ["", "[ltl]"]
    for name, f, text in parsed:
        v = check_ltl(g, f, name)
        if name != "LP_OKMach":
            ok &= v.holds
        lines.append(f"{name}: {v.outcome}  {text}{_save_trace(run, v, name)}")
    lines += ["", "[LP_OKMach by policy]  (reported, not asserted)"]
    lines += _okmach_by_policy(run, g)
    report = "\n".join(lines) + "\n"
    run.write("report.txt", report)
    print(report, end="")
    return EXIT_OK if ok else EXIT_FAIL


def _refine(run: _Run) -> int:
    if run.opts.abstract is not None:
        pairs = [(run.level, Level.parse(run.opts.abstract))]
        if pairs[0][1] >= run.level:
            raise UsageError(f"{pairs[0][1].name} is not more abstract than {run.level.name}")
    else:
        pairs = [(Level(k), Level(k - 1)) for k in range(run.level, 0, -1)]
    if not pairs:
        raise UsageError("L0 refines nothing; pass a more concrete --level")
    lines = run.header()
    ok = True
    for conc, abst in pairs:
        v = check_refinement(conc, abst, run.scenario, run.depth)
        ok &= v.holds
        lines.append(f"{v}{_save_trace(run, v, f'refine-{conc.name}-{abst.name}')}")
    run.write("refinement.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_FAIL


def _decompose(run: _Run) -> int:
    comps = decompose(run.level)
    export = [{
        "role": c.name,
        "own_events": sorted(c.own),
        "external_events": {n: {"stands_for": e.stands_for, "writes": sorted(e.write_set),
                                "refinable": e.refinable}
                            for n, e in sorted(c.external.items())},
        "private": sorted(c.private),
        "shared": sorted(c.shared),
    } for c in comps]
    run.write("components.json", json.dumps(export, indent=2) + "\n")
    v = check_recomposition(run.level, run.scenario, run.depth, comps)
    lines = run.header() + [f"{v}{_save_trace(run, v, 'recomposition')}"]
    run.write("decomposition.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if v.holds else EXIT_FAIL


_HANDLERS = {
    "simulate": _simulate,
    "explore": _explore,
    "check": _check,
    "refine-check": _refine,
    "decompose-check": _decompose,
}


def run(mode: str, opts: RunOptions) -> int:
    if mode not in _HANDLERS:
        raise UsageError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    r = _Run(opts)
    if mode == "simulate" and isinstance(r.policy, Exhaustive):
        raise UsageError("simulate needs --policy seeded or priority")
    return _HANDLERS[mode](r)

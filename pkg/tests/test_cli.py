import json
import subprocess
import sys

import pytest

from sdn_evb.cli import main
from sdn_evb.runner import EXIT_FAIL, EXIT_OK, EXIT_USAGE
from sdn_evb.scenario import (
    ParseError, ValidationError, load_scenario, shipped, shipped_path,
)
from sdn_evb.traces import replay_file

S1 = str(shipped_path("s1"))
S2 = str(shipped_path("s2"))


def test_s1_fixture():
    sc = shipped("s1")
    assert [s.id for s in sc.switches] == ["s1", "s2"]
    (e1,) = sc.entries
    assert e1.switch == "s1" and e1.entry.id == "e1" and e1.entry.header == "h1"
    assert e1.entry.actions == ("1",) and sc.network().target("s1", "1") == "s2"
    assert [p.id for p in sc.packets] == ["p1"] and sc.packets[0].header == "h1"
    assert sc.env_packets == ("p1",)


def test_s2_fixture():
    sc = shipped("s2")
    assert len(sc.switches) == 3 and len(sc.packets) == 2
    headers = {p.header for p in sc.packets}
    # s2 has no entry for one of the two headers
    s2_headers = {d.entry.header for d in sc.entries if d.switch == "s2"}
    assert headers - s2_headers


def _write(tmp_path, text):
    p = tmp_path / "sc.toml"
    p.write_text(text)
    return p


def test_undeclared_switch_is_rejected(tmp_path):
    bad = _write(tmp_path, '[[switches]]\nid = "s1"\nports = { "1" = "s9" }\n')
    with pytest.raises(ValidationError, match="s9"):
        load_scenario(bad)


def test_entry_on_undeclared_switch(tmp_path):
    bad = _write(tmp_path, '[[switches]]\nid = "s1"\n[[entries]]\nid = "e1"\nswitch = "s9"\nheader = "h1"\n')
    with pytest.raises(ValidationError, match="s9"):
        load_scenario(bad)


def test_malformed_file(tmp_path):
    with pytest.raises(ParseError):
        load_scenario(_write(tmp_path, "[[switches]\n"))
    with pytest.raises(ParseError):
        load_scenario(tmp_path / "missing.toml")


def test_check_s1(tmp_path, capsys):
    assert main(["check", "--scenario", S1, "--out", str(tmp_path)]) == EXIT_OK
    report = (tmp_path / "report.txt").read_text()
    for name in ("SP_a", "SP_b", "SP_c", "typing", "LP_deliv", "LP_OKstatus"):
        assert f"{name}: Holds" in report
    assert "[LP_OKMach by policy]" in report
    assert "seeded(seed=42)" in report and "priority(seed=42)" in report


def _policy_lines(report):
    return report.split("[LP_OKMach by policy]")[1]


def test_check_without_e1_changes_the_policy_report(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["check", "--scenario", S1, "--out", str(a)]) == EXIT_OK
    code = main(["check", "--scenario", str(shipped_path("s1_no_e1")), "--out", str(b)])
    ra, rb = (a / "report.txt").read_text(), (b / "report.txt").read_text()
    assert code == EXIT_OK
    assert _policy_lines(ra) != _policy_lines(rb)
    for name in ("SP_a", "SP_b", "SP_c"):
        assert f"{name}: Holds" in rb
    for name in ("LP_deliv", "LP_OKstatus", "LP_OKMach"):
        assert f"\n{name}: " in rb


def test_failing_formula_exits_1_and_saves_a_trace(tmp_path):
    f = tmp_path / "f.ltl"
    f.write_text("never_status: F(e(ctl_askStatusMsg))\n")
    out = tmp_path / "out"
    assert main(["check", "--scenario", S1, "--ltl", str(f), "--out", str(out)]) == EXIT_FAIL
    assert "never_status: Fails" in (out / "report.txt").read_text()
    trace = out / "traces" / "never_status.jsonl"
    replay_file(trace, shipped("s1").initial_state("L0"))


def test_simulate_twice_is_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["simulate", "--scenario", S1, "--seed", "42", "--out", str(tmp_path / d)]) == EXIT_OK
    a = (tmp_path / "a" / "trace.jsonl").read_bytes()
    assert a == (tmp_path / "b" / "trace.jsonl").read_bytes()
    replay_file(tmp_path / "a" / "trace.jsonl", shipped("s1").initial_state("L0"))


def test_explore_writes_stats(tmp_path):
    assert main(["explore", "--scenario", S1, "--level", "L3", "--out", str(tmp_path)]) == EXIT_OK
    stats = json.loads((tmp_path / "stats.json").read_text())
    assert stats["nodes"] == 425 and stats["edges"] == 724 and stats["level"] == "L3"


def test_refine_and_decompose(tmp_path):
    assert main(["refine-check", "--scenario", S1, "--level", "L3", "--out", str(tmp_path)]) == EXIT_OK
    text = (tmp_path / "refinement.txt").read_text()
    assert text.count("Holds") == 3
    assert main(["decompose-check", "--scenario", S1, "--out", str(tmp_path)]) == EXIT_OK
    comps = json.loads((tmp_path / "components.json").read_text())
    assert [c["role"] for c in comps] == ["controller", "switches"]


@pytest.mark.parametrize("argv", [
    ["check", "--scenario", "/nonexistent.toml"],
    ["simulate", "--scenario", S1, "--policy", "exhaustive"],
    ["refine-check", "--scenario", S1, "--level", "L0"],
    ["refine-check", "--scenario", S1, "--level", "L1", "--abstract", "L2"],
])
def test_usage_errors_exit_2(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path)]) == EXIT_USAGE


def test_bad_ltl_file_exits_2(tmp_path):
    f = tmp_path / "f.ltl"
    f.write_text("F(\n")
    assert main(["check", "--scenario", S1, "--ltl", str(f), "--out", str(tmp_path)]) == EXIT_USAGE


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["teleport", "--scenario", S1])
    assert info.value.code == 2


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "sdn_evb", "explore", "--scenario", S1,
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "nodes=425" in proc.stdout

import io
import json
import subprocess
import sys

import pytest

from isthmus.cli import main
from isthmus.config import ConfigError, RunConfig, Thresholds, load_config
from isthmus.core import BlockId, ObservationState, TimeBinning, parse_block
from isthmus.detectors import PeninsulaEvent
from isthmus.io import (
    DataError,
    ingest_observations,
    ingest_routing_table,
    read_peninsula_events,
    read_traceroutes,
    write_peninsula_events,
    write_traceroutes,
)
from isthmus.scenario import load_scenario
from isthmus.simulator import ProbingModel, synthesize_traceroutes


def test_tsv_ingest_counts_drops(tmp_path):
    lines = ["# time vp block state"]
    for i in range(997):
        lines.append(f"{i}\tv{i % 3}\t10.0.{i % 200}.0/24\t{'UD?'[i % 3]}")
    lines += ["12\tv1\t10.0.0.0/16\tU", "oops\tv1\t10.0.0.0\tU", "13\tv1\t10.0.0.0"]
    p = tmp_path / "obs.tsv"
    p.write_text("\n".join(lines) + "\n")
    table, rep = ingest_observations(p)
    assert len(table) == 997 and rep.records_read == 1000 and rep.records_dropped == 3
    assert rep.drop_reasons == {"bad_block": 1, "bad_time": 1, "field_count": 1}


def test_empty_and_missing_files(tmp_path):
    p = tmp_path / "empty.tsv"
    p.write_text("")
    table, rep = ingest_observations(p)
    assert len(table) == 0 and rep.records_read == 0 and not rep.drop_reasons
    with pytest.raises(DataError):
        ingest_observations(tmp_path / "nope.tsv")
    with pytest.raises(DataError):
        ingest_observations(p, format="csv")


def test_atlas_ping_mapping(tmp_path):
    docs = [
        {"timestamp": 100, "prb_id": 7, "dst_addr": "80.245.176.9", "result": [{"x": "*"}, {"rtt": 31.2}, {"x": "*"}]},
        {"timestamp": 200, "prb_id": 7, "dst_addr": "80.245.176.9", "result": [{"x": "*"}] * 3},
        {"timestamp": 300, "dst_addr": "80.245.176.9", "result": [{"rtt": 1}]},
    ]
    p = tmp_path / "atlas.json"
    p.write_text("\n".join(json.dumps(d) for d in docs) + "\n{broken\n")
    table, rep = ingest_observations(p, "atlas-ping-json")
    states = [o.state for o in table]
    assert states == [ObservationState.UP, ObservationState.DOWN]
    assert table.vps == ("7",) and next(iter(table)).block == parse_block("80.245.176.0")
    assert rep.records_read == 4 and rep.drop_reasons == {"missing_field": 1, "bad_json": 1}


def test_routing_table_ingest(tmp_path):
    p = tmp_path / "rt.txt"
    p.write_text("10.0.0.0/8 1\n10.0.0.0/8\t2\n10.1.0.0/16 AS3\n10.0.0.1/8 4\nnonsense\n")
    table, rep = ingest_routing_table(p)
    assert len(table) == 2 and table.conflicts == 1
    assert rep.records_read == 5 and rep.records_dropped == 2


def test_event_file_roundtrip():
    b = TimeBinning(660, 1000)
    evs = [PeninsulaEvent(BlockId(5), 2, 4, frozenset({"W"}), frozenset({"W", "C"}))]
    buf = io.StringIO()
    write_peninsula_events(evs, b, buf)
    assert buf.getvalue().splitlines()[1] == "0.0.5.0/24\t2320\t1980\tW\tC,W"


def test_event_file_read(tmp_path):
    b = TimeBinning(660, 0)
    evs = [PeninsulaEvent(BlockId(9), 1, 3, frozenset({"A"}), frozenset({"A", "B"}))]
    p = tmp_path / "ev.tsv"
    with open(p, "w") as fh:
        write_peninsula_events(evs, b, fh)
    assert read_peninsula_events(p, b) == evs


def test_traceroute_roundtrip(tmp_path, fixtures):
    sc = load_scenario(fixtures / "three_groups.json")
    tr = synthesize_traceroutes(sc, ProbingModel(interval=3600), 3, vps=["vpB"], targets=sc.groups["C"][:1])
    p = tmp_path / "tr.jsonl"
    with open(p, "w") as fh:
        write_traceroutes(tr, fh)
    back, rep = read_traceroutes(p)
    assert back == tr and rep.records_dropped == 0


def test_config_precedence(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"window": 300, "thresholds": {"reliable_uptime": 0.9}, "flaky_combos": 4, "unrelated": 1}))
    cfg = load_config(p, {"window": 120, "reliable_uptime": None})
    assert cfg.window == 120 and cfg.thresholds.reliable_uptime == 0.9 and cfg.thresholds.flaky_combos == 4
    assert RunConfig().thresholds == Thresholds(0.001, 0.85, 10, 18000, 3)
    with pytest.raises(ConfigError):
        RunConfig().merged({"bogus": 1})
    with pytest.raises(ConfigError):
        Thresholds(reliable_uptime=1.5)
    assert cfg.header_lines()[0].startswith("# config {")


# command line -----------------------------------------------------------------


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_then_detect_three_groups(tmp_path, fixtures, capsys):
    obs = tmp_path / "obs.tsv"
    code, _, _ = run(["simulate", "--config", fixtures / "three_groups.json", "--seed", 1, "--out", obs], capsys)
    assert code == 0 and obs.stat().st_size > 0
    ev = tmp_path / "ev.tsv"
    code, _, _ = run(["detect-peninsulas", obs, "--out", ev], capsys)
    assert code == 0
    sc = load_scenario(fixtures / "three_groups.json")
    events = read_peninsula_events(ev, sc.binning)
    assert events
    b_side, c_side = set(sc.groups["B"]), set(sc.groups["C"])
    for e in events:
        assert e.block in b_side | c_side
        # the up side is the VP that is not across the missing B x C link
        assert "vpA" in e.up_set and len(e.up_set) == 2


def test_majority_no_entity(fixtures, capsys):
    code, out, _ = run(["majority", "--alloc", fixtures / "allocations.csv"], capsys)
    assert code == 0 and "# no entity exceeds 50%" in out


def test_help_and_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main(["detect-peninsulas", "--help"])
    assert e.value.code == 0
    with pytest.raises(SystemExit) as e:
        main(["detect-peninsulas", "--frobnicate", "x"])
    assert e.value.code == 1
    assert "usage" in capsys.readouterr().err


def test_data_error_exit_code(tmp_path, capsys):
    code, _, err = run(["detect-peninsulas", tmp_path / "missing.tsv"], capsys)
    assert code == 2 and "error" in err
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code, _, _ = run(["simulate", "--config", bad, "--out", tmp_path / "o.tsv"], capsys)
    assert code == 2


def test_report_header_echoes_config(tmp_path, fixtures, capsys):
    obs = tmp_path / "obs.tsv"
    run(["simulate", "--config", fixtures / "siteE_island.json", "--seed", 2, "--out", obs], capsys)
    code, out, _ = run(["detect-islands", obs, "--scenario", fixtures / "siteE_island.json", "--window", 660], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# isthmus") and lines[1].startswith("# config")
    body = [l for l in lines if not l.startswith("#")]
    assert len(body) == 1 and body[0].startswith("E\t3960\t3960")


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "isthmus.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "simulate" in res.stdout


def test_analysis_subcommands_run(tmp_path, fixtures, capsys):
    sc_path = fixtures / "three_groups.json"
    obs, ev, tr, rt = (tmp_path / n for n in ("obs.tsv", "ev.tsv", "tr.jsonl", "rt.txt"))
    assert run(["simulate", "--config", sc_path, "--seed", 4, "--out", obs, "--traceroutes", tr], capsys)[0] == 0
    assert run(["detect-peninsulas", obs, "--out", ev], capsys)[0] == 0
    sc = load_scenario(sc_path)
    rt.write_text("".join(f"{n.prefix} {n.asn}\n" for n in sc.nodes if n.prefix is not None) or "10.0.0.0/8 1\n")
    for argv in (
        ["analyze", "fractions", obs],
        ["analyze", "convergence", obs],
        ["analyze", "similarity", obs],
        ["analyze", "durations", ev],
        ["analyze", "sizes", ev, "--routes", rt],
        ["analyze", "halts", tr, "--routes", rt],
        ["detect-islands", obs, "--scenario", sc_path, "--suspects"],
        ["detect-country", obs, "--country", "vpA=US", "--country", "vpB=DE", "--country", "vpC=DE"],
        ["validate", obs, "--ark", obs, "--long-event-s", 0, "--confirmations", 1],
        ["report", obs],
    ):
        code, out, err = run(argv, capsys)
        assert code == 0, (argv, err)
        assert out.startswith("# isthmus"), argv
    # identical inputs give identical bytes
    assert run(["analyze", "convergence", obs], capsys)[1] == run(["analyze", "convergence", obs], capsys)[1]

"""``isthmus`` command line.

Exit status: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator, Sequence, TextIO

from . import __version__
from .analysis import durations as dur_mod
from .analysis.fractions import NoMeasurements, blocktime_fractions, convergence_curve
from .analysis.routing import (
    FRACTION_BIN_LABELS,
    group_by_prefix,
    halt_table,
    per_vp_halts,
    prefix_fraction_heatmap,
)
from .analysis.similarity import similarity_matrix
from .analysis.validation import ArkThresholds, ark_comparison, confusion_metrics
from .config import ConfigError, RunConfig, load_config
from .core import BlockId, ParseError, format_block, parse_block
from .detectors import country_peninsula_events, detect
from .io import (
    DataError,
    ingest_observations,
    ingest_routing_table,
    read_allocations,
    read_peninsula_events,
    read_traceroutes,
    write_island_events,
    write_observations,
    write_peninsula_events,
    write_traceroutes,
)
from .oracle import majority_control
from .scenario import ScenarioError, load_scenario, scenario_from_dict
from .simulator import (
    ProbingModel,
    ScenarioConfig,
    generate_scenario,
    sample_observations,
    synthesize_traceroutes,
)

log = logging.getLogger("isthmus")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@contextmanager
def _output(path: str | None) -> Iterator[TextIO]:
    if path in (None, "-"):
        yield sys.stdout
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        yield fh


def _config(args: argparse.Namespace) -> RunConfig:
    cli: dict[str, Any] = {"window": getattr(args, "window", None), "epoch": getattr(args, "epoch", None)}
    if getattr(args, "seed", None) is not None:
        cli["seed"] = args.seed
    for name in ("address_island_eps", "reliable_uptime", "flaky_combos", "long_event_s", "confirmations"):
        cli[name] = getattr(args, name, None)
    return load_config(getattr(args, "config", None), cli)


def _header(out: TextIO, cfg: RunConfig, command: str) -> None:
    out.write(f"# isthmus {__version__} {command}\n")
    for line in cfg.header_lines():
        out.write(line + "\n")


def _load_obs(args: argparse.Namespace):
    table, report = ingest_observations(args.observations, args.format)
    if report.records_dropped:
        log.warning("%s: dropped %d of %d records %s", args.observations, report.records_dropped, report.records_read, dict(report.drop_reasons))
    return table, report


def _homes(args: argparse.Namespace) -> dict[str, BlockId | None]:
    if not getattr(args, "scenario", None):
        return {}
    sc = load_scenario(args.scenario)
    return {k: v.home_block for k, v in sc.vps.items()}


# --- simulate ---------------------------------------------------------------


def _scenario_and_probing(doc: dict, seed: int):
    if "nodes" in doc:
        scenario = scenario_from_dict(doc)
    else:
        known = {f.name for f in dataclasses.fields(ScenarioConfig)}
        gen = {k: v for k, v in doc.items() if k in known}
        scenario = generate_scenario(ScenarioConfig.from_dict(gen), seed)
    raw = doc.get("probing", {})
    if raw and all(isinstance(v, dict) for v in raw.values()) and set(raw) <= set(scenario.vps):
        probing: Any = {k: ProbingModel.from_dict(v) for k, v in raw.items()}
    else:
        probing = ProbingModel.from_dict(raw) if raw else ProbingModel(scenario.binning.window)
    horizon = int(doc.get("horizon", doc.get("meta", {}).get("horizon", 86400)))
    return scenario, probing, horizon


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {args.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{args.config}: {exc}") from None
    scenario, probing, horizon = _scenario_and_probing(doc, args.seed)
    if args.horizon:
        horizon = args.horizon
    table = sample_observations(scenario, probing, horizon, args.seed)
    with _output(args.out) as out:
        out.write(f"# isthmus {__version__} simulate seed={args.seed} horizon={horizon}\n")
        write_observations(table, out)
    if args.traceroutes:
        tr_model = ProbingModel.from_dict(doc["traceroute_probing"]) if "traceroute_probing" in doc else ProbingModel.ark()
        window = tuple(doc.get("traceroute_window", (scenario.start, scenario.start + horizon)))
        targets = [parse_block(b) for b in doc["traceroute_targets"]] if "traceroute_targets" in doc else None
        traces = synthesize_traceroutes(
            scenario, tr_model, args.seed, doc.get("traceroute_vps"), targets, window, doc.get("halt_mix")
        )
        with _output(args.traceroutes) as out:
            write_traceroutes(traces, out)
    if args.scenario_out:
        from .scenario import save_scenario

        save_scenario(scenario, args.scenario_out)
    return 0


# --- detection --------------------------------------------------------------


def cmd_detect_peninsulas(args: argparse.Namespace) -> int:
    cfg = _config(args)
    table, _ = _load_obs(args)
    det = detect(table, cfg.binning, _homes(args), cfg.thresholds.address_island_eps)
    with _output(args.out) as out:
        _header(out, cfg, "detect-peninsulas")
        write_peninsula_events(det.peninsulas, cfg.binning, out)
    return 0


def cmd_detect_islands(args: argparse.Namespace) -> int:
    cfg = _config(args)
    table, _ = _load_obs(args)
    det = detect(table, cfg.binning, _homes(args), cfg.thresholds.address_island_eps)
    with _output(args.out) as out:
        _header(out, cfg, "detect-islands")
        write_island_events(det.islands, cfg.binning, out)
        if args.suspects:
            out.write("# suspected peninsulas (long runs that never bottomed out)\n")
            for ev in det.suspected_peninsulas:
                out.write(f"# {ev.vp}\t{cfg.binning.round_start(ev.start_round)}\t{ev.rounds * cfg.binning.window}\t{ev.min_reachable_fraction:.6f}\n")
    return 0


def _countries(args: argparse.Namespace) -> dict[str, str]:
    out: dict[str, str] = {}
    if args.scenario:
        out.update({k: v.country for k, v in load_scenario(args.scenario).vps.items()})
    for item in args.country or ():
        if "=" not in item:
            raise UsageError(f"--country expects VP=CC, got {item!r}")
        vp, cc = item.split("=", 1)
        out[vp] = cc
    if not out:
        raise UsageError("need --scenario or --country VP=CC to know VP locations")
    return out


def cmd_detect_country(args: argparse.Namespace) -> int:
    cfg = _config(args)
    countries = _countries(args)
    table, _ = _load_obs(args)
    det = detect(table, cfg.binning, _homes(args), cfg.thresholds.address_island_eps)
    full, single = country_peninsula_events(det.classified, countries)
    with _output(args.out) as out:
        _header(out, cfg, "detect-country")
        out.write("# block\tcountry\tstart_unix\tduration_s\tsingle_vp_country\n")
        for ev in sorted(full + single, key=lambda e: (e.block, e.start_round, e.singleton)):
            out.write(
                f"{format_block(ev.block)}\t{ev.country}\t{cfg.binning.round_start(ev.start_round)}\t"
                f"{(ev.end_round - ev.start_round + 1) * cfg.binning.window}\t{int(ev.singleton)}\n"
            )
    return 0


# --- analyze ----------------------------------------------------------------


def cmd_fractions(args: argparse.Namespace) -> int:
    cfg = _config(args)
    table, _ = _load_obs(args)
    det = detect(table, cfg.binning, _homes(args), cfg.thresholds.address_island_eps)
    min_rounds = max(1, -(-args.min_event_s // cfg.binning.window)) if args.min_event_s else 1
    f = blocktime_fractions(det.classified, min_rounds)
    with _output(args.out) as out:
        _header(out, cfg, "analyze fractions")
        out.write(f"# min_event_rounds {min_rounds}\n# class fraction\n")
        out.write(f"all_up {f.all_up:.9f}\nall_down {f.all_down:.9f}\ndisagreement {f.disagreement:.9f}\n")
        out.write(f"# measured_cells {f.measured}\n")
    return 0


def cmd_convergence(args: argparse.Namespace) -> int:
    cfg = _config(args)
    table, _ = _load_obs(args)
    det = detect(table, cfg.binning, _homes(args), cfg.thresholds.address_island_eps)
    min_rounds = max(1, -(-args.min_event_s // cfg.binning.window)) if args.min_event_s else 1
    with _output(args.out) as out:
        _header(out, cfg, "analyze convergence")
        out.write("# k subsets mean_all_up mean_all_down mean_disagreement min_disagreement max_disagreement\n")
        for p in convergence_curve(det.classified, 2, min_rounds):
            out.write(
                f"{p.k} {p.subsets} {p.mean_all_up:.9f} {p.mean_all_down:.9f} {p.mean_disagreement:.9f} "
                f"{p.min_disagreement:.9f} {p.max_disagreement:.9f}\n"
            )
    return 0


def _event_durations(path: str) -> list[float]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split()
            try:
                out.append(float(parts[2] if len(parts) >= 3 else parts[0]))
            except (ValueError, IndexError):
                raise DataError(f"{path}:{n}: no duration field") from None
    return out


def cmd_durations(args: argparse.Namespace) -> int:
    cfg = _config(args)
    try:
        cdf = dur_mod.duration_distributions(_event_durations(args.events))
    except OSError as exc:
        raise DataError(f"cannot read {args.events}: {exc.strerror}") from None
    with _output(args.out) as out:
        _header(out, cfg, "analyze durations")
        out.write("# duration_s count_cdf time_weighted_cdf\n")
        for (d, c), (_, w) in zip(cdf.count, cdf.time_weighted):
            out.write(f"{d:g} {c:.9f} {w:.9f}\n")
    return 0


def cmd_sizes(args: argparse.Namespace) -> int:
    cfg = _config(args)
    routes, _ = ingest_routing_table(args.routes)
    events = read_peninsula_events(args.events, cfg.binning)
    measurable = {e.block for e in events}
    if args.measurable:
        table, _ = ingest_observations(args.measurable, "tsv")
        measurable = {BlockId(int(b)) for b in table.blocks()}
    groups = group_by_prefix(events, routes, measurable, cfg.binning.window, cfg.binning.epoch)
    heat = prefix_fraction_heatmap(groups, args.weight)
    with _output(args.out) as out:
        _header(out, cfg, "analyze sizes")
        out.write("# fraction bins: " + " ".join(f"{i}={lab}" for i, lab in enumerate(FRACTION_BIN_LABELS)) + "\n")
        out.write(f"# prefix_length fraction_bin {args.weight}\n")
        for (length, fbin), v in heat.items():
            out.write(f"{length} {fbin} {v:g}\n")
        out.write("# groups: prefix start_hour duration_hour up_set blocks fraction\n")
        for g in groups:
            out.write(f"# {g.prefix.prefix} {g.start_bin} {g.duration_bin} {','.join(sorted(g.up_set))} {len(g.blocks)} {g.fraction:.6f}\n")
    return 0


def cmd_similarity(args: argparse.Namespace) -> int:
    cfg = _config(args)
    table, _ = _load_obs(args)
    det = detect(table, cfg.binning, _homes(args), cfg.thresholds.address_island_eps)
    sim = similarity_matrix(det.classified)
    with _output(args.out) as out:
        _header(out, cfg, "analyze similarity")
        out.write("# vp_a vp_b p1 p0 d_star s\n")
        for pair in sorted(sim.counts, key=sorted):
            a, b = sorted(pair)
            c = sim.counts[pair]
            s = "nan" if c.score is None else f"{c.score:.6f}"
            out.write(f"{a} {b} {c.p1} {c.p0} {c.d_star} {s}\n")
    return 0


def cmd_halts(args: argparse.Namespace) -> int:
    cfg = _config(args)
    routes, _ = ingest_routing_table(args.routes)
    traces, report = read_traceroutes(args.traces)
    summary = per_vp_halts(traces, routes)
    with _output(args.out) as out:
        _header(out, cfg, "analyze halts")
        out.write(f"# traces {report.records_kept} dropped {report.records_dropped}\n")
        out.write("# position vps share\n")
        out.write(f"at_as {len(summary.at_as)} {summary.at_share:.4f}\n")
        out.write(f"before_as {len(summary.before_as)} {summary.before_share:.4f}\n")
        out.write(f"reached {len(summary.reached)} {len(summary.reached) / max(1, summary.total_vps):.4f}\n")
        if args.observations:
            table, _ = ingest_observations(args.observations, args.format)
            det = detect(table, cfg.binning)
            lookup = {}
            for i in range(len(det.classified)):
                lookup[(int(det.classified.block[i]), int(det.classified.round[i]))] = int(bin(int(det.classified.up[i])).count("1"))
            rows = halt_table(traces, routes, lambda b, t: lookup.get((b.prefix24, cfg.binning.bin(t))))
            out.write("# sites_up as_at as_before prefix_at prefix_before unmapped\n")
            for k, h in rows.items():
                out.write(f"{k} {h.as_at} {h.as_before} {h.prefix_at} {h.prefix_before} {h.unmapped}\n")
    return 0


# --- validate / majority / report --------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = _config(args)
    table, _ = _load_obs(args)
    ark, _ = ingest_observations(args.ark, args.ark_format)
    det = detect(table, cfg.binning, _homes(args), cfg.thresholds.address_island_eps)
    th = cfg.thresholds
    res = ark_comparison(
        det.classified,
        ark,
        ArkThresholds(th.reliable_uptime, th.flaky_combos, th.long_event_s, th.confirmations, not args.no_bracket),
    )
    with _output(args.out) as out:
        _header(out, cfg, "validate")
        out.write("sites_up,conflicting,all_down,all_up\n")
        for k in range(res.vps + 1):
            row = res.row(k)
            out.write(f"{k},{','.join(str(n) for n in row.values())}\n")
        for name, c in (("strict", res.strict), ("loose", res.loose)):
            m = confusion_metrics(c)
            fmt = lambda x: "undefined" if x is None else f"{x:.3f}"  # noqa: E731
            out.write(f"# {name} tp={c.tp} fp={c.fp} fn={c.fn} tn={c.tn} precision={fmt(m.precision)} recall={fmt(m.recall)} f1={fmt(m.f1)}\n")
        out.write(f"# discarded {json.dumps(res.discarded, sort_keys=True)}\n")
    return 0


MEASURES = ("active_v4", "alloc_v4", "alloc_v6")


def cmd_majority(args: argparse.Namespace) -> int:
    rows = read_allocations(args.alloc)
    try:
        totals = {r["kind"]: r for r in rows if r["kind"] == "total"}["total"]
    except KeyError:
        raise DataError("allocation file needs a row with kind=total") from None
    measures = [args.measure] if args.measure else [m for m in MEASURES if m in totals]
    any_majority = False
    with _output(args.out) as out:
        out.write("measure,kind,entity,share\n")
        for m in measures:
            for kind in sorted({r["kind"] for r in rows} - {"total"}):
                try:
                    alloc = {r["entity"]: float(r[m]) for r in rows if r["kind"] == kind}
                    total = float(totals[m])
                except (KeyError, ValueError):
                    raise DataError(f"bad or missing column {m!r}") from None
                top = max(alloc.items(), key=lambda kv: kv[1])
                out.write(f"{m},{kind},{top[0]},{top[1] / total:.4f}\n")
                for entity, share in majority_control(alloc, total):
                    any_majority = True
                    out.write(f"# MAJORITY {m} {kind} {entity} {share:.4f}\n")
        if not any_majority:
            out.write("# no entity exceeds 50%\n")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    cfg = _config(args)
    table, report = _load_obs(args)
    det = detect(table, cfg.binning, _homes(args), cfg.thresholds.address_island_eps)
    with _output(args.out) as out:
        _header(out, cfg, "report")
        out.write("metric,value\n")
        out.write(f"records_read,{report.records_read}\nrecords_dropped,{report.records_dropped}\n")
        out.write(f"vps,{len(table.vps)}\nblocks,{len(table.blocks())}\n")
        try:
            f = blocktime_fractions(det.classified)
            out.write(f"all_up,{f.all_up:.9f}\nall_down,{f.all_down:.9f}\ndisagreement,{f.disagreement:.9f}\n")
        except NoMeasurements:
            out.write("all_up,undefined\nall_down,undefined\ndisagreement,undefined\n")
        out.write(f"peninsula_events,{len(det.peninsulas)}\nisland_events,{len(det.islands)}\n")
        out.write(f"suspected_peninsulas,{len(det.suspected_peninsulas)}\n")
    return 0


# --- parser -----------------------------------------------------------------


def _common(p: argparse.ArgumentParser, obs: bool = True) -> None:
    if obs:
        p.add_argument("observations", help="observation file")
        p.add_argument("--format", default="tsv", choices=("tsv", "atlas-ping-json"))
        p.add_argument("--scenario", help="scenario JSON giving VP home blocks and countries")
    p.add_argument("--config", help="run configuration JSON")
    p.add_argument("--out", "-o", help="output file (default stdout)")
    p.add_argument("--window", type=int, help="round length in seconds")
    p.add_argument("--epoch", type=int, help="time of round 0")
    p.add_argument("--address-island-eps", type=float, dest="address_island_eps")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="isthmus", description="Peninsula and island detection toolkit.")
    parser.add_argument("--version", action="version", version=f"isthmus {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a scenario and sample observations")
    p.add_argument("--config", required=True, help="scenario or generator JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--horizon", type=int, help="seconds to simulate (overrides the config)")
    p.add_argument("--traceroutes", help="also write synthetic traceroutes (JSON lines)")
    p.add_argument("--scenario-out", help="write the materialised scenario JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect-peninsulas", help="peninsula events from observations")
    _common(p)
    p.set_defaults(func=cmd_detect_peninsulas)

    p = sub.add_parser("detect-islands", help="island events per VP")
    _common(p)
    p.add_argument("--suspects", action="store_true", help="also list demoted long events")
    p.set_defaults(func=cmd_detect_islands)

    p = sub.add_parser("detect-country", help="country-level peninsulas")
    _common(p)
    p.add_argument("--country", action="append", metavar="VP=CC")
    p.set_defaults(func=cmd_detect_country)

    p = sub.add_parser("analyze", help="aggregate analyses")
    asub = p.add_subparsers(dest="analysis", required=True, parser_class=_Parser)
    a = asub.add_parser("fractions", help="block-time fractions")
    _common(a)
    a.add_argument("--min-event-s", type=int, default=0)
    a.set_defaults(func=cmd_fractions)
    a = asub.add_parser("convergence", help="fractions over VP subsets")
    _common(a)
    a.add_argument("--min-event-s", type=int, default=0)
    a.set_defaults(func=cmd_convergence)
    a = asub.add_parser("durations", help="duration CDFs of an event file")
    a.add_argument("events")
    _common(a, obs=False)
    a.set_defaults(func=cmd_durations)
    a = asub.add_parser("sizes", help="peninsula-prefix fractions")
    a.add_argument("events")
    a.add_argument("--routes", required=True)
    a.add_argument("--measurable", help="observation file whose blocks count as measurable")
    a.add_argument("--weight", choices=("count", "duration"), default="count")
    _common(a, obs=False)
    a.set_defaults(func=cmd_sizes)
    a = asub.add_parser("similarity", help="pairwise VP similarity")
    _common(a)
    a.set_defaults(func=cmd_similarity)
    a = asub.add_parser("halts", help="where failed traceroutes stop")
    a.add_argument("traces")
    a.add_argument("--routes", required=True)
    a.add_argument("--observations", help="dense observations for the sites-up breakdown")
    a.add_argument("--format", default="tsv", choices=("tsv", "atlas-ping-json"))
    _common(a, obs=False)
    a.set_defaults(func=cmd_halts)

    p = sub.add_parser("validate", help="compare against sparse reference observations")
    _common(p)
    p.add_argument("--ark", required=True, help="reference observation file")
    p.add_argument("--ark-format", default="tsv", choices=("tsv", "atlas-ping-json"))
    p.add_argument("--reliable-uptime", type=float, dest="reliable_uptime")
    p.add_argument("--flaky-combos", type=int, dest="flaky_combos")
    p.add_argument("--long-event-s", type=int, dest="long_event_s")
    p.add_argument("--confirmations", type=int)
    p.add_argument("--no-bracket", action="store_true", help="do not require reference successes around all-down events")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("majority", help="does any entity control more than half")
    p.add_argument("--alloc", required=True, help="allocation CSV")
    p.add_argument("--measure", choices=MEASURES)
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_majority)

    p = sub.add_parser("report", help="summary of one observation file")
    _common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"isthmus: {exc}", file=sys.stderr)
        return 1
    except (DataError, ScenarioError, ConfigError, ParseError, NoMeasurements, ValueError, OSError) as exc:
        print(f"isthmus: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Reading and writing the plain-text record formats.

Observation TSV: ``time<TAB>vp<TAB>block<TAB>state`` with state U, D or ?.
Lines starting with ``#`` are comments.  Event files are TSV sorted by
block, then start.  Outage files from other sources plug in through
:data:`OBSERVATION_READERS`: register a function yielding
``(time, vp, block, state)`` tuples or raising ``ValueError`` per bad line.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence, TextIO

import numpy as np

from .analysis.routing import Halt, Hop, RoutingTable, TracerouteRecord, parse_routing_line
from .core import (
    BlockId,
    ObservationState,
    ObservationTable,
    ParseError,
    Prefix,
    TimeBinning,
    format_address,
    format_block,
    parse_address,
    parse_block,
)
from .detectors import IslandEvent, PeninsulaEvent


class DataError(Exception):
    """Input that cannot be used at all (missing file, unknown format)."""


@dataclass
class IngestReport:
    records_read: int = 0
    records_kept: int = 0
    drop_reasons: Counter = field(default_factory=Counter)

    @property
    def records_dropped(self) -> int:
        return sum(self.drop_reasons.values())

    def drop(self, reason: str) -> None:
        self.drop_reasons[reason] += 1

    def check(self) -> None:
        assert self.records_read == self.records_kept + self.records_dropped


Row = tuple[int, str, BlockId, ObservationState]


def _tsv_rows(lines: Iterable[str], report: IngestReport) -> Iterator[Row]:
    for line in lines:
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        report.records_read += 1
        parts = line.split("\t") if "\t" in line else line.split()
        if len(parts) != 4:
            report.drop("field_count")
            continue
        t, vp, blk, st = parts
        try:
            time = int(t)
            if time < 0:
                raise ValueError
        except ValueError:
            report.drop("bad_time")
            continue
        try:
            block = parse_block(blk)
        except ParseError:
            report.drop("bad_block")
            continue
        try:
            state = ObservationState(st)
        except ValueError:
            report.drop("bad_state")
            continue
        if not vp:
            report.drop("bad_vp")
            continue
        report.records_kept += 1
        yield time, vp, block, state


def _atlas_rows(lines: Iterable[str], report: IngestReport) -> Iterator[Row]:
    """Ping results as JSON lines; any reply means Up.

    Accepts either a JSON array or one object per line with ``timestamp``,
    ``prb_id`` (or ``vp``), ``dst_addr`` and ``result``: a list of
    ``{"rtt": ...}`` or ``{"x": "*"}`` entries.
    """
    text = "".join(lines)
    stripped = text.strip()
    if stripped.startswith("["):
        try:
            docs: list = json.loads(stripped)
        except json.JSONDecodeError:
            report.records_read += 1
            report.drop("bad_json")
            return
        items = [(d, None) for d in docs]
    else:
        items = []
        for raw in text.splitlines():
            if not raw.strip():
                continue
            try:
                items.append((json.loads(raw), None))
            except json.JSONDecodeError:
                items.append((None, "bad_json"))
    for doc, err in items:
        report.records_read += 1
        if err or not isinstance(doc, dict):
            report.drop(err or "bad_json")
            continue
        try:
            time = int(doc["timestamp"])
            vp = str(doc.get("prb_id", doc.get("vp")))
            block = BlockId(parse_address(doc["dst_addr"]) >> 8)
            results = doc["result"]
        except (KeyError, TypeError, ValueError, ParseError):
            report.drop("missing_field")
            continue
        if vp == "None" or not isinstance(results, list) or not results:
            report.drop("missing_field")
            continue
        ok = any(isinstance(r, dict) and "rtt" in r for r in results)
        report.records_kept += 1
        yield time, vp, block, ObservationState.UP if ok else ObservationState.DOWN


OBSERVATION_READERS: dict[str, Callable[[Iterable[str], IngestReport], Iterator[Row]]] = {
    "tsv": _tsv_rows,
    "atlas-ping-json": _atlas_rows,
}


def _table_from_rows(rows: Iterable[Row], vps: Sequence[str] | None = None) -> ObservationTable:
    rows = list(rows)
    names = list(vps) if vps else sorted({r[1] for r in rows})
    index = {n: i for i, n in enumerate(names)}
    for r in rows:
        if r[1] not in index:
            index[r[1]] = len(names)
            names.append(r[1])
    table = ObservationTable(
        tuple(names),
        np.array([r[0] for r in rows], np.int64),
        np.array([index[r[1]] for r in rows], np.int16),
        np.array([r[2].prefix24 for r in rows], np.int32),
        np.array([r[3].code for r in rows], np.int8),
    )
    return table.sorted()


def ingest_observations(path: str | Path, format: str = "tsv", vps: Sequence[str] | None = None) -> tuple[ObservationTable, IngestReport]:
    """Parse an observation file; bad lines are counted in the report, never skipped silently."""
    reader = OBSERVATION_READERS.get(format)
    if reader is None:
        raise DataError(f"unknown observation format {format!r}")
    report = IngestReport()
    try:
        with open(path, encoding="utf-8") as fh:
            table = _table_from_rows(reader(fh, report), vps)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    report.check()
    return table, report


def write_observations(table: ObservationTable, out: TextIO) -> None:
    names = table.vps
    sym = {1: "U", 0: "D", -1: "?"}
    cache: dict[int, str] = {}
    for t, v, b, s in zip(table.time.tolist(), table.vp.tolist(), table.block.tolist(), table.state.tolist()):
        blk = cache.get(b)
        if blk is None:
            blk = cache[b] = format_block(BlockId(b))
        out.write(f"{t}\t{names[v]}\t{blk}\t{sym[s]}\n")


def ingest_routing_table(path: str | Path) -> tuple[RoutingTable, IngestReport]:
    report = IngestReport()
    table = RoutingTable()
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    with fh:
        for line in fh:
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            report.records_read += 1
            try:
                entry = parse_routing_line(line)
            except (ValueError, ParseError):
                report.drop("malformed")
                continue
            report.records_kept += 1
            table.add(entry)
    report.check()
    return table, report


def _csv(names: Iterable[str]) -> str:
    return ",".join(sorted(names)) or "-"


def write_peninsula_events(events: Iterable[PeninsulaEvent], binning: TimeBinning, out: TextIO) -> None:
    out.write("# block\tstart_unix\tduration_s\tup_set\tobserved_set\n")
    for ev in sorted(events, key=lambda e: (e.block, e.start_round, sorted(e.up_set))):
        out.write(
            f"{format_block(ev.block)}\t{binning.round_start(ev.start_round)}\t{ev.rounds * binning.window}\t"
            f"{_csv(ev.up_set)}\t{_csv(ev.observed_set)}\n"
        )


def write_island_events(events: Iterable[IslandEvent], binning: TimeBinning, out: TextIO) -> None:
    out.write("# vp\tstart_unix\tduration_s\tmin_reachable_fraction\taddress_island\n")
    for ev in sorted(events, key=lambda e: (e.vp, e.start_round)):
        out.write(
            f"{ev.vp}\t{binning.round_start(ev.start_round)}\t{ev.rounds * binning.window}\t"
            f"{ev.min_reachable_fraction:.6f}\t{int(ev.address_island)}\n"
        )


def read_peninsula_events(path: str | Path, binning: TimeBinning) -> list[PeninsulaEvent]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 5:
                raise DataError(f"{path}:{n}: expected 5 fields")
            start, dur = int(parts[1]), int(parts[2])
            r0 = binning.bin(start)
            sets = [frozenset() if p == "-" else frozenset(p.split(",")) for p in parts[3:]]
            out.append(PeninsulaEvent(parse_block(parts[0]), r0, r0 + dur // binning.window - 1, sets[0], sets[1]))
    return out


def read_traceroutes(path: str | Path) -> tuple[list[TracerouteRecord], IngestReport]:
    """JSON lines as written by :meth:`TracerouteRecord.to_json`."""
    report = IngestReport()
    out = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    with fh:
        for line in fh:
            if not line.strip():
                continue
            report.records_read += 1
            try:
                d = json.loads(line)
                hops = tuple(
                    Hop(parse_address(h["addr"]), h.get("asn"), Prefix.parse(h["prefix"]) if h.get("prefix") else None)
                    for h in d.get("hops", [])
                )
                out.append(TracerouteRecord(int(d["time"]), str(d["vp"]), parse_address(d["dst"]), Halt(d["halt"]), hops))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                report.drop("malformed")
                continue
            report.records_kept += 1
    report.check()
    return out, report


def write_traceroutes(records: Iterable[TracerouteRecord], out: TextIO) -> None:
    for r in records:
        out.write(json.dumps(r.to_json(), sort_keys=True) + "\n")


def read_allocations(path: str | Path) -> list[dict[str, str]]:
    """Rows of the allocation CSV (entity, kind, then one column per measure)."""
    import csv

    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return [row for row in csv.DictReader(line for line in fh if not line.startswith("#"))]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None


__all__ = [
    "DataError",
    "IngestReport",
    "OBSERVATION_READERS",
    "format_address",
    "ingest_observations",
    "ingest_routing_table",
    "read_allocations",
    "read_peninsula_events",
    "read_traceroutes",
    "write_island_events",
    "write_observations",
    "write_peninsula_events",
    "write_traceroutes",
]

from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from isthmus.analysis import _tcrit
from isthmus.analysis.durations import duration_distributions
from isthmus.analysis.fractions import (
    NoMeasurements,
    blocktime_fractions,
    convergence_curve,
    disagreement_counts,
    subset_convergence,
)
from isthmus.analysis.routing import (
    Halt,
    Hop,
    Position,
    RoutedPrefix,
    RoutingTable,
    TracerouteRecord,
    fraction_bin,
    group_by_prefix,
    halt_classification,
    lpm,
    peninsula_prefix_fraction,
    per_vp_halts,
    prefix_fraction_heatmap,
    table_from_mapping,
)
from isthmus.analysis.similarity import PairCounts, similarity_matrix
from isthmus.analysis.stats import complementary_pair_ttests, complementary_pairs, one_sample_ttest, t_critical
from isthmus.analysis.validation import (
    LOOSE_RULES,
    STRICT_RULES,
    ArkCategory,
    ConfusionCounts,
    IslandValidation,
    confusion_metrics,
    flaky_blocks,
    fold,
    island_validation,
    reliable_blocks,
    reference_agreement_counts,
)
from isthmus.core import BlockId, Prefix, TimeBinning, parse_address, parse_block
from isthmus.detectors import ClassifiedRounds, IslandEvent, PeninsulaEvent
from isthmus.scenario import load_scenario

from scenarios import truth_classified

BIN = TimeBinning(660, 0)


def cr(vps, rows):
    """rows: (block, round, up_mask, observed_mask)."""
    rows = sorted(rows)
    a = np.array(rows, dtype=np.int64).reshape(-1, 4)
    return ClassifiedRounds(tuple(vps), BIN, a[:, 0], a[:, 1], a[:, 2].astype(np.uint64), a[:, 3].astype(np.uint64))


# fractions ------------------------------------------------------------------

def test_fractions_all_up_and_one_in_a_thousand():
    f = blocktime_fractions(cr("AB", [(1, r, 3, 3) for r in range(10)]))
    assert (f.all_up, f.all_down, f.disagreement) == (1.0, 0.0, 0.0)
    rows = [(1, r, 3, 3) for r in range(999)] + [(1, 999, 1, 3)]
    f = blocktime_fractions(cr("AB", rows))
    assert f.disagreement == pytest.approx(0.001) and f.all_up == pytest.approx(0.999)


def test_fractions_tuned_to_seventy_five_per_hundred_thousand():
    rows = [(b, r, 63, 63) for b in range(400) for r in range(10)]
    for b in (3, 77, 200):
        rows[b * 10 + 4] = (b, 4, 1, 63)
    f = blocktime_fractions(cr("ABCDEF", rows))
    assert f.disagreement == pytest.approx(7.5e-4, abs=1e-5)


def test_fractions_ignore_unmeasured_and_raise_when_empty():
    f = blocktime_fractions(cr("AB", [(1, 0, 0, 0), (1, 1, 0, 3)]))
    assert f.measured == 1 and f.all_down == 1.0
    with pytest.raises(NoMeasurements):
        blocktime_fractions(cr("AB", [(1, 0, 0, 0)]))


def test_min_event_filter_drops_short_runs():
    rows = [(1, r, 3, 3) for r in range(10)] + [(1, 10, 1, 3)] + [(1, r, 0, 3) for r in range(11, 20)]
    f = blocktime_fractions(cr("AB", rows), min_event_rounds=6)
    assert f.measured == 19 and f.disagreement == 0 and f.all_down == pytest.approx(9 / 19)


masks = st.lists(st.tuples(st.integers(0, 5), st.integers(0, 9), st.integers(0, 15), st.integers(0, 15)), min_size=1, max_size=80)


def _dedup(rows):
    d = {(b, r): (u & o, o) for b, r, u, o in rows}
    return [(b, r, u, o) for (b, r), (u, o) in d.items()]


@settings(max_examples=200, deadline=None)
@given(masks)
def test_fractions_sum_to_one(rows):
    c = cr("ABCD", _dedup(rows))
    try:
        f = blocktime_fractions(c)
    except NoMeasurements:
        return
    assert abs(f.all_up + f.all_down + f.disagreement - 1) <= 1e-9


@settings(max_examples=200, deadline=None)
@given(masks)
def test_disagreement_count_grows_with_vp_set(rows):
    c = cr("ABCD", _dedup(rows))
    for k in range(1, 4):
        for small in combinations(range(4), k):
            for extra in set(range(4)) - set(small):
                a = c.restrict(sum(1 << i for i in small)).kind
                b = c.restrict(sum(1 << i for i in small) | 1 << extra).kind
                assert np.count_nonzero(a == 3) <= np.count_nonzero(b == 3)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 15), min_size=1, max_size=60))
def test_mean_fraction_monotone_with_full_coverage(ups):
    c = cr("ABCD", [(i, 0, u, 15) for i, u in enumerate(ups)])
    curve = convergence_curve(c, k_min=1)
    for a, b in zip(curve, curve[1:]):
        assert b.mean_disagreement >= a.mean_disagreement - 1e-12
        assert b.mean_all_up <= a.mean_all_up + 1e-12


def test_subset_convergence_edges():
    c = cr("ABC", [(1, 0, 1, 7), (2, 0, 7, 7)])
    assert subset_convergence(c, 3)[0].fractions == blocktime_fractions(c)
    with pytest.raises(ValueError):
        subset_convergence(c, 4)
    assert disagreement_counts(c, 1) == [0, 0, 0]


def test_two_sided_pairs_find_every_disagreement():
    # VPs 0,1 on one side, 2,3 on the other for every disagreeing round
    rows = [(b, r, 0b0011, 0b1111) for b in range(5) for r in range(4)]
    c = cr("ABCD", rows)
    for combo, n in zip(combinations(range(4), 2), disagreement_counts(c, 2)):
        cross = (combo[0] < 2) != (combo[1] < 2)
        assert n == (20 if cross else 0)


def test_polish_all_down_nonincreasing(fixtures):
    sc = load_scenario(fixtures / "polish_peninsula.json")
    vps = ["W", "C", "J", "G", "E", "N"]
    c, _ = truth_classified(sc, vps, sc.meta["horizon"])
    curve = convergence_curve(c)
    downs = [p.mean_all_down for p in curve]
    assert [p.k for p in curve] == [2, 3, 4, 5, 6]
    assert all(b <= a + 1e-12 for a, b in zip(downs, downs[1:]))
    assert downs[0] > downs[-1] == 0


# t-test -----------------------------------------------------------------------

def test_ttest_examples():
    r = one_sample_ttest([1.1, 1.2, 1.3])
    assert r.t == pytest.approx(20.7846, abs=1e-3) and r.reject and r.df == 2
    r = one_sample_ttest([0.5, 0.5, 0.5], mu0=0.5)
    assert r.t == 0 and not r.reject
    with pytest.raises(ValueError):
        one_sample_ttest([1.0, 1.0])
    with pytest.raises(ValueError):
        one_sample_ttest([1.0])


def test_critical_table_matches_scipy():
    for conf in _tcrit.CONFIDENCES:
        for df in (1, 2, 5, 20, 100, 200):
            assert t_critical(df, conf) == pytest.approx(sps.t.ppf(conf, df), rel=1e-6)
        assert t_critical(5000, conf) == pytest.approx(sps.norm.ppf(conf), rel=1e-6)
    with pytest.raises(ValueError):
        t_critical(3, 0.9)


def test_complementary_pairs_of_six():
    pairs = complementary_pairs(list("ABCDEF"))
    assert len(pairs) == 10
    assert all(set(a) | set(b) == set("ABCDEF") and not set(a) & set(b) for a, b in pairs)


def test_equal_mean_pairs_rarely_reject():
    rng = np.random.default_rng(0)
    vps = list("ABCDEF")
    pairs = complementary_pairs(vps)
    trials, rejections = 200, 0
    for _ in range(trials):
        series = {}
        for a, b in pairs:
            series[a] = rng.normal(0.5, 0.05, 21).tolist()
            series[b] = rng.normal(0.5, 0.05, 21).tolist()
        res = complementary_pair_ttests(series, pairs)
        rejections += sum(r.reject for r in res.values())
    # per-test alpha 0.0025, ten tests per trial
    assert rejections / (trials * 10) <= 0.01


# durations --------------------------------------------------------------------

def test_duration_examples():
    d = duration_distributions([3600] * 9 + [36000])
    assert d.count_at(3600) == pytest.approx(0.9) and d.time_at(3600) == pytest.approx(9 / 19)
    one = duration_distributions([500])
    assert one.count == ((500.0, 1.0),) and one.time_weighted == ((500.0, 1.0),)
    with pytest.raises(ValueError):
        duration_distributions([])
    with pytest.raises(ValueError):
        duration_distributions([0, 5])


@given(st.lists(st.integers(1, 10**6), min_size=1, max_size=50))
def test_duration_cdfs_shape(ds):
    d = duration_distributions(ds)
    for pts in (d.count, d.time_weighted):
        ys = [y for _, y in pts]
        assert ys == sorted(ys) and ys[-1] == 1.0
    for (x, c), (_, w) in zip(d.count, d.time_weighted):
        assert w <= c + 1e-12


# similarity -------------------------------------------------------------------

def test_pair_counts_formula():
    assert PairCounts(1, 1, 1).score == pytest.approx(2 / 3)
    assert PairCounts(0, 0, 10).score == 0
    assert PairCounts().score is None
    assert PairCounts(4, 0, 0).score == 1


def test_similarity_matrix():
    rows = [
        (1, 0, 0b011, 0b111),  # A,B up, C down: P1 for AB
        (1, 1, 0b100, 0b111),  # A,B down, C up: P0 for AB
        (1, 2, 0b001, 0b111),  # A up, B down: D* for AB
        (1, 3, 0b111, 0b111),  # all agree: nothing
    ]
    m = similarity_matrix(cr("ABC", rows))
    assert m.counts[frozenset("AB")] == PairCounts(1, 1, 1)
    assert m.s("A", "B") == m.s("B", "A") == pytest.approx(2 / 3)
    quiet = similarity_matrix(cr("ABC", [(1, 0, 7, 7)]))
    assert quiet.s("A", "C") is None
    with pytest.raises(ValueError):
        similarity_matrix(cr("AB", [(1, 0, 3, 3)]))


# routing ------------------------------------------------------------------------

def test_lpm_examples():
    t = table_from_mapping({"10.0.0.0/8": 1, "10.1.0.0/16": 2})
    assert lpm(t, parse_block("10.1.2.0")) == RoutedPrefix(Prefix.parse("10.1.0.0/16"), 2)
    assert lpm(t, parse_block("10.2.2.0")).asn == 1
    assert lpm(t, parse_block("11.0.0.0")) is None
    assert not t.add(RoutedPrefix(Prefix.parse("10.0.0.0/8"), 9)) and t.conflicts == 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2**32 - 1), st.integers(0, 32), st.integers(1, 9)), max_size=60),
       st.lists(st.integers(0, 2**24 - 1), min_size=1, max_size=40))
def test_lpm_matches_linear_scan(raw, probes):
    entries = {}
    for addr, length, asn in raw:
        mask = (0xFFFFFFFF << (32 - length)) & 0xFFFFFFFF
        entries.setdefault((addr & mask, length), asn)
    t = RoutingTable(RoutedPrefix(Prefix(b, l), a) for (b, l), a in entries.items())
    for p in probes:
        blk = BlockId(p)
        best = max((e for e in t if e.prefix.contains(blk.base)), key=lambda e: e.prefix.length, default=None)
        assert lpm(t, blk) == best


def _ev(block, start, rounds, up="W", obs="WCJGEN"):
    return PeninsulaEvent(parse_block(block), start, start + rounds - 1, frozenset(up), frozenset(obs))


def test_prefix_grouping_and_fraction():
    t = table_from_mapping({"20.0.0.0/16": 5, "30.0.0.0/24": 6})
    measurable = [parse_block(f"20.0.{i}.0") for i in range(256)] + [parse_block("30.0.0.0")]
    events = [_ev(f"20.0.{i}.0", 6, 16) for i in range(128)] + [_ev("30.0.0.0", 6, 16)]
    groups = group_by_prefix(events, t, measurable, 660)
    assert len(groups) == 1  # single-block events are dropped
    g = groups[0]
    assert g.fraction == 0.5 and len(g.blocks) == 128 and g.up_set == {"W"}
    assert peninsula_prefix_fraction(g.blocks, Prefix.parse("20.0.0.0/16"), measurable) == 0.5
    assert peninsula_prefix_fraction(g.blocks, Prefix.parse("40.0.0.0/16"), measurable) is None
    # a different up-set in the same prefix forms its own group
    more = events + [_ev(f"20.0.{i}.0", 6, 16, up="WC") for i in range(200, 202)]
    assert len(group_by_prefix(more, t, measurable, 660)) == 2


def test_fraction_bins_and_heatmap():
    assert fraction_bin(0.01) == 0 and fraction_bin(0.5) == 3 and fraction_bin(0.7) == 4 and fraction_bin(1.0) == 5
    t = table_from_mapping({"20.0.0.0/16": 5})
    measurable = [parse_block(f"20.0.{i}.0") for i in range(4)]
    groups = group_by_prefix([_ev(f"20.0.{i}.0", 0, 6) for i in range(4)], t, measurable, 660)
    assert prefix_fraction_heatmap(groups) == {(16, 5): 1}
    assert prefix_fraction_heatmap(groups, "duration") == {(16, 5): 1.0}
    with pytest.raises(ValueError):
        prefix_fraction_heatmap(groups, "weird")


def test_halt_classification():
    t = table_from_mapping({"80.240.0.0/13": 21021, "100.64.0.0/24": 21021, "198.18.0.0/15": 64496})
    tgt = Prefix.parse("80.240.0.0/13")
    dst = parse_address("80.245.176.9")

    def trace(last, halt=Halt.UNREACHABLE):
        return TracerouteRecord(0, "v", dst, halt, (Hop(parse_address("198.18.0.7")), Hop(parse_address(last))))

    hc = halt_classification(trace("100.64.0.1"), 21021, tgt, t)
    assert (hc.as_position, hc.prefix_position) == (Position.AT, Position.BEFORE)
    hc = halt_classification(trace("198.18.3.3"), 21021, tgt, t)
    assert (hc.as_position, hc.prefix_position) == (Position.BEFORE, Position.BEFORE)
    hc = halt_classification(trace("80.240.0.1"), 21021, tgt, t)
    assert hc.prefix_position is Position.AT
    hc = halt_classification(trace("9.9.9.9"), 21021, tgt, t)
    assert hc.unmapped and hc.as_position is Position.BEFORE
    assert halt_classification(trace("100.64.0.1", Halt.GAP), 21021, tgt, t) is None
    with pytest.raises(ValueError):
        TracerouteRecord(0, "v", dst, Halt.SUCCESS, (Hop(parse_address("1.1.1.1")),))
    s = per_vp_halts([trace("100.64.0.1"), TracerouteRecord(0, "w", dst, Halt.SUCCESS, (Hop(dst),))], t)
    assert s.at_as == ("v",) and s.reached == ("w",)


# validation ---------------------------------------------------------------------

def test_metrics_undefined():
    m = confusion_metrics(ConfusionCounts(0, 0, 0, 5))
    assert m.precision is None and m.recall is None and m.f1 is None


def test_agreement_table_fold():
    tbl = reference_agreement_counts()
    strict, loose = fold(tbl, 6, STRICT_RULES), fold(tbl, 6, LOOSE_RULES)
    assert (strict.tp, strict.fp, strict.fn) == (184, 251, 12)
    assert strict.fp - loose.fp == tbl[(5, ArkCategory.ALL_UP)]
    assert (loose.tp, loose.fn, loose.tn) == (strict.tp, strict.fn, strict.tn)
    assert ConfusionCounts(1, 2, 3, 4) + ConfusionCounts(1, 1, 1, 1) == ConfusionCounts(2, 3, 4, 5)
    with pytest.raises(ValueError):
        ConfusionCounts(-1)


def test_reliability_and_flaky_filters():
    rows = [(1, r, 7, 7) for r in range(20)] + [(2, r, 3 if r % 2 else 7, 7) for r in range(20)]
    c = cr("ABC", rows)
    assert reliable_blocks(c, 0.85) == {1}
    assert reliable_blocks(c, 0.5) == {1, 2}
    combos = [(3, r, r % 6 + 1, 7) for r in range(12)]
    c = cr("ABC", combos)
    assert flaky_blocks(c, 5) == {3} and flaky_blocks(c, 6) == set()


def test_island_validation_categories():
    evs = [IslandEvent("A", 1, 2, 0.0, True), IslandEvent("B", 3, 4, 0.2, False), IslandEvent("C", 5, 6, 0.1, False)]
    res = island_validation(evs, {("A", 1): 0.0, ("B", 3): 0.0, ("C", 5): 0.4})
    assert res == IslandValidation(block_island=1, address_island=1, peninsula=1)

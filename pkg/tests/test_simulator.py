import numpy as np
import pytest

from isthmus.analysis.routing import Halt, classify_trace, Position
from isthmus.core import STATE_DOWN, STATE_UP, BlockId, parse_block
from isthmus.oracle import TruthLabel, observe, truth_labels
from isthmus.scenario import ScenarioError, load_scenario
from isthmus.simulator import (
    InjectionSpec,
    ProbingModel,
    ScenarioConfig,
    generate_scenario,
    routing_table_for,
    sample_observations,
    synthesize_traceroutes,
)

H3 = 3 * 3600


def small(injections=(), blocks=100, **kw):
    return generate_scenario(ScenarioConfig(blocks=blocks, injections=tuple(injections), **kw), seed=11)


def test_no_injections_all_core():
    sc = small()
    assert set(truth_labels(sc.graph_at(0)).labels.values()) == {TruthLabel.CORE_FULL}
    homes = [v.home_block for v in sc.vps.values()]
    assert len(set(homes)) == 6


def test_peninsula_injection_labels_victim():
    sc = small([InjectionSpec("peninsula", 660, H3, victims=("10.0.5.0",), severed_from=("vp2", "vp3", "vp4", "vp5", "vp6"))])
    b = parse_block("10.0.5.0")
    if b in {v.home_block for v in sc.vps.values()}:
        pytest.skip("victim collides with a VP home")
    assert truth_labels(sc.graph_at(0))[b] is TruthLabel.CORE_FULL
    assert truth_labels(sc.graph_at(660))[b] is TruthLabel.PENINSULA
    assert truth_labels(sc.graph_at(660 + H3 - 1))[b] is TruthLabel.PENINSULA
    assert truth_labels(sc.graph_at(660 + H3))[b] is TruthLabel.CORE_FULL
    g = sc.graph_at(700)
    assert observe(g, sc.vp_home("vp1"), b).value == "U"
    assert observe(g, sc.vp_home("vp2"), b).value == "D"


def test_island_injection_on_vp():
    sc = small([InjectionSpec("island", 0, 660, victims=("vp3",))])
    assert truth_labels(sc.graph_at(0))[sc.vp_home("vp3")] is TruthLabel.ADDRESS_ISLAND
    sc = small([InjectionSpec("island", 0, 660, victims=("vp3",), island_extra_blocks=4)])
    assert truth_labels(sc.graph_at(0))[sc.vp_home("vp3")] is TruthLabel.ISLAND


@pytest.mark.parametrize(
    "spec",
    [
        InjectionSpec("peninsula", 0, 660, victims=("99.0.0.0",), severed_from=("vp1",)),
        InjectionSpec("peninsula", 0, 660, victim_count=1, severed_from=("nope",)),
        InjectionSpec("peninsula", 0, 660, victim_count=1),
        InjectionSpec("peninsula", 0, 660, victim_count=1, severed_count=6),
        InjectionSpec("island", 0, 660, victims=("ghost",)),
    ],
)
def test_config_errors(spec):
    with pytest.raises(ScenarioError):
        small([spec])


def test_injection_spec_validation():
    with pytest.raises(ScenarioError):
        InjectionSpec("flood", 0, 1)
    with pytest.raises(ScenarioError):
        InjectionSpec("outage", 0, 0)
    with pytest.raises(ValueError):
        ProbingModel(interval=0)
    with pytest.raises(ValueError):
        ProbingModel(packet_loss=1.5)
    assert ProbingModel.from_dict({"preset": "ark"}).interval == 86400


def test_generation_is_deterministic():
    cfg = ScenarioConfig(blocks=200, injections=(InjectionSpec("peninsula", 0, 1320, victim_count=3, severed_count=2),))
    a, b = generate_scenario(cfg, 4), generate_scenario(cfg, 4)
    assert a.vps == b.vps and a.deltas == b.deltas and a.meta == b.meta


def test_sampling_determinism_and_threads(monkeypatch):
    sc = small([InjectionSpec("outage", 660, 1320, victim_count=3)])
    model = ProbingModel.trinocular()
    monkeypatch.setenv("ISTHMUS_THREADS", "1")
    a = sample_observations(sc, model, 6600, seed=9)
    monkeypatch.setenv("ISTHMUS_THREADS", "4")
    b = sample_observations(sc, model, 6600, seed=9)
    for col in ("time", "vp", "block", "state"):
        np.testing.assert_array_equal(getattr(a, col), getattr(b, col))


def test_total_loss_gives_all_down():
    t = sample_observations(small(), ProbingModel(packet_loss=1.0), 3300, seed=1)
    assert len(t) == 6 * 100 * 5 and set(np.unique(t.state)) == {STATE_DOWN}


def test_lossless_matches_oracle():
    sc = small([InjectionSpec("peninsula", 660, 1980, victim_count=4, severed_count=3),
                InjectionSpec("outage", 1320, 1320, victim_count=2)])
    t = sample_observations(sc, ProbingModel(), 6600, seed=2)
    for o in list(t)[::37]:
        truth = observe(sc.graph_at(o.time), sc.vp_home(o.vp), o.block)
        assert o.state is truth


def test_conservation():
    sc = small(blocks=50)
    t = sample_observations(sc, ProbingModel(interval=600), 6000, seed=3)
    blocks = set(sc.blocks)
    assert {o.block for o in t} <= blocks and set(t.vps) <= set(sc.vps)
    per_pair = {}
    for o in t:
        per_pair.setdefault((o.vp, o.block), []).append(o.time)
    assert len(per_pair) == 6 * 50
    for times in per_pair.values():
        assert len(times) == 10 and set(np.diff(times)) == {600}


def test_ark_hit_rate_expectation():
    sc = small(blocks=300)
    t = sample_observations(sc, ProbingModel.ark(), 21 * 86400, seed=5)
    ups = np.count_nonzero(t.state == STATE_UP)
    per_pair = ups / (6 * 300)
    # binomial(21, 1/6): mean 3.5, the pair average has sd about 0.04
    assert per_pair == pytest.approx(3.5, abs=0.2)


def test_traceroutes_reachable_and_severed():
    sc = small([InjectionSpec("peninsula", 0, 86400, victims=("10.0.9.0",), severed_from=("vp2",), breakpoint="in_as")],
               blocks_per_prefix=16)
    target = parse_block("10.0.9.0")
    if target in {v.home_block for v in sc.vps.values()}:
        pytest.skip("victim collides with a VP home")
    table = routing_table_for(sc)
    traces = synthesize_traceroutes(sc, ProbingModel(interval=3600), 1, vps=["vp1", "vp2"], targets=[target])
    ok = [t for t in traces if t.vp == "vp1"]
    assert ok and all(t.halt is Halt.SUCCESS and t.hops[-1].address >> 8 == target.prefix24 for t in ok)
    cut = [t for t in traces if t.vp == "vp2"]
    assert cut and all(t.halt is Halt.UNREACHABLE for t in cut)
    dst = table.lookup(target)
    for t in cut:
        assert t.hops[-1].asn == dst.asn and not dst.prefix.contains(t.hops[-1].address)
        hc = classify_trace(t, table)
        assert hc.as_position is Position.AT and hc.prefix_position is Position.BEFORE


def test_gap_traces_are_discarded_downstream():
    sc = small([InjectionSpec("peninsula", 0, 86400, victims=("10.0.9.0",), severed_from=("vp2",))])
    target = parse_block("10.0.9.0")
    traces = synthesize_traceroutes(sc, ProbingModel(interval=3600), 1, vps=["vp2"], targets=[target], halt_mix={"gap": 1})
    assert traces and all(t.halt is Halt.GAP for t in traces)
    assert all(classify_trace(t, routing_table_for(sc)) is None for t in traces)


def test_fixture_scenarios_load(fixtures):
    for name in ("five_groups.json", "three_groups.json", "siteE_island.json"):
        sc = load_scenario(fixtures / name)
        assert sc.nodes and sc.vps

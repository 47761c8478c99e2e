import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isthmus.core import (
    BlockId,
    Observation,
    ObservationState,
    ObservationTable,
    ParseError,
    Prefix,
    RoundClass,
    RoundKind,
    TimeBinning,
    bin_time,
    format_block,
    kind_of,
    parse_block,
)


def test_parse_block_forms():
    assert parse_block("10.1.2.0/24") == parse_block("10.1.2.77") == parse_block("0a0102")
    assert parse_block("50f5b000") == parse_block("80.245.176.0/24")


@pytest.mark.parametrize("bad, token", [("10.1.2.0/16", "16"), ("10.1.2", "4 octets"), ("10.1.300.0", "300")])
def test_parse_block_errors_name_the_token(bad, token):
    with pytest.raises(ParseError, match=token):
        parse_block(bad)


@given(st.integers(0, (1 << 24) - 1))
def test_block_roundtrip(p):
    b = BlockId(p)
    assert parse_block(format_block(b)) == b
    assert parse_block(f"{p:06x}") == b


def test_prefix_rejects_host_bits_and_covers_blocks():
    with pytest.raises(ValueError):
        Prefix.parse("10.0.0.1/8")
    p = Prefix.parse("10.1.0.0/16")
    assert p.covers_block(parse_block("10.1.200.0"))
    assert not p.covers_block(parse_block("10.2.0.0"))
    assert p.block_count == 256 and len(list(p.blocks())) == 256


def test_binning():
    b = TimeBinning(660, 100)
    assert b.bin(100) == 0 and b.bin(759) == 0 and b.bin(760) == 1
    assert b.round_start(3) == 100 + 3 * 660
    assert bin_time(99, b) == -1
    with pytest.raises(ValueError):
        TimeBinning(0)


def test_round_class_invariants():
    assert kind_of(0, 0) is RoundKind.UNMEASURED
    assert RoundClass.from_sets({"A"}, {"A", "B", "C"}).kind is RoundKind.DISAGREEMENT
    assert RoundClass.from_sets({"A", "B"}, {"A", "B"}).kind is RoundKind.ALL_UP
    with pytest.raises(ValueError):
        RoundClass(RoundKind.ALL_UP, frozenset({"A"}), frozenset({"A", "B"}))
    with pytest.raises(ValueError):
        RoundClass.from_sets({"Z"}, {"A"})


def test_observation_rejects_negative_time():
    with pytest.raises(ValueError):
        Observation(-1, "A", BlockId(1), ObservationState.UP)


def test_table_roundtrip_and_sort():
    obs = [
        Observation(5, "b", BlockId(2), ObservationState.DOWN),
        Observation(5, "a", BlockId(9), ObservationState.UP),
        Observation(1, "b", BlockId(1), ObservationState.UNMEASURED),
    ]
    t = ObservationTable.from_observations(obs)
    assert list(t) == obs
    s = t.sorted()
    assert [(o.time, o.vp) for o in s] == [(1, "b"), (5, "a"), (5, "b")]
    both = ObservationTable.concat([t, ObservationTable.from_observations(obs[:1], ["z", "b"])])
    assert len(both) == 4 and set(both.vps) == {"a", "b", "z"}
    assert list(t.select_vps(["a"])) == [obs[1]]
    np.testing.assert_array_equal(t.blocks(), [1, 2, 9])

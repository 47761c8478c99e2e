"""Domain types shared by the detectors, the oracle and the analyses.

Blocks are IPv4 /24s stored as their 24-bit prefix.  Observations can be
handled one at a time (:class:`Observation`) or in bulk through the
columnar :class:`ObservationTable`, which is what the detectors consume.
"""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence

import numpy as np

DEFAULT_WINDOW = 660

_HEX_BLOCK = re.compile(r"^[0-9a-fA-F]{6}([0-9a-fA-F]{2})?$")


class ParseError(ValueError):
    """Raised when a block, prefix or record cannot be parsed."""


@dataclass(frozen=True, order=True)
class BlockId:
    """An IPv4 /24 identified by its base address shifted right by 8."""

    prefix24: int

    def __post_init__(self) -> None:
        if not 0 <= self.prefix24 < 1 << 24:
            raise ValueError(f"prefix24 out of range: {self.prefix24}")

    @property
    def base(self) -> int:
        return self.prefix24 << 8

    def address(self, host: int = 0) -> int:
        return self.base | (host & 0xFF)

    def __str__(self) -> str:
        return format_block(self)


@dataclass(frozen=True, order=True)
class Prefix:
    base: int
    length: int

    def __post_init__(self) -> None:
        if not 0 <= self.length <= 32:
            raise ValueError(f"prefix length out of range: {self.length}")
        if not 0 <= self.base < 1 << 32:
            raise ValueError(f"prefix base out of range: {self.base}")
        if self.base & ~self.mask & 0xFFFFFFFF:
            raise ValueError(f"host bits set in {ipaddress.IPv4Address(self.base)}/{self.length}")

    @property
    def mask(self) -> int:
        return (0xFFFFFFFF << (32 - self.length)) & 0xFFFFFFFF

    @classmethod
    def parse(cls, text: str) -> Prefix:
        try:
            net = ipaddress.IPv4Network(text.strip(), strict=True)
        except ValueError as exc:
            raise ParseError(f"bad prefix {text!r}: {exc}") from None
        return cls(int(net.network_address), net.prefixlen)

    def contains(self, address: int) -> bool:
        return (address & self.mask) == self.base

    def covers_block(self, block: BlockId) -> bool:
        return self.length <= 24 and self.contains(block.base)

    def blocks(self) -> Iterator[BlockId]:
        """All /24s inside this prefix (a /25 or longer yields its enclosing /24)."""
        if self.length >= 24:
            yield BlockId(self.base >> 8)
            return
        first = self.base >> 8
        for i in range(1 << (24 - self.length)):
            yield BlockId(first + i)

    @property
    def block_count(self) -> int:
        return 1 << max(0, 24 - self.length)

    def __str__(self) -> str:
        return f"{ipaddress.IPv4Address(self.base)}/{self.length}"


@dataclass(frozen=True)
class VantagePoint:
    vp_id: str
    country: str = "??"
    home_block: BlockId | None = None


class ObservationState(str, Enum):
    UP = "U"
    DOWN = "D"
    UNMEASURED = "?"

    @property
    def code(self) -> int:
        return _STATE_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> ObservationState:
        return _CODE_STATES[int(code)]


STATE_UP, STATE_DOWN, STATE_UNMEASURED = 1, 0, -1
_STATE_CODES = {
    ObservationState.UP: STATE_UP,
    ObservationState.DOWN: STATE_DOWN,
    ObservationState.UNMEASURED: STATE_UNMEASURED,
}
_CODE_STATES = {v: k for k, v in _STATE_CODES.items()}


@dataclass(frozen=True)
class Observation:
    time: int
    vp: str
    block: BlockId
    state: ObservationState

    def __post_init__(self) -> None:
        if self.time < 0:
            raise ValueError(f"negative observation time {self.time}")


@dataclass(frozen=True)
class TimeBinning:
    """Fixed wall-clock rounds of ``window`` seconds aligned to ``epoch``."""

    window: int = DEFAULT_WINDOW
    epoch: int = 0

    def __post_init__(self) -> None:
        if self.window <= 0:
            raise ValueError("window must be positive")

    def bin(self, time: int) -> int:
        return bin_time(time, self)

    def round_start(self, round_index: int) -> int:
        return self.epoch + round_index * self.window


def bin_time(time: int, binning: TimeBinning) -> int:
    return (int(time) - binning.epoch) // binning.window


class RoundKind(str, Enum):
    ALL_UP = "all_up"
    ALL_DOWN = "all_down"
    DISAGREEMENT = "disagreement"
    UNMEASURED = "unmeasured"


@dataclass(frozen=True)
class RoundClass:
    kind: RoundKind
    up_set: frozenset[str] = frozenset()
    observed_set: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not self.up_set <= self.observed_set:
            raise ValueError("up_set must be a subset of observed_set")
        if self.kind is not kind_of(len(self.up_set), len(self.observed_set)):
            raise ValueError(f"{self.kind} inconsistent with up/observed sets")

    @classmethod
    def from_sets(cls, up: Iterable[str], observed: Iterable[str]) -> RoundClass:
        up_set, observed_set = frozenset(up), frozenset(observed)
        return cls(kind_of(len(up_set), len(observed_set)), up_set, observed_set)


def kind_of(n_up: int, n_observed: int) -> RoundKind:
    if n_observed == 0:
        return RoundKind.UNMEASURED
    if n_up == 0:
        return RoundKind.ALL_DOWN
    if n_up == n_observed:
        return RoundKind.ALL_UP
    return RoundKind.DISAGREEMENT


def parse_block(text: str) -> BlockId:
    """Parse ``a.b.c.d[/24]`` or the 6/8 hex-digit form used in dataset names."""
    token = text.strip()
    if _HEX_BLOCK.match(token):
        return BlockId(int(token[:6], 16))
    addr, slash, length = token.partition("/")
    if slash and length != "24":
        raise ParseError(f"not a /24 block: {text!r} (offending token {length!r})")
    parts = addr.split(".")
    if len(parts) != 4:
        raise ParseError(f"malformed block {text!r}: expected 4 octets")
    value = 0
    for part in parts:
        if not part.isdigit() or int(part) > 255:
            raise ParseError(f"malformed block {text!r}: bad octet {part!r}")
        value = (value << 8) | int(part)
    return BlockId(value >> 8)


def format_block(block: BlockId) -> str:
    p = block.prefix24
    return f"{p >> 16}.{(p >> 8) & 0xFF}.{p & 0xFF}.0/24"


def parse_address(text: str) -> int:
    try:
        return int(ipaddress.IPv4Address(text.strip()))
    except ValueError:
        raise ParseError(f"bad address {text!r}") from None


def format_address(address: int) -> str:
    return str(ipaddress.IPv4Address(address))


@dataclass
class ObservationTable:
    """Columnar observation stream.

    ``vp`` holds indices into ``vps``; ``state`` uses 1/0/-1 for Up/Down/Unmeasured.
    """

    vps: tuple[str, ...]
    time: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    vp: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int16))
    block: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int32))
    state: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int8))

    def __post_init__(self) -> None:
        self.time = np.asarray(self.time, dtype=np.int64)
        self.vp = np.asarray(self.vp, dtype=np.int16)
        self.block = np.asarray(self.block, dtype=np.int32)
        self.state = np.asarray(self.state, dtype=np.int8)
        n = len(self.time)
        if not (len(self.vp) == len(self.block) == len(self.state) == n):
            raise ValueError("observation columns differ in length")
        if len(self.vps) > np.iinfo(np.int16).max:
            raise ValueError("too many vantage points")

    def __len__(self) -> int:
        return len(self.time)

    def __iter__(self) -> Iterator[Observation]:
        for t, v, b, s in zip(self.time.tolist(), self.vp.tolist(), self.block.tolist(), self.state.tolist()):
            yield Observation(t, self.vps[v], BlockId(b), ObservationState.from_code(s))

    @classmethod
    def from_observations(cls, observations: Iterable[Observation], vps: Sequence[str] | None = None) -> ObservationTable:
        obs = list(observations)
        names = list(vps) if vps is not None else sorted({o.vp for o in obs})
        index = {name: i for i, name in enumerate(names)}
        return cls(
            tuple(names),
            np.array([o.time for o in obs], np.int64),
            np.array([index[o.vp] for o in obs], np.int16),
            np.array([o.block.prefix24 for o in obs], np.int32),
            np.array([o.state.code for o in obs], np.int8),
        )

    @classmethod
    def concat(cls, tables: Sequence[ObservationTable]) -> ObservationTable:
        names: list[str] = []
        for t in tables:
            names.extend(v for v in t.vps if v not in names)
        index = {n: i for i, n in enumerate(names)}
        parts = []
        for t in tables:
            remap = np.array([index[v] for v in t.vps] or [0], np.int16)
            parts.append(remap[t.vp] if len(t) else t.vp)
        return cls(
            tuple(names),
            np.concatenate([t.time for t in tables]) if tables else np.zeros(0, np.int64),
            np.concatenate(parts) if tables else np.zeros(0, np.int16),
            np.concatenate([t.block for t in tables]) if tables else np.zeros(0, np.int32),
            np.concatenate([t.state for t in tables]) if tables else np.zeros(0, np.int8),
        )

    def take(self, mask_or_index: np.ndarray) -> ObservationTable:
        return ObservationTable(
            self.vps,
            self.time[mask_or_index],
            self.vp[mask_or_index],
            self.block[mask_or_index],
            self.state[mask_or_index],
        )

    def select_vps(self, names: Iterable[str]) -> ObservationTable:
        wanted = {self.vps.index(n) for n in names}
        return self.take(np.isin(self.vp, sorted(wanted)))

    def sorted(self) -> ObservationTable:
        """Canonical order: time, vp name, block."""
        name_rank = np.argsort(np.argsort(np.array(self.vps, dtype=object))) if self.vps else np.zeros(0, int)
        ranks = name_rank[self.vp] if len(self) else self.vp
        order = np.lexsort((self.block, ranks, self.time))
        return self.take(order)

    def blocks(self) -> np.ndarray:
        return np.unique(self.block)

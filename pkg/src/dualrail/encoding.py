"""Delay-insensitive code words: 1-of-2 (dual-rail) and 1-of-4.

A dual-rail bit is a pair of wires ``(rail1, rail0)``.  ``(1, 0)`` carries a
logic 1, ``(0, 1)`` a logic 0, ``(0, 0)`` is the spacer (NULL) that separates
successive data in return-to-zero handshaking, and ``(1, 1)`` is illegal.

Words are stored least significant pair first.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence


class IllegalCodeError(ValueError):
    """Raised when a code word contains an illegal wire combination."""


class PairState(enum.Enum):
    VALID1 = "valid1"
    VALID0 = "valid0"
    SPACER = "spacer"
    ILLEGAL = "illegal"


class WordState(enum.Enum):
    ALL_VALID = "all-valid"
    SPACER = "spacer"
    PARTIAL = "partial"
    ILLEGAL = "illegal"


@dataclass(frozen=True)
class RailPair:
    rail1: int
    rail0: int

    def __post_init__(self) -> None:
        if self.rail1 not in (0, 1) or self.rail0 not in (0, 1):
            raise ValueError(f"rails must be bits, got {self.rail1!r}, {self.rail0!r}")

    @property
    def state(self) -> PairState:
        if self.rail1 and self.rail0:
            return PairState.ILLEGAL
        if self.rail1:
            return PairState.VALID1
        if self.rail0:
            return PairState.VALID0
        return PairState.SPACER

    @property
    def is_valid(self) -> bool:
        return self.rail1 != self.rail0

    @property
    def is_spacer(self) -> bool:
        return not (self.rail1 or self.rail0)

    @classmethod
    def of_bit(cls, bit: int) -> "RailPair":
        return cls(1, 0) if bit else cls(0, 1)

    def __iter__(self):
        yield self.rail1
        yield self.rail0


SPACER_PAIR = RailPair(0, 0)


@dataclass(frozen=True)
class DualRailWord:
    pairs: tuple[RailPair, ...]

    def __len__(self) -> int:
        return len(self.pairs)

    def __getitem__(self, i: int) -> RailPair:
        return self.pairs[i]

    def __iter__(self):
        return iter(self.pairs)

    @classmethod
    def from_rails(cls, rails: Iterable[tuple[int, int]]) -> "DualRailWord":
        return cls(tuple(RailPair(r1, r0) for r1, r0 in rails))

    @property
    def state(self) -> WordState:
        states = [p.state for p in self.pairs]
        if PairState.ILLEGAL in states:
            return WordState.ILLEGAL
        spacers = states.count(PairState.SPACER)
        if spacers == 0:
            return WordState.ALL_VALID
        if spacers == len(states):
            return WordState.SPACER
        return WordState.PARTIAL


def encode_dual_rail(value: int, width: int) -> DualRailWord:
    """Encode an unsigned integer as ``width`` dual-rail pairs, bit 0 first."""
    if width < 1:
        raise ValueError(f"width must be >= 1, got {width}")
    if value < 0 or value >= 1 << width:
        raise ValueError(f"value {value} does not fit in {width} bits")
    return DualRailWord(tuple(RailPair.of_bit((value >> i) & 1) for i in range(width)))


def spacer(width: int) -> DualRailWord:
    if width < 1:
        raise ValueError(f"width must be >= 1, got {width}")
    return DualRailWord((SPACER_PAIR,) * width)


def decode_dual_rail(word: DualRailWord | Sequence[tuple[int, int]]) -> int | WordState:
    """Decode a dual-rail word.

    Returns the integer for an all-valid word, ``WordState.SPACER`` for an
    all-spacer word and ``WordState.PARTIAL`` for a mix of valid and spacer
    pairs.  Raises :class:`IllegalCodeError` if any pair is ``(1, 1)``.
    """
    if not isinstance(word, DualRailWord):
        word = DualRailWord.from_rails(word)
    state = word.state
    if state is WordState.ILLEGAL:
        bad = [i for i, p in enumerate(word.pairs) if p.state is PairState.ILLEGAL]
        raise IllegalCodeError(f"illegal (1,1) pair at bit(s) {bad}")
    if state is not WordState.ALL_VALID:
        return state
    return sum(p.rail1 << i for i, p in enumerate(word.pairs))


# 1-of-4: one wire per value of a 2-bit group (P, Q), P being the more
# significant bit: (0,0)->F0, (0,1)->F1, (1,0)->F2, (1,1)->F3.

@dataclass(frozen=True)
class OneOfFourWord:
    wires: tuple[int, int, int, int]

    def __post_init__(self) -> None:
        if len(self.wires) != 4 or any(w not in (0, 1) for w in self.wires):
            raise ValueError(f"expected four bits, got {self.wires!r}")

    @property
    def is_spacer(self) -> bool:
        return not any(self.wires)

    @property
    def high(self) -> frozenset[int]:
        return frozenset(i for i, w in enumerate(self.wires) if w)


ONE_OF_FOUR_SPACER = OneOfFourWord((0, 0, 0, 0))


def encode_one_of_four(p: int, q: int) -> OneOfFourWord:
    if p not in (0, 1) or q not in (0, 1):
        raise ValueError(f"p and q must be bits, got {p!r}, {q!r}")
    index = 2 * p + q
    return OneOfFourWord(tuple(int(i == index) for i in range(4)))


def decode_one_of_four(word: OneOfFourWord) -> tuple[int, int] | WordState:
    high = sorted(word.high)
    if not high:
        return WordState.SPACER
    if len(high) > 1:
        raise IllegalCodeError(f"1-of-4 group has wires {high} high")
    return divmod(high[0], 2)


def one_of_four_code_words() -> list[OneOfFourWord]:
    return [encode_one_of_four(p, q) for p in (0, 1) for q in (0, 1)]

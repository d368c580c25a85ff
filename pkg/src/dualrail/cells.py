"""Cell library: logic semantics, delay and area per cell kind.

Every evaluator works on plain ints, so the same function serves a single
bit (``full=1``) and a bit-parallel lane mask (``full=(1 << lanes) - 1``).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence


class CellKind(enum.Enum):
    INV = "INV"
    AND2 = "AND2"
    OR2 = "OR2"
    OR3 = "OR3"
    C2 = "C2"
    AO22 = "AO22"
    AO21 = "AO21"

    @property
    def arity(self) -> int:
        return ARITY[self]

    @property
    def is_stateful(self) -> bool:
        return self is CellKind.C2


ARITY = {
    CellKind.INV: 1,
    CellKind.AND2: 2,
    CellKind.OR2: 2,
    CellKind.OR3: 3,
    CellKind.C2: 2,
    CellKind.AO22: 4,
    CellKind.AO21: 3,
}


class ArityError(ValueError):
    pass


def eval_cell(kind: CellKind, inputs: Sequence[int], prev: int = 0, full: int = 1) -> int:
    """Evaluate one cell.

    ``prev`` is the stored output of a C-element and is ignored by every
    other kind.  ``full`` is the all-ones mask used for inversion.

    >>> eval_cell(CellKind.C2, [1, 0], prev=1)
    1
    >>> eval_cell(CellKind.AO22, [1, 1, 0, 0])
    1
    """
    if len(inputs) != ARITY[kind]:
        raise ArityError(f"{kind.value} takes {ARITY[kind]} inputs, got {len(inputs)}")
    return _EVAL[kind](inputs, prev, full)


def _c2(i, prev, full):
    a, b = i
    # both high -> 1, both low -> 0, otherwise hold
    return (a & b) | (prev & (a | b))


_EVAL = {
    CellKind.INV: lambda i, prev, full: full ^ i[0],
    CellKind.AND2: lambda i, prev, full: i[0] & i[1],
    CellKind.OR2: lambda i, prev, full: i[0] | i[1],
    CellKind.OR3: lambda i, prev, full: i[0] | i[1] | i[2],
    CellKind.C2: _c2,
    CellKind.AO22: lambda i, prev, full: (i[0] & i[1]) | (i[2] & i[3]),
    CellKind.AO21: lambda i, prev, full: (i[0] & i[1]) | i[2],
}

# Used by the simulators, which have already checked arity.
evaluator = _EVAL.__getitem__


@dataclass(frozen=True)
class TimingAreaModel:
    """Delay (integer units) and area (transistors) for each cell kind."""

    delay: Mapping[CellKind, int]
    area: Mapping[CellKind, int]
    name: str = field(default="default", compare=False)

    def __post_init__(self) -> None:
        for table_name in ("delay", "area"):
            table = dict(getattr(self, table_name))
            missing = [k.value for k in CellKind if k not in table]
            if missing:
                raise ValueError(f"{table_name} table missing kinds: {', '.join(missing)}")
            for kind, value in table.items():
                if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                    raise ValueError(f"{table_name}[{kind.value}] must be a positive integer, got {value!r}")
            object.__setattr__(self, table_name, MappingProxyType(table))

    def __reduce__(self):
        # mapping proxies do not pickle; rebuild from plain dicts (worker pools need this)
        return (TimingAreaModel, (dict(self.delay), dict(self.area), self.name))

    @property
    def max_delay(self) -> int:
        return max(self.delay.values())

    def with_overrides(self, overrides: Mapping[CellKind, Mapping[str, int]], name: str = "override") -> "TimingAreaModel":
        delay, area = dict(self.delay), dict(self.area)
        for kind, fields in overrides.items():
            if "delay" in fields:
                delay[kind] = fields["delay"]
            if "area" in fields:
                area[kind] = fields["area"]
        return TimingAreaModel(delay, area, name=name)


# Static CMOS transistor counts.  The 12-transistor C-element is the one
# figure with an external anchor; the rest are textbook conventions.
DEFAULT_AREA = {
    CellKind.INV: 2,
    CellKind.AND2: 6,
    CellKind.OR2: 6,
    CellKind.OR3: 8,
    CellKind.AO21: 8,
    CellKind.AO22: 10,
    CellKind.C2: 12,
}


def default_model() -> TimingAreaModel:
    return TimingAreaModel({k: 1 for k in CellKind}, DEFAULT_AREA)


_OVERRIDE_LINE = re.compile(r"^(?P<kind>[A-Z0-9]+)((\s+(delay|area)=\S+)+)$")


class ModelFormatError(ValueError):
    pass


def parse_model_overrides(text: str, base: TimingAreaModel | None = None, name: str = "override") -> TimingAreaModel:
    """Parse ``<KIND> delay=<int> area=<int>`` lines on top of ``base``.

    Either field may be omitted; kinds not mentioned keep their base values.
    Blank lines and ``#`` comments are ignored.
    """
    base = base or default_model()
    overrides: dict[CellKind, dict[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _OVERRIDE_LINE.match(line)
        if not m:
            raise ModelFormatError(f"line {lineno}: expected '<KIND> delay=<int> area=<int>', got {raw!r}")
        try:
            kind = CellKind(m["kind"])
        except ValueError:
            raise ModelFormatError(f"line {lineno}: unknown cell kind {m['kind']!r}") from None
        if kind in overrides:
            raise ModelFormatError(f"line {lineno}: duplicate record for {kind.value}")
        fields: dict[str, int] = {}
        for item in m.group(2).split():
            key, _, value = item.partition("=")
            if key in fields:
                raise ModelFormatError(f"line {lineno}: {key} given twice")
            try:
                fields[key] = int(value)
            except ValueError:
                raise ModelFormatError(f"line {lineno}: {key}={value!r} is not an integer") from None
        overrides[kind] = fields
    try:
        return base.with_overrides(overrides, name=name)
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None

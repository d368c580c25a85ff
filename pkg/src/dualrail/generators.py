"""Netlist generators for early-output dual-rail adders.

* :func:`build_sbfa` -- single-bit full adder with redundant generate/kill
  terms in its carry gates (4 AO22, 4 C2, 2 OR2).
* :func:`build_dbfa` -- dual-bit full adder whose carry-in reaches the carry
  output through a single AO21.
* :func:`build_completion_detector` -- OR per rail pair into a C2 tree.
* :func:`build_rca` -- ripple-carry adders mixing both blocks, single-bit
  blocks in the least significant positions.

Generated nets are named ``<block>_<stage>_<signal>``; port rails are named
``<port>_1`` / ``<port>_0``.
"""

from __future__ import annotations

import enum
import itertools
import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

from .cells import CellKind
from .netlist import Netlist

Rails = tuple[str, str]
Literal = tuple[str, int]


# -- equation tables ---------------------------------------------------------

@dataclass(frozen=True)
class DsopEquationTable:
    """Sum-of-products equations for each output rail of a dual-rail block.

    A literal ``(port, r)`` is the rail ``r`` of an input port, written
    ``<port><r>`` (``A1`` is rail 1 of ``A``; ``A11`` is rail 1 of ``A1``).
    """

    name: str
    inputs: tuple[str, ...]
    outputs: Mapping[Literal, tuple[tuple[Literal, ...], ...]]

    @property
    def output_ports(self) -> list[str]:
        return list(dict.fromkeys(port for port, _ in self.outputs))

    def code_words(self) -> Iterator[dict[str, int]]:
        """All valid input code words, first input port most significant."""
        for bits in itertools.product((0, 1), repeat=len(self.inputs)):
            yield dict(zip(self.inputs, bits))

    def true_products(self, rail: Literal, assignment: Mapping[str, int | None]) -> list[int]:
        """Indices of the products of ``rail`` that hold; ``None`` marks a spacer port."""
        return [
            i for i, product in enumerate(self.outputs[rail])
            if all(assignment.get(port) == r for port, r in product)
        ]

    def evaluate(self, assignment: Mapping[str, int | None]) -> dict[Literal, int]:
        return {rail: int(bool(self.true_products(rail, assignment))) for rail in self.outputs}

    def with_products(self, rail: Literal, products: Sequence[Sequence[Literal]]) -> "DsopEquationTable":
        outputs = dict(self.outputs)
        outputs[rail] = tuple(tuple(p) for p in products)
        return DsopEquationTable(self.name, self.inputs, outputs)

    @staticmethod
    def literal_name(literal: Literal) -> str:
        return f"{literal[0]}{literal[1]}"

    def format_rail(self, rail: Literal) -> str:
        terms = ("".join(map(self.literal_name, p)) for p in self.outputs[rail])
        return f"{self.literal_name(rail)} = " + " + ".join(terms)


def parse_sop(text: str, inputs: Sequence[str]) -> tuple[tuple[Literal, ...], ...]:
    """Parse ``"A0B0CIN1 + A1B1"`` into literal tuples over ``inputs``."""
    names = sorted(inputs, key=len, reverse=True)
    token = re.compile("(" + "|".join(map(re.escape, names)) + ")([01])")
    products = []
    for term in text.split("+"):
        term = "".join(term.split())
        pos, lits = 0, []
        while pos < len(term):
            m = token.match(term, pos)
            if not m:
                raise ValueError(f"cannot parse literal at {term[pos:]!r} in {term!r}")
            lits.append((m[1], int(m[2])))
            pos = m.end()
        if not lits:
            raise ValueError(f"empty product in {text!r}")
        products.append(tuple(lits))
    return tuple(products)


_SBFA_EQUATIONS = {
    ("SUM", 1): "A0B0CIN1 + A0B1CIN0 + A1B0CIN0 + A1B1CIN1",
    ("SUM", 0): "A0B0CIN0 + A0B1CIN1 + A1B0CIN1 + A1B1CIN0",
    ("COUT", 1): "A0B1CIN1 + A1B0CIN1 + A1B1CIN0 + A1B1CIN1",
    ("COUT", 0): "A0B0CIN0 + A0B0CIN1 + A0B1CIN0 + A1B0CIN0",
}

_DBFA_EQUATIONS = {
    ("SUM1", 1): """A11A01B10B00CIN0 + A10A01B11B00CIN0 + A11A00B10B01CIN0
        + A10A00B11B01CIN0 + A11A00B11B01CIN1 + A11A01B11B00CIN1
        + A10A00B10B01CIN1 + A10A01B10B00CIN1 + A10A01B10B01
        + A11A00B10B00 + A10A00B11B00 + A11A01B11B01""",
    ("SUM1", 0): """A11A01B10B00CIN1 + A10A01B11B00CIN1 + A11A00B10B01CIN1
        + A10A00B11B01CIN1 + A10A01B10B00CIN0 + A10A00B10B01CIN0
        + A11A01B11B00CIN0 + A11A00B11B01CIN0 + A11A00B11B00
        + A11A01B10B01 + A10A01B11B01 + A10A00B10B00""",
    ("SUM0", 1): "A01B00CIN0 + A00B01CIN0 + A00B00CIN1 + A01B01CIN1",
    ("SUM0", 0): "A01B01CIN0 + A01B00CIN1 + A00B01CIN1 + A00B00CIN0",
    ("COUT", 1): """A10A00B11B01CIN1 + A11A00B10B01CIN1 + A10A01B11B00CIN1
        + A11A01B10B00CIN1 + A10A01B11B01 + A11A01B10B01 + A11B11""",
    ("COUT", 0): """A11A01B10B00CIN0 + A10A01B11B00CIN0 + A11A00B10B01CIN0
        + A10A00B11B01CIN0 + A11A00B10B00 + A10A00B11B00 + A10B10""",
}


def _table(name: str, inputs: tuple[str, ...], equations: Mapping[Literal, str]) -> DsopEquationTable:
    return DsopEquationTable(name, inputs, {rail: parse_sop(text, inputs) for rail, text in equations.items()})


def sbfa_table() -> DsopEquationTable:
    return _table("sbfa", ("A", "B", "CIN"), _SBFA_EQUATIONS)


def dbfa_table() -> DsopEquationTable:
    # the carry output port is called COUT here; its rails are COUT21/COUT20
    return _table("dbfa", ("A1", "A0", "B1", "B0", "CIN"), _DBFA_EQUATIONS)


def equation_tables() -> dict[str, DsopEquationTable]:
    return {"sbfa": sbfa_table(), "dbfa": dbfa_table()}


# -- compositions ------------------------------------------------------------

class Stage(enum.Enum):
    SBFA = "sbfa"
    DBFA = "dbfa"

    @property
    def bits(self) -> int:
        return 1 if self is Stage.SBFA else 2


class CompositionError(ValueError):
    pass


_TOKEN = re.compile(r"^(?P<kind>sbfa|dbfa)(\*(?P<count>\d+))?$", re.IGNORECASE)


@dataclass(frozen=True)
class AdderComposition:
    """Ordered stage list of a ripple-carry adder, least significant first."""

    width: int
    stages: tuple[Stage, ...]

    def __post_init__(self) -> None:
        stages = tuple(Stage(s) for s in self.stages)
        object.__setattr__(self, "stages", stages)
        if not stages:
            raise CompositionError("composition has no stages")
        total = sum(s.bits for s in stages)
        if total != self.width:
            raise CompositionError(f"stages cover {total} bits but width is {self.width}")
        seen_dbfa = False
        for i, s in enumerate(stages):
            if s is Stage.DBFA:
                seen_dbfa = True
            elif seen_dbfa:
                raise CompositionError(f"SBFA at stage {i} follows a DBFA; SBFAs must be least significant")

    @classmethod
    def of(cls, sbfa: int = 0, dbfa: int = 0) -> "AdderComposition":
        return cls(sbfa + 2 * dbfa, (Stage.SBFA,) * sbfa + (Stage.DBFA,) * dbfa)

    @classmethod
    def parse(cls, text: str, width: int | None = None) -> "AdderComposition":
        """Parse ``"sbfa*2+dbfa*15"``; ``width`` is cross-checked when given."""
        stages: list[Stage] = []
        for token in text.split("+"):
            m = _TOKEN.match(token.strip())
            if not m:
                raise CompositionError(f"unknown composition token {token.strip()!r}")
            count = int(m["count"]) if m["count"] is not None else 1
            if count < 1:
                raise CompositionError(f"stage count must be >= 1 in {token.strip()!r}")
            stages += [Stage(m["kind"].lower())] * count
        total = sum(s.bits for s in stages)
        if width is not None and width != total:
            raise CompositionError(f"composition {text!r} covers {total} bits, not --width {width}")
        return cls(total, tuple(stages))

    @property
    def n_sbfa(self) -> int:
        return self.stages.count(Stage.SBFA)

    @property
    def n_dbfa(self) -> int:
        return self.stages.count(Stage.DBFA)

    def __str__(self) -> str:
        runs = [(s, len(list(g))) for s, g in itertools.groupby(self.stages)]
        return "+".join(f"{s.value}*{n}" for s, n in runs)

    @property
    def label(self) -> str:
        parts = []
        if self.n_sbfa:
            parts.append(f"{self.n_sbfa}S")
        if self.n_dbfa:
            parts.append(f"{self.n_dbfa}D")
        return "+".join(parts)


# -- cell emission helpers -----------------------------------------------------

def rails(port: str) -> Rails:
    return (f"{port}_1", f"{port}_0")


class _Block:
    """Emits cells named ``<prefix>_<signal>`` into a netlist."""

    def __init__(self, netlist: Netlist, prefix: str):
        self.nl = netlist
        self.prefix = prefix

    def cell(self, kind: CellKind, signal: str, *inputs: str, out: str | None = None) -> str:
        cid = f"{self.prefix}_{signal}"
        self.nl.add_cell(kind, inputs, out or cid, id=cid)
        return out or cid

    def or_tree(self, signal: str, nets: Sequence[str], out: str | None = None) -> str:
        """Balanced OR2/OR3 tree; the root drives ``out``."""
        if not nets:
            raise ValueError("empty OR")
        if len(nets) == 1:
            if out is not None:
                raise ValueError("single-term OR cannot drive a named output")
            return nets[0]
        level, nets = 0, list(nets)
        while len(nets) > 3:
            groups = _split(nets)
            nets = [
                g[0] if len(g) == 1 else
                self.cell(CellKind.OR3 if len(g) == 3 else CellKind.OR2, f"{signal}_l{level}_{i}", *g)
                for i, g in enumerate(groups)
            ]
            level += 1
        kind = CellKind.OR3 if len(nets) == 3 else CellKind.OR2
        return self.cell(kind, signal, *nets, out=out)

    def and_tree(self, signal: str, nets: Sequence[str]) -> str:
        nets = list(nets)
        if len(nets) == 1:
            return nets[0]
        level = 0
        while len(nets) > 2:
            nets = [
                self.cell(CellKind.AND2, f"{signal}_l{level}_{i // 2}", *nets[i:i + 2]) if i + 1 < len(nets) else nets[i]
                for i in range(0, len(nets), 2)
            ]
            level += 1
        return self.cell(CellKind.AND2, signal, *nets)

    def c_tree(self, signal: str, nets: Sequence[str], out: str | None = None) -> str:
        """Balanced binary tree of 2-input C-elements."""
        nets, level = list(nets), 0
        if len(nets) == 1:
            return nets[0]
        while len(nets) > 2:
            nets = [
                self.cell(CellKind.C2, f"{signal}_l{level}_{i // 2}", *nets[i:i + 2]) if i + 1 < len(nets) else nets[i]
                for i in range(0, len(nets), 2)
            ]
            level += 1
        return self.cell(CellKind.C2, signal, *nets, out=out)


def _split(nets: list[str]) -> list[list[str]]:
    # as few OR3 groups as possible while staying balanced
    n_groups = -(-len(nets) // 3)
    size, extra = divmod(len(nets), n_groups)
    out, pos = [], 0
    for i in range(n_groups):
        k = size + (i < extra)
        out.append(nets[pos:pos + k])
        pos += k
    return out


def emit_sbfa(blk: _Block, a: Rails, b: Rails, cin: Rails, s: Rails, cout: Rails) -> None:
    """Single-bit early-output full adder.

    ``eq``/``ne`` (CG1/CG2) detect A == B and A != B.  The carry gates
    repeat the A1*B1 and A0*B0 products so a generate or kill reaches the
    carry output without waiting for the carry input.
    """
    (a1, a0), (b1, b0), (c1, c0) = a, b, cin
    eq = blk.cell(CellKind.AO22, "cg1", a1, b1, a0, b0)
    ne = blk.cell(CellKind.AO22, "cg2", a1, b0, a0, b1)
    blk.cell(CellKind.AO22, "cg3", a1, b1, ne, c1, out=cout[0])
    blk.cell(CellKind.AO22, "cg4", a0, b0, ne, c0, out=cout[1])
    s1a = blk.cell(CellKind.C2, "c1", eq, c1)
    s1b = blk.cell(CellKind.C2, "c2", ne, c0)
    s0a = blk.cell(CellKind.C2, "c3", eq, c0)
    s0b = blk.cell(CellKind.C2, "c4", ne, c1)
    blk.cell(CellKind.OR2, "sum1", s1a, s1b, out=s[0])
    blk.cell(CellKind.OR2, "sum0", s0a, s0b, out=s[1])


def emit_dbfa(blk: _Block, a1: Rails, a0: Rails, b1: Rails, b0: Rails, cin: Rails,
              s1: Rails, s0: Rails, cout: Rails) -> None:
    """Dual-bit early-output full adder.

    The A/B-only precompute is factored so that every product of the carry
    and sum equations is an AND of shared sub-terms:

    ``x1``/``e1``: A1 != B1 / A1 == B1, ``x0``/``e0`` likewise for bit 0,
    ``g0``/``k0``: both low bits 1 / both 0, ``p = x1 x0`` (propagate),
    ``g``/``k``: carry-in-free generate and kill.
    Each sum rail is ``OR(C2(group1, CIN1), C2(group0, CIN0), free)``.
    """
    (a11, a10), (a01, a00), (b11, b10), (b01, b00), (c1, c0) = a1, a0, b1, b0, cin
    x1 = blk.cell(CellKind.AO22, "x1", a11, b10, a10, b11)
    e1 = blk.cell(CellKind.AO22, "e1", a11, b11, a10, b10)
    x0 = blk.cell(CellKind.AO22, "x0", a01, b00, a00, b01)
    e0 = blk.cell(CellKind.AO22, "e0", a01, b01, a00, b00)
    g0 = blk.cell(CellKind.AND2, "g0", a01, b01)
    k0 = blk.cell(CellKind.AND2, "k0", a00, b00)
    p = blk.cell(CellKind.AND2, "p", x1, x0)
    q = blk.cell(CellKind.AND2, "q", e1, x0)
    g = blk.cell(CellKind.AO22, "g", x1, g0, a11, b11)
    k = blk.cell(CellKind.AO22, "k", x1, k0, a10, b10)
    blk.cell(CellKind.AO21, "cout1", p, c1, g, out=cout[0])
    blk.cell(CellKind.AO21, "cout0", p, c0, k, out=cout[1])

    f1 = blk.cell(CellKind.AO22, "f1", e1, g0, x1, k0)
    f0 = blk.cell(CellKind.AO22, "f0", e1, k0, x1, g0)
    blk.or_tree("sum11", [blk.cell(CellKind.C2, "c11a", q, c1), blk.cell(CellKind.C2, "c11b", p, c0), f1], out=s1[0])
    blk.or_tree("sum10", [blk.cell(CellKind.C2, "c10a", p, c1), blk.cell(CellKind.C2, "c10b", q, c0), f0], out=s1[1])
    blk.or_tree("sum01", [blk.cell(CellKind.C2, "c01a", e0, c1), blk.cell(CellKind.C2, "c01b", x0, c0)], out=s0[0])
    blk.or_tree("sum00", [blk.cell(CellKind.C2, "c00a", e0, c0), blk.cell(CellKind.C2, "c00b", x0, c1)], out=s0[1])


def emit_completion_detector(blk: _Block, pairs: Sequence[Rails], out: str = "DONE") -> str:
    if not pairs:
        raise ValueError("completion detector needs at least one rail pair")
    if len(pairs) == 1:
        return blk.cell(CellKind.OR2, "or_0", *pairs[0], out=out)
    ors = [blk.cell(CellKind.OR2, f"or_{i}", r1, r0) for i, (r1, r0) in enumerate(pairs)]
    return blk.c_tree("c", ors, out=out)


# -- public builders -----------------------------------------------------------

def _declare(nl: Netlist, ports: Sequence[str], *, output: bool) -> None:
    for port in ports:
        r = rails(port)
        if output:
            nl.add_output(*r)
        else:
            nl.add_input(*r)
        nl.mark_port(port, *r)


def build_sbfa() -> Netlist:
    nl = Netlist("sbfa")
    _declare(nl, ["A", "B", "CIN"], output=False)
    _declare(nl, ["SUM", "COUT"], output=True)
    emit_sbfa(_Block(nl, "sbfa_0"), rails("A"), rails("B"), rails("CIN"), rails("SUM"), rails("COUT"))
    return nl.check()


def build_dbfa() -> Netlist:
    nl = build_rca(AdderComposition.of(dbfa=1))
    nl.name = "dbfa"
    return nl


def build_completion_detector(n: int) -> Netlist:
    if n < 1:
        raise ValueError(f"completion detector needs n >= 1, got {n}")
    nl = Netlist(f"cd{n}")
    ports = [f"X{i}" for i in range(n)]
    _declare(nl, ports, output=False)
    nl.add_output("DONE")
    emit_completion_detector(_Block(nl, "cd_0"), [rails(p) for p in ports])
    return nl.check()


def build_rca(comp: AdderComposition, with_cd: bool = False) -> Netlist:
    """Ripple-carry adder with ports ``A<i>``, ``B<i>``, ``CIN``, ``SUM<i>``, ``COUT``.

    With ``with_cd`` a completion detector over every input and output rail
    pair drives the single-rail output ``DONE``.
    """
    w = comp.width
    nl = Netlist(f"rca{w}_{comp}" + ("_cd" if with_cd else ""))
    a_ports = [f"A{i}" for i in range(w)]
    b_ports = [f"B{i}" for i in range(w)]
    s_ports = [f"SUM{i}" for i in range(w)]
    _declare(nl, a_ports + b_ports + ["CIN"], output=False)
    _declare(nl, s_ports + ["COUT"], output=True)

    carry = rails("CIN")
    bit = 0
    for k, stage in enumerate(comp.stages):
        blk = _Block(nl, f"{stage.value}_{k}")
        last = k == len(comp.stages) - 1
        cout = rails("COUT") if last else (f"{blk.prefix}_cout1", f"{blk.prefix}_cout0")
        if stage is Stage.SBFA:
            emit_sbfa(blk, rails(a_ports[bit]), rails(b_ports[bit]), carry, rails(s_ports[bit]), cout)
        else:
            emit_dbfa(
                blk,
                rails(a_ports[bit + 1]), rails(a_ports[bit]),
                rails(b_ports[bit + 1]), rails(b_ports[bit]),
                carry,
                rails(s_ports[bit + 1]), rails(s_ports[bit]),
                cout,
            )
        carry = cout
        bit += stage.bits

    if with_cd:
        nl.add_output("DONE")
        pairs = [nl.ports[p] for p in nl.ports]
        emit_completion_detector(_Block(nl, "cd_0"), pairs)
    return nl.check()

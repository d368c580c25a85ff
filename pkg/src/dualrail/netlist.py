"""Flat gate-level netlist IR with dual-rail port annotations.

Nets are plain strings.  A net is a primary input, a primary output, or
internal; every net other than a primary input has exactly one driving cell.
C-elements are stateful primitives, so feedback through a C2 output is not a
combinational loop.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import jsonschema
import networkx as nx

from .cells import ARITY, CellKind


class NetlistError(ValueError):
    """Raised on structural edits that can never be valid (double drive, arity)."""


class NetlistFormatError(ValueError):
    """Raised when a netlist document cannot be parsed or violates the schema."""

    def __init__(self, message: str, diagnostics: list[str] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or [message]


class NetKind(enum.Enum):
    PRIMARY_INPUT = "input"
    INTERNAL = "internal"
    PRIMARY_OUTPUT = "output"


@dataclass(frozen=True)
class Cell:
    id: str
    kind: CellKind
    inputs: tuple[str, ...]
    output: str


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


@dataclass
class Netlist:
    name: str
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    ports: dict[str, tuple[str, str]] = field(default_factory=dict)
    cells: list[Cell] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._ids = {c.id for c in self.cells}
        self._drivers = {c.output: c for c in self.cells}

    # -- construction -------------------------------------------------------

    def add_input(self, *nets: str) -> None:
        for net in nets:
            if net in self.inputs:
                raise NetlistError(f"net {net!r} is already a primary input")
            if net in self._drivers:
                raise NetlistError(f"net {net!r} is driven by cell {self._drivers[net].id!r}")
            self.inputs.append(net)

    def add_output(self, *nets: str) -> None:
        for net in nets:
            if net in self.outputs:
                raise NetlistError(f"net {net!r} is already a primary output")
            self.outputs.append(net)

    def add_cell(self, kind: CellKind, inputs: Iterable[str], output: str, id: str | None = None) -> Cell:
        """Append a cell instance; validation of the whole graph is deferred."""
        inputs = tuple(inputs)
        kind = CellKind(kind)
        if len(inputs) != ARITY[kind]:
            raise NetlistError(f"{kind.value} takes {ARITY[kind]} inputs, got {len(inputs)}")
        cell_id = id if id is not None else f"u{len(self.cells)}_{output}"
        if cell_id in self._ids:
            raise NetlistError(f"duplicate cell id {cell_id!r}")
        if output in self._drivers:
            raise NetlistError(
                f"net {output!r} already driven by cell {self._drivers[output].id!r}; "
                f"cannot also drive it from {cell_id!r}"
            )
        if output in self.inputs:
            raise NetlistError(f"net {output!r} is a primary input; cannot drive it from {cell_id!r}")
        cell = Cell(cell_id, kind, inputs, output)
        self.cells.append(cell)
        self._ids.add(cell_id)
        self._drivers[output] = cell
        return cell

    def mark_port(self, name: str, rail1: str, rail0: str) -> None:
        if name in self.ports:
            raise NetlistError(f"duplicate port {name!r}")
        self.ports[name] = (rail1, rail0)

    def copy(self, name: str | None = None) -> "Netlist":
        return Netlist(
            name or self.name, list(self.inputs), list(self.outputs), dict(self.ports), list(self.cells)
        )

    # -- queries ------------------------------------------------------------

    @property
    def nets(self) -> list[str]:
        seen: dict[str, None] = {}
        for net in self.inputs:
            seen.setdefault(net)
        for cell in self.cells:
            for net in cell.inputs:
                seen.setdefault(net)
            seen.setdefault(cell.output)
        for net in self.outputs:
            seen.setdefault(net)
        return list(seen)

    def net_kind(self, net: str) -> NetKind:
        if net in self.inputs:
            return NetKind.PRIMARY_INPUT
        if net in self.outputs:
            return NetKind.PRIMARY_OUTPUT
        return NetKind.INTERNAL

    def driver(self, net: str) -> Cell | None:
        return self._drivers.get(net)

    def fanout(self) -> dict[str, list[Cell]]:
        out: dict[str, list[Cell]] = {net: [] for net in self.nets}
        for cell in self.cells:
            for net in dict.fromkeys(cell.inputs):
                out[net].append(cell)
        return out

    def census(self) -> dict[CellKind, int]:
        counts: dict[CellKind, int] = {}
        for cell in self.cells:
            counts[cell.kind] = counts.get(cell.kind, 0) + 1
        return counts

    def input_ports(self) -> list[str]:
        inputs = set(self.inputs)
        return [p for p, rails in self.ports.items() if rails[0] in inputs]

    def output_ports(self) -> list[str]:
        inputs = set(self.inputs)
        return [p for p, rails in self.ports.items() if rails[0] not in inputs]

    def words(self) -> dict[str, list[str]]:
        """Group ports into multi-bit words by name: ``A0, A1, ...`` -> ``A``.

        A port without a numeric suffix (``CIN``) forms a one-bit word.
        Ports are listed least significant first.
        """
        groups: dict[str, list[tuple[int, str]]] = {}
        for port in self.ports:
            m = _WORD_PORT.match(port)
            stem, digits = m["stem"], m["index"]
            groups.setdefault(stem, []).append((int(digits) if digits else -1, port))
        words = {}
        for stem, members in groups.items():
            members.sort()
            indices = [i for i, _ in members]
            if indices == [-1] or indices == list(range(len(members))):
                words[stem] = [p for _, p in members]
            else:
                # irregular numbering: treat every port as its own word
                for _, p in members:
                    words[p] = [p]
        return words

    # -- validation ---------------------------------------------------------

    def validate(self) -> list[Diagnostic]:
        """Return a list of diagnostics; an empty list means the netlist is valid."""
        diags: list[Diagnostic] = []
        ids: dict[str, int] = {}
        drivers: dict[str, list[str]] = {}
        for cell in self.cells:
            ids[cell.id] = ids.get(cell.id, 0) + 1
            if len(cell.inputs) != ARITY[cell.kind]:
                diags.append(Diagnostic("arity", f"cell {cell.id!r} ({cell.kind.value}) has {len(cell.inputs)} inputs"))
            drivers.setdefault(cell.output, []).append(cell.id)
        for cid, count in ids.items():
            if count > 1:
                diags.append(Diagnostic("duplicate-id", f"cell id {cid!r} used {count} times"))
        for net, names in drivers.items():
            if len(names) > 1:
                diags.append(Diagnostic("multi-driven", f"net {net!r} driven by {', '.join(names)}"))
        inputs = set(self.inputs)
        if len(inputs) != len(self.inputs):
            diags.append(Diagnostic("duplicate-net", "primary input listed twice"))
        if len(set(self.outputs)) != len(self.outputs):
            diags.append(Diagnostic("duplicate-net", "primary output listed twice"))
        for net in sorted(inputs & set(drivers)):
            diags.append(Diagnostic("multi-driven", f"primary input {net!r} driven by {', '.join(drivers[net])}"))
        for net in sorted(inputs & set(self.outputs)):
            diags.append(Diagnostic("io-conflict", f"net {net!r} is both a primary input and output"))
        for cell in self.cells:
            for net in cell.inputs:
                if net not in inputs and net not in drivers:
                    diags.append(Diagnostic("undriven", f"input {net!r} of cell {cell.id!r} has no driver"))
        for net in self.outputs:
            if net not in drivers and net not in inputs:
                diags.append(Diagnostic("undriven", f"primary output {net!r} has no driver"))
        known = set(self.nets)
        for port, rails in self.ports.items():
            if len(rails) != 2:
                diags.append(Diagnostic("port", f"port {port!r} must have exactly two rails"))
                continue
            for rail in rails:
                if rail not in known:
                    diags.append(Diagnostic("port", f"port {port!r} refers to unknown net {rail!r}"))
            if sum(r in inputs for r in rails) == 1:
                diags.append(Diagnostic("port", f"port {port!r} mixes input and non-input rails"))
        loop = self._combinational_loop()
        if loop:
            diags.append(Diagnostic("loop", "combinational loop through " + " -> ".join(loop)))
        return diags

    def check(self) -> "Netlist":
        """Raise :class:`NetlistError` listing all diagnostics, else return self."""
        diags = self.validate()
        if diags:
            raise NetlistError(f"netlist {self.name!r} is invalid:\n  " + "\n  ".join(map(str, diags)))
        return self

    def _combinational_loop(self) -> list[str]:
        graph = nx.DiGraph()
        for cell in self.cells:
            graph.add_node(cell.output)
            if cell.kind is CellKind.C2:
                continue  # stateful: its output is a cut point
            for net in cell.inputs:
                graph.add_edge(net, cell.output)
        try:
            cycle = nx.find_cycle(graph)
        except nx.NetworkXNoCycle:
            return []
        return [u for u, _ in cycle] + [cycle[0][0]]


_WORD_PORT = re.compile(r"^(?P<stem>.*?[^0-9])(?P<index>[0-9]*)$")


# -- JSON -------------------------------------------------------------------

NETLIST_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "inputs", "outputs", "ports", "cells"],
    "properties": {
        "name": {"type": "string"},
        "inputs": {"type": "array", "items": {"type": "string"}},
        "outputs": {"type": "array", "items": {"type": "string"}},
        "ports": {
            "type": "object",
            "additionalProperties": {
                "type": "array",
                "items": {"type": "string"},
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "cells": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "kind", "in", "out"],
                "properties": {
                    "id": {"type": "string"},
                    "kind": {"enum": [k.value for k in CellKind]},
                    "in": {"type": "array", "items": {"type": "string"}},
                    "out": {"type": "string"},
                },
            },
        },
    },
}

_validator = jsonschema.Draft202012Validator(NETLIST_SCHEMA)


def to_document(netlist: Netlist) -> dict:
    return {
        "name": netlist.name,
        "inputs": list(netlist.inputs),
        "outputs": list(netlist.outputs),
        "ports": {name: [r1, r0] for name, (r1, r0) in netlist.ports.items()},
        "cells": [
            {"id": c.id, "kind": c.kind.value, "in": list(c.inputs), "out": c.output}
            for c in netlist.cells
        ],
    }


def write_json(netlist: Netlist) -> bytes:
    """Serialize deterministically: insertion order, fixed keys, UTF-8, LF."""
    text = json.dumps(to_document(netlist), indent=1, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def read_json(data: bytes | str) -> Netlist:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise NetlistFormatError(f"not UTF-8: byte offset {exc.start}") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise NetlistFormatError(
            f"parse error at line {exc.lineno}, column {exc.colno} (offset {exc.pos}): {exc.msg}"
        ) from None
    errors = sorted(_validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        diags = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise NetlistFormatError("schema violation: " + "; ".join(diags), diags)
    cells = [Cell(c["id"], CellKind(c["kind"]), tuple(c["in"]), c["out"]) for c in doc["cells"]]
    return Netlist(
        doc["name"],
        list(doc["inputs"]),
        list(doc["outputs"]),
        {name: (rails[0], rails[1]) for name, rails in doc["ports"].items()},
        cells,
    )


"""Classify outputs as strongly, weakly or early indicating by probing with partial inputs.

An output is *early-set* if it becomes valid while one of the input ports
it structurally depends on is still spacer, and *early-reset* if it
returns to spacer while one of those ports is still valid.  Because the
logic is monotone within a phase, withholding (or holding) a single port is
enough: any smaller subset that works implies a single-port probe that
works too.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .batch import BatchSimulator, mask_from_bools
from .cells import TimingAreaModel
from .netlist import Netlist
from .simulator import compile_netlist

EXHAUSTIVE_PORTS = 16
SAMPLE_LANES = 4096


class Indication(enum.Enum):
    STRONG = "strong"
    WEAK = "weak"
    EARLY = "early"


@dataclass(frozen=True)
class OutputIndication:
    output: str
    support: tuple[str, ...]
    early_set: bool
    early_reset: bool
    set_witness: str | None = None     # input port withheld when the output was set early
    reset_witness: str | None = None   # input port still valid when the output reset early

    @property
    def kind(self) -> Indication:
        return Indication.EARLY if self.early_set or self.early_reset else Indication.STRONG

    def __str__(self) -> str:
        flags = [name for name, on in (("early-set", self.early_set), ("early-reset", self.early_reset)) if on]
        return f"{self.output}: " + (", ".join(flags) if flags else "strong")


@dataclass(frozen=True)
class IndicationReport:
    block: Indication
    outputs: tuple[OutputIndication, ...]

    def __getitem__(self, output: str) -> OutputIndication:
        for o in self.outputs:
            if o.output == output:
                return o
        raise KeyError(output)

    def lines(self) -> list[str]:
        return [str(o) for o in self.outputs] + [f"block: {self.block.value}"]


def _support(netlist: Netlist, rails: tuple[str, ...]) -> set[str]:
    g = nx.DiGraph()
    g.add_nodes_from(netlist.nets)
    g.add_edges_from((i, cell.output) for cell in netlist.cells for i in cell.inputs)
    nets = set()
    for r in rails:
        nets |= nx.ancestors(g, r) | {r}
    return {p for p in netlist.input_ports() if set(netlist.ports[p]) & nets}


def probe_indication(netlist: Netlist, model: TimingAreaModel | None = None, seed: int = 1) -> IndicationReport:
    """Per-output early-set/early-reset flags and the block's indication class.

    Input code words are enumerated exhaustively for up to 16 input ports;
    larger blocks are probed with 4096 code words drawn with ``seed``.
    """
    c = compile_netlist(netlist, model)
    nl = c.netlist
    ports = nl.input_ports()
    n = len(ports)
    if n <= EXHAUSTIVE_PORTS:
        lanes = 1 << n
        lane_ids = np.arange(lanes, dtype=np.uint64)
        bits = [((lane_ids >> np.uint64(i)) & np.uint64(1)).astype(bool) for i in range(n)]
    else:
        lanes = SAMPLE_LANES
        rng = np.random.Generator(np.random.PCG64(seed))
        bits = [rng.integers(0, 2, size=lanes).astype(bool) for _ in range(n)]
    full = (1 << lanes) - 1
    valid: dict[int, int] = {}
    for port, b in zip(ports, bits):
        ones = mask_from_bools(b)
        r1, r0 = c.ports[port]
        valid[r1], valid[r0] = ones, full ^ ones

    observed: list[tuple[str, tuple[int, ...]]] = [(p, c.ports[p]) for p in nl.output_ports()]
    paired = {r for _, rails in observed for r in rails}
    observed += [(net, (c.index[net],)) for net in nl.outputs if c.index[net] not in paired]
    support = {name: _support(nl, tuple(c.names[r] for r in rails)) for name, rails in observed}

    def is_valid(sim: BatchSimulator, rails) -> int:
        m = 0
        for r in rails:
            m |= sim.val[r]
        return m

    early_set: dict[str, str] = {}
    early_reset: dict[str, str] = {}
    for port in ports:
        held = set(c.ports[port])
        # set probe: everything valid except ``port``
        sim = BatchSimulator(c, None, lanes)
        sim.settle({net: m for net, m in valid.items() if net not in held})
        for name, rails in observed:
            if port in support[name] and name not in early_set and is_valid(sim, rails):
                early_set[name] = port
        # reset probe: everything valid, then reset all but ``port``
        sim = BatchSimulator(c, None, lanes)
        sim.settle(valid)
        sim.settle({net: 0 for net in valid if net not in held})
        for name, rails in observed:
            if port in support[name] and name not in early_reset and full & ~is_valid(sim, rails):
                early_reset[name] = port

    outputs = tuple(
        OutputIndication(name, tuple(p for p in ports if p in support[name]),
                         name in early_set, name in early_reset, early_set.get(name), early_reset.get(name))
        for name, _ in observed
    )
    if any(o.kind is Indication.EARLY for o in outputs):
        block = Indication.EARLY
    elif any(set(o.support) != set(ports) for o in outputs):
        block = Indication.WEAK
    else:
        block = Indication.STRONG
    return IndicationReport(block, outputs)

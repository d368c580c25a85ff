"""Static analyses, functional verification and configuration comparison."""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import networkx as nx
import numpy as np

from .batch import VIOLATION_KINDS, decode_word, lowest_lane, run_cycles
from .cells import CellKind, TimingAreaModel, default_model
from .generators import AdderComposition, DsopEquationTable, build_rca
from .netlist import Netlist
from .simulator import (
    Compiled, DEFAULT_EVENT_BUDGET, SimulationError, Simulator, adder_width, compile_netlist, run_cycle,
    run_handshake_cycle,
)


# -- structural timing ---------------------------------------------------------

@dataclass(frozen=True)
class PathReport:
    length: int
    cells: tuple[str, ...]
    source: str
    sink: str

    def __str__(self) -> str:
        return f"{self.length} units, {len(self.cells)} cells: {self.source} -> " + " -> ".join(self.cells) + f" -> {self.sink}"


def _timing_graph(netlist: Netlist) -> nx.DiGraph:
    """net -> net edges through each cell; C2 feedback edges are dropped."""
    g = nx.DiGraph()
    g.add_nodes_from(netlist.nets)
    for cell in netlist.cells:
        for net in cell.inputs:
            g.add_edge(net, cell.output, cell=cell)
    if not nx.is_directed_acyclic_graph(g):
        for scc in nx.strongly_connected_components(g):
            if len(scc) < 2 and not any(g.has_edge(n, n) for n in scc):
                continue
            for u, v, data in list(g.edges(data=True)):
                if u in scc and v in scc and data["cell"].kind is CellKind.C2:
                    g.remove_edge(u, v)
    return g


def structural_sta(netlist: Netlist, model: TimingAreaModel | None = None,
                   sources: Iterable[str] | None = None, sinks: Iterable[str] | None = None,
                   per_output: bool = False) -> PathReport | dict[str, PathReport] | None:
    """Longest weighted path from ``sources`` (default: primary inputs) to ``sinks``.

    C-elements count with their full delay.  Returns ``None`` when no sink is
    reachable from any source.
    """
    model = model or default_model()
    g = _timing_graph(netlist)
    sources = list(netlist.inputs if sources is None else sources)
    sinks = list(netlist.outputs if sinks is None else sinks)
    arrival: dict[str, int] = {s: 0 for s in sources}
    back: dict[str, tuple[str, str]] = {}
    for net in nx.topological_sort(g):
        best = None
        for pred, _, data in g.in_edges(net, data=True):
            if pred not in arrival:
                continue
            t = arrival[pred] + model.delay[data["cell"].kind]
            if best is None or t > best[0]:
                best = (t, pred, data["cell"].id)
        if best is not None and (net not in arrival or best[0] > arrival[net]):
            arrival[net] = best[0]
            back[net] = (best[1], best[2])

    def path_to(sink: str) -> PathReport:
        cells, net = [], sink
        while net in back:
            net, cid = back[net]
            cells.append(cid)
        return PathReport(arrival[sink], tuple(reversed(cells)), net, sink)

    reports = {s: path_to(s) for s in sinks if s in arrival}
    if per_output:
        return reports
    if not reports:
        return None
    return max(reports.values(), key=lambda r: r.length)


def path_cell_counts(netlist: Netlist, sources: Iterable[str], sinks: Iterable[str]) -> set[int]:
    """Cell counts of every structural path from ``sources`` to ``sinks``."""
    g = _timing_graph(netlist)
    counts: set[int] = set()
    for s in sources:
        for t in sinks:
            counts.update(len(p) - 1 for p in nx.all_simple_paths(g, s, t))
    return counts


# -- area ------------------------------------------------------------------------

@dataclass(frozen=True)
class AreaReport:
    total: int
    census: dict[CellKind, int]

    def __str__(self) -> str:
        parts = ", ".join(f"{k.value}:{n}" for k, n in sorted(self.census.items(), key=lambda kv: kv[0].value))
        return f"{self.total} transistors ({parts})"


def area_report(netlist: Netlist, model: TimingAreaModel | None = None) -> AreaReport:
    model = model or default_model()
    census = netlist.census()
    return AreaReport(sum(n * model.area[k] for k, n in census.items()), census)


# -- DSOP and monotonic cover ---------------------------------------------------

@dataclass(frozen=True)
class Witness:
    code_word: tuple[tuple[str, int], ...]
    rail: str
    detail: str

    def __str__(self) -> str:
        word = " ".join(f"{p}={v}" for p, v in self.code_word)
        return f"[{word}] {self.rail}: {self.detail}"


@dataclass
class CheckResult:
    name: str
    witnesses: list[Witness] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    checked: int = 0

    @property
    def passed(self) -> bool:
        return not self.witnesses

    def __str__(self) -> str:
        return f"{self.name}: {'PASS' if self.passed else 'FAIL'} ({self.checked} code words)"


def _word_key(assignment: Mapping[str, int]) -> tuple[tuple[str, int], ...]:
    return tuple(assignment.items())


def check_dsop(table: DsopEquationTable) -> CheckResult:
    """Disjointness and completeness over all valid input code words.

    (a) at most one product of any output-rail equation holds;
    (b) exactly one rail of every output pair is asserted.
    """
    result = CheckResult(f"dsop[{table.name}]")
    for word in table.code_words():
        result.checked += 1
        key = _word_key(word)
        for rail in table.outputs:
            hits = table.true_products(rail, word)
            if len(hits) > 1:
                terms = ", ".join("".join(map(table.literal_name, table.outputs[rail][i])) for i in hits)
                result.witnesses.append(Witness(key, table.literal_name(rail), f"products not disjoint: {terms}"))
        values = table.evaluate(word)
        for port in table.output_ports:
            asserted = values.get((port, 1), 0) + values.get((port, 0), 0)
            if asserted != 1:
                result.witnesses.append(Witness(key, port, f"{asserted} rails asserted"))
    return result


def check_monotonic_cover(netlist: Netlist | Compiled, table: DsopEquationTable,
                          code_words: Iterable[Mapping[str, int | None]] | None = None,
                          model: TimingAreaModel | None = None) -> CheckResult:
    """Exactly one product drives each asserted output rail, and the netlist agrees.

    Code words with a non-binary (illegal or spacer) port value are skipped
    with a diagnostic.
    """
    c = compile_netlist(netlist, model)
    result = CheckResult(f"cover[{table.name}]")
    ports = set(table.inputs)
    for word in (table.code_words() if code_words is None else code_words):
        word = dict(word)
        bad = [p for p in table.inputs if word.get(p) not in (0, 1)]
        if bad or set(word) != ports:
            result.skipped.append(f"{word}: not a valid code word (ports {bad or sorted(set(word) ^ ports)})")
            continue
        result.checked += 1
        key = _word_key(word)
        sim = Simulator(c)
        assignment = {}
        for port, bit in word.items():
            r1, r0 = c.netlist.ports[port]
            assignment[r1], assignment[r0] = bit, 1 - bit
        sim.settle(assignment)
        values = table.evaluate(word)
        for port in table.output_ports:
            rail = 1 if values.get((port, 1)) else 0
            hits = table.true_products((port, rail), word)
            if len(hits) != 1:
                result.witnesses.append(Witness(key, f"{port}{rail}", f"{len(hits)} products active"))
            got = sim.pair(port)
            if (got.rail1, got.rail0) != (rail, 1 - rail):
                result.witnesses.append(
                    Witness(key, port, f"netlist gives ({got.rail1},{got.rail0}), equations assert rail {rail}")
                )
    return result


def mutate_literals(table: DsopEquationTable) -> Iterator[tuple[str, DsopEquationTable]]:
    """Every single-literal mutation: rail flip, deletion, substitution by another port."""
    for rail, products in table.outputs.items():
        for pi, product in enumerate(products):
            for li, (port, r) in enumerate(product):
                variants = [("flip", product[:li] + ((port, 1 - r),) + product[li + 1:])]
                if len(product) > 1:
                    variants.append(("drop", product[:li] + product[li + 1:]))
                for other in table.inputs:
                    if other != port:
                        variants.append((f"swap->{other}", product[:li] + ((other, r),) + product[li + 1:]))
                for how, new in variants:
                    mutated = list(products)
                    mutated[pi] = new
                    label = f"{table.literal_name(rail)} product {pi} literal {li} {how}"
                    yield label, table.with_products(rail, mutated)


# -- vectors -----------------------------------------------------------------------

Vectors = dict[str, np.ndarray]


def exhaustive_chunks(width: int, chunk: int) -> Iterator[tuple[int, Vectors]]:
    """All 2**(2*width+1) (a, b, cin) vectors in chunks; lane k = cin | a<<1 | b<<(width+1)."""
    total = 1 << (2 * width + 1)
    mask = np.uint64((1 << width) - 1)
    for start in range(0, total, chunk):
        k = np.arange(start, min(total, start + chunk), dtype=np.uint64)
        yield start, {"A": (k >> np.uint64(1)) & mask, "B": k >> np.uint64(width + 1), "CIN": k & np.uint64(1)}


def word_chunks(netlist: Netlist | Compiled, chunk: int) -> Iterator[tuple[int, Vectors]]:
    """Every combination of input word values, first word least significant."""
    c = compile_netlist(netlist)
    widths = {w: len(ps) for w, ps in c.input_words.items()}
    total = 1 << sum(widths.values())
    for start in range(0, total, chunk):
        k = np.arange(start, min(total, start + chunk), dtype=np.uint64)
        values, shift = {}, 0
        for word, n in widths.items():
            values[word] = (k >> np.uint64(shift)) & np.uint64((1 << n) - 1)
            shift += n
        yield start, values


def random_vectors(width: int, count: int, seed: int = 1) -> Vectors:
    """Uniform operands from a PCG64 generator seeded with ``seed``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    hi = 1 << width
    a = rng.integers(0, hi, size=count, dtype=np.uint64, endpoint=False)
    b = rng.integers(0, hi, size=count, dtype=np.uint64, endpoint=False)
    cin = rng.integers(0, 2, size=count, dtype=np.uint64)
    return {"A": a, "B": b, "CIN": cin}


def carry_chain_vectors(width: int) -> Vectors:
    """Every single carry chain: an origin, a run of propagates, and a stop.

    The origin is the carry-in or a bit with ``a == b`` (generate if 1, kill
    if 0); bits inside the run propagate; bits outside are the opposite of
    the origin kind.  Includes the all-propagate vectors.
    """
    rows = []
    full = (1 << width) - 1
    for kind in (1, 0):
        for origin in range(-1, width):
            for end in range(origin + 1, width + 1):
                a = b = 0
                for i in range(width):
                    if i == origin:
                        ai = bi = kind
                    elif origin < i < end:
                        ai, bi = (1, 0) if i % 2 == 0 else (0, 1)
                    else:
                        ai = bi = 1 - kind
                    a |= ai << i
                    b |= bi << i
                cin = kind if origin == -1 else 1 - kind
                rows.append((a & full, b & full, cin))
    rows = list(dict.fromkeys(rows))
    arr = np.array(rows, dtype=np.uint64)
    return {"A": arr[:, 0], "B": arr[:, 1], "CIN": arr[:, 2]}


def concat_vectors(*parts: Vectors) -> Vectors:
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def chunked(vectors: Vectors, chunk: int) -> Iterator[tuple[int, Vectors]]:
    n = len(next(iter(vectors.values())))
    for start in range(0, n, chunk):
        yield start, {k: v[start:start + chunk] for k, v in vectors.items()}


# -- sweeps ------------------------------------------------------------------------

@dataclass
class SweepSummary:
    """Reduction of many batch transactions, in vector order."""

    vectors: int = 0
    max_forward: int = -1
    worst_forward: dict[str, int] | None = None
    max_reverse: int = -1
    mismatches: int = 0
    first_mismatch: dict[str, int] | None = None
    violations: dict[str, int] = field(default_factory=lambda: dict.fromkeys(VIOLATION_KINDS, 0))
    first_violation: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def protocol_ok(self) -> bool:
        return not any(self.violations.values())

    @property
    def passed(self) -> bool:
        return self.protocol_ok and self.mismatches == 0

    def merge(self, other: "SweepSummary") -> None:
        self.vectors += other.vectors
        if other.max_forward > self.max_forward:
            self.max_forward, self.worst_forward = other.max_forward, other.worst_forward
        self.max_reverse = max(self.max_reverse, other.max_reverse)
        if other.mismatches and self.first_mismatch is None:
            self.first_mismatch = other.first_mismatch
        self.mismatches += other.mismatches
        for kind, n in other.violations.items():
            self.violations[kind] += n
            if n and kind not in self.first_violation:
                self.first_violation[kind] = other.first_violation[kind]


def _lane_vector(values: Vectors, lane: int) -> dict[str, int]:
    return {k: int(v[lane]) for k, v in values.items()}


def sweep_chunk(netlist: Netlist | Compiled, model: TimingAreaModel | None, values: Vectors,
                check_sum: bool = True, event_budget: int = DEFAULT_EVENT_BUDGET) -> SweepSummary:
    c = compile_netlist(netlist, model)
    res = run_cycles(c, None, values, event_budget)
    out = SweepSummary(vectors=res.lanes)
    out.max_forward, lane = res.max_latency()
    if lane >= 0:
        out.worst_forward = _lane_vector(values, lane)
    out.max_reverse, _ = res.max_latency(reverse=True)
    for kind, mask in res.masks.items():
        out.violations[kind] = mask.bit_count()
        if mask:
            out.first_violation[kind] = _lane_vector(values, lowest_lane(mask))
    if check_sum:
        width = len(c.output_words["SUM"])
        got = decode_word(res, c, "SUM") | (decode_word(res, c, "COUT") << np.uint64(width))
        want = values["A"].astype(np.uint64) + values["B"].astype(np.uint64) + values["CIN"].astype(np.uint64)
        bad = np.flatnonzero(got != want)
        out.mismatches = int(bad.size)
        if bad.size:
            out.first_mismatch = _lane_vector(values, int(bad[0]))
    return out


def sweep(netlist: Netlist | Compiled, model: TimingAreaModel | None,
          chunks: Iterable[tuple[int, Vectors]], check_sum: bool = True, workers: int = 1) -> SweepSummary:
    """Run every chunk and reduce in chunk order (independent of ``workers``)."""
    total = SweepSummary()
    if workers <= 1:
        c = compile_netlist(netlist, model)
        for _, values in chunks:
            total.merge(sweep_chunk(c, None, values, check_sum))
        return total
    if model is None and isinstance(netlist, Compiled):
        model = netlist.model
    plain = netlist.netlist if isinstance(netlist, Compiled) else netlist
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(sweep_chunk, itertools.repeat(plain), itertools.repeat(model),
                              (values for _, values in chunks), itertools.repeat(check_sum)))
    for part in parts:
        total.merge(part)
    return total


def measure_forward_latency(netlist: Netlist | Compiled, model: TimingAreaModel | None = None,
                            vectors: Vectors | None = None) -> tuple[int, dict[str, int] | None]:
    """Worst forward latency and the first vector attaining it (all input words exhaustively by default)."""
    chunks = word_chunks(netlist, DEFAULT_CHUNK) if vectors is None else chunked(vectors, DEFAULT_CHUNK)
    summary = sweep(netlist, model, chunks, check_sum=False)
    return summary.max_forward, summary.worst_forward


# -- adder verification ------------------------------------------------------------

DEFAULT_CHUNK = 1 << 16


@dataclass
class VerifyResult:
    width: int
    mode: str
    summary: SweepSummary
    counterexample: dict[str, int] | None = None
    excerpt: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.summary.passed

    def __str__(self) -> str:
        s = self.summary
        lines = [f"{self.mode}: {s.vectors} vectors, width {self.width}: {'PASS' if self.passed else 'FAIL'}"]
        lines.append(f"worst forward latency {s.max_forward} at "
                     + (" ".join(f"{k}={v:#x}" for k, v in s.worst_forward.items()) if s.worst_forward else "-"))
        if s.mismatches:
            lines.append(f"{s.mismatches} wrong results")
        for kind, n in s.violations.items():
            if n:
                lines.append(f"{n} lanes with {kind} violations")
        if self.counterexample:
            lines.append("counterexample: " + " ".join(f"{k}={v:#x}" for k, v in self.counterexample.items()))
            lines += ["  " + line for line in self.excerpt]
        return "\n".join(lines)


def verify_adder(netlist: Netlist, width: int | None = None, mode: str = "exhaustive",
                 seed: int = 1, count: int = 1000, model: TimingAreaModel | None = None,
                 workers: int = 1, chunk: int = DEFAULT_CHUNK) -> VerifyResult:
    """Check every vector's decoded result against ``a + b + cin``.

    ``mode`` is ``"exhaustive"`` (width <= 12) or ``"random"`` (``count``
    vectors drawn with ``seed``).  Protocol violations also fail the run.
    """
    w = adder_width(netlist)
    if width is not None and width != w:
        raise ValueError(f"netlist is {w} bits wide, not {width}")
    if mode == "exhaustive":
        if w > 12:
            raise ValueError("exhaustive verification is limited to width <= 12")
        chunks = exhaustive_chunks(w, chunk)
        label = "exhaustive"
    elif mode == "random":
        chunks = chunked(random_vectors(w, count, seed), chunk)
        label = f"random(seed={seed}, count={count})"
    else:
        raise ValueError(f"unknown mode {mode!r}")
    summary = sweep(netlist, model, chunks, workers=workers)
    result = VerifyResult(w, label, summary)
    bad = summary.first_mismatch or next(iter(summary.first_violation.values()), None)
    if bad is not None:
        result.counterexample = bad
        result.excerpt = counterexample_excerpt(netlist, model, bad)
    return result


def counterexample_excerpt(netlist: Netlist, model: TimingAreaModel | None, vector: Mapping[str, int],
                           limit: int = 40) -> list[str]:
    """Replay one vector on the scalar simulator; return the data-phase output activity."""
    sim = Simulator(netlist, model)
    try:
        if sim.c.done is not None:
            report, trace = run_handshake_cycle(sim.c, None, vector["A"], vector["B"], vector["CIN"], sim=sim)
        else:
            report, trace = run_cycle(sim.c, None, dict(vector), sim=sim)
    except SimulationError as exc:
        lines = [f"simulation error: {exc}"]
        if exc.trace is not None:
            lines += exc.trace.lines()[-limit:]
        return lines
    outs = set(netlist.outputs)
    lines = [str(report)]
    lines += [ln for ln in trace.lines() if ln.startswith("#") or ln.split()[1] in outs][:limit]
    return lines


# -- comparison ------------------------------------------------------------------

@dataclass(frozen=True)
class VectorPolicy:
    random: int = 1000
    seed: int = 1
    carry_chains: bool = True

    def vectors(self, width: int) -> Vectors:
        parts = []
        if self.carry_chains:
            parts.append(carry_chain_vectors(width))
        if self.random:
            parts.append(random_vectors(width, self.random, self.seed))
        if not parts:
            raise ValueError("vector policy selects no vectors")
        return concat_vectors(*parts)


@dataclass(frozen=True)
class ComparisonRow:
    legend: str
    composition: str
    sim_forward_latency: int
    structural_longest_path: int
    area_transistors: int
    census: dict[CellKind, int]
    worst_vector: dict[str, int] | None = None
    vectors: int = 0
    violations: int = 0
    mismatches: int = 0


CENSUS_COLUMNS = [k for k in CellKind]


def compare(configurations: Sequence[AdderComposition], model: TimingAreaModel | None = None,
            policy: VectorPolicy = VectorPolicy(), workers: int = 1) -> list[ComparisonRow]:
    """Latency, structural path and area per configuration, in the given order."""
    if not configurations:
        raise ValueError("no configurations to compare")
    widths = {c.width for c in configurations}
    if len(widths) != 1:
        raise ValueError(f"configurations have different widths: {sorted(widths)}")
    model = model or default_model()
    vectors = policy.vectors(widths.pop())
    rows = []
    for comp in configurations:
        block = build_rca(comp)
        sta = structural_sta(block, model)
        area = area_report(block, model)
        summary = sweep(build_rca(comp, with_cd=True), model, chunked(vectors, DEFAULT_CHUNK), workers=workers)
        rows.append(ComparisonRow(
            legend=comp.label,
            composition=str(comp),
            sim_forward_latency=summary.max_forward,
            structural_longest_path=sta.length,
            area_transistors=area.total,
            census=area.census,
            worst_vector=summary.worst_forward,
            vectors=summary.vectors,
            violations=sum(summary.violations.values()),
            mismatches=summary.mismatches,
        ))
    return rows


def _find(rows: Sequence[ComparisonRow], n_sbfa: int | None = None, all_sbfa: bool = False, all_dbfa: bool = False):
    for row in rows:
        comp = AdderComposition.parse(row.composition)
        if all_sbfa and comp.n_dbfa == 0:
            return row
        if all_dbfa and comp.n_sbfa == 0:
            return row
        if n_sbfa is not None and comp.n_sbfa == n_sbfa and comp.n_dbfa > 0:
            return row
    return None


def ordering_checks(rows: Sequence[ComparisonRow]) -> list[tuple[str, bool]]:
    """Latency and area orderings between the reference shapes present in ``rows``.

    Shapes: all single-bit (S), all dual-bit (D), and two/four single-bit
    stages followed by dual-bit stages (2S, 4S).
    """
    s, d = _find(rows, all_sbfa=True), _find(rows, all_dbfa=True)
    m2, m4 = _find(rows, n_sbfa=2), _find(rows, n_sbfa=4)
    lat = lambda r: r.sim_forward_latency
    area = lambda r: r.area_transistors
    checks = []
    if s and d:
        checks.append((f"latency({d.legend}) < latency({s.legend})", lat(d) < lat(s)))
    if m2 and d:
        checks.append((f"latency({m2.legend}) <= latency({d.legend})", lat(m2) <= lat(d)))
    if m2 and m4:
        checks.append((f"latency({m4.legend}) >= latency({m2.legend})", lat(m4) >= lat(m2)))
    if s and m2 and d:
        checks.append((f"area({s.legend}) < area({m2.legend}) < area({d.legend})", area(s) < area(m2) < area(d)))
    if m2 and m4:
        checks.append((f"area({m4.legend}) < area({m2.legend})", area(m4) < area(m2)))
    return checks


def report_footer(rows: Sequence[ComparisonRow], policy: VectorPolicy) -> list[str]:
    lines = [f"seed={policy.seed} random={policy.random} carry_chains={'yes' if policy.carry_chains else 'no'} "
             f"vectors={rows[0].vectors if rows else 0}"]
    base = _find(rows, all_sbfa=True)
    if base:
        for row in rows:
            if row is not base:
                lines.append(f"latency ratio {row.legend}/{base.legend} = "
                             f"{row.sim_forward_latency / base.sim_forward_latency:.3f}")
    for row in rows:
        if row.worst_vector:
            v = row.worst_vector
            lines.append(f"worst vector {row.legend}: A={v['A']:#x} B={v['B']:#x} CIN={v['CIN']}")
        if row.violations or row.mismatches:
            lines.append(f"{row.legend}: {row.mismatches} wrong results, {row.violations} protocol violations")
    for text, ok in ordering_checks(rows):
        lines.append(f"{'PASS' if ok else 'FAIL'} {text}")
    return ["# " + line for line in lines]


def _cells(row: ComparisonRow) -> list[str]:
    return [row.legend, row.composition, str(row.sim_forward_latency), str(row.structural_longest_path),
            str(row.area_transistors)] + [str(row.census.get(k, 0)) for k in CENSUS_COLUMNS]


HEADER = ["legend", "composition", "latency_units", "longest_path_units", "area_transistors"] + [
    k.value for k in CENSUS_COLUMNS
]


def format_csv(rows: Sequence[ComparisonRow], policy: VectorPolicy) -> str:
    lines = [",".join(HEADER)] + [",".join(_cells(r)) for r in rows] + report_footer(rows, policy)
    return "\n".join(lines) + "\n"


def format_table(rows: Sequence[ComparisonRow], policy: VectorPolicy) -> str:
    body = [HEADER] + [_cells(r) for r in rows]
    widths = [max(len(line[i]) for line in body) for i in range(len(HEADER))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in body]
    return "\n".join(lines + report_footer(rows, policy)) + "\n"

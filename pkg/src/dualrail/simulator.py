"""Event-driven simulation under a 4-phase return-to-zero environment.

Semantics shared with :mod:`dualrail.batch`:

* Every net starts at 0 and every C-element stores 0.  At power-up all
  cells are evaluated once; for netlists without inverters this is a no-op.
* Time advances in integer delay units.  At each timestamp all events due
  are applied first, then every cell reading a changed net is re-evaluated.
* A re-evaluation that disagrees with the net's current value schedules one
  event at ``now + delay``; one that agrees cancels any pending event on
  that net (inertial delay).
* Events pop in ``(time, sequence)`` order.

The environment plays the transmitter: it drives a valid code word,
waits until the circuit is quiescent, then drives the spacer.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

from .cells import CellKind, TimingAreaModel, default_model, evaluator
from .encoding import RailPair
from .netlist import Netlist


class SimulationError(RuntimeError):
    def __init__(self, message: str, trace: "SimTrace | None" = None):
        super().__init__(message)
        self.trace = trace


class DivergenceError(SimulationError):
    pass


class DeadlockError(SimulationError):
    pass


class IllegalOutputError(SimulationError):
    pass


DEFAULT_EVENT_BUDGET = 10 ** 6


class Compiled:
    """Index-based view of a validated netlist for the simulators."""

    def __init__(self, netlist: Netlist, model: TimingAreaModel | None = None):
        netlist.check()
        model = model or default_model()
        self.netlist = netlist
        self.model = model
        self.names = netlist.nets
        self.index = {name: i for i, name in enumerate(self.names)}
        idx = self.index
        self.cells = [
            (evaluator(c.kind), tuple(idx[n] for n in c.inputs), idx[c.output], model.delay[c.kind])
            for c in netlist.cells
        ]
        self.fanout: list[list[int]] = [[] for _ in self.names]
        for ci, c in enumerate(netlist.cells):
            for n in dict.fromkeys(c.inputs):
                self.fanout[idx[n]].append(ci)
        self.inputs = [idx[n] for n in netlist.inputs]
        self.outputs = [idx[n] for n in netlist.outputs]
        self.ports = {p: (idx[r1], idx[r0]) for p, (r1, r0) in netlist.ports.items()}
        self.words = netlist.words()
        input_ports = set(netlist.input_ports())
        self.input_words = {w: ps for w, ps in self.words.items() if ps[0] in input_ports}
        self.output_words = {w: ps for w, ps in self.words.items() if ps[0] not in input_ports}
        self.output_pairs = [self.ports[p] for ps in self.output_words.values() for p in ps]
        self.done = idx.get("DONE") if "DONE" in netlist.outputs else None
        kinds = {c.kind for c in netlist.cells}
        self.max_delay = max((model.delay[k] for k in kinds), default=0)

    def rail_assignment(self, values: Mapping[str, int | None]) -> dict[int, int]:
        """Map word values (``None`` = spacer) onto input rail bits."""
        out: dict[int, int] = {}
        for word, value in values.items():
            if word not in self.input_words:
                raise KeyError(f"{word!r} is not an input word of {self.netlist.name!r}")
            ports = self.input_words[word]
            if value is not None and not 0 <= value < 1 << len(ports):
                raise ValueError(f"{word}={value} does not fit in {len(ports)} bits")
            for i, port in enumerate(ports):
                r1, r0 = self.ports[port]
                if value is None:
                    out[r1] = out[r0] = 0
                else:
                    bit = (value >> i) & 1
                    out[r1], out[r0] = bit, 1 - bit
        return out


def compile_netlist(netlist: Netlist | Compiled, model: TimingAreaModel | None = None) -> Compiled:
    if isinstance(netlist, Compiled):
        if model is not None and model != netlist.model:
            return Compiled(netlist.netlist, model)
        return netlist
    return Compiled(netlist, model)


@dataclass(frozen=True)
class Transition:
    time: int
    net: str
    old: int
    new: int

    def __str__(self) -> str:
        return f"t={self.time} {self.net} {self.old}->{self.new}"


class Simulator:
    """Single-run event-driven simulator; owns its state."""

    def __init__(self, netlist: Netlist | Compiled, model: TimingAreaModel | None = None,
                 event_budget: int = DEFAULT_EVENT_BUDGET):
        self.c = compile_netlist(netlist, model)
        self.event_budget = event_budget
        self.reset()

    def reset(self) -> None:
        n = len(self.c.names)
        self.values = [0] * n
        self.time = 0
        self._queue: list[tuple[int, int, int, int]] = []
        self._pending: dict[int, tuple[int, int, int]] = {}  # net -> (time, seq, value)
        self._seq = 0
        self._evaluate(range(len(self.c.cells)), 0)
        self._run(None)
        self.time = 0
        self.reset_state = tuple(self.values)

    def value(self, net: str) -> int:
        return self.values[self.c.index[net]]

    def pair(self, port: str) -> RailPair:
        r1, r0 = self.c.ports[port]
        return RailPair(self.values[r1], self.values[r0])

    def snapshot(self) -> tuple[int, ...]:
        return tuple(self.values)

    def settle(self, assignment: Mapping[str | int, int],
               on_step: Callable[[int, list[Transition]], None] | None = None,
               record: list[Transition] | None = None) -> list[Transition]:
        """Drive primary inputs at the current time and run to quiescence.

        ``assignment`` maps input nets (names or indices) to bits.  Transitions
        are appended to ``record`` (a fresh list by default) as they happen;
        ``on_step`` is called after the events of each timestamp are applied.
        """
        changed: list[int] = []
        trace = record if record is not None else []
        step: list[Transition] = []
        inputs = set(self.c.inputs)
        for net, bit in assignment.items():
            i = self.c.index[net] if isinstance(net, str) else net
            if i not in inputs:
                raise KeyError(f"{self.c.names[i]!r} is not a primary input")
            if self.values[i] != bit:
                step.append(Transition(self.time, self.c.names[i], self.values[i], bit))
                self.values[i] = bit
                changed.append(i)
        trace.extend(step)
        if changed and on_step:
            on_step(self.time, step)
        self._evaluate(self._readers(changed), self.time)
        self._run(trace, on_step)
        return trace

    def _readers(self, nets: Sequence[int]) -> list[int]:
        cells: set[int] = set()
        for n in nets:
            cells.update(self.c.fanout[n])
        return sorted(cells)

    def _evaluate(self, cell_ids, now: int) -> None:
        values, pending = self.values, self._pending
        for ci in cell_ids:
            fn, ins, out, delay = self.c.cells[ci]
            cur = values[out]
            v = fn([values[i] for i in ins], cur, 1)
            if out in pending:
                if pending[out][2] != v:
                    del pending[out]  # superseded: pulse swallowed
            elif v != cur:
                self._seq += 1
                pending[out] = (now + delay, self._seq, v)
                heapq.heappush(self._queue, (now + delay, self._seq, out, v))

    def _run(self, trace: list[Transition] | None, on_step=None) -> None:
        queue, pending, values = self._queue, self._pending, self.values
        events = 0
        while queue:
            t = queue[0][0]
            changed: list[int] = []
            step: list[Transition] = []
            while queue and queue[0][0] == t:
                _, seq, net, v = heapq.heappop(queue)
                if pending.get(net, (None, None))[1] != seq:
                    continue  # cancelled
                del pending[net]
                step.append(Transition(t, self.c.names[net], values[net], v))
                values[net] = v
                changed.append(net)
            if not changed:
                continue
            self.time = t
            events += len(changed)
            if trace is not None:
                trace.extend(step)
                if on_step:
                    on_step(t, step)
            if events > self.event_budget:
                raise DivergenceError(f"no quiescence after {events} events (t={t})")
            self._evaluate(self._readers(changed), t)


# -- handshake cycles ----------------------------------------------------------

class Marker(enum.Enum):
    VALID_APPLIED = "ValidApplied"
    ALL_OUTPUTS_VALID = "AllOutputsValid"
    DONE_HIGH = "DoneHigh"
    SPACER_APPLIED = "SpacerApplied"
    ALL_OUTPUTS_SPACER = "AllOutputsSpacer"
    DONE_LOW = "DoneLow"


MARKER_ORDER = list(Marker)


@dataclass
class SimTrace:
    transitions: list[Transition] = field(default_factory=list)
    # (marker, time, number of transitions recorded before it)
    markers: list[tuple[Marker, int, int]] = field(default_factory=list)
    max_delay: int = 1

    def mark(self, marker: Marker, time: int) -> None:
        self.markers.append((marker, time, len(self.transitions)))

    def marker_time(self, marker: Marker) -> int | None:
        for m, t, _ in self.markers:
            if m is marker:
                return t
        return None

    def marker_position(self, marker: Marker) -> int | None:
        for m, _, pos in self.markers:
            if m is marker:
                return pos
        return None

    def lines(self) -> list[str]:
        out, mi = [], 0
        for pos in range(len(self.transitions) + 1):
            while mi < len(self.markers) and self.markers[mi][2] == pos:
                m, t, _ = self.markers[mi]
                out.append(f"# {m.value} t={t}")
                mi += 1
            if pos < len(self.transitions):
                out.append(str(self.transitions[pos]))
        return out

    def dump(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def phase(self, start: Marker, end: Marker | None) -> list[Transition]:
        lo = self.marker_position(start)
        hi = self.marker_position(end) if end else None
        if lo is None:
            return []
        return self.transitions[lo:hi if hi is not None else len(self.transitions)]


@dataclass(frozen=True)
class CycleReport:
    forward_latency: int
    reverse_latency: int
    outputs: dict[str, int]
    inputs: dict[str, int]
    done_high: int | None = None
    done_low: int | None = None
    returned_to_reset: bool = True
    expected: int | None = None
    result: int | None = None

    @property
    def cycle_time(self) -> int:
        return self.forward_latency + self.reverse_latency

    @property
    def ok(self) -> bool:
        return self.expected is None or self.expected == self.result

    def __str__(self) -> str:
        ins = " ".join(f"{k}={v:#x}" for k, v in self.inputs.items())
        outs = " ".join(f"{k}={v:#x}" for k, v in self.outputs.items())
        text = (f"{ins} -> {outs} forward={self.forward_latency} reverse={self.reverse_latency} "
                f"cycle={self.cycle_time} reset={'ok' if self.returned_to_reset else 'FAIL'}")
        if self.expected is not None:
            text += f" expected={self.expected:#x} {'PASS' if self.ok else 'FAIL'}"
        return text


def _all_pairs(values: Sequence[int], pairs) -> tuple[bool, bool, bool]:
    """(all valid, all spacer, any illegal) over rail index pairs."""
    valid = spacer = True
    illegal = False
    for r1, r0 in pairs:
        a, b = values[r1], values[r0]
        if a and b:
            illegal = True
        if a or b:
            spacer = False
        if a == b:
            valid = False
    return valid, spacer, illegal


def run_cycle(netlist: Netlist | Compiled, model: TimingAreaModel | None,
              values: Mapping[str, int], sim: Simulator | None = None) -> tuple[CycleReport, SimTrace]:
    """One valid/spacer transaction on any dual-rail netlist.

    ``values`` maps every input word to an integer.  Raises
    :class:`DeadlockError` if outputs (or DONE) never complete and
    :class:`IllegalOutputError` if an output pair is ever ``(1, 1)``.
    """
    sim = sim or Simulator(netlist, model)
    c = sim.c
    missing = set(c.input_words) - set(values)
    if missing:
        raise KeyError(f"no value for input word(s) {sorted(missing)}")
    trace = SimTrace(max_delay=c.max_delay)
    reset_state = sim.snapshot()
    state = {"reached": False, "done": False, "illegal": None}

    def observer(rising: bool, reached: Marker, done: Marker):
        def on_step(t: int, step: list[Transition]) -> None:
            valid, spacer, illegal = _all_pairs(sim.values, c.output_pairs)
            if illegal and state["illegal"] is None:
                state["illegal"] = t
            if not state["reached"] and (valid if rising else spacer):
                trace.mark(reached, t)
                state["reached"] = True
            if c.done is not None and not state["done"] and sim.values[c.done] == int(rising):
                trace.mark(done, t)
                state["done"] = True
        return on_step

    def phase(assignment, rising, start, reached, done):
        state.update(reached=False, done=False)
        t0 = sim.time
        trace.mark(start, t0)
        sim.settle(assignment, observer(rising, reached, done), record=trace.transitions)
        if state["illegal"] is not None:
            raise IllegalOutputError(f"illegal output pair at t={state['illegal']}", trace)
        what = "valid" if rising else "spacer"
        if not state["reached"]:
            raise DeadlockError(f"outputs never all {what}", trace)
        if c.done is not None and not state["done"]:
            raise DeadlockError(f"DONE never went {'high' if rising else 'low'}", trace)
        return t0

    t0 = phase(c.rail_assignment(values), True, Marker.VALID_APPLIED, Marker.ALL_OUTPUTS_VALID, Marker.DONE_HIGH)
    outputs = {}
    for word, ports in c.output_words.items():
        outputs[word] = sum(sim.values[c.ports[p][0]] << i for i, p in enumerate(ports))
    spacer = {w: None for w in c.input_words}
    t1 = phase(c.rail_assignment(spacer), False, Marker.SPACER_APPLIED, Marker.ALL_OUTPUTS_SPACER, Marker.DONE_LOW)

    report = CycleReport(
        forward_latency=trace.marker_time(Marker.ALL_OUTPUTS_VALID) - t0,
        reverse_latency=trace.marker_time(Marker.ALL_OUTPUTS_SPACER) - t1,
        outputs=outputs,
        inputs=dict(values),
        done_high=trace.marker_time(Marker.DONE_HIGH),
        done_low=trace.marker_time(Marker.DONE_LOW),
        returned_to_reset=sim.snapshot() == reset_state,
    )
    return report, trace


def adder_width(netlist: Netlist | Compiled) -> int:
    words = netlist.words if isinstance(netlist, Compiled) else netlist.words()
    for word in ("A", "B", "CIN", "SUM", "COUT"):
        if word not in words:
            raise ValueError(f"not an adder netlist: no {word} word")
    return len(words["A"])


def run_handshake_cycle(netlist: Netlist | Compiled, model: TimingAreaModel | None,
                        a: int, b: int, cin: int, sim: Simulator | None = None
                        ) -> tuple[CycleReport, SimTrace]:
    """Run one transaction on an adder with a DONE output and check a+b+cin."""
    sim = sim or Simulator(netlist, model)
    if sim.c.done is None:
        raise ValueError("run_handshake_cycle needs a netlist with a DONE output (build with completion detector)")
    width = adder_width(sim.c)
    report, trace = run_cycle(sim.c, None, {"A": a, "B": b, "CIN": cin}, sim=sim)
    result = report.outputs["SUM"] + (report.outputs["COUT"] << width)
    return replace(report, expected=a + b + cin, result=result), trace


# -- trace checks --------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str          # "double", "direction", "late", "order"
    phase: str         # "valid" or "spacer"
    time: int
    net: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind} [{self.phase}] t={self.time} {self.net} {self.detail}".rstrip()


def _phases(trace: SimTrace):
    return [
        ("valid", True, trace.phase(Marker.VALID_APPLIED, Marker.SPACER_APPLIED)),
        ("spacer", False, trace.phase(Marker.SPACER_APPLIED, None)),
    ]


def check_phase_monotonicity(trace: SimTrace) -> list[Violation]:
    """Each net may move at most once per phase: up with data, down with the spacer."""
    found = []
    for name, rising, transitions in _phases(trace):
        seen: set[str] = set()
        for tr in transitions:
            if tr.net in seen:
                found.append(Violation("double", name, tr.time, tr.net, f"{tr.old}->{tr.new}"))
            seen.add(tr.net)
            if tr.new != int(rising):
                found.append(Violation("direction", name, tr.time, tr.net, f"{tr.old}->{tr.new}"))
    return found


def check_quiescence_after_completion(trace: SimTrace) -> list[Violation]:
    """Transitions later than one maximal cell delay after DONE are unacknowledged."""
    found = []
    for (name, _, transitions), done in zip(_phases(trace), (Marker.DONE_HIGH, Marker.DONE_LOW)):
        t_done = trace.marker_time(done)
        if t_done is None:
            continue
        for tr in transitions:
            if tr.time > t_done + trace.max_delay:
                found.append(Violation("late", name, tr.time, tr.net, f"after {done.value} t={t_done}"))
    return found


def check_marker_order(trace: SimTrace) -> list[Violation]:
    found = []
    seen = [m for m, _, _ in trace.markers]
    for m in set(seen):
        if seen.count(m) > 1:
            found.append(Violation("order", "-", trace.marker_time(m), m.value, "marker repeated"))
    expected = [m for m in MARKER_ORDER if m in seen]
    if seen != expected:
        pos = next(i for i, (x, y) in enumerate(zip(seen, expected)) if x != y)
        m, t, _ = trace.markers[pos]
        found.append(Violation("order", "-", t, m.value, "marker out of order"))
    return found


def check_protocol(trace: SimTrace) -> list[Violation]:
    return check_marker_order(trace) + check_phase_monotonicity(trace) + check_quiescence_after_completion(trace)

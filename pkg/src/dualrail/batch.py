"""Bit-parallel twin of :class:`dualrail.simulator.Simulator`.

Each net value is a Python int whose bit ``k`` is the net in lane ``k``;
one lane is one independent transaction.  Scheduling follows the same
rules as the scalar simulator lane by lane (apply all events due, then
re-evaluate readers; inertial cancellation per lane), so a lane's
transitions, latencies and protocol verdicts equal those of a scalar run on
the same vector.  Protocol checks are accumulated as lane masks while the
simulation runs, which keeps exhaustive sweeps of millions of transactions
tractable.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .cells import TimingAreaModel
from .netlist import Netlist
from .simulator import DEFAULT_EVENT_BUDGET, Compiled, DivergenceError, compile_netlist


def mask_from_bools(bits: np.ndarray) -> int:
    return int.from_bytes(np.packbits(np.asarray(bits, dtype=bool), bitorder="little").tobytes(), "little")


def bools_from_mask(mask: int, lanes: int) -> np.ndarray:
    raw = mask.to_bytes((lanes + 7) // 8, "little")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:lanes].astype(bool)


def lowest_lane(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


class BatchSimulator:
    def __init__(self, netlist: Netlist | Compiled, model: TimingAreaModel | None, lanes: int,
                 event_budget: int = DEFAULT_EVENT_BUDGET):
        if lanes < 1:
            raise ValueError("need at least one lane")
        self.c = compile_netlist(netlist, model)
        self.lanes = lanes
        self.full = (1 << lanes) - 1
        self.event_budget = event_budget
        n = len(self.c.names)
        self.val = [0] * n
        self.pend: list[dict[int, int] | None] = [None] * n
        self.pmask = [0] * n
        self._wheel: dict[int, set[int]] = {}
        self._heap: list[int] = []
        self.time = 0
        self._evaluate(range(len(self.c.cells)), 0)
        self._run(None)
        self.time = 0
        self.reset_state = list(self.val)

    def settle(self, changes: Mapping[int, int], tracker: "PhaseTracker | None" = None) -> None:
        """Drive input nets (index -> lane mask) at the current time and run to quiescence."""
        val = self.val
        changed = []
        for net, new in changes.items():
            diff = val[net] ^ new
            if diff:
                val[net] = new
                changed.append((net, diff))
        if changed:
            if tracker:
                tracker.step(self.time, changed)
            self._evaluate(self._readers(changed), self.time)
        self._run(tracker)

    def _readers(self, changed) -> list[int]:
        fanout = self.c.fanout
        cells: set[int] = set()
        for net, _ in changed:
            cells.update(fanout[net])
        return sorted(cells)

    def _evaluate(self, cell_ids, now: int) -> None:
        val, pend, pmask, cells, full = self.val, self.pend, self.pmask, self.c.cells, self.full
        wheel, heap = self._wheel, self._heap
        for ci in cell_ids:
            fn, ins, out, delay = cells[ci]
            cur = val[out]
            want = fn([val[i] for i in ins], cur, full) ^ cur
            pm = pmask[out]
            cancel = pm & ~want
            if cancel:
                pending = pend[out]
                for t in list(pending):
                    m = pending[t] & ~cancel
                    if m:
                        pending[t] = m
                    else:
                        del pending[t]
                pm &= ~cancel
                pmask[out] = pm
            new = want & ~pm
            if new:
                t = now + delay
                pending = pend[out]
                if pending is None:
                    pending = pend[out] = {}
                pending[t] = pending.get(t, 0) | new
                pmask[out] = pm | new
                bucket = wheel.get(t)
                if bucket is None:
                    wheel[t] = {out}
                    heapq.heappush(heap, t)
                else:
                    bucket.add(out)

    def _run(self, tracker) -> None:
        val, pend, pmask, wheel, heap = self.val, self.pend, self.pmask, self._wheel, self._heap
        events = 0
        while heap:
            t = heapq.heappop(heap)
            changed = []
            for net in sorted(wheel.pop(t)):
                m = pend[net].pop(t, 0)
                if m:
                    val[net] ^= m
                    pmask[net] ^= m
                    changed.append((net, m))
            if not changed:
                continue
            self.time = t
            events += len(changed)
            if events > self.event_budget:
                raise DivergenceError(f"no quiescence after {events} net events (t={t})")
            if tracker:
                tracker.step(t, changed)
            self._evaluate(self._readers(changed), t)


class PhaseTracker:
    """Accumulates per-lane protocol observations for one handshake phase."""

    def __init__(self, sim: BatchSimulator, rising: bool):
        c = sim.c
        self.sim = sim
        self.rising = rising
        self.full = sim.full
        self.seen: dict[int, int] = {}
        self.double = self.direction = self.late = self.illegal = self.order = 0
        self.reached = 0
        self.reach_events: list[tuple[int, int]] = []
        self.done_reached = 0
        self.done_events: list[tuple[int, int]] = []
        self.pairs = c.output_pairs
        self.out_rails = {r for pair in self.pairs for r in pair}
        self.done = c.done
        self.max_delay = c.max_delay
        self._quiet = 0
        self._pending_quiet: deque[tuple[int, int]] = deque()
        if not self.pairs:
            # no dual-rail outputs: the output condition holds vacuously from the start
            self.reached = self.full
            self.reach_events.append((sim.time, self.full))

    def step(self, t: int, changed) -> None:
        dq = self._pending_quiet
        while dq and dq[0][0] + self.max_delay < t:
            self._quiet |= dq.popleft()[1]
        val, seen, rising = self.sim.val, self.seen, self.rising
        quiet = self._quiet
        touched = done_changed = False
        for net, m in changed:
            s = seen.get(net, 0)
            if s & m:
                self.double |= s & m
            seen[net] = s | m
            v = val[net]
            wrong = m & ~v if rising else m & v
            if wrong:
                self.direction |= wrong
            if m & quiet:
                self.late |= m & quiet
            if net in self.out_rails:
                touched = True
            if net == self.done:
                done_changed = True
        if touched:
            full = self.full
            all_valid, any_valid = full, 0
            for r1, r0 in self.pairs:
                a, b = val[r1], val[r0]
                x = a | b
                all_valid &= x
                any_valid |= x
                if a & b:
                    self.illegal |= a & b
            target = all_valid if rising else full & ~any_valid
            newly = target & ~self.reached
            if newly:
                self.reached |= newly
                self.reach_events.append((t, newly))
        if done_changed:
            d = val[self.done] if rising else self.full & ~val[self.done]
            newly = d & ~self.done_reached
            if newly:
                self.done_reached |= newly
                self.done_events.append((t, newly))
                self.order |= newly & ~self.reached
                dq.append((t, newly))


VIOLATION_KINDS = ("illegal", "deadlock", "double", "direction", "late", "order", "not_reset")


@dataclass
class BatchCycleResult:
    """Outcome of one handshake transaction per lane."""

    lanes: int
    forward_events: list[tuple[int, int]]   # (latency, lanes reaching all-valid then)
    reverse_events: list[tuple[int, int]]
    outputs: dict[str, int]                 # output rail name -> lane mask after the data phase
    masks: dict[str, int] = field(default_factory=dict)

    def latencies(self, reverse: bool = False) -> np.ndarray:
        out = np.full(self.lanes, -1, dtype=np.int64)
        for lat, mask in (self.reverse_events if reverse else self.forward_events):
            out[bools_from_mask(mask, self.lanes)] = lat
        return out

    def max_latency(self, reverse: bool = False) -> tuple[int, int]:
        """(worst latency, lowest lane attaining it); (-1, -1) if no lane completed."""
        events = self.reverse_events if reverse else self.forward_events
        if not events:
            return -1, -1
        lat, mask = max(events, key=lambda e: e[0])
        return lat, lowest_lane(mask)

    @property
    def failing(self) -> int:
        m = 0
        for v in self.masks.values():
            m |= v
        return m

    def counts(self) -> dict[str, int]:
        return {k: self.masks.get(k, 0).bit_count() for k in VIOLATION_KINDS}


def word_masks(c: Compiled, values: Mapping[str, np.ndarray], lanes: int) -> dict[int, int]:
    """Input rail masks for per-lane word values."""
    full = (1 << lanes) - 1
    out: dict[int, int] = {}
    for word, ports in c.input_words.items():
        v = np.asarray(values[word], dtype=np.uint64)
        if len(v) != lanes:
            raise ValueError(f"word {word} has {len(v)} values for {lanes} lanes")
        if len(ports) < 64 and np.any(v >> np.uint64(len(ports))):
            raise ValueError(f"word {word} has values wider than {len(ports)} bits")
        for i, port in enumerate(ports):
            ones = mask_from_bools((v >> np.uint64(i)) & np.uint64(1))
            r1, r0 = c.ports[port]
            out[r1] = ones
            out[r0] = full ^ ones
    return out


def run_cycles(netlist: Netlist | Compiled, model: TimingAreaModel | None,
               values: Mapping[str, np.ndarray], event_budget: int = DEFAULT_EVENT_BUDGET
               ) -> BatchCycleResult:
    """One valid/spacer transaction per lane, with protocol checks."""
    c = compile_netlist(netlist, model)
    missing = set(c.input_words) - set(values)
    if missing:
        raise KeyError(f"no values for input word(s) {sorted(missing)}")
    lanes = len(next(iter(values.values())))
    sim = BatchSimulator(c, None, lanes, event_budget)
    full = sim.full

    t0 = sim.time
    fwd = PhaseTracker(sim, rising=True)
    sim.settle(word_masks(c, values, lanes), fwd)
    outputs = {c.names[r]: sim.val[r] for pair in c.output_pairs for r in pair}

    t1 = sim.time
    rev = PhaseTracker(sim, rising=False)
    sim.settle({net: 0 for net in c.inputs}, rev)

    deadlock = (full & ~fwd.reached) | (full & ~rev.reached)
    if c.done is not None:
        deadlock |= (full & ~fwd.done_reached) | (full & ~rev.done_reached)
    not_reset = 0
    for now, then in zip(sim.val, sim.reset_state):
        not_reset |= now ^ then
    masks = {
        "illegal": fwd.illegal | rev.illegal,
        "deadlock": deadlock,
        "double": fwd.double | rev.double,
        "direction": fwd.direction | rev.direction,
        "late": fwd.late | rev.late,
        "order": fwd.order | rev.order,
        "not_reset": not_reset,
    }
    return BatchCycleResult(
        lanes,
        [(t - t0, m) for t, m in fwd.reach_events],
        [(t - t1, m) for t, m in rev.reach_events],
        outputs,
        masks,
    )


def decode_word(result: BatchCycleResult, c: Compiled, word: str) -> np.ndarray:
    """Per-lane integer on an output word's rail-1 wires after the data phase."""
    total = np.zeros(result.lanes, dtype=np.uint64)
    for i, port in enumerate(c.output_words[word]):
        r1 = c.names[c.ports[port][0]]
        total |= bools_from_mask(result.outputs[r1], result.lanes).astype(np.uint64) << np.uint64(i)
    return total

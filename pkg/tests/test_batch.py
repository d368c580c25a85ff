import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from dualrail.batch import bools_from_mask, decode_word, lowest_lane, mask_from_bools, run_cycles
from dualrail.cells import CellKind, TimingAreaModel, default_model
from dualrail.generators import AdderComposition, build_rca
from dualrail.simulator import Simulator, check_protocol, compile_netlist, run_cycle

from adversarial import glitchy, late_tail, stuck


def scalar_view(c, values):
    sim = Simulator(c)
    rep, trace = run_cycle(c, None, values, sim=sim)
    kinds = {v.kind for v in check_protocol(trace)}
    if not rep.returned_to_reset:
        kinds.add("not_reset")
    return rep.forward_latency, rep.reverse_latency, rep.outputs, kinds


def batch_view(c, values):
    lanes = len(next(iter(values.values())))
    res = run_cycles(c, None, values)
    fwd, rev = res.latencies(), res.latencies(reverse=True)
    outs = {w: decode_word(res, c, w) for w in c.output_words}
    views = []
    for lane in range(lanes):
        kinds = {k for k, m in res.masks.items() if (m >> lane) & 1}
        views.append((int(fwd[lane]), int(rev[lane]), {w: int(v[lane]) for w, v in outs.items()}, kinds))
    return views


def test_mask_helpers():
    bits = np.array([1, 0, 0, 1, 1, 0, 0, 0, 0, 1], dtype=bool)
    m = mask_from_bools(bits)
    assert m == 0b1000011001
    assert (bools_from_mask(m, len(bits)) == bits).all()
    assert lowest_lane(0b101000) == 3


models = st.fixed_dictionaries({k: st.integers(1, 4) for k in CellKind}).map(
    lambda d: TimingAreaModel(d, default_model().area, name="random"))


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(model=models, comp=st.sampled_from(["sbfa*4", "dbfa*2", "sbfa*2+dbfa", "sbfa+dbfa*2"]),
       data=st.data())
def test_batch_matches_scalar(model, comp, data):
    nl = build_rca(AdderComposition.parse(comp), with_cd=True)
    c = compile_netlist(nl, model)
    w = len(c.input_words["A"])
    n = 12
    a = data.draw(st.lists(st.integers(0, (1 << w) - 1), min_size=n, max_size=n))
    b = data.draw(st.lists(st.integers(0, (1 << w) - 1), min_size=n, max_size=n))
    cin = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    values = {"A": np.array(a, dtype=np.uint64), "B": np.array(b, dtype=np.uint64),
              "CIN": np.array(cin, dtype=np.uint64)}
    views = batch_view(c, values)
    for lane in range(n):
        assert views[lane] == scalar_view(c, {"A": a[lane], "B": b[lane], "CIN": cin[lane]})


@pytest.mark.parametrize("build, kinds", [(glitchy, {"double", "direction"}), (late_tail, {"late"})])
def test_batch_flags_adversarial_netlists(build, kinds):
    c = compile_netlist(build())
    values = {"X": np.array([0, 1], dtype=np.uint64)}
    views = batch_view(c, values)
    for lane, x in enumerate((0, 1)):
        assert views[lane] == scalar_view(c, {"X": x})
    assert views[1][3] == kinds


def test_deadlock_lanes():
    res = run_cycles(stuck(), None, {"X": np.array([0, 1], dtype=np.uint64)})
    assert res.masks["deadlock"] == 0b11
    assert res.max_latency() == (-1, -1)


def test_lane_latencies_match_scalar():
    c = compile_netlist(build_rca(AdderComposition.parse("sbfa*2")))
    res = run_cycles(c, None, {"A": np.array([1, 2], dtype=np.uint64), "B": np.array([0, 3], dtype=np.uint64),
                               "CIN": np.array([0, 1], dtype=np.uint64)})
    assert not any(res.counts().values())
    assert list(res.latencies()) == [
        run_cycle(c, None, {"A": 1, "B": 0, "CIN": 0})[0].forward_latency,
        run_cycle(c, None, {"A": 2, "B": 3, "CIN": 1})[0].forward_latency,
    ]


def test_value_range_checked():
    c = compile_netlist(build_rca(AdderComposition.parse("sbfa*2")))
    with pytest.raises(ValueError):
        run_cycles(c, None, {"A": np.array([4], dtype=np.uint64), "B": np.array([0], dtype=np.uint64),
                             "CIN": np.array([0], dtype=np.uint64)})
    with pytest.raises(KeyError):
        run_cycles(c, None, {"A": np.array([1], dtype=np.uint64)})

"""Exit criteria, one group of tests per criterion.

Each test carries ``@pytest.mark.acceptance(n, title)``; ``conftest.py`` folds the
outcomes into one ``criterion n: PASS/FAIL`` line in the terminal summary.
"""

import itertools
import time

import numpy as np
import pytest
from click.testing import CliRunner

from dualrail.analysis import (
    VectorPolicy, carry_chain_vectors, check_dsop, check_monotonic_cover, compare, measure_forward_latency,
    path_cell_counts, structural_sta, verify_adder,
)
from dualrail.batch import VIOLATION_KINDS
from dualrail.cells import CellKind, default_model
from dualrail.cli import main
from dualrail.generators import AdderComposition, build_dbfa, build_rca, build_sbfa, dbfa_table, sbfa_table
from dualrail.simulator import Simulator

acceptance = pytest.mark.acceptance
SHAPES = ["sbfa*32", "dbfa*16", "sbfa*2+dbfa*15", "sbfa*4+dbfa*14"]
RANDOM = 1000
SEED = 1


def exhaustive_compositions():
    for w in range(2, 11):
        yield f"sbfa*{w}"
        if w % 2 == 0:
            yield f"dbfa*{w // 2}"
        for s in (1, 2):
            if s < w and (w - s) % 2 == 0:
                yield str(AdderComposition.of(sbfa=s, dbfa=(w - s) // 2))


# -- shared runs (criteria 1, 6, 8 and 10 read from these) -------------------------

@pytest.fixture(scope="module")
def functional_runs():
    start = time.perf_counter()
    runs = {}
    for text in exhaustive_compositions():
        runs[text] = verify_adder(build_rca(AdderComposition.parse(text), with_cd=True), mode="exhaustive")
    for text in SHAPES:
        runs[f"{text} random"] = verify_adder(build_rca(AdderComposition.parse(text), with_cd=True),
                                             mode="random", seed=SEED, count=RANDOM)
    return runs, time.perf_counter() - start


@pytest.fixture(scope="module")
def shape_rows():
    policy = VectorPolicy(random=RANDOM, seed=SEED, carry_chains=True)
    rows = compare([AdderComposition.parse(t, 32) for t in SHAPES], default_model(), policy)
    return {r.legend: r for r in rows}


# -- 1 -----------------------------------------------------------------------------

C1 = acceptance(1, "functional correctness, exhaustive widths 2-10 and random width 32")


@C1
def test_c1_composition_coverage(functional_runs):
    runs, _ = functional_runs
    wanted = ["sbfa*2", "dbfa", "sbfa*10", "dbfa*5", "sbfa+dbfa", "sbfa*2+dbfa*4", "sbfa+dbfa*4"]
    assert {str(AdderComposition.parse(t)) for t in wanted} <= set(runs)
    for text, res in runs.items():
        if not text.endswith("random"):
            w = AdderComposition.parse(text).width
            assert res.mode == "exhaustive" and res.summary.vectors == 2 ** (2 * w + 1), text
        else:
            assert res.summary.vectors == RANDOM


@C1
def test_c1_results_exact(functional_runs):
    runs, _ = functional_runs
    bad = {text: res.counterexample for text, res in runs.items() if res.summary.mismatches}
    assert bad == {}


@C1
def test_c1_runtime(functional_runs):
    _, seconds = functional_runs
    print(f"criterion 1 runtime: {seconds:.1f} s")
    assert seconds < 120


# -- 2 -----------------------------------------------------------------------------

C2 = acceptance(2, "SBFA census and shared product terms")


@C2
def test_c2_sbfa_structure():
    nl = build_sbfa()
    assert nl.census() == {CellKind.AO22: 4, CellKind.C2: 4, CellKind.OR2: 2}
    gates = {c.id.rsplit("_", 1)[1]: c for c in nl.cells}
    ones, zeros = ("A_1", "B_1"), ("A_0", "B_0")
    assert gates["cg1"].inputs[:2] == ones == gates["cg3"].inputs[:2]
    assert gates["cg1"].inputs[2:] == zeros == gates["cg4"].inputs[:2]


# -- 3 -----------------------------------------------------------------------------

C3 = acceptance(3, "DSOP and monotonic cover, exact")


@C3
@pytest.mark.parametrize("table, words", [(sbfa_table(), 8), (dbfa_table(), 32)], ids=["sbfa", "dbfa"])
def test_c3_equations_oracle(table, words):
    seen = 0
    for word in table.code_words():
        seen += 1
        for port in table.output_ports:
            hits = [len(table.true_products((port, r), word)) for r in (1, 0)]
            assert sorted(hits) == [0, 1], (word, port)
    assert seen == words


@C3
@pytest.mark.parametrize("build, table, words", [(build_sbfa, sbfa_table(), 8), (build_dbfa, dbfa_table(), 32)],
                         ids=["sbfa", "dbfa"])
def test_c3_checks(build, table, words):
    dsop = check_dsop(table)
    cover = check_monotonic_cover(build(), table)
    assert dsop.passed and dsop.checked == words
    assert cover.passed and cover.checked == words and not cover.skipped


# -- 4 -----------------------------------------------------------------------------

C4 = acceptance(4, "DBFA early output: early set with CIN spacer, early reset with CIN valid")


def drive(sim, word):
    assignment = {}
    for port, bit in word.items():
        r1, r0 = sim.c.netlist.ports[port]
        assignment[r1], assignment[r0] = int(bit == 1), int(bit == 0)
    sim.settle(assignment)


@C4
@pytest.mark.parametrize("high, rail", [(1, (1, 0)), (0, (0, 1))], ids=["generate", "kill"])
def test_c4_early_set(high, rail):
    for a0, b0 in itertools.product((0, 1), repeat=2):
        sim = Simulator(build_dbfa())
        drive(sim, {"A1": high, "A0": a0, "B1": high, "B0": b0, "CIN": None})
        assert tuple(sim.pair("COUT")) == rail, (a0, b0)


@C4
def test_c4_early_reset():
    for word in dbfa_table().code_words():
        sim = Simulator(build_dbfa())
        drive(sim, word)
        assert sum(sim.pair("COUT")) == 1
        drive(sim, {"A1": None, "A0": None, "B1": None, "B0": None})
        assert tuple(sim.pair("COUT")) == (0, 0), word
        assert tuple(sim.pair("CIN")) != (0, 0)


# -- 5 -----------------------------------------------------------------------------

C5 = acceptance(5, "DBFA carry path: CIN to COUT one cell, inputs to COUT at most three")


@C5
def test_c5_carry_paths():
    nl = build_dbfa()
    cout = list(nl.ports["COUT"])
    cin = list(nl.ports["CIN"])
    assert path_cell_counts(nl, cin, cout) == {1}
    by_id = {c.id: c for c in nl.cells}
    (cell,) = structural_sta(nl, sources=cin, sinks=cout).cells
    assert by_id[cell].kind is CellKind.AO21
    operands = [r for p in ("A1", "A0", "B1", "B0") for r in nl.ports[p]]
    assert max(path_cell_counts(nl, operands, cout)) <= 3
    assert max(path_cell_counts(nl, operands + cin, cout)) <= 3


# -- 6 -----------------------------------------------------------------------------

C6 = acceptance(6, "width-32 latency orderings")


@C6
def test_c6_latency_orderings(shape_rows):
    lat = {k: r.sim_forward_latency for k, r in shape_rows.items()}
    print("criterion 6 latency:", lat,
          "ratios vs 32S:", {k: round(v / lat["32S"], 3) for k, v in lat.items()})
    assert all(r.vectors >= RANDOM for r in shape_rows.values())
    assert lat["16D"] < lat["32S"]
    assert lat["2S+15D"] <= lat["16D"]
    assert lat["4S+14D"] >= lat["2S+15D"]


@C6
def test_c6_vectors_include_carry_chains(shape_rows):
    chains = len(carry_chain_vectors(32)["A"])
    assert all(r.vectors == chains + RANDOM for r in shape_rows.values())


# -- 7 -----------------------------------------------------------------------------

C7 = acceptance(7, "width-32 area orderings")


@C7
def test_c7_area_orderings(shape_rows):
    area = {k: r.area_transistors for k, r in shape_rows.items()}
    print("criterion 7 area:", area)
    assert area["32S"] < area["2S+15D"] < area["16D"]
    assert area["4S+14D"] < area["2S+15D"]


# -- 8 -----------------------------------------------------------------------------

C8 = acceptance(8, "zero protocol violations across criteria 1 and 6")


@C8
def test_c8_functional_runs_clean(functional_runs):
    runs, _ = functional_runs
    assert set(next(iter(runs.values())).summary.violations) == set(VIOLATION_KINDS)
    dirty = {text: {k: n for k, n in res.summary.violations.items() if n}
             for text, res in runs.items() if not res.summary.protocol_ok}
    assert dirty == {}


@C8
def test_c8_latency_runs_clean(shape_rows):
    assert {k: r.violations for k, r in shape_rows.items()} == dict.fromkeys(shape_rows, 0)
    assert {k: r.mismatches for k, r in shape_rows.items()} == dict.fromkeys(shape_rows, 0)


# -- 9 -----------------------------------------------------------------------------

C9 = acceptance(9, "CLI determinism independent of worker count")


def invoke(args):
    res = CliRunner().invoke(main, args, catch_exceptions=False)
    return res.exit_code, res.stdout_bytes


@C9
def test_c9_repeatable(tmp_path):
    netlist = tmp_path / "n.json"
    vectors = tmp_path / "v.txt"
    vectors.write_text("ffffffff 1 0\n12345678 9abcdef0 1\n")
    assert invoke(["gen", "--width", "32", "--composition", "sbfa*2+dbfa*15", "--cd", "--out", str(netlist)])[0] == 0
    commands = [
        ["gen", "--width", "32", "--composition", "sbfa*4+dbfa*14", "--cd"],
        ["verify", "--netlist", str(netlist), "--random", "200", "--seed", "5"],
        ["check", "--block", "dbfa", "--props", "dsop,cover,phase,quiescence,indication"],
        ["sim", "--netlist", str(netlist), "--vectors", str(vectors)],
        ["sta", "--netlist", str(netlist), "--per-output"],
        ["report", "--random", "100", "--format", "csv"],
    ]
    for args in commands:
        first, second = invoke(args), invoke(args)
        assert first == second and first[0] == 0, args


@C9
@pytest.mark.parametrize("args", [
    ["verify", "--width", "8", "--composition", "sbfa*2+dbfa*3", "--exhaustive"],
    ["verify", "--width", "32", "--composition", "dbfa*16", "--random", "300"],
    ["report", "--random", "100", "--format", "table"],
], ids=["verify-exhaustive", "verify-random", "report"])
def test_c9_workers(args):
    outs = {invoke(args + ["--workers", str(n)]) for n in (1, 2, 3)}
    assert len(outs) == 1


# -- 10 ----------------------------------------------------------------------------

C10 = acceptance(10, "structural longest path bounds simulated latency")


@C10
def test_c10_dominance(shape_rows):
    for legend, r in shape_rows.items():
        assert r.structural_longest_path >= r.sim_forward_latency, legend


@C10
@pytest.mark.parametrize("width", [2, 5, 8, 16, 32])
def test_c10_equality_on_carry_chain(width):
    comp = AdderComposition.parse(f"sbfa*{width}")
    chain = {"A": np.array([2**width - 1], dtype=np.uint64), "B": np.array([0], dtype=np.uint64),
             "CIN": np.array([1], dtype=np.uint64)}
    lat, _ = measure_forward_latency(build_rca(comp, with_cd=True), vectors=chain)
    assert lat == structural_sta(build_rca(comp)).length

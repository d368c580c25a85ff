import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from dualrail import analysis
from dualrail.analysis import (
    VectorPolicy, area_report, carry_chain_vectors, check_dsop, check_monotonic_cover, compare, format_csv,
    format_table, measure_forward_latency, mutate_literals, ordering_checks, path_cell_counts, random_vectors,
    structural_sta, verify_adder,
)
from dualrail.cells import CellKind, TimingAreaModel, default_model, parse_model_overrides
from dualrail.generators import AdderComposition, build_dbfa, build_rca, build_sbfa, dbfa_table, sbfa_table
from dualrail.netlist import Netlist

SHAPES = ["sbfa*32", "dbfa*16", "sbfa*2+dbfa*15", "sbfa*4+dbfa*14"]


def comps(*texts):
    return [AdderComposition.parse(t) for t in texts]


# -- structural timing

def test_sbfa_longest_path():
    path = structural_sta(build_sbfa())
    assert path.length == 3
    kinds = [c.split("_")[-1] for c in path.cells]
    assert kinds[1][0] == "c" and kinds[2].startswith("sum")


def test_dbfa_carry_paths():
    nl = build_dbfa()
    cin = structural_sta(nl, sources=["CIN_1", "CIN_0"], sinks=["COUT_1", "COUT_0"])
    assert cin.length == 1 and len(cin.cells) == 1 and cin.cells[0].endswith(("cout1", "cout0"))
    assert path_cell_counts(nl, ["CIN_1", "CIN_0"], ["COUT_1", "COUT_0"]) == {1}
    ab = [r for p in ("A0", "A1", "B0", "B1") for r in nl.ports[p]]
    assert structural_sta(nl, sources=ab, sinks=["COUT_1", "COUT_0"]).length == 3
    assert max(path_cell_counts(nl, ab, ["COUT_1", "COUT_0"])) == 3


def test_path_report_invariants():
    nl = build_rca(AdderComposition.parse("sbfa*2+dbfa*3"))
    model = parse_model_overrides("C2 delay=3\nAO21 delay=2")
    by_id = {c.id: c for c in nl.cells}
    for sink, path in structural_sta(nl, model, per_output=True).items():
        assert sum(model.delay[by_id[c].kind] for c in path.cells) == path.length
        net = path.source
        for cid in path.cells:
            assert net in by_id[cid].inputs
            net = by_id[cid].output
        assert net == sink


def test_unreachable_sink():
    assert structural_sta(build_sbfa(), sources=["A_1"], sinks=["A_0"]) is None


# -- area

def test_area():
    rep = area_report(build_sbfa())
    assert rep.census == {CellKind.AO22: 4, CellKind.C2: 4, CellKind.OR2: 2}
    assert rep.total == 4 * 10 + 4 * 12 + 2 * 6 == 100
    assert area_report(Netlist("empty")).total == 0
    s, m2, d = (area_report(build_rca(c)).total for c in comps("sbfa*32", "sbfa*2+dbfa*15", "dbfa*16"))
    assert s < m2 < d


# -- DSOP and cover

@pytest.mark.parametrize("table, words", [(sbfa_table(), 8), (dbfa_table(), 32)], ids=["sbfa", "dbfa"])
def test_dsop_passes(table, words):
    res = check_dsop(table)
    assert res.passed and res.checked == words


def test_dsop_duplicate_product_caught():
    t = sbfa_table()
    products = t.outputs[("SUM", 1)]
    res = check_dsop(t.with_products(("SUM", 1), products + products[:1]))
    assert not res.passed
    assert "not disjoint" in res.witnesses[0].detail


@pytest.mark.parametrize("build, table", [(build_sbfa, sbfa_table()), (build_dbfa, dbfa_table())], ids=["sbfa", "dbfa"])
def test_cover_passes(build, table):
    res = check_monotonic_cover(build(), table)
    assert res.passed and not res.skipped


def test_cover_skips_illegal_words():
    words = [{"A": 1, "B": 0, "CIN": 1}, {"A": 2, "B": 0, "CIN": 1}, {"A": None, "B": 0, "CIN": 1}]
    res = check_monotonic_cover(build_sbfa(), sbfa_table(), code_words=words)
    assert res.checked == 1 and len(res.skipped) == 2 and res.passed


@pytest.mark.parametrize("build, table", [(build_sbfa, sbfa_table()), (build_dbfa, dbfa_table())], ids=["sbfa", "dbfa"])
def test_every_single_literal_mutation_is_caught(build, table):
    nl = build()
    survivors = [label for label, mutant in mutate_literals(table)
                 if check_dsop(mutant).passed and check_monotonic_cover(nl, mutant).passed]
    assert survivors == []


# -- vectors

def test_carry_chain_vectors():
    w = 6
    v = carry_chain_vectors(w)
    rows = set(zip(*(v[k].tolist() for k in ("A", "B", "CIN"))))
    assert len(rows) == len(v["A"]) <= (w + 1) * (w + 2)
    all_propagate = [(a, b) for a, b, c in rows if a ^ b == 2**w - 1 and c == 1]
    assert all_propagate
    assert all(a < 2**w and b < 2**w for a, b, _ in rows)


def test_random_vectors_seeded():
    a, b = random_vectors(32, 100, seed=7), random_vectors(32, 100, seed=7)
    assert all((a[k] == b[k]).all() for k in a)
    assert not (random_vectors(32, 100, seed=8)["A"] == a["A"]).all()
    assert int(a["A"].max()) < 2**32 and set(a["CIN"].tolist()) <= {0, 1}


# -- verification

@pytest.mark.parametrize("text", ["sbfa*4", "dbfa*2", "sbfa*2+dbfa"])
def test_verify_width4_exhaustive(text):
    res = verify_adder(build_rca(AdderComposition.parse(text), with_cd=True), width=4)
    assert res.passed and res.summary.vectors == 512


def test_verify_width32_random():
    res = verify_adder(build_rca(AdderComposition.parse("sbfa*2+dbfa*15"), with_cd=True), mode="random", seed=1,
                       count=1000)
    assert res.passed and res.summary.vectors == 1000


def test_verify_sabotaged_cout():
    nl = build_rca(AdderComposition.parse("sbfa+dbfa*2"), with_cd=True)
    nl.ports["COUT"] = nl.ports["COUT"][::-1]
    res = verify_adder(nl)
    assert not res.passed
    # vector 0 is 0 + 0 + 0: a swapped carry already reads as 1
    assert res.counterexample == {"A": 0, "B": 0, "CIN": 0}
    assert res.excerpt and "expected=0x0 FAIL" in res.excerpt[0]


def test_verify_rejects_wide_exhaustive():
    with pytest.raises(ValueError):
        verify_adder(build_rca(AdderComposition.parse("dbfa*7")))


def test_measure_forward_latency():
    lat, vec = measure_forward_latency(build_sbfa())
    assert lat == 3 and vec is not None
    lat32, _ = measure_forward_latency(build_rca(AdderComposition.parse("sbfa*32")), vectors=carry_chain_vectors(32))
    lat16, _ = measure_forward_latency(build_rca(AdderComposition.parse("dbfa*16")), vectors=carry_chain_vectors(32))
    assert lat16 < lat32 == 34


def test_workers_do_not_change_results():
    nl = build_rca(AdderComposition.parse("sbfa*2+dbfa*2"), with_cd=True)
    one = verify_adder(nl, chunk=512)
    two = verify_adder(nl, chunk=512, workers=2)
    assert str(one) == str(two) and one.summary == two.summary


# -- STA dominance under arbitrary delays

models = st.fixed_dictionaries({k: st.integers(1, 5) for k in CellKind}).map(
    lambda d: TimingAreaModel(d, default_model().area, name="random"))


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(model=models, text=st.sampled_from(["sbfa*6", "dbfa*3", "sbfa*2+dbfa*2", "sbfa*4+dbfa"]),
       seed=st.integers(0, 2**32))
def test_sta_bounds_simulation(model, text, seed):
    comp = AdderComposition.parse(text)
    vectors = analysis.concat_vectors(carry_chain_vectors(comp.width), random_vectors(comp.width, 64, seed))
    lat, _ = measure_forward_latency(build_rca(comp, with_cd=True), model, vectors)
    sta = structural_sta(build_rca(comp), model)
    assert sta.length >= lat


# -- comparison

@pytest.fixture(scope="module")
def shape_rows():
    return compare(comps(*SHAPES), default_model(), VectorPolicy(random=200, seed=1))


def test_compare_rows(shape_rows):
    assert [r.legend for r in shape_rows] == ["32S", "16D", "2S+15D", "4S+14D"]
    assert all(r.violations == 0 and r.mismatches == 0 for r in shape_rows)
    assert all(ok for _, ok in ordering_checks(shape_rows))
    for r in shape_rows:
        assert r.structural_longest_path >= r.sim_forward_latency


def test_report_formats_agree(shape_rows):
    policy = VectorPolicy(random=200, seed=1)
    csv_lines = format_csv(shape_rows, policy).splitlines()
    table_lines = format_table(shape_rows, policy).splitlines()
    assert csv_lines[0].startswith("legend,composition,latency_units,longest_path_units,area_transistors")
    for c, t in zip(csv_lines[:5], table_lines[:5]):
        assert c.split(",") == t.split()
    assert [l for l in csv_lines if l.startswith("#")] == [l for l in table_lines if l.startswith("#")]
    assert any(l.startswith("# seed=1") for l in csv_lines)


def test_compare_is_deterministic():
    policy = VectorPolicy(random=50, seed=3)
    a = format_csv(compare(comps("sbfa*8", "dbfa*4"), policy=policy), policy)
    b = format_csv(compare(comps("sbfa*8", "dbfa*4"), policy=policy), policy)
    assert a == b


def test_compare_width_mismatch():
    with pytest.raises(ValueError):
        compare(comps("sbfa*8", "dbfa*2"))

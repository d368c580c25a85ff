"""``dualrail``: generate, simulate, verify and compare dual-rail adders.

Exit status is 0 when everything checked passes, 1 on a verification or
property failure and 2 on a usage or configuration error.
"""

from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import click

from . import analysis
from .cells import ModelFormatError, TimingAreaModel, default_model, parse_model_overrides
from .generators import (
    AdderComposition, CompositionError, build_completion_detector, build_dbfa, build_rca, build_sbfa, dbfa_table,
    sbfa_table,
)
from .indication import probe_indication
from .netlist import Netlist, NetlistError, NetlistFormatError, read_json, write_json
from .simulator import SimulationError, Simulator, adder_width, run_cycle, run_handshake_cycle

EXHAUSTIVE_CHECK_BITS = 17


def _fail(message: str) -> None:
    raise click.UsageError(message)


def _load_model(path: str | None) -> TimingAreaModel:
    if path is None:
        return default_model()
    try:
        return parse_model_overrides(Path(path).read_text(encoding="utf-8"), default_model(), name=path)
    except (OSError, ModelFormatError) as exc:
        _fail(f"model file {path}: {exc}")


def _composition(width: int | None, text: str | None) -> AdderComposition:
    if text is None:
        _fail("--composition is required")
    try:
        return AdderComposition.parse(text, width)
    except CompositionError as exc:
        _fail(str(exc))


def _netlist(path: str | None, width: int | None, composition: str | None, block: str | None,
             pairs: int | None, cd: bool) -> Netlist:
    chosen = sum(x is not None for x in (path, composition, block))
    if chosen != 1:
        _fail("give exactly one of --netlist, --composition or --block")
    if path is not None:
        try:
            return read_json(Path(path).read_bytes())
        except OSError as exc:
            _fail(f"cannot read {path}: {exc.strerror}")
        except NetlistFormatError as exc:
            _fail(f"{path}: {exc}" + "".join(f"\n  {d}" for d in exc.diagnostics))
        except NetlistError as exc:
            _fail(f"{path}: {exc}")
    if block is not None:
        if block == "sbfa":
            return build_sbfa()
        if block == "dbfa":
            return build_dbfa()
        if block == "cd":
            if pairs is None or pairs < 1:
                _fail("--block cd needs --pairs N (N >= 1)")
            return build_completion_detector(pairs)
    return build_rca(_composition(width, composition), with_cd=cd)


netlist_options = [
    click.option("--netlist", "path", type=click.Path(dir_okay=False), help="Netlist JSON file."),
    click.option("--width", type=click.IntRange(min=1), help="Adder width in bits."),
    click.option("--composition", help='Stage list such as "sbfa*2+dbfa*15" (least significant first).'),
    click.option("--block", type=click.Choice(["rca", "sbfa", "dbfa", "cd"]), help="Single block instead of an RCA."),
    click.option("--pairs", type=int, help="Rail pairs for --block cd."),
]


def with_netlist(cd_default: bool):
    def decorate(fn):
        for opt in reversed(netlist_options):
            fn = opt(fn)
        return click.option("--cd/--no-cd", default=cd_default, show_default=True,
                            help="Add a completion detector driving DONE.")(fn)
    return decorate


def _resolve(path, width, composition, block, pairs, cd) -> Netlist:
    if block == "rca":
        block = None
    return _netlist(path, width, composition, block, pairs, cd)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main() -> None:
    """Dual-rail early-output adder toolkit."""


@main.command()
@with_netlist(cd_default=False)
@click.option("--out", type=click.Path(dir_okay=False), help="Output file (default: stdout).")
def gen(path, width, composition, block, pairs, cd, out) -> None:
    """Generate a netlist as JSON."""
    if path is not None:
        _fail("gen does not take --netlist")
    data = write_json(_resolve(None, width, composition, block, pairs, cd))
    if out is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(out).write_bytes(data)


@main.command()
@with_netlist(cd_default=True)
@click.option("--exhaustive", is_flag=True, help="All vectors (width <= 12); the default.")
@click.option("--random", "count", type=click.IntRange(min=1), help="Number of random vectors instead.")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--model", "model_path", type=click.Path(dir_okay=False), help="Delay/area override file.")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
def verify(path, width, composition, block, pairs, cd, exhaustive, count, seed, model_path, workers) -> None:
    """Check decoded results against a + b + cin."""
    model = _load_model(model_path)
    nl = _resolve(path, width, composition, block, pairs, cd)
    try:
        adder_width(nl)
    except ValueError as exc:
        _fail(str(exc))
    if exhaustive and count is not None:
        _fail("--exhaustive and --random are mutually exclusive")
    mode = "random" if count is not None else "exhaustive"
    try:
        result = analysis.verify_adder(nl, mode=mode, seed=seed, count=count or 0, model=model, workers=workers)
    except ValueError as exc:
        _fail(str(exc))
    click.echo(f"netlist {nl.name} seed={seed}")
    click.echo(str(result))
    sys.exit(0 if result.passed else 1)


PROPS = ("dsop", "cover", "phase", "quiescence", "indication")


def _table_for(nl: Netlist):
    ports = set(nl.ports)
    if ports == {"A", "B", "CIN", "SUM", "COUT"}:
        return sbfa_table()
    if ports == {"A0", "A1", "B0", "B1", "CIN", "SUM0", "SUM1", "COUT"}:
        return dbfa_table()
    return None


@main.command()
@with_netlist(cd_default=False)
@click.option("--props", default="dsop,cover", show_default=True, help=f"Comma list of {', '.join(PROPS)}.")
@click.option("--random", "count", type=click.IntRange(min=1), default=1000, show_default=True,
              help="Vectors for phase/quiescence when exhaustive is too large.")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--model", "model_path", type=click.Path(dir_okay=False))
def check(path, width, composition, block, pairs, cd, props, count, seed, model_path) -> None:
    """Check protocol and equation properties; one PASS/FAIL line each."""
    model = _load_model(model_path)
    wanted = [p.strip() for p in props.split(",") if p.strip()]
    unknown = sorted(set(wanted) - set(PROPS))
    if unknown or not wanted:
        _fail(f"unknown property {', '.join(unknown) or '(none)'}; choose from {', '.join(PROPS)}")
    nl = _resolve(path, width, composition, block, pairs, cd)
    table = _table_for(nl)
    if table is None and ({"dsop", "cover"} & set(wanted)):
        _fail("dsop and cover apply only to single-bit or dual-bit full adder blocks")
    click.echo(f"netlist {nl.name} seed={seed}")
    failed = False
    sweep = None
    for prop in wanted:
        if prop == "dsop":
            res = analysis.check_dsop(table)
            lines = [str(res)] + [f"  {w}" for w in res.witnesses]
            ok = res.passed
        elif prop == "cover":
            res = analysis.check_monotonic_cover(nl, table, model=model)
            lines = [str(res)] + [f"  {w}" for w in res.witnesses]
            ok = res.passed
        elif prop in ("phase", "quiescence"):
            if sweep is None:
                sweep, what = _protocol_sweep(nl, model, count, seed)
            kinds = ("late",) if prop == "quiescence" else ("illegal", "deadlock", "double", "direction",
                                                            "order", "not_reset")
            bad = {k: sweep.violations[k] for k in kinds if sweep.violations[k]}
            ok = not bad
            lines = [f"{prop}: {'PASS' if ok else 'FAIL'} ({what})"]
            for kind, n in bad.items():
                vec = " ".join(f"{w}={v:#x}" for w, v in sweep.first_violation[kind].items())
                lines.append(f"  {n} vectors with {kind} violations, first: {vec}")
        else:
            rep = probe_indication(nl, model, seed=seed)
            lines = ["indication:"] + [f"  {line}" for line in rep.lines()]
            ok = True
        failed |= not ok
        for line in lines:
            click.echo(line)
    sys.exit(1 if failed else 0)


def _protocol_sweep(nl: Netlist, model: TimingAreaModel, count: int, seed: int):
    c = analysis.compile_netlist(nl, model)
    bits = sum(len(ps) for ps in c.input_words.values())
    is_adder = {"A", "B", "CIN", "SUM", "COUT"} <= set(c.words)
    if bits <= EXHAUSTIVE_CHECK_BITS:
        chunks = analysis.word_chunks(c, analysis.DEFAULT_CHUNK)
        what = f"exhaustive, {1 << bits} vectors"
    elif is_adder:
        chunks = analysis.chunked(analysis.random_vectors(adder_width(c), count, seed), analysis.DEFAULT_CHUNK)
        what = f"random, {count} vectors, seed={seed}"
    else:
        _fail(f"{bits} input bits is too many to enumerate and the netlist is not an adder")
    return analysis.sweep(c, None, chunks, check_sum=is_adder), what


@main.command()
@click.option("--width", type=click.IntRange(min=1), default=32, show_default=True)
@click.option("--compositions", default="sbfa*32,dbfa*16,sbfa*2+dbfa*15,sbfa*4+dbfa*14", show_default=True,
              help="Comma-separated compositions.")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--random", "count", type=click.IntRange(min=0), default=1000, show_default=True)
@click.option("--carry-chains/--no-carry-chains", default=True, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "table"]), default="table", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
@click.option("--model", "model_path", type=click.Path(dir_okay=False))
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
def report(width, compositions, seed, count, carry_chains, fmt, out, model_path, workers) -> None:
    """Compare latency, longest path and area across compositions."""
    model = _load_model(model_path)
    comps = [_composition(width, text) for text in compositions.split(",") if text.strip()]
    if not comps:
        _fail("no compositions given")
    policy = analysis.VectorPolicy(random=count, seed=seed, carry_chains=carry_chains)
    try:
        rows = analysis.compare(comps, model, policy, workers=workers)
    except ValueError as exc:
        _fail(str(exc))
    text = (analysis.format_csv if fmt == "csv" else analysis.format_table)(rows, policy)
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8")
    failed = any(r.violations or r.mismatches for r in rows)
    sys.exit(1 if failed else 0)


def _read_vectors(path: str) -> list[tuple[int, int, int]]:
    vectors = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        _fail(f"cannot read {path}: {exc.strerror}")
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        try:
            if len(fields) != 3 or fields[2] not in ("0", "1"):
                raise ValueError
            vectors.append((int(fields[0], 16), int(fields[1], 16), int(fields[2])))
        except ValueError:
            _fail(f"{path}:{lineno}: expected '<hexA> <hexB> <0|1>', got {line!r}")
    if not vectors:
        _fail(f"{path}: no vectors")
    return vectors


@main.command()
@with_netlist(cd_default=True)
@click.option("--vectors", "vector_path", required=True, type=click.Path(dir_okay=False),
              help='One transaction per line: "<hexA> <hexB> <0|1>".')
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), help="Write the transition trace here.")
@click.option("--model", "model_path", type=click.Path(dir_okay=False))
def sim(path, width, composition, block, pairs, cd, vector_path, trace_path, model_path) -> None:
    """Run handshake cycles on an adder and print one report per vector."""
    model = _load_model(model_path)
    nl = _resolve(path, width, composition, block, pairs, cd)
    try:
        w = adder_width(nl)
    except ValueError as exc:
        _fail(str(exc))
    vectors = _read_vectors(vector_path)
    for a, b, _ in vectors:
        if a >> w or b >> w:
            _fail(f"operand {max(a, b):#x} does not fit in {w} bits")
    s = Simulator(nl, model)
    failed = False
    dumps = []
    for i, (a, b, cin) in enumerate(vectors):
        try:
            if s.c.done is not None:
                rep, trace = run_handshake_cycle(s.c, None, a, b, cin, sim=s)
            else:
                rep, trace = run_cycle(s.c, None, {"A": a, "B": b, "CIN": cin}, sim=s)
                total = rep.outputs["SUM"] + (rep.outputs["COUT"] << w)
                rep = replace(rep, expected=a + b + cin, result=total)
        except SimulationError as exc:
            click.echo(f"A={a:#x} B={b:#x} CIN={cin:#x} -> {type(exc).__name__}: {exc}")
            failed = True
            if exc.trace is not None:
                dumps.append(f"# transaction {i}\n" + exc.trace.dump())
            s.reset()
            continue
        click.echo(str(rep))
        failed |= not rep.ok or not rep.returned_to_reset
        dumps.append(f"# transaction {i}\n" + trace.dump())
    if trace_path is not None:
        Path(trace_path).write_text("".join(dumps), encoding="utf-8")
    sys.exit(1 if failed else 0)


@main.command()
@with_netlist(cd_default=False)
@click.option("--from", "sources", help="Comma-separated source nets (default: all primary inputs).")
@click.option("--to", "sinks", help="Comma-separated sink nets (default: all primary outputs).")
@click.option("--per-output", is_flag=True, help="One line per output net.")
@click.option("--model", "model_path", type=click.Path(dir_okay=False))
def sta(path, width, composition, block, pairs, cd, sources, sinks, per_output, model_path) -> None:
    """Longest structural path through the netlist."""
    model = _load_model(model_path)
    nl = _resolve(path, width, composition, block, pairs, cd)
    src = sources.split(",") if sources else None
    dst = sinks.split(",") if sinks else None
    nets = set(nl.nets)
    for net in (src or []) + (dst or []):
        if net not in nets:
            _fail(f"unknown net {net!r}")
    result = analysis.structural_sta(nl, model, src, dst, per_output=per_output)
    if per_output:
        for sink in dst or nl.outputs:
            click.echo(f"{sink}: {result[sink]}" if sink in result else f"{sink}: unreachable")
    elif result is None:
        click.echo("no path")
    else:
        click.echo(str(result))


if __name__ == "__main__":
    main()

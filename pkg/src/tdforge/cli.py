"""Command-line entry point.

Exit code conventions: 0 success / accepted / equivalent; 1 check or parse
rejection; 2 usage errors; 3 I/O errors; 10/11/12 the directed verdicts of
`equiv`; 20 solver-inconclusive results.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import __version__
from .diffcheck import DEFAULT_MAX_WITNESSES, diff_one_direction, equiv, witness_report
from .frontend import CheckFailure, check
from .interp import AcceptMode, validate
from .refine import (
    DirectoryCandidateProvider,
    ExternalCommandLabeler,
    ExternalCommandProvider,
    GoldenSpecLabeler,
    SeedInconsistent,
    run_loop,
    write_state_log,
)
from .smt import QuerySpec, build_query
from .solver import DEFAULT_TIMEOUT_SECS
from .specializer import specialize
from .testgen import GenConfig, gen_tests, load_manifest, write_corpus

EXIT_IO = 3
EXIT_INCONCLUSIVE = 20

GRAMMAR_VERSION = "structs/casetypes/enums/bitfields/arrays v1"


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        click.echo(f"error: cannot read {path}: {e}", err=True)
        sys.exit(EXIT_IO)


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        click.echo(f"error: cannot read {path}: {e}", err=True)
        sys.exit(EXIT_IO)


def _check_or_die(text: str, name: str):
    try:
        return check(text)
    except CheckFailure as e:
        for d in e.diagnostics:
            click.echo(d.render(name), err=True)
        sys.exit(1)


def _hexdump(data: bytes) -> str:
    return " ".join(f"{b:02x}" for b in data) or "(empty)"


class _Ctx:
    def __init__(self, mode: AcceptMode, solver: tuple[str, ...] | None,
                 timeout_secs: float, seed_note: str):
        self.mode = mode
        self.solver = solver
        self.timeout_secs = timeout_secs
        self.seed_note = seed_note


@click.group()
@click.version_option(__version__, message=f"%(prog)s %(version)s ({GRAMMAR_VERSION})")
@click.option("--mode", type=click.Choice(["strict", "prefix"]),
              default="strict", show_default=True,
              help="Whether the entry type must consume the whole input.")
@click.option("--solver", default=None,
              help="Solver command reading SMT-LIB2 on stdin (overrides "
                   "TDFORGE_SOLVER; default: bundled Z3 adapter).")
@click.option("--timeout-secs", type=float, default=DEFAULT_TIMEOUT_SECS,
              show_default=True, help="Per-query solver timeout.")
@click.option("--seed-note", default="",
              help="Free-form provenance string recorded in manifests.")
@click.pass_context
def main(ctx, mode, solver, timeout_secs, seed_note):
    """Tooling for a binary data-format description language: check and run
    specs, generate SMT-backed test corpora, compare specs, refine
    candidate sets."""
    import shlex
    cmd = tuple(shlex.split(solver)) if solver else None
    ctx.obj = _Ctx(AcceptMode(mode), cmd, timeout_secs, seed_note)


@main.command("check")
@click.argument("spec_file")
def cmd_check(spec_file):
    """Syntax- and type-check a spec; exit 0 when well-formed."""
    spec = _check_or_die(_read_text(spec_file), spec_file)
    click.echo(f"ok: entry type {spec.entry!r}, {len(spec.defs)} definition(s)")


@main.command("run")
@click.argument("spec_file")
@click.argument("packet_file")
@click.pass_obj
def cmd_run(obj, spec_file, packet_file):
    """Execute a spec on a packet; exit 0 if accepted, 1 if rejected."""
    spec = _check_or_die(_read_text(spec_file), spec_file)
    data = _read_bytes(packet_file)
    accepted, outcome = validate(spec, data, obj.mode)
    click.echo(outcome.describe())
    sys.exit(0 if accepted else 1)


@main.command("gen")
@click.argument("spec_file")
@click.option("--depth", default=8, show_default=True,
              help="Maximum branch-trace length explored.")
@click.option("--quota", default=2, show_default=True,
              help="Packets requested per query site.")
@click.option("--max", "max_tests", default=200, show_default=True,
              help="Total corpus size cap.")
@click.option("--polarity", type=click.Choice(["positive", "negative", "both"]),
              default="both", show_default=True)
@click.option("--unknown-budget", default=10, show_default=True,
              help="Solver-unknown answers tolerated before giving up with "
                   "a partial corpus.")
@click.option("--out", "out_dir", default=None,
              help="Directory for packet files and manifest.json.")
@click.pass_obj
def cmd_gen(obj, spec_file, depth, quota, max_tests, polarity,
            unknown_budget, out_dir):
    """Generate a branch-covering corpus of labeled test packets."""
    text = _read_text(spec_file)
    spec = _check_or_die(text, spec_file)
    cfg = GenConfig(branch_depth=depth, quota=quota, max_tests=max_tests,
                    mode=obj.mode, polarity=polarity,
                    unknown_budget=unknown_budget,
                    timeout_secs=obj.timeout_secs, solver_command=obj.solver)
    report = gen_tests(spec, cfg)
    for p in report.packets:
        click.echo(f"{p.label:8s} {p.id}  {_hexdump(p.data)}")
    click.echo(f"total: {len(report.positives)} positive, "
               f"{len(report.negatives)} negative")
    click.echo("coverage:")
    for entry in report.coverage.values():
        outs = ", ".join(f"{o}:{n}" for o, n in sorted(entry.outcomes.items()))
        click.echo(f"  b{entry.branch_id} {entry.kind}({entry.source}) "
                   f"arity={entry.arity} hit=[{outs}]")
    if report.positive_root_unsat:
        click.echo("positive query unsatisfiable at the root: "
                   "the spec accepts no packet")
    if report.truncated:
        click.echo(f"note: stopped at max-tests={max_tests}")
    if out_dir:
        manifest = write_corpus(Path(out_dir), report.packets, text,
                                obj.seed_note)
        click.echo(f"wrote {manifest}")
    if report.warning:
        click.echo(f"warning: solver-unknown budget exhausted "
                   f"({report.unknown_count} unknowns); corpus is partial",
                   err=True)
        sys.exit(EXIT_INCONCLUSIVE)


@main.command("diff")
@click.argument("left_file")
@click.argument("right_file")
@click.option("--max-witnesses", default=DEFAULT_MAX_WITNESSES, show_default=True)
@click.option("--out", "out_dir", default=None,
              help="Directory for a witness manifest.")
@click.pass_obj
def cmd_diff(obj, left_file, right_file, max_witnesses, out_dir):
    """Find packets accepted by LEFT but rejected by RIGHT."""
    ltext, rtext = _read_text(left_file), _read_text(right_file)
    left = _check_or_die(ltext, left_file)
    right = _check_or_die(rtext, right_file)
    result = diff_one_direction(left, right, obj.mode, max_witnesses,
                                obj.solver, obj.timeout_secs)
    if result.status == "unknown":
        click.echo(f"inconclusive: {result.reason}")
        sys.exit(EXIT_INCONCLUSIVE)
    if result.status == "unsat":
        click.echo("no difference: every packet LEFT accepts, RIGHT accepts")
        sys.exit(0)
    for w in result.witnesses:
        click.echo(witness_report(left, right, w.data, obj.mode))
    if not result.witnesses:
        click.echo(f"difference exists but is not reifiable: {result.reason}")
    if out_dir:
        manifest = write_corpus(Path(out_dir), result.witnesses, ltext,
                                obj.seed_note)
        click.echo(f"wrote {manifest}")
    sys.exit(10)


@main.command("equiv")
@click.argument("left_file")
@click.argument("right_file")
@click.option("--max-witnesses", default=DEFAULT_MAX_WITNESSES, show_default=True)
@click.option("--out", "out_dir", default=None,
              help="Directory for a witness manifest.")
@click.pass_obj
def cmd_equiv(obj, left_file, right_file, max_witnesses, out_dir):
    """Decide whether two specs accept exactly the same packets.

    Exit codes: 0 Equivalent, 10 LeftPermissive, 11 RightPermissive,
    12 Incomparable, 20 Inconclusive."""
    ltext, rtext = _read_text(left_file), _read_text(right_file)
    left = _check_or_die(ltext, left_file)
    right = _check_or_die(rtext, right_file)
    result = equiv(left, right, obj.mode, max_witnesses,
                   obj.solver, obj.timeout_secs)
    click.echo(result.verdict)
    for a, b, ws in ((left, right, result.left.witnesses),
                     (right, left, result.right.witnesses)):
        for w in ws:
            click.echo(witness_report(a, b, w.data, obj.mode))
    if out_dir:
        all_ws = list(result.left.witnesses) + list(result.right.witnesses)
        manifest = write_corpus(Path(out_dir), all_ws, ltext, obj.seed_note)
        click.echo(f"wrote {manifest}")
    sys.exit(result.exit_code)


@main.command("refine")
@click.option("--candidates", "cand_dir", default=None,
              help="Directory of .3d candidate specs, consumed in name order.")
@click.option("--provider-cmd", default=None,
              help="Command producing one candidate per call (state log on "
                   "stdin, spec text on stdout, empty when exhausted).")
@click.option("--labeler-spec", default=None,
              help="Trusted spec whose interpreter labels packets.")
@click.option("--labeler-cmd", default=None,
              help="Command labeling a packet on stdin (exit 0 = positive).")
@click.option("--seeds", "seeds_manifest", default=None,
              help="Manifest of pre-labeled seed packets.")
@click.option("--max-rounds", default=15, show_default=True)
@click.option("--out", "out_dir", required=True,
              help="Directory for surviving specs, manifest, and state log.")
@click.pass_obj
def cmd_refine(obj, cand_dir, provider_cmd, labeler_spec, labeler_cmd,
               seeds_manifest, max_rounds, out_dir):
    """Run the candidate-refinement loop to a surviving candidate set."""
    import shlex

    if bool(cand_dir) == bool(provider_cmd):
        raise click.UsageError("exactly one of --candidates/--provider-cmd")
    if bool(labeler_spec) == bool(labeler_cmd):
        raise click.UsageError("exactly one of --labeler-spec/--labeler-cmd")
    provider = (DirectoryCandidateProvider(Path(cand_dir)) if cand_dir
                else ExternalCommandProvider(shlex.split(provider_cmd)))
    if labeler_spec:
        golden = _check_or_die(_read_text(labeler_spec), labeler_spec)
        labeler = GoldenSpecLabeler(golden, obj.mode)
    else:
        labeler = ExternalCommandLabeler(shlex.split(labeler_cmd))
    seeds_pos, seeds_neg = [], []
    if seeds_manifest:
        try:
            for p in load_manifest(Path(seeds_manifest)):
                (seeds_pos if p.label == "positive" else seeds_neg).append(p.data)
        except (OSError, ValueError, KeyError) as e:
            click.echo(f"error: bad seeds manifest: {e}", err=True)
            sys.exit(EXIT_IO)
    try:
        result = run_loop(provider, labeler, seeds_pos, seeds_neg, obj.mode,
                          max_rounds, solver_command=obj.solver,
                          timeout_secs=obj.timeout_secs)
    except SeedInconsistent as e:
        raise click.UsageError(str(e))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for cand in result.candidates:
        (out / f"{cand.name}.3d").write_text(cand.text)
    from .testgen import TestPacket
    packets = ([TestPacket.make(p, "positive", (), "refine")
                for p in result.i_plus]
               + [TestPacket.make(p, "negative", (), "refine")
                  for p in result.i_minus])
    write_corpus(out, packets, "", obj.seed_note)
    write_state_log(out / "state.log.jsonl", result.state_log)
    click.echo(f"survivors: {[c.name for c in result.candidates]}")
    click.echo(f"packets: {len(result.i_plus)} positive, "
               f"{len(result.i_minus)} negative; rounds: {result.rounds}")
    click.echo(f"wrote {out}")


@main.command("dump-smt")
@click.argument("spec_file")
@click.option("--query", "query_kind",
              type=click.Choice(["positive", "negative"]),
              default="positive", show_default=True)
@click.option("--coverage", is_flag=True,
              help="Instrument branch points with trace assertions.")
@click.pass_obj
def cmd_dump_smt(obj, spec_file, query_kind, coverage):
    """Print the exact SMT-LIB2 script for a query against a spec."""
    spec = _check_or_die(_read_text(spec_file), spec_file)
    program = specialize(spec)
    q = QuerySpec(kind=query_kind, mode=obj.mode, instrumented=coverage)
    script = build_query(q, program, label=spec.entry)
    click.echo(script.render(), nl=False)


if __name__ == "__main__":
    main()

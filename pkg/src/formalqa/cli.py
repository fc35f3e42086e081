"""Command-line entry points for running, grading, and reporting benchmarks."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .client import atomic_write_text
from .leancheck import LeanVerifier
from .metrics import (
    Mode,
    format_percent,
    read_verdicts,
    render_comparison_text,
    unique_capability_study,
    unique_capability_subset,
)
from .pipeline import RunConfig, reaggregate, run_benchmark
from .problems import load_problem_set


def _load_config(config_path: str, **overrides) -> RunConfig:
    return RunConfig.from_file(config_path).with_overrides(**overrides)


def _run_options(command):
    for option in reversed(
        [
            click.option("--config", "config_path", required=True, type=click.Path(exists=True)),
            click.option("--run-dir", default=None, help="Override the run directory."),
            click.option("--dataset", "dataset_path", default=None, type=click.Path(exists=True)),
            click.option("--k", type=int, default=None, help="Samples per problem."),
            click.option("--seed", type=int, default=None),
            click.option("--drop-rate", type=float, default=None),
            click.option("--workers", type=int, default=None),
            click.option("--transcripts", "transcripts_dir", default=None),
            click.option("--record", "record_dir", default=None, help="Record transcripts here."),
            click.option("--quiet", is_flag=True, default=False),
        ]
    ):
        command = option(command)
    return command


def _execute(config: RunConfig, quiet: bool) -> None:
    total = 0
    done = [0]

    def progress(sample):
        done[0] += 1
        if not quiet:
            status = "ok" if sample.verdict else "fail"
            cached = " (cached)" if sample.from_cache else ""
            click.echo(
                f"[{done[0]}/{total}] {sample.problem_id}#{sample.sample_index} "
                f"{sample.route.value} {status}{cached}",
                err=True,
            )

    total = len(load_problem_set(config.dataset_path)) * config.k
    report = run_benchmark(config, on_sample=progress)
    click.echo(
        f"{report.dataset} {report.method} pass@{report.k}: "
        f"{report.solved}/{report.total} = {format_percent(report.overall)}"
    )
    click.echo(f"reports written under {config.run_dir}")


@click.group()
def main():
    """Hybrid natural/formal math-QA benchmark runner."""


@main.command()
@_run_options
def run(config_path, quiet, **overrides):
    """Run the full benchmark described by a config file."""
    _execute(_load_config(config_path, **overrides), quiet)


@main.command()
@click.argument("mode", type=click.Choice([m.value for m in Mode]))
@_run_options
def ablate(mode, config_path, quiet, **overrides):
    """Run an ablation: same config, different stage wiring."""
    config = _load_config(config_path, **overrides).with_overrides(method=Mode(mode))
    _execute(config, quiet)


@main.command()
@click.option("--run-dir", required=True, type=click.Path(exists=True))
def report(run_dir):
    """Re-aggregate persisted sample artifacts into fresh reports."""
    result = reaggregate(run_dir, regrade=False)
    click.echo((Path(run_dir) / "report.txt").read_text(encoding="utf-8"), nl=False)
    click.echo(
        f"overall: {result.solved}/{result.total} = {format_percent(result.overall)}", err=True
    )


@main.command()
@click.option("--run-dir", required=True, type=click.Path(exists=True))
def grade(run_dir):
    """Re-grade persisted boxed answers against the gold answers."""
    result = reaggregate(run_dir, regrade=True)
    click.echo(
        f"re-graded {result.dataset}: {result.solved}/{result.total} = "
        f"{format_percent(result.overall)}"
    )


@main.command(name="study-unique")
@click.option("--hr-run", required=True, type=click.Path(exists=True))
@click.option("--nl-run", required=True, type=click.Path(exists=True))
@click.option("--k", type=int, default=16, show_default=True)
@click.option("--rerun", default=None, type=click.Path(exists=True), help="Baseline rerun over the subset.")
@click.option("--k2", type=int, default=64, show_default=True)
@click.option("--out", default=None, help="Write the study as JSON here.")
def study_unique(hr_run, nl_run, k, rerun, k2, out):
    """Problems the hybrid run solved that the baseline run did not."""
    hr = read_verdicts(Path(hr_run) / "verdicts.jsonl")
    nl = read_verdicts(Path(nl_run) / "verdicts.jsonl")
    subset = unique_capability_subset(hr, nl, k)
    click.echo(f"subset size: {len(subset)}")
    for pid in subset:
        click.echo(f"  {pid}")
    payload = {"k": k, "subset": subset}
    if rerun:
        rerun_matrix = read_verdicts(Path(rerun) / "verdicts.jsonl")
        score = unique_capability_study(subset, rerun_matrix, k2)
        click.echo(f"baseline rerun pass@{k2} on subset: {format_percent(score)}")
        payload["rerun_pass_at_k2"] = format_percent(score)
        payload["k2"] = k2
    if out:
        atomic_write_text(Path(out), json.dumps(payload, indent=2, sort_keys=True) + "\n")


@main.command()
@click.option("--baseline-run", required=True, type=click.Path(exists=True))
@click.option("--candidate-run", required=True, type=click.Path(exists=True))
def compare(baseline_run, candidate_run):
    """Side-by-side accuracy table for two finished runs."""
    baseline = reaggregate(baseline_run)
    candidate = reaggregate(candidate_run)
    click.echo(render_comparison_text(baseline, candidate), nl=False)


@main.command(name="verify-lean")
@click.option("--run-dir", required=True, type=click.Path(exists=True))
@click.option("--workspace", default=None, help="Lean project workspace (or env FORMALQA_LEAN_WORKSPACE).")
@click.option("--timeout", type=float, default=300.0, show_default=True)
@click.option("--workers", type=int, default=4, show_default=True)
@click.option("--proofs/--statements", "check_proofs", default=False, help="Check stage3 proofs instead of stage2 statements.")
def verify_lean(run_dir, workspace, timeout, workers, check_proofs):
    """Batch-verify persisted Lean artifacts; writes lean_verify.jsonl."""
    verifier = LeanVerifier(workspace=workspace, timeout=timeout)
    name = "stage3.lean" if check_proofs else "stage2.lean"
    paths = sorted(Path(run_dir).glob(f"samples/*/*/{name}"))
    if not paths:
        click.echo(f"no {name} artifacts under {run_dir}", err=True)
        sys.exit(1)
    sources = [p.read_text(encoding="utf-8") for p in paths]
    results = verifier.verify_batch(sources, workers=workers, timeout=timeout)
    lines = []
    tally: dict[str, int] = {}
    for path, result in zip(paths, results):
        tally[result.status.value] = tally.get(result.status.value, 0) + 1
        lines.append(
            json.dumps(
                {
                    "artifact": str(path.relative_to(run_dir)),
                    "status": result.status.value,
                    "wall_time": round(result.wall_time, 3),
                },
                sort_keys=True,
            )
        )
    atomic_write_text(Path(run_dir) / "lean_verify.jsonl", "\n".join(lines) + "\n")
    for status, count in sorted(tally.items()):
        click.echo(f"{status}: {count}")


if __name__ == "__main__":
    main()

"""pass@k aggregation, per-subject tables, capability studies, and reports.

pass@k here is the literal any-of-k definition: a problem counts as solved
when any of its k sampled answers matches. This is NOT the unbiased
combinatorial pass@k estimator; the two disagree, so don't compare numbers
across harnesses without checking which definition they use. All internal
arithmetic is exact fractions; percentages render at two decimal places only
at the output boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from fractions import Fraction
from pathlib import Path

from .client import atomic_write_text
from .errors import (
    ConflictingFlagsError,
    EmptyMatrixError,
    KExceedsSamplesError,
    MissingRowError,
    SetMismatchError,
)
from .problems import UNLABELED, ProblemSet


class Mode(str, Enum):
    FULL = "full"
    NO_EXISTENCE_ALIGNMENT = "no_existence_alignment"
    NO_EXPERT_PROVER = "no_expert_prover"
    NL_EXISTENCE_ONLY = "nl_existence_only"
    NL_BASELINE = "nl_baseline"


def ablation_label(
    *,
    drop_alignment: bool = False,
    general_prover: bool = False,
    existence_only: bool = False,
    nl_only: bool = False,
) -> Mode:
    """Map ablation flags to the pipeline mode; exactly one may be set."""
    selected = [
        mode
        for flag, mode in (
            (drop_alignment, Mode.NO_EXISTENCE_ALIGNMENT),
            (general_prover, Mode.NO_EXPERT_PROVER),
            (existence_only, Mode.NL_EXISTENCE_ONLY),
            (nl_only, Mode.NL_BASELINE),
        )
        if flag
    ]
    if len(selected) > 1:
        raise ConflictingFlagsError(f"conflicting ablation flags: {[m.value for m in selected]}")
    return selected[0] if selected else Mode.FULL


@dataclass
class VerdictMatrix:
    """Per-problem ordered verdict rows, one boolean per sample."""

    rows: dict[str, list[bool]]

    def __post_init__(self):
        lengths = {len(row) for row in self.rows.values()}
        if len(lengths) > 1:
            raise ValueError(f"ragged verdict matrix: row lengths {sorted(lengths)}")

    @property
    def k(self) -> int:
        return len(next(iter(self.rows.values()))) if self.rows else 0

    def __len__(self) -> int:
        return len(self.rows)


def pass_at_k(row: list[bool], k: int) -> bool:
    """True iff any of the first k verdicts is true."""
    if k < 1:
        raise KExceedsSamplesError(f"k must be >= 1, got {k}")
    if k > len(row):
        raise KExceedsSamplesError(f"k={k} exceeds the {len(row)} recorded samples")
    return any(row[:k])


def accuracy(matrix: VerdictMatrix, k: int) -> Fraction:
    """Fraction of problems solved at pass@k; exact."""
    if not matrix.rows:
        raise EmptyMatrixError("verdict matrix has no rows")
    solved = sum(1 for row in matrix.rows.values() if pass_at_k(row, k))
    return Fraction(solved, len(matrix.rows))


@dataclass(frozen=True)
class SubjectRow:
    subject: str
    count: int
    solved: int

    @property
    def accuracy(self) -> Fraction:
        return Fraction(self.solved, self.count)


def subject_report(matrix: VerdictMatrix, problems: ProblemSet, k: int) -> list[SubjectRow]:
    """Per-subject solved counts and accuracies, ordered by first appearance."""
    counts: dict[str, int] = {}
    solved: dict[str, int] = {}
    for problem in problems:
        if problem.id not in matrix.rows:
            raise MissingRowError(f"matrix lacks a row for problem {problem.id!r}")
        subject = problem.subject if problem.subject else UNLABELED
        counts[subject] = counts.get(subject, 0) + 1
        solved[subject] = solved.get(subject, 0) + int(pass_at_k(matrix.rows[problem.id], k))
    return [SubjectRow(subject, counts[subject], solved[subject]) for subject in counts]


def unique_capability_subset(
    hr: VerdictMatrix, nl: VerdictMatrix, k: int
) -> list[str]:
    """Problem ids solved by the hybrid run but not by the baseline run."""
    if set(hr.rows) != set(nl.rows):
        raise SetMismatchError("matrices cover different problem sets")
    return [
        pid
        for pid, row in hr.rows.items()
        if pass_at_k(row, k) and not pass_at_k(nl.rows[pid], k)
    ]


def unique_capability_study(
    subset_ids: list[str], rerun: VerdictMatrix, k2: int = 64
) -> Fraction:
    """pass@k2 accuracy of a rerun restricted to exactly the subset problems."""
    if not subset_ids:
        raise EmptyMatrixError("subset is empty")
    if set(rerun.rows) != set(subset_ids):
        raise SetMismatchError("rerun matrix does not cover exactly the subset")
    return accuracy(rerun, k2)


def format_percent(fraction: Fraction) -> str:
    """Exact fraction -> two-decimal percentage string, e.g. '89.80%'."""
    percent = Decimal(fraction.numerator * 100) / Decimal(fraction.denominator)
    return f"{percent.quantize(Decimal('0.01'), rounding=ROUND_HALF_UP)}%"


def format_average(fraction: Fraction) -> str:
    value = Decimal(fraction.numerator) / Decimal(fraction.denominator)
    return str(value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass
class RunReport:
    dataset: str
    method: str
    k: int
    total: int
    solved: int
    subjects: list[SubjectRow]
    token_averages: dict[str, dict] = field(default_factory=dict)
    routes: dict[str, int] = field(default_factory=dict)
    config_digest: str = ""
    pins: dict[str, str | None] = field(default_factory=dict)

    def __post_init__(self):
        if sum(row.count for row in self.subjects) != self.total:
            raise ValueError("subject counts do not sum to the problem total")
        if sum(row.solved for row in self.subjects) != self.solved:
            raise ValueError("subject solved counts do not recompose the overall count")

    @property
    def overall(self) -> Fraction:
        return Fraction(self.solved, self.total)


def build_report(
    matrix: VerdictMatrix,
    problems: ProblemSet,
    k: int,
    method: str,
    ledger=None,
    config_digest: str = "",
    pins: dict | None = None,
) -> RunReport:
    rows = subject_report(matrix, problems, k)
    token_averages: dict[str, dict] = {}
    if ledger is not None:
        for (group, dataset), (total, count) in sorted(ledger.cells().items()):
            if dataset != problems.name:
                continue
            token_averages[group] = {
                "sum": total,
                "count": count,
                "average": format_average(Fraction(total, count)),
            }
    return RunReport(
        dataset=problems.name,
        method=method,
        k=k,
        total=len(problems),
        solved=sum(row.solved for row in rows),
        subjects=rows,
        token_averages=token_averages,
        config_digest=config_digest,
        pins=pins or {},
    )


def report_to_dict(report: RunReport) -> dict:
    return {
        "dataset": report.dataset,
        "method": report.method,
        "k": report.k,
        "total": report.total,
        "solved": report.solved,
        "accuracy_percent": format_percent(report.overall),
        "subjects": [
            {
                "subject": row.subject,
                "count": row.count,
                "solved": row.solved,
                "accuracy_percent": format_percent(row.accuracy),
            }
            for row in report.subjects
        ],
        "token_averages": report.token_averages,
        "routes": report.routes,
        "config_digest": report.config_digest,
        "pins": report.pins,
    }


def render_report_text(report: RunReport) -> str:
    lines = [
        f"dataset: {report.dataset}    method: {report.method}    pass@{report.k}",
        f"overall: {report.solved}/{report.total}    {format_percent(report.overall)}",
        "",
        f"{'subject':<28}{'count':>8}{'solved':>8}{'accuracy':>12}",
    ]
    for row in report.subjects:
        lines.append(
            f"{row.subject:<28}{row.count:>8}{row.solved:>8}{format_percent(row.accuracy):>12}"
        )
    if report.token_averages:
        lines.append("")
        lines.append(f"{'tokens generated (completion only)':<36}{'queries':>10}{'average':>12}")
        for group, cell in report.token_averages.items():
            lines.append(f"{group:<36}{cell['count']:>10}{cell['average']:>12}")
    if report.routes:
        lines.append("")
        lines.append(
            "routes: "
            + "  ".join(f"{name}={count}" for name, count in sorted(report.routes.items()))
        )
    lines.append("")
    lines.append(f"config digest: {report.config_digest}")
    return "\n".join(lines) + "\n"


def render_comparison_text(baseline: RunReport, candidate: RunReport) -> str:
    """Side-by-side accuracy table for two runs over the same dataset."""
    if baseline.dataset != candidate.dataset:
        raise SetMismatchError("comparison requires reports over the same dataset")
    header = (
        f"{'dataset':<28}{'count':>8}{baseline.method:>22}{candidate.method:>22}"
        f"{'improvement':>14}"
    )
    lines = [header]

    def row(label: str, count: int, base: Fraction, cand: Fraction) -> str:
        return (
            f"{label:<28}{count:>8}{format_percent(base):>22}{format_percent(cand):>22}"
            f"{format_percent(cand - base):>14}"
        )

    lines.append(row(baseline.dataset, baseline.total, baseline.overall, candidate.overall))
    base_by_subject = {r.subject: r for r in baseline.subjects}
    for cand_row in candidate.subjects:
        base_row = base_by_subject.get(cand_row.subject)
        if base_row is None:
            raise SetMismatchError(f"subject {cand_row.subject!r} missing from baseline report")
        lines.append(row(cand_row.subject, cand_row.count, base_row.accuracy, cand_row.accuracy))
    return "\n".join(lines) + "\n"


def write_verdicts(path: str | Path, matrix: VerdictMatrix) -> None:
    """Persist one JSON row per problem, in matrix order."""
    lines = [
        json.dumps({"id": pid, "verdicts": row}, ensure_ascii=False)
        for pid, row in matrix.rows.items()
    ]
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def read_verdicts(path: str | Path) -> VerdictMatrix:
    rows: dict[str, list[bool]] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        rows[record["id"]] = [bool(v) for v in record["verdicts"]]
    return VerdictMatrix(rows)

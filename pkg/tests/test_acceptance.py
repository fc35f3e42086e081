"""Acceptance criteria, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line (visible with ``pytest -s``
or in captured output). Headline accuracies from live models are out of desk
reach, so acceptance is property-based plus fixture-replay reproduction of
every report shape.
"""

import dataclasses
import random
import time
from contextlib import contextmanager
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import pytest

from formalqa.client import TokenLedger, ledger_average
from formalqa.extract import parse_boxed
from formalqa.formalize import parse_formal_statement
from formalqa.grading import equivalent
from formalqa.leancheck import LeanVerifier, VerifyStatus
from formalqa.metrics import (
    VerdictMatrix,
    accuracy,
    build_report,
    format_average,
    pass_at_k,
    render_comparison_text,
    render_report_text,
    unique_capability_study,
    unique_capability_subset,
)
from formalqa.pipeline import RunConfig, run_benchmark
from formalqa.problems import Dataset, Problem, ProblemSet
from formalqa.prove import parse_prover_output
from formalqa.translate import parse_translation

from helpers import ScriptedBackend
from test_grading import ORACLE_SUITE


@contextmanager
def criterion(number: int, description: str):
    try:
        yield
    except BaseException:
        print(f"[FAIL] criterion {number}: {description}")
        raise
    print(f"[PASS] criterion {number}: {description}")


# ---- criterion 1: metric oracle --------------------------------------------


def test_criterion_1_metric_oracle():
    with criterion(1, "pass@k/accuracy agree with brute-force recount on 1000 matrices, <10s"):
        rng = random.Random(20240601)
        started = time.monotonic()
        for _ in range(1000):
            n_problems = rng.randint(1, 500)
            n_samples = rng.choice([1, 2, 4, 8, 16, 32, 64])
            density = rng.choice([0.0, 0.02, 0.1, 0.5, 1.0])
            rows = {
                f"p{i}": [rng.random() < density for _ in range(n_samples)]
                for i in range(n_problems)
            }
            k = rng.randint(1, n_samples)
            recount = 0
            for row in rows.values():
                oracle_row = True in row[:k]  # independent recount
                assert pass_at_k(row, k) == oracle_row
                recount += oracle_row
            assert accuracy(VerdictMatrix(rows), k) == Fraction(recount, n_problems)
        elapsed = time.monotonic() - started
        assert elapsed < 10.0, f"metric oracle took {elapsed:.1f}s"


# ---- criterion 2: table reproduction ----------------------------------------

# Reconstructed per-subject solved counts, derived from the reported
# percentages (count x percent rounds to an integer in every cell).
MATH500_CELLS = [
    # subject, count, baseline solved, hybrid solved
    ("Prealgebra", 82, 69, 73),
    ("Counting & Probability", 38, 32, 34),
    ("Intermediate Algebra", 97, 82, 87),
    ("Geometry", 41, 27, 33),
    ("Precalculus", 56, 43, 47),
    ("Algebra", 124, 117, 118),
    ("Number Theory", 62, 56, 57),
]
MATH500_EXPECTED = {
    "baseline": ["84.15%", "84.21%", "84.54%", "65.85%", "76.79%", "94.35%", "90.32%"],
    "hybrid": ["89.02%", "89.47%", "89.69%", "80.49%", "83.93%", "95.16%", "91.94%"],
    "improvement": ["4.88%", "5.26%", "5.15%", "14.63%", "7.14%", "0.81%", "1.61%"],
}


def _solved_row(k: int) -> list[bool]:
    return [True] + [False] * (k - 1)


def _unsolved_row(k: int) -> list[bool]:
    return [False] * k


def math500_fixture(k: int = 16):
    problems = []
    baseline_rows = {}
    hybrid_rows = {}
    for subject, count, nl_solved, hr_solved in MATH500_CELLS:
        for i in range(count):
            pid = f"{subject}-{i}"
            problems.append(
                Problem(
                    id=pid,
                    dataset=Dataset.MATH500,
                    subject=subject,
                    statement="q",
                    gold_answer="1",
                )
            )
            baseline_rows[pid] = _solved_row(k) if i < nl_solved else _unsolved_row(k)
            hybrid_rows[pid] = _solved_row(k) if i < hr_solved else _unsolved_row(k)
    problem_set = ProblemSet(name="math500", problems=tuple(problems))
    return problem_set, VerdictMatrix(baseline_rows), VerdictMatrix(hybrid_rows)


def amc_fixture(k: int = 16):
    """83 problems: 63 solved by both, 3 baseline-only, 7 hybrid-only, 10 neither."""
    problems = []
    baseline_rows = {}
    hybrid_rows = {}
    for i in range(83):
        pid = f"amc-{i}"
        problems.append(
            Problem(id=pid, dataset=Dataset.AMC, subject=None, statement="q", gold_answer="1")
        )
        both = i < 63
        nl_only = 63 <= i < 66
        hr_only = 66 <= i < 73
        baseline_rows[pid] = _solved_row(k) if (both or nl_only) else _unsolved_row(k)
        hybrid_rows[pid] = _solved_row(k) if (both or hr_only) else _unsolved_row(k)
    problem_set = ProblemSet(name="amc", problems=tuple(problems))
    return problem_set, VerdictMatrix(baseline_rows), VerdictMatrix(hybrid_rows)


def test_criterion_2_table_reproduction(tmp_path):
    with criterion(2, "fixture matrices reproduce every reported percentage and the study"):
        problems, nl_matrix, hr_matrix = math500_fixture()
        nl_report = build_report(nl_matrix, problems, 16, "nl_baseline")
        hr_report = build_report(hr_matrix, problems, 16, "full")

        nl_text_path = tmp_path / "nl" / "report.txt"
        hr_text_path = tmp_path / "hr" / "report.txt"
        nl_text_path.parent.mkdir()
        hr_text_path.parent.mkdir()
        nl_text_path.write_text(render_report_text(nl_report), encoding="utf-8")
        hr_text_path.write_text(render_report_text(hr_report), encoding="utf-8")
        nl_text = nl_text_path.read_text(encoding="utf-8")
        hr_text = hr_text_path.read_text(encoding="utf-8")

        assert "85.20%" in nl_text and "89.80%" in hr_text
        for value in MATH500_EXPECTED["baseline"]:
            assert value in nl_text, value
        for value in MATH500_EXPECTED["hybrid"]:
            assert value in hr_text, value
        comparison = render_comparison_text(nl_report, hr_report)
        assert "4.60%" in comparison.splitlines()[1]
        for value in MATH500_EXPECTED["improvement"]:
            assert value in comparison, value

        amc_problems, amc_nl, amc_hr = amc_fixture()
        amc_nl_report = build_report(amc_nl, amc_problems, 16, "nl_baseline")
        amc_hr_report = build_report(amc_hr, amc_problems, 16, "full")
        amc_nl_text = render_report_text(amc_nl_report)
        amc_hr_text = render_report_text(amc_hr_report)
        assert "79.52%" in amc_nl_text and "84.34%" in amc_hr_text
        assert "4.82%" in render_comparison_text(amc_nl_report, amc_hr_report)

        # unique-capability study: {7, 23, 0%, 0%, 100%} exactly
        math_subset = unique_capability_subset(hr_matrix, nl_matrix, 16)
        amc_subset = unique_capability_subset(amc_hr, amc_nl, 16)
        assert len(math_subset) == 23
        assert len(amc_subset) == 7
        for subset, nl, hr in (
            (math_subset, nl_matrix, hr_matrix),
            (amc_subset, amc_nl, amc_hr),
        ):
            nl_16 = accuracy(VerdictMatrix({pid: nl.rows[pid] for pid in subset}), 16)
            assert nl_16 == 0
            rerun_64 = VerdictMatrix({pid: _unsolved_row(64) for pid in subset})
            assert unique_capability_study(subset, rerun_64, 64) == 0
            hr_16 = accuracy(VerdictMatrix({pid: hr.rows[pid] for pid in subset}), 16)
            assert hr_16 == 1


# ---- criterion 3: parser golden suite ----------------------------------------


def test_criterion_3_parser_golden_suite(fixture_text):
    with criterion(3, "stage parsers reproduce the worked transcripts byte-exactly"):
        assert parse_translation(fixture_text("translation_daps.md")) == (
            "Define the conversion rates 4 daps = 7 yaps and 5 yaps = 3 baps. "
            "Prove that there exists a number of daps equal to 42 baps."
        )
        assert parse_translation(fixture_text("translation_matrix.md")) == (
            "Prove that there exists a smallest positive real number $C$ such that\n"
            "$$\\left\\| \\begin{bmatrix} 2 & 3 \\\\ 0 & -2 \\end{bmatrix} \\textbf{v} \\right\\|"
            " \\le C \\|\\textbf{v}\\|$$\n"
            "for all two-dimensional vectors $\\textbf{v}.$"
        )

        statement = parse_formal_statement(
            fixture_text("formalization_daps.md"), "math500_prealgebra_2086_1"
        )
        assert statement.theorem_name == "math500_prealgebra_2086_1"
        assert "∃ x, 42 * baps = x * daps ∧ ∃ q : ℚ, x = q := by sorry" in statement.lean_source

        daps_output = parse_prover_output(fixture_text("prover_daps.md"))
        assert "So 42 baps = 42 * (20/21) daps = 40 daps" in daps_output.cot
        assert "use 40" in daps_output.lean_proof
        matrix_output = parse_prover_output(fixture_text("prover_matrix.md"))
        assert "**The answer is: 4**" in matrix_output.cot

        assert parse_boxed(fixture_text("extraction_daps.md")) == "40"
        assert parse_boxed(fixture_text("extraction_matrix.md")) == "4"


# ---- criterion 4: equivalence oracle ------------------------------------------


def test_criterion_4_equivalence_oracle():
    with criterion(4, "answer equivalence matches the exact-rational oracle on 60+ cases"):
        assert len(ORACLE_SUITE) >= 60
        disagreements = [
            (left, right, expected)
            for left, right, expected in ORACLE_SUITE
            if equivalent(left, right) is not expected
        ]
        assert disagreements == []
        # property tests for reflexivity/symmetry/idempotence live in
        # test_grading.py and run as part of the same suite


# ---- criteria 5 and 7: determinism and resume ---------------------------------


def _mini_config(mini_dataset_path, tmp_path, run_name: str) -> RunConfig:
    return RunConfig(
        dataset_path=str(mini_dataset_path),
        run_dir=str(tmp_path / run_name),
        k=2,
        seed=7,
        drop_rate=0.25,
        backend="replay",
        transcripts_dir=str(tmp_path / "transcripts"),
        workers=1,
    )


def _record_transcripts(mini_dataset_path, tmp_path) -> None:
    recording = dataclasses.replace(
        _mini_config(mini_dataset_path, tmp_path, "recording_run"),
        record_dir=str(tmp_path / "transcripts"),
    )
    run_benchmark(recording, backend=ScriptedBackend())


def test_criterion_5_end_to_end_determinism(mini_dataset_path, tmp_path):
    with criterion(5, "replayed mini-benchmark is byte-identical across runs, <5s"):
        _record_transcripts(mini_dataset_path, tmp_path)
        first = _mini_config(mini_dataset_path, tmp_path, "run_a")
        second = _mini_config(mini_dataset_path, tmp_path, "run_b")
        started = time.monotonic()
        run_benchmark(first)
        run_benchmark(second)
        elapsed = time.monotonic() - started
        for name in ("verdicts.jsonl", "report.json"):
            bytes_a = (Path(first.run_dir) / name).read_bytes()
            bytes_b = (Path(second.run_dir) / name).read_bytes()
            assert bytes_a == bytes_b, name
        assert elapsed < 5.0, f"two replay runs took {elapsed:.1f}s"


def test_criterion_7_resume_matches_uninterrupted(mini_dataset_path, tmp_path):
    with criterion(7, "killing the run at 40% and resuming reproduces the full report"):
        _record_transcripts(mini_dataset_path, tmp_path)
        reference = _mini_config(mini_dataset_path, tmp_path, "reference_run")
        run_benchmark(reference)

        resumed = _mini_config(mini_dataset_path, tmp_path, "resumed_run")
        seen = []

        def kill_at_40_percent(sample):
            seen.append(sample)
            if len(seen) == 4:  # 4 of 10 samples
                raise KeyboardInterrupt

        with pytest.raises(KeyboardInterrupt):
            run_benchmark(resumed, on_sample=kill_at_40_percent)
        assert not (Path(resumed.run_dir) / "report.json").exists()

        run_benchmark(resumed)
        for name in ("verdicts.jsonl", "report.json"):
            assert (Path(resumed.run_dir) / name).read_bytes() == (
                Path(reference.run_dir) / name
            ).read_bytes(), name


# ---- criterion 6: token report -------------------------------------------------


def _queries_with_average(total_hundredths: int, count: int = 100) -> list[int]:
    """Integer per-query counts whose mean is total_hundredths/100 exactly."""
    base = total_hundredths // count
    counts = [base] * (count - 1)
    counts.append(total_hundredths - base * (count - 1))
    return counts


def test_criterion_6_token_report():
    with criterion(6, "synthetic ledger reproduces all four token averages to 2 decimals"):
        targets = {
            ("nl_baseline", "amc"): Decimal("6611.53"),
            ("nl_baseline", "math500"): Decimal("4305.30"),
            ("full", "amc"): Decimal("7447.06"),
            ("full", "math500"): Decimal("5173.63"),
        }
        ledger = TokenLedger()
        for (method, dataset), average in targets.items():
            for tokens in _queries_with_average(int(average * 100)):
                ledger.record(method, dataset, tokens)
        for (method, dataset), average in targets.items():
            value = ledger_average(ledger, method, dataset)
            assert value == Fraction(int(average * 100), 100)
            assert Decimal(format_average(value)) == average


# ---- criterion 8: conditional Lean toolchain ------------------------------------


def test_criterion_8_lean_verification_conditional(fixture_text):
    verifier = LeanVerifier()
    statement = parse_formal_statement(
        fixture_text("formalization_daps.md"), "math500_prealgebra_2086_1"
    )
    if not verifier.available():
        with criterion(8, "lean toolchain absent: verify() reports toolchain_missing"):
            result = verifier.verify(statement.lean_source)
            assert result.status is VerifyStatus.TOOLCHAIN_MISSING
        return
    with criterion(8, "lean toolchain present: statement valid-with-sorry, broken variant errors"):
        result = verifier.verify(statement.lean_source)
        assert result.status is VerifyStatus.VALID_STATEMENT_WITH_SORRY
        broken = statement.lean_source.replace("∃ x", "∃ x BROKEN SYNTAX", 1)
        assert verifier.verify(broken).status is VerifyStatus.COMPILE_ERROR

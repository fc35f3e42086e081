import logging

import pytest

from formalqa.errors import NoLeanBlockError, PlaceholderMissingError
from formalqa.formalize import (
    LEAN_PREAMBLE,
    CompileStatus,
    FormalStatement,
    build_formalization_prompt,
    make_theorem_name,
    parse_formal_statement,
    split_preamble,
    statement_body,
)
from formalqa.problems import Dataset, Problem
from formalqa.templates import default_template
from formalqa.translate import ExistenceProblem

DAPS_EXISTENCE_WITH_FRACTION = (
    "Define the conversion rates 4 daps = 7 yaps and 5 yaps = 3 baps. "
    "Prove that there exists a number of daps equal to 42 baps, "
    "and that this number can be expressed as a common fraction."
)
DAPS_GOAL = "∃ x, 42 * baps = x * daps ∧ ∃ q : ℚ, x = q"


def problem(dataset=Dataset.MATH500, subject="precalculus", pid="675"):
    return Problem(id=pid, dataset=dataset, subject=subject, statement="q", gold_answer="1")


def test_theorem_name_observed_patterns():
    assert make_theorem_name(problem(subject="precalculus", pid="675"), 2) == "math500_precalculus_675_2"
    assert make_theorem_name(problem(subject="prealgebra", pid="2086"), 1) == "math500_prealgebra_2086_1"


def test_theorem_name_sanitizes_identifier():
    assert make_theorem_name(problem(subject="Number Theory", pid="a-1"), 0) == (
        "math500_number_theory_a_1_0"
    )
    assert make_theorem_name(problem(subject=None, pid="9"), 3) == "math500_unlabeled_9_3"


def test_prompt_matches_worked_example():
    existence = ExistenceProblem(DAPS_EXISTENCE_WITH_FRACTION, source_problem_id="2086")
    request = build_formalization_prompt(
        existence, "math500_prealgebra_2086_1", default_template("formalize")
    )
    system, user = request.messages
    assert system.role == "system"
    assert system.content == "You are an expert in mathematics and Lean 4."
    assert user.content == (
        "Please combine the following theorems into a more advanced theorem. "
        "Use the following theorem names: math500_prealgebra_2086_1\n\n"
        + DAPS_EXISTENCE_WITH_FRACTION
    )
    assert request.thinking_mode is False


def test_prompt_empty_name_rejected():
    existence = ExistenceProblem("Prove that there exists x.", source_problem_id="1")
    with pytest.raises(PlaceholderMissingError):
        build_formalization_prompt(existence, "", default_template("formalize"))


def test_parse_golden_statement(fixture_text):
    statement = parse_formal_statement(
        fixture_text("formalization_daps.md"), "math500_prealgebra_2086_1", "2086"
    )
    assert statement.theorem_name == "math500_prealgebra_2086_1"
    assert DAPS_GOAL in statement.lean_source
    assert statement.lean_source.startswith("import Mathlib")
    assert statement.lean_source.rstrip().endswith(":= by sorry")
    assert statement.compile_status is CompileStatus.UNCHECKED
    # unicode math tokens preserved byte-exactly
    for token in ("∃", "ℝ", "ℚ", "∧"):
        assert token in statement.lean_source


def test_parse_appends_terminator_when_missing():
    text = "```lean4\ntheorem t1 : 1 + 1 = 2 :=\n```"
    statement = parse_formal_statement(text, "t1")
    assert statement.lean_source.rstrip().endswith(":= by sorry")

    text = "```lean4\ntheorem t2 : 1 + 1 = 2\n```"
    assert parse_formal_statement(text, "t2").lean_source.rstrip().endswith(":= by sorry")

    text = "```lean4\ntheorem t3 : 1 + 1 = 2 := by\n```"
    assert parse_formal_statement(text, "t3").lean_source.rstrip().endswith(":= by sorry")


def test_parse_prose_only_errors():
    with pytest.raises(NoLeanBlockError):
        parse_formal_statement("There is no code here.", "t")


def test_parse_block_without_theorem_errors():
    with pytest.raises(NoLeanBlockError):
        parse_formal_statement("```lean4\nimport Mathlib\n```", "t")


def test_preamble_injection_idempotent(fixture_text):
    first = parse_formal_statement(
        fixture_text("formalization_daps.md"), "math500_prealgebra_2086_1"
    )
    rewrapped = f"```lean4\n{first.lean_source}\n```"
    second = parse_formal_statement(rewrapped, "math500_prealgebra_2086_1")
    assert second.lean_source == first.lean_source
    assert first.lean_source.count("import Mathlib") == 1


def test_bare_theorem_gets_full_preamble():
    statement = parse_formal_statement("```lean4\ntheorem t : True := by sorry\n```", "t")
    assert statement.lean_source.startswith(LEAN_PREAMBLE)


def test_name_mismatch_warns_but_keeps_statement(caplog):
    text = "```lean4\ntheorem other_name : True := by sorry\n```"
    with caplog.at_level(logging.WARNING, logger="formalqa.formalize"):
        statement = parse_formal_statement(text, "expected_name")
    assert statement.theorem_name == "other_name"
    assert any("mismatch" in record.message for record in caplog.records)


def test_statement_body_strips_preamble(fixture_text):
    statement = parse_formal_statement(
        fixture_text("formalization_daps.md"), "math500_prealgebra_2086_1"
    )
    body = statement_body(statement.lean_source)
    assert body.startswith("theorem math500_prealgebra_2086_1")
    assert "import" not in body
    header, _ = split_preamble(statement.lean_source)
    assert header == LEAN_PREAMBLE


def test_formal_statement_invariants():
    with pytest.raises(ValueError):
        FormalStatement("t", "def x := 1", "p")  # no theorem
    with pytest.raises(ValueError):
        FormalStatement("t", "theorem t : True := by trivial", "p")  # no sorry
    with pytest.raises(ValueError):
        FormalStatement("missing", "theorem t : True := by sorry", "p")  # name absent

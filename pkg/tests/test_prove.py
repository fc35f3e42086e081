import pytest
from hypothesis import given, strategies as st

from formalqa.formalize import parse_formal_statement
from formalqa.prove import (
    ProverRequest,
    build_prover_prompt,
    parse_prover_output,
)
from formalqa.templates import default_template

DAPS_QA = "If 4 daps = 7 yaps, and 5 yaps = 3 baps, how many daps equal 42 baps?"

EXPECTED_PROVER_INPUT = """Think about and solve the following problem step by step in Lean 4.
# Problem: If 4 daps = 7 yaps, and 5 yaps = 3 baps, how many daps equal 42 baps?
# Formal statement:
```lean4
import Mathlib
import Aesop

set_option maxHeartbeats 0

open BigOperators Real Nat Topology Rat

/-- If 4 daps = 7 yaps, and 5 yaps = 3 baps, how many daps equal 42 baps? -/
theorem math500_prealgebra_2086_1
  (daps yaps baps : ℝ)
  (h_0 : 4 * daps = 7 * yaps)
  (h_1 : 5 * yaps = 3 * baps) :
  ∃ x, 42 * baps = x * daps ∧ ∃ q : ℚ, x = q := by sorry
```"""


def daps_statement(fixture_text):
    return parse_formal_statement(
        fixture_text("formalization_daps.md"), "math500_prealgebra_2086_1", "2086"
    )


def test_prompt_matches_worked_input(fixture_text):
    request = build_prover_prompt(
        ProverRequest(nl_problem=DAPS_QA, formal_statement=daps_statement(fixture_text)),
        default_template("prove"),
    )
    assert request.messages[0].content == "You are an expert in mathematics and Lean 4."
    assert request.messages[1].content == EXPECTED_PROVER_INPUT
    assert request.temperature == 0.7


def test_qa_problem_fills_both_slots(fixture_text):
    body = build_prover_prompt(
        ProverRequest(nl_problem=DAPS_QA, formal_statement=daps_statement(fixture_text)),
        default_template("prove"),
    ).messages[1].content
    assert body.count(DAPS_QA) == 2  # problem slot and doc comment


def test_empty_nl_problem_rejected(fixture_text):
    with pytest.raises(ValueError):
        ProverRequest(nl_problem="  ", formal_statement=daps_statement(fixture_text))


def test_parse_golden_daps_output(fixture_text):
    output = parse_prover_output(fixture_text("prover_daps.md"))
    assert output.delimited and not output.truncated
    assert "So 42 baps = 42 * (20/21) daps = 40 daps" in output.cot
    assert output.lean_proof is not None
    assert "use 40" in output.lean_proof
    assert output.lean_proof.startswith("import Mathlib")
    assert output.proof_has_sorry is False


def test_parse_golden_matrix_output(fixture_text):
    output = parse_prover_output(fixture_text("prover_matrix.md"))
    assert "**The answer is: 4**" in output.cot
    assert output.lean_proof is not None
    assert output.proof_has_sorry is True  # kept, but marked non-provable


def test_tactics_blocks_inside_think_are_not_proofs():
    text = "<think>\n```tactics\nuse 1\n```\n</think>\nno final block"
    output = parse_prover_output(text)
    assert output.lean_proof is None


def test_parse_without_delimiters_flags_and_keeps_everything():
    text = "just an answer, no tags"
    output = parse_prover_output(text)
    assert output.cot == text
    assert output.delimited is False
    assert output.truncated is False


def test_parse_truncated_inside_think():
    text = "<think>\nreasoning that never finishe"
    output = parse_prover_output(text)
    assert output.truncated is True
    assert output.cot == "\nreasoning that never finishe"


def test_parse_is_total_on_odd_shapes():
    for text in ["", "</think>leading close", "<think></think>", "<think></think>```lean4\nx\n```"]:
        parse_prover_output(text)  # must not raise


@given(
    cot=st.text(alphabet=st.characters(blacklist_characters="<"), max_size=200),
    tail=st.text(max_size=200),
)
def test_concatenation_reconstructs_wellformed_responses(cot, tail):
    text = "<think>" + cot + "</think>" + tail
    output = parse_prover_output(text)
    assert "<think>" + output.cot + "</think>" + tail == text

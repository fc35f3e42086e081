"""Stage 3: drive the prover with a mixed natural/formal prompt.

The prompt pairs the ORIGINAL QA problem with the formalized existence
statement. The prover solves the QA question inside its think section first,
then writes the formal proof, so the natural-language answer rides along
implicitly in the reasoning text. Getting this backwards (putting the
existence restatement in the problem slot) defeats the whole mechanism.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .client import ChatRequest, Message
from .formalize import SYSTEM_PROMPT, FormalStatement, statement_body
from .templates import PromptTemplate

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"

_LEAN_BLOCK = re.compile(r"```lean4?[ \t]*\n(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class ProverRequest:
    nl_problem: str
    formal_statement: FormalStatement

    def __post_init__(self):
        if not self.nl_problem.strip():
            raise ValueError("nl_problem must be non-empty")


@dataclass(frozen=True)
class ProverOutput:
    """Split prover response: reasoning text plus optional formal proof.

    ``delimited`` is False when no think section was found (the whole response
    is then kept as the reasoning text); ``truncated`` is True when the
    response ended inside the think section.
    """

    cot: str
    lean_proof: str | None
    truncated: bool = False
    delimited: bool = True

    @property
    def proof_has_sorry(self) -> bool:
        """A kept proof containing sorry is valid as a statement only."""
        return self.lean_proof is not None and bool(re.search(r"\bsorry\b", self.lean_proof))


def build_prover_prompt(
    request: ProverRequest,
    template: PromptTemplate,
    *,
    model_id: str = "prover",
    temperature: float = 0.7,
    max_new_tokens: int | None = None,
    sample_index: int = 0,
) -> ChatRequest:
    """Mixed problem input: QA text in both the problem slot and the doc comment."""
    template.require("qa_problem", "formal_statement")
    body = template.render(
        qa_problem=request.nl_problem,
        formal_statement=statement_body(request.formal_statement.lean_source),
    )
    kwargs = {} if max_new_tokens is None else {"max_new_tokens": max_new_tokens}
    return ChatRequest(
        model_id=model_id,
        messages=(Message("system", SYSTEM_PROMPT), Message("user", body)),
        temperature=temperature,
        thinking_mode=True,
        sample_index=sample_index,
        **kwargs,
    )


def parse_prover_output(response_text: str) -> ProverOutput:
    """Total split of any response into (cot, lean_proof, flags).

    cot is the text strictly between the first think-open and the first
    think-close; the proof is the last lean-fenced block after the close.
    Degenerate shapes are flagged, never fatal: the answer extractor still
    needs whatever reasoning text exists.
    """
    open_idx = response_text.find(THINK_OPEN)
    if open_idx == -1:
        return ProverOutput(cot=response_text, lean_proof=None, truncated=False, delimited=False)
    cot_start = open_idx + len(THINK_OPEN)
    close_idx = response_text.find(THINK_CLOSE, cot_start)
    if close_idx == -1:
        return ProverOutput(
            cot=response_text[cot_start:], lean_proof=None, truncated=True, delimited=False
        )
    cot = response_text[cot_start:close_idx]
    tail = response_text[close_idx + len(THINK_CLOSE) :]
    blocks = _LEAN_BLOCK.findall(tail)
    proof = blocks[-1].strip("\n") if blocks else None
    if proof is not None and "theorem" not in proof:
        proof = None
    return ProverOutput(cot=cot, lean_proof=proof, truncated=False, delimited=True)

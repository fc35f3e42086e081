"""Stage 2: convert the existence problem into a Lean4 theorem statement.

The autoformalizer is a non-thinking specialist model; its reply is a single
lean4-fenced block. Parsing normalizes that block into a self-contained
compile unit: a fixed preamble (Mathlib import, unbounded heartbeats, common
opens), the theorem declaration, and a ``sorry`` proof terminator.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum

from .client import ChatRequest, Message
from .errors import NoLeanBlockError, PlaceholderMissingError
from .problems import UNLABELED, Problem
from .templates import PromptTemplate
from .translate import ExistenceProblem

log = logging.getLogger(__name__)

SYSTEM_PROMPT = "You are an expert in mathematics and Lean 4."

LEAN_PREAMBLE = """import Mathlib
import Aesop

set_option maxHeartbeats 0

open BigOperators Real Nat Topology Rat"""

_LEAN_BLOCK = re.compile(r"```lean4?[ \t]*\n(.*?)```", re.DOTALL)
_THEOREM_NAME = re.compile(r"\btheorem\s+([A-Za-z_][A-Za-z0-9_']*)")
# Lines that belong to the header zone of a Lean file, not the declaration.
_HEADER_LINE = re.compile(r"^\s*(import\s|set_option\s|open\s|--|$)")


class CompileStatus(str, Enum):
    UNCHECKED = "unchecked"
    VALID_WITH_SORRY = "valid_with_sorry"
    INVALID = "invalid"


@dataclass(frozen=True)
class FormalStatement:
    theorem_name: str
    lean_source: str
    source_problem_id: str
    compile_status: CompileStatus = CompileStatus.UNCHECKED

    def __post_init__(self):
        if "theorem" not in self.lean_source:
            raise ValueError("lean_source must contain a theorem declaration")
        if not self.lean_source.rstrip().endswith("sorry"):
            raise ValueError("a formal statement must end with sorry")
        if self.theorem_name not in self.lean_source:
            raise ValueError(f"theorem name {self.theorem_name!r} absent from lean_source")


def make_theorem_name(problem: Problem, sample_index: int) -> str:
    """``{dataset}_{subject}_{id}_{sample_index}``, sanitized to an identifier."""
    subject = problem.subject if problem.subject else UNLABELED
    raw = f"{problem.dataset.value}_{subject}_{problem.id}_{sample_index}"
    return re.sub(r"[^a-z0-9_]", "_", raw.lower())


def build_formalization_prompt(
    existence: ExistenceProblem,
    theorem_name: str,
    template: PromptTemplate,
    *,
    model_id: str = "autoformalizer",
    temperature: float = 0.6,
    max_new_tokens: int | None = None,
    sample_index: int = 0,
) -> ChatRequest:
    if not theorem_name:
        raise PlaceholderMissingError("theorem_name must be non-empty")
    template.require("theorem_name", "existence_problem")
    body = template.render(theorem_name=theorem_name, existence_problem=existence.text)
    kwargs = {} if max_new_tokens is None else {"max_new_tokens": max_new_tokens}
    return ChatRequest(
        model_id=model_id,
        messages=(Message("system", SYSTEM_PROMPT), Message("user", body)),
        temperature=temperature,
        thinking_mode=False,
        sample_index=sample_index,
        **kwargs,
    )


def split_preamble(lean_source: str) -> tuple[str, str]:
    """Split a Lean source into (header zone, declaration body).

    The header zone is the leading run of import/set_option/open/comment/blank
    lines; everything from the first declaration-looking line onward is body.
    """
    lines = lean_source.splitlines()
    i = 0
    while i < len(lines) and _HEADER_LINE.match(lines[i]):
        i += 1
    header = "\n".join(lines[:i]).strip("\n")
    body = "\n".join(lines[i:]).strip("\n")
    return header, body


def statement_body(lean_source: str) -> str:
    """The declaration without the preamble, for splicing into prompts."""
    return split_preamble(lean_source)[1]


def _complete_terminator(body: str) -> str:
    stripped = body.rstrip()
    if stripped.endswith("sorry"):
        return stripped
    if stripped.endswith(":= by"):
        return stripped + " sorry"
    if stripped.endswith(":="):
        return stripped + " by sorry"
    return stripped + " := by sorry"


def parse_formal_statement(
    response_text: str, expected_name: str, source_problem_id: str = ""
) -> FormalStatement:
    """Extract and normalize the last lean-fenced block of a response.

    Whatever header the autoformalizer emitted is replaced by the standard
    preamble (prepending on top of an existing ``import`` would be illegal
    Lean, and replacement makes the operation idempotent). A missing proof
    terminator is completed with ``:= by sorry``. A theorem name differing
    from ``expected_name`` is logged as a warning; the statement is kept
    verbatim since the prover receives it as-is and grading is unaffected.
    """
    blocks = _LEAN_BLOCK.findall(response_text)
    if not blocks:
        raise NoLeanBlockError("response contains no lean-fenced code block")
    _, body = split_preamble(blocks[-1].strip("\n"))
    if not body:
        raise NoLeanBlockError("lean block carries no declaration")
    body = _complete_terminator(body)
    lean_source = f"{LEAN_PREAMBLE}\n\n{body}"
    name_match = _THEOREM_NAME.search(body)
    if name_match is None:
        raise NoLeanBlockError("lean block contains no theorem declaration")
    name = name_match.group(1)
    if expected_name and name != expected_name:
        log.warning("theorem name mismatch: got %r, expected %r", name, expected_name)
    return FormalStatement(
        theorem_name=name,
        lean_source=lean_source,
        source_problem_id=source_problem_id,
        compile_status=CompileStatus.UNCHECKED,
    )

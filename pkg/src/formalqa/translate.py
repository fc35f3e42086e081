"""Stage 1: reformulate a QA problem as a natural-language existence problem.

A few-shot prompt asks the general model to restate "find the answer" as
"prove such an answer exists", which removes the need to guess the answer
when the statement is later formalized.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .client import ChatClient, ChatRequest, Message
from .errors import NoCodeBlockError
from .problems import Problem
from .templates import PromptTemplate

THINK_CLOSE = "</think>"
VALIDITY_KEYWORDS = ("prove", "exists", "existence")

_FENCED_BLOCK = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class ExistenceProblem:
    """Existence restatement of a QA problem.

    ``flagged`` marks outputs that tripped the heuristic validity gate
    (no prove/exists wording, or text identical to the source statement);
    flagged translations are kept for audit, never dropped.
    """

    text: str
    source_problem_id: str
    flagged: bool = False

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("existence problem text must be non-empty")


def build_translation_prompt(
    problem: Problem,
    template: PromptTemplate,
    *,
    model_id: str = "general",
    temperature: float = 0.6,
    max_new_tokens: int | None = None,
    sample_index: int = 0,
) -> ChatRequest:
    """Few-shot user prompt embedding the QA statement; thinking mode on."""
    template.require("qa_problem")
    body = template.render(qa_problem=problem.statement)
    kwargs = {} if max_new_tokens is None else {"max_new_tokens": max_new_tokens}
    return ChatRequest(
        model_id=model_id,
        messages=(Message("user", body),),
        temperature=temperature,
        thinking_mode=True,
        sample_index=sample_index,
        **kwargs,
    )


def parse_translation(response_text: str) -> str:
    """Contents of the last fenced code block, thinking text stripped first.

    Thinking-mode responses may carry draft blocks inside the think section;
    the answer block always comes after it, so the think section is discarded
    before the last-block rule applies.
    """
    visible = response_text
    if THINK_CLOSE in visible:
        visible = visible.split(THINK_CLOSE, 1)[1]
    blocks = _FENCED_BLOCK.findall(visible)
    if not blocks:
        raise NoCodeBlockError("response contains no fenced code block")
    return blocks[-1].strip("\n")


def translate(
    problem: Problem,
    client: ChatClient,
    template: PromptTemplate,
    *,
    model_id: str = "general",
    temperature: float = 0.6,
    max_new_tokens: int | None = None,
    sample_index: int = 0,
    dataset: str | None = None,
) -> ExistenceProblem:
    request = build_translation_prompt(
        problem,
        template,
        model_id=model_id,
        temperature=temperature,
        max_new_tokens=max_new_tokens,
        sample_index=sample_index,
    )
    response = client.complete(request, stage="translate", dataset=dataset)
    text = parse_translation(response.text)
    lowered = text.lower()
    flagged = (
        not any(keyword in lowered for keyword in VALIDITY_KEYWORDS)
        or text.strip() == problem.statement.strip()
    )
    return ExistenceProblem(text=text, source_problem_id=problem.id, flagged=flagged)

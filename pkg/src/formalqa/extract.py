"""Stage 4: retrieve the implicit answer from the prover's reasoning text.

A general model in non-thinking mode re-reads the question together with the
Long CoT and restates the answer in a ``\\boxed{}`` block for grading.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .client import ChatClient, ChatRequest, Message
from .errors import NoBoxedAnswerError
from .problems import Problem
from .templates import PromptTemplate

_BOXED = "\\boxed{"


class AnswerSource(str, Enum):
    FL_COT = "fl_cot"
    NL_DIRECT = "nl_direct"


@dataclass(frozen=True)
class ExtractedAnswer:
    raw_boxed: str
    full_response: str
    source: AnswerSource

    def __post_init__(self):
        if not self.raw_boxed.strip():
            raise ValueError("raw_boxed must be non-empty")


def build_extraction_prompt(
    problem: Problem,
    cot: str,
    template: PromptTemplate,
    *,
    model_id: str = "general",
    temperature: float = 0.6,
    max_new_tokens: int | None = None,
    sample_index: int = 0,
) -> ChatRequest:
    if not cot.strip():
        raise ValueError("cot must be non-empty")
    template.require("qa_problem", "cot")
    body = template.render(qa_problem=problem.statement, cot=cot)
    kwargs = {} if max_new_tokens is None else {"max_new_tokens": max_new_tokens}
    return ChatRequest(
        model_id=model_id,
        messages=(Message("user", body),),
        temperature=temperature,
        thinking_mode=False,
        sample_index=sample_index,
        **kwargs,
    )


def parse_boxed(text: str) -> str:
    """Contents of the last balanced ``\\boxed{...}``, nested braces allowed.

    Last-box-wins: extraction responses may show intermediate boxed candidates
    while double-checking before the final restatement.
    """
    contents: list[str] = []
    start = text.find(_BOXED)
    while start != -1:
        i = start + len(_BOXED)
        depth = 1
        while i < len(text) and depth:
            if text[i] == "{":
                depth += 1
            elif text[i] == "}":
                depth -= 1
                if depth == 0:
                    contents.append(text[start + len(_BOXED) : i])
                    break
            i += 1
        start = text.find(_BOXED, start + 1)
    if not contents:
        raise NoBoxedAnswerError("no balanced \\boxed{...} in text")
    return contents[-1]


def extract(
    problem: Problem,
    cot: str,
    client: ChatClient,
    template: PromptTemplate,
    *,
    model_id: str = "general",
    temperature: float = 0.6,
    max_new_tokens: int | None = None,
    sample_index: int = 0,
    dataset: str | None = None,
    source: AnswerSource = AnswerSource.FL_COT,
) -> ExtractedAnswer:
    request = build_extraction_prompt(
        problem,
        cot,
        template,
        model_id=model_id,
        temperature=temperature,
        max_new_tokens=max_new_tokens,
        sample_index=sample_index,
    )
    response = client.complete(request, stage="extract", dataset=dataset)
    raw = parse_boxed(response.text)
    if not raw.strip():
        raise NoBoxedAnswerError("boxed answer is empty")
    return ExtractedAnswer(raw_boxed=raw, full_response=response.text, source=source)

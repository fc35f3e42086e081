"""Shared test doubles: a deterministic scripted model backend.

The backend answers each stage prompt as a pure function of the request text,
so recording it once yields a transcript store that replays byte-identically.
"""

from __future__ import annotations

import re

from formalqa.client import ChatRequest, ChatResponse
from formalqa.errors import EndpointUnreachableError

# Per-problem answers the scripted "prover" states in its reasoning, and the
# answers the scripted "general model" gives when asked directly.
COT_ANSWERS = {
    "If 2x + 3 = 11, what is x?": "4",
    "Compute 1/2 + 1/3. Express your answer as a common fraction.": "5/6",
    "A right triangle has legs 3 and 4. What is the length of the hypotenuse?": "6",
    "What is the area of a circle of radius 2, in terms of pi?": "4\\pi",
}
DIRECT_ANSWERS = {
    "If 2x + 3 = 11, what is x?": "4",
    "Compute 1/2 + 1/3. Express your answer as a common fraction.": "1/2",
    "A right triangle has legs 3 and 4. What is the length of the hypotenuse?": "5",
    "What is the area of a circle of radius 2, in terms of pi?": "4\\pi",
    "What is the remainder when 2^10 is divided by 7?": "2",
}

_LAST_QA_BLOCK = re.compile(r"@ Question-answering problem:\n```md\n(.*?)\n```", re.DOTALL)
_PROBLEM_LINE = re.compile(r"# Problem: (.*)")
_THEOREM_NAME = re.compile(r"theorem names: (\S+)")
_QUESTION = re.compile(r"Here is the question:\n(.*?)\n", re.DOTALL)
_STATED_ANSWER = re.compile(r"The final answer is (.+?)\.\n")


class ScriptedBackend:
    """Deterministic stand-in for a live endpoint."""

    name = "live"

    def __init__(self, cot_answers=None, direct_answers=None, fail_stages=()):
        self.cot_answers = COT_ANSWERS if cot_answers is None else cot_answers
        self.direct_answers = DIRECT_ANSWERS if direct_answers is None else direct_answers
        self.fail_stages = set(fail_stages)
        self.calls = 0

    def complete(self, request: ChatRequest) -> ChatResponse:
        self.calls += 1
        user = request.messages[-1].content
        text = self._respond(user)
        return ChatResponse(
            text=text,
            prompt_tokens=len(user) // 4,
            completion_tokens=len(text) // 4 + 1,
            backend="live",
        )

    def _respond(self, user: str) -> str:
        if "Based on the above examples" in user:
            if "translate" in self.fail_stages:
                return "I would rather not translate this one."
            qa = _LAST_QA_BLOCK.findall(user)[-1]
            return (
                "<think>\nRestating the task as an existence claim.\n</think>\n\n"
                f"```md\nKeep the given conditions. Prove that there exists an answer to: {qa}\n```"
            )
        if "combine the following theorems" in user:
            if "formalize" in self.fail_stages:
                return "Sorry, no Lean today."
            name = _THEOREM_NAME.search(user).group(1)
            return f"```lean4\ntheorem {name} : ∃ x : ℝ, x = x := by sorry\n```"
        if "step by step in Lean 4" in user:
            if "prove" in self.fail_stages:
                raise EndpointUnreachableError("scripted prover outage")
            qa = _PROBLEM_LINE.search(user).group(1)
            answer = self.cot_answers.get(qa)
            stated = "unclear" if answer is None else answer
            return (
                f"<think>\nWorking through the question. The final answer is {stated}.\n"
                "# Now the Lean part.\n</think>\n"
                "```lean4\ntheorem scripted : True := by trivial\n```"
            )
        if "Find the answer to the following question" in user:
            match = _STATED_ANSWER.search(user)
            if match is None or match.group(1) == "unclear":
                return "<think>\n\n</think>\n\nThe content does not state a final answer."
            return f"<think>\n\n</think>\n\nThe answer is $\\boxed{{{match.group(1)}}}$."
        if "final answer within" in user:
            question = user.split("\n", 1)[0]
            answer = self.direct_answers.get(question)
            if answer is None:
                return "<think>\nStuck.\n</think>\nI am not sure."
            return f"<think>\nDirect computation.\n</think>\nThe final answer is $\\boxed{{{answer}}}$."
        raise AssertionError(f"scripted backend got an unrecognized prompt: {user[:80]}...")

"""Benchmark problem sets: loading, validation, and subject partitioning.

On-disk format is JSON Lines, one record per line, UTF-8, with fields
``{id, dataset, subject, problem, answer}``. Gold answers are kept verbatim;
normalization happens at grading time so the raw data stays auditable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import DatasetError, DuplicateIdError, EmptyFileError, MissingFieldError


class Dataset(str, Enum):
    MATH500 = "math500"
    AMC = "amc"
    CUSTOM = "custom"


UNLABELED = "unlabeled"

_REQUIRED_FIELDS = ("id", "dataset", "problem", "answer")


@dataclass(frozen=True)
class Problem:
    """One benchmark item: a QA statement plus its gold answer."""

    id: str
    dataset: Dataset
    statement: str
    gold_answer: str
    subject: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("problem id must be non-empty")
        if not self.statement.strip():
            raise ValueError(f"problem {self.id}: statement must be non-empty")
        if not self.gold_answer.strip():
            raise ValueError(f"problem {self.id}: gold answer must be non-empty")


@dataclass(frozen=True)
class ProblemSet:
    name: str
    problems: tuple[Problem, ...]

    def __post_init__(self):
        if not self.problems:
            raise ValueError(f"problem set {self.name!r} is empty")

    def __len__(self) -> int:
        return len(self.problems)

    def __iter__(self):
        return iter(self.problems)

    def by_id(self, problem_id: str) -> Problem:
        for problem in self.problems:
            if problem.id == problem_id:
                return problem
        raise KeyError(problem_id)


def _parse_dataset(value, line: int) -> Dataset:
    try:
        return Dataset(str(value).lower())
    except ValueError:
        raise DatasetError(
            f"line {line}: unknown dataset {value!r} (expected one of "
            f"{[d.value for d in Dataset]})",
            line=line,
        ) from None


def load_problem_set(path: str | Path, format: str = "jsonl") -> ProblemSet:
    """Load and validate a problem set, preserving file order.

    Raises :class:`MissingFieldError`, :class:`DuplicateIdError`, or
    :class:`EmptyFileError`; each message names the offending line number.
    """
    if format != "jsonl":
        raise DatasetError(f"unsupported format {format!r}")
    path = Path(path)
    problems: list[Problem] = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as handle:
        for lineno, raw_line in enumerate(handle, start=1):
            line = raw_line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: invalid JSON ({exc.msg})", line=lineno) from None
            if not isinstance(record, dict):
                raise DatasetError(f"line {lineno}: record is not a JSON object", line=lineno)
            missing = [f for f in _REQUIRED_FIELDS if f not in record or record[f] in (None, "")]
            if missing:
                raise MissingFieldError(
                    f"line {lineno}: missing required field(s) {missing}", line=lineno
                )
            problem_id = str(record["id"])
            if problem_id in seen:
                raise DuplicateIdError(
                    f"line {lineno}: duplicate id {problem_id!r} (first seen on line "
                    f"{seen[problem_id]})",
                    line=lineno,
                )
            seen[problem_id] = lineno
            subject = record.get("subject")
            problems.append(
                Problem(
                    id=problem_id,
                    dataset=_parse_dataset(record["dataset"], lineno),
                    statement=str(record["problem"]),
                    gold_answer=str(record["answer"]),
                    subject=str(subject) if subject else None,
                )
            )
    if not problems:
        raise EmptyFileError(f"line 0: {path} contains no records", line=0)
    return ProblemSet(name=path.stem, problems=tuple(problems))


def dump_problem_set(problem_set: ProblemSet, path: str | Path) -> None:
    """Serialize back to JSONL; ``load -> dump -> load`` round-trips."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for problem in problem_set:
            record = {
                "id": problem.id,
                "dataset": problem.dataset.value,
                "subject": problem.subject,
                "problem": problem.statement,
                "answer": problem.gold_answer,
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def partition_by_subject(problem_set: ProblemSet) -> dict[str, list[Problem]]:
    """Bucket problems by subject; problems with no subject go to "unlabeled".

    Every problem lands in exactly one bucket, so bucket sizes sum to the set
    size. Bucket order follows first appearance in the set.
    """
    buckets: dict[str, list[Problem]] = {}
    for problem in problem_set:
        key = problem.subject if problem.subject else UNLABELED
        buckets.setdefault(key, []).append(problem)
    return buckets

"""Formal-language-assisted math QA pipeline.

Translates QA problems into existence statements, formalizes them in Lean4,
drives a prover with a mixed natural/formal prompt, extracts the boxed answer
from the reasoning text, and grades pass@k over replayable transcripts.
"""

__version__ = "0.1.0"

from .client import (
    ChatClient,
    ChatRequest,
    ChatResponse,
    LiveBackend,
    Message,
    ReplayBackend,
    TokenLedger,
    ledger_average,
    request_digest,
)
from .extract import AnswerSource, ExtractedAnswer, build_extraction_prompt, extract, parse_boxed
from .formalize import (
    CompileStatus,
    FormalStatement,
    build_formalization_prompt,
    make_theorem_name,
    parse_formal_statement,
    statement_body,
)
from .grading import CanonicalAnswer, Kind, equivalent, grade_sample, normalize, render
from .leancheck import LeanVerifier, VerifyResult, VerifyStatus, verify
from .metrics import (
    Mode,
    RunReport,
    VerdictMatrix,
    ablation_label,
    accuracy,
    pass_at_k,
    subject_report,
    unique_capability_study,
    unique_capability_subset,
)
from .pipeline import PipelineSample, Route, RunConfig, choose_route, run_benchmark, run_sample
from .problems import Dataset, Problem, ProblemSet, dump_problem_set, load_problem_set, partition_by_subject
from .prove import ProverOutput, ProverRequest, build_prover_prompt, parse_prover_output
from .templates import PromptTemplate, default_template, load_template
from .translate import ExistenceProblem, build_translation_prompt, parse_translation, translate

"""End-to-end orchestration: routing, staging, persistence, and resume.

Problems x samples form independent work units; within one sample the stages
run strictly in order. Every sample persists its artifacts under
``<run_dir>/samples/<pid>/<idx>/`` with write-then-rename, and ``stage4.json``
doubles as the completion marker: a resumed run skips any (problem, sample)
pair whose marker exists and recomputes nothing else.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import random
import re
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from . import __version__
from .client import (
    ChatClient,
    ChatRequest,
    ChatResponse,
    LiveBackend,
    Message,
    ReplayBackend,
    TokenLedger,
    atomic_write_text,
)
from .errors import ConfigError, FormalQAError, MissingRowError, NoBoxedAnswerError
from .extract import AnswerSource, ExtractedAnswer, build_extraction_prompt, parse_boxed
from .formalize import (
    CompileStatus,
    FormalStatement,
    build_formalization_prompt,
    make_theorem_name,
    parse_formal_statement,
)
from .grading import grade_sample
from .leancheck import LeanVerifier, VerifyStatus
from .metrics import (
    Mode,
    RunReport,
    VerdictMatrix,
    build_report,
    render_report_text,
    report_to_dict,
    write_verdicts,
)
from .problems import Problem, load_problem_set
from .prove import ProverOutput, ProverRequest, build_prover_prompt, parse_prover_output
from .templates import PromptTemplate, default_template, template_from_dir
from .translate import (
    VALIDITY_KEYWORDS,
    ExistenceProblem,
    build_translation_prompt,
    parse_translation,
)

STAGE_TEMPERATURES = {
    "translate": 0.6,
    "formalize": 0.6,
    "prove": 0.7,
    "extract": 0.6,
    "direct": 0.7,
}
DEFAULT_MODELS = {"general": "general", "autoformalizer": "autoformalizer", "prover": "prover"}
_TEMPLATE_NAMES = ("translate", "formalize", "prove", "extract", "direct")
# Fields that define what a run computes; paths and plumbing stay out so the
# digest survives relocation of the run directory.
_DIGEST_FIELDS = (
    "method",
    "k",
    "seed",
    "drop_rate",
    "max_new_tokens",
    "temperatures",
    "models",
    "verify_lean",
    "compile_filter",
    "degree_radian_coercion",
)


class Route(str, Enum):
    FL_PIPELINE = "fl_pipeline"
    NL_DIRECT = "nl_direct"


def choose_route(problem_id: str, sample_index: int, seed: int, drop_rate: float) -> Route:
    """Drop-policy coin flip, seeded from (seed, problem, sample) so the
    assignment is deterministic and independent of execution order."""
    rng = random.Random(f"{seed}/{problem_id}/{sample_index}")
    return Route.NL_DIRECT if rng.random() < drop_rate else Route.FL_PIPELINE


@dataclass
class RunConfig:
    dataset_path: str
    run_dir: str
    method: Mode = Mode.FULL
    k: int = 16
    seed: int = 0
    drop_rate: float = 0.25
    max_new_tokens: int = 8192
    temperatures: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)
    backend: str = "replay"  # replay | live
    transcripts_dir: str | None = None
    record_dir: str | None = None
    endpoint_url: str | None = None
    api_key_env: str = "FORMALQA_API_KEY"
    thinking_style: str = "chat_template_kwargs"
    verify_lean: bool = False
    compile_filter: bool = False
    degree_radian_coercion: bool = False
    workers: int = 1
    max_in_flight: int = 8
    templates_dir: str | None = None
    lean_workspace: str | None = None

    def __post_init__(self):
        self.method = Mode(self.method)
        self.temperatures = {**STAGE_TEMPERATURES, **self.temperatures}
        self.models = {**DEFAULT_MODELS, **self.models}

    def validate(self) -> None:
        if not 0.0 <= self.drop_rate <= 1.0:
            raise ConfigError(f"drop_rate {self.drop_rate} outside [0, 1]")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.backend not in ("replay", "live"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.backend == "replay" and not self.transcripts_dir:
            raise ConfigError("replay backend requires transcripts_dir")
        if self.backend == "live" and not self.endpoint_url:
            raise ConfigError("live backend requires endpoint_url")
        if not Path(self.dataset_path).exists():
            raise ConfigError(f"dataset not found: {self.dataset_path}")
        needed = {"general"}
        if self.method in (Mode.FULL, Mode.NO_EXISTENCE_ALIGNMENT, Mode.NO_EXPERT_PROVER):
            needed.add("autoformalizer")
        if self.method in (Mode.FULL, Mode.NO_EXISTENCE_ALIGNMENT):
            needed.add("prover")
        missing = sorted(role for role in needed if not self.models.get(role))
        if missing:
            raise ConfigError(f"mode {self.method.value} requires model roles {missing}")

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["method"] = self.method.value
        return data

    def digest(self) -> str:
        data = self.to_dict()
        semantic = {name: data[name] for name in _DIGEST_FIELDS}
        semantic["dataset"] = Path(self.dataset_path).name
        canonical = json.dumps(semantic, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_overrides(self, **overrides) -> "RunConfig":
        clean = {key: value for key, value in overrides.items() if value is not None}
        return dataclasses.replace(self, **clean)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        data.pop("digest", None)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        return cls(**data)


@dataclass
class PipelineSample:
    """Everything one (problem, sample_index) attempt produced."""

    problem_id: str
    sample_index: int
    route: Route
    existence: ExistenceProblem | None = None
    formal: FormalStatement | None = None
    prover_output: ProverOutput | None = None
    extracted: ExtractedAnswer | None = None
    verdict: bool | None = None
    failure_stage: str | None = None
    rerouted: bool = False
    tokens: dict[str, int] = field(default_factory=dict)
    from_cache: bool = False


class _StageFailure(Exception):
    """Hard failure in an FL stage; triggers the forced nl_direct fallback."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


def _safe_path_component(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", name)


def fl_reasoning_segment(cot: str) -> str:
    """The reasoning text from the first fenced code block onward.

    Used by the no-alignment ablation, where only the formal-reasoning part of
    the chain of thought feeds answer extraction. Falls back to the whole text
    when no fence exists.
    """
    idx = cot.find("```")
    return cot[idx:] if idx != -1 else cot


class PipelineRunner:
    def __init__(self, config: RunConfig, backend=None):
        config.validate()
        self.config = config
        self.run_dir = Path(config.run_dir)
        self.problem_set = load_problem_set(config.dataset_path)
        self.dataset_label = self.problem_set.name
        self.ledger = TokenLedger()
        self.client = ChatClient(
            backend if backend is not None else self._build_backend(),
            ledger=self.ledger,
            record_dir=config.record_dir,
            max_in_flight=config.max_in_flight,
            max_tokens_ceiling=config.max_new_tokens,
        )
        self.templates = {name: self._load_template(name) for name in _TEMPLATE_NAMES}
        self.verifier = (
            LeanVerifier(workspace=config.lean_workspace)
            if (config.verify_lean or config.compile_filter)
            else None
        )

    def _build_backend(self):
        if self.config.backend == "replay":
            return ReplayBackend(self.config.transcripts_dir)
        return LiveBackend(
            self.config.endpoint_url,
            api_key_env=self.config.api_key_env,
            thinking_style=self.config.thinking_style,
        )

    def _load_template(self, name: str) -> PromptTemplate:
        if self.config.templates_dir:
            return template_from_dir(self.config.templates_dir, name)
        return default_template(name)

    def _call(self, request: ChatRequest, stage: str, sample: PipelineSample) -> ChatResponse:
        method = self.config.method.value
        response = self.client.complete(
            request, stage=f"{method}:{stage}", dataset=self.dataset_label
        )
        self.ledger.record(method, self.dataset_label, response.completion_tokens)
        sample.tokens[stage] = sample.tokens.get(stage, 0) + response.completion_tokens
        return response

    # ---- single sample ----------------------------------------------------

    def sample_dir(self, problem_id: str, sample_index: int) -> Path:
        return self.run_dir / "samples" / _safe_path_component(problem_id) / str(sample_index)

    def run_sample(self, problem: Problem, sample_index: int) -> PipelineSample:
        directory = self.sample_dir(problem.id, sample_index)
        marker = directory / "stage4.json"
        if marker.exists():
            return self._load_cached(marker, expected_id=problem.id)

        mode = self.config.method
        if mode is Mode.NL_BASELINE:
            route = Route.NL_DIRECT
        elif mode is Mode.NL_EXISTENCE_ONLY:
            # keeps its stage-1 artifact, so it is not an nl_direct sample
            route = Route.FL_PIPELINE
        else:
            route = choose_route(problem.id, sample_index, self.config.seed, self.config.drop_rate)

        sample = PipelineSample(problem.id, sample_index, route)
        if route is Route.FL_PIPELINE:
            try:
                self._run_fl(problem, sample_index, sample, directory)
            except _StageFailure as failure:
                sample.failure_stage = failure.stage
                sample.rerouted = True
                sample.route = Route.NL_DIRECT
                sample.existence = None
                sample.formal = None
                sample.prover_output = None
                sample.extracted = None
        if sample.route is Route.NL_DIRECT and sample.verdict is None:
            self._run_direct(problem, sample_index, sample)
        if sample.verdict is None:
            sample.verdict = False
        self._persist(sample, directory)
        return sample

    def _run_fl(
        self, problem: Problem, idx: int, sample: PipelineSample, directory: Path
    ) -> None:
        mode = self.config.method
        temps = self.config.temperatures
        general = self.config.models["general"]

        if mode is Mode.NO_EXISTENCE_ALIGNMENT:
            # the autoformalizer receives the raw QA statement
            existence = ExistenceProblem(
                text=problem.statement, source_problem_id=problem.id, flagged=True
            )
        else:
            try:
                request = build_translation_prompt(
                    problem,
                    self.templates["translate"],
                    model_id=general,
                    temperature=temps["translate"],
                    max_new_tokens=self.config.max_new_tokens,
                    sample_index=idx,
                )
                response = self._call(request, "translate", sample)
                text = parse_translation(response.text)
            except FormalQAError as exc:
                raise _StageFailure("translate", exc) from exc
            lowered = text.lower()
            flagged = (
                not any(keyword in lowered for keyword in VALIDITY_KEYWORDS)
                or text.strip() == problem.statement.strip()
            )
            existence = ExistenceProblem(
                text=text, source_problem_id=problem.id, flagged=flagged
            )
            sample.existence = existence
            atomic_write_text(directory / "stage1.md", existence.text + "\n")

        if mode is Mode.NL_EXISTENCE_ONLY:
            self._run_existence_only(problem, idx, sample, existence, directory)
            return

        theorem_name = make_theorem_name(problem, idx)
        try:
            request = build_formalization_prompt(
                existence,
                theorem_name,
                self.templates["formalize"],
                model_id=self.config.models["autoformalizer"],
                temperature=temps["formalize"],
                max_new_tokens=self.config.max_new_tokens,
                sample_index=idx,
            )
            response = self._call(request, "formalize", sample)
            statement = parse_formal_statement(
                response.text, theorem_name, source_problem_id=problem.id
            )
        except FormalQAError as exc:
            raise _StageFailure("formalize", exc) from exc
        if self.config.compile_filter and self.verifier is not None:
            statement = dataclasses.replace(
                statement, compile_status=self._compile_status(statement.lean_source)
            )
        sample.formal = statement
        atomic_write_text(directory / "stage2.lean", statement.lean_source + "\n")
        atomic_write_text(
            directory / "stage2.json",
            json.dumps(
                {
                    "theorem_name": statement.theorem_name,
                    "compile_status": statement.compile_status.value,
                    "existence_flagged": existence.flagged,
                },
                indent=2,
                sort_keys=True,
            ),
        )
        if statement.compile_status is CompileStatus.INVALID:
            raise _StageFailure(
                "formalize", ConfigError("statement rejected by compile filter")
            )

        prover_model = (
            general if mode is Mode.NO_EXPERT_PROVER else self.config.models["prover"]
        )
        try:
            request = build_prover_prompt(
                ProverRequest(nl_problem=problem.statement, formal_statement=statement),
                self.templates["prove"],
                model_id=prover_model,
                temperature=temps["prove"],
                max_new_tokens=self.config.max_new_tokens,
                sample_index=idx,
            )
            response = self._call(request, "prove", sample)
        except FormalQAError as exc:
            raise _StageFailure("prove", exc) from exc
        output = parse_prover_output(response.text)
        if response.truncated and not output.truncated:
            output = dataclasses.replace(output, truncated=True)
        sample.prover_output = output
        atomic_write_text(directory / "stage3.md", output.cot)
        if output.lean_proof is not None:
            atomic_write_text(directory / "stage3.lean", output.lean_proof + "\n")
        atomic_write_text(
            directory / "stage3.json",
            json.dumps(
                {
                    "delimited": output.delimited,
                    "truncated": output.truncated,
                    "has_proof": output.lean_proof is not None,
                    "proof_has_sorry": output.proof_has_sorry,
                },
                indent=2,
                sort_keys=True,
            ),
        )
        cot = output.cot
        if mode is Mode.NO_EXISTENCE_ALIGNMENT:
            cot = fl_reasoning_segment(cot)
        if not cot.strip():
            raise _StageFailure("prove", NoBoxedAnswerError("prover produced no reasoning text"))
        self._run_extraction(problem, idx, sample, cot)

    def _run_existence_only(
        self,
        problem: Problem,
        idx: int,
        sample: PipelineSample,
        existence: ExistenceProblem,
        directory: Path,
    ) -> None:
        """Answer the existence restatement with the general model, no FL."""
        try:
            body = self.templates["direct"].render(qa_problem=existence.text)
            request = ChatRequest(
                model_id=self.config.models["general"],
                messages=(Message("user", body),),
                temperature=self.config.temperatures["direct"],
                thinking_mode=True,
                max_new_tokens=self.config.max_new_tokens,
                sample_index=idx,
            )
            response = self._call(request, "existence_answer", sample)
        except FormalQAError:
            sample.verdict = False
            sample.failure_stage = "existence_answer"
            return
        atomic_write_text(directory / "existence_answer.md", response.text)
        if not response.text.strip():
            sample.verdict = False
            sample.failure_stage = "existence_answer"
            return
        self._run_extraction(problem, idx, sample, response.text)

    def _run_extraction(
        self, problem: Problem, idx: int, sample: PipelineSample, cot: str
    ) -> None:
        try:
            request = build_extraction_prompt(
                problem,
                cot,
                self.templates["extract"],
                model_id=self.config.models["general"],
                temperature=self.config.temperatures["extract"],
                max_new_tokens=self.config.max_new_tokens,
                sample_index=idx,
            )
            response = self._call(request, "extract", sample)
            raw = parse_boxed(response.text)
            if not raw.strip():
                raise NoBoxedAnswerError("boxed answer is empty")
            sample.extracted = ExtractedAnswer(
                raw_boxed=raw, full_response=response.text, source=AnswerSource.FL_COT
            )
            sample.verdict = grade_sample(
                sample.extracted,
                problem.gold_answer,
                degree_radian_coercion=self.config.degree_radian_coercion,
            )
        except FormalQAError:
            # a missing boxed answer marks the sample incorrect, not fatal
            sample.verdict = False
            sample.failure_stage = "extract"

    def _run_direct(self, problem: Problem, idx: int, sample: PipelineSample) -> None:
        try:
            body = self.templates["direct"].render(qa_problem=problem.statement)
            request = ChatRequest(
                model_id=self.config.models["general"],
                messages=(Message("user", body),),
                temperature=self.config.temperatures["direct"],
                thinking_mode=True,
                max_new_tokens=self.config.max_new_tokens,
                sample_index=idx,
            )
            response = self._call(request, "nl_direct", sample)
            raw = parse_boxed(response.text)
            if not raw.strip():
                raise NoBoxedAnswerError("boxed answer is empty")
            sample.extracted = ExtractedAnswer(
                raw_boxed=raw, full_response=response.text, source=AnswerSource.NL_DIRECT
            )
            sample.verdict = grade_sample(
                sample.extracted,
                problem.gold_answer,
                degree_radian_coercion=self.config.degree_radian_coercion,
            )
        except FormalQAError:
            sample.verdict = False
            if sample.failure_stage is None:
                sample.failure_stage = "nl_direct"

    def _compile_status(self, lean_source: str) -> CompileStatus:
        result = self.verifier.verify(lean_source)
        if result.status is VerifyStatus.COMPILE_ERROR:
            return CompileStatus.INVALID
        if result.status in (VerifyStatus.PROVED, VerifyStatus.VALID_STATEMENT_WITH_SORRY):
            return CompileStatus.VALID_WITH_SORRY
        return CompileStatus.UNCHECKED

    def _persist(self, sample: PipelineSample, directory: Path) -> None:
        record = {
            "problem_id": sample.problem_id,
            "sample_index": sample.sample_index,
            "route": sample.route.value,
            "rerouted": sample.rerouted,
            "verdict": sample.verdict,
            "failure_stage": sample.failure_stage,
            "source": sample.extracted.source.value if sample.extracted else None,
            "raw_boxed": sample.extracted.raw_boxed if sample.extracted else None,
            "full_response": sample.extracted.full_response if sample.extracted else None,
            "tokens": sample.tokens,
        }
        atomic_write_text(
            directory / "stage4.json", json.dumps(record, indent=2, sort_keys=True) + "\n"
        )

    def _load_cached(self, marker: Path, expected_id: str) -> PipelineSample:
        record = json.loads(marker.read_text(encoding="utf-8"))
        if record["problem_id"] != expected_id:
            # two ids sanitized to the same directory name
            raise ConfigError(
                f"sample directory {marker.parent} holds problem "
                f"{record['problem_id']!r}, expected {expected_id!r}"
            )
        sample = PipelineSample(
            problem_id=record["problem_id"],
            sample_index=record["sample_index"],
            route=Route(record["route"]),
            verdict=record["verdict"],
            failure_stage=record.get("failure_stage"),
            rerouted=bool(record.get("rerouted", False)),
            tokens=dict(record.get("tokens", {})),
            from_cache=True,
        )
        if record.get("raw_boxed"):
            sample.extracted = ExtractedAnswer(
                raw_boxed=record["raw_boxed"],
                full_response=record.get("full_response") or "",
                source=AnswerSource(record["source"]),
            )
        method = self.config.method.value
        for stage, count in sample.tokens.items():
            self.ledger.record(f"{method}:{stage}", self.dataset_label, count)
            self.ledger.record(method, self.dataset_label, count)
        return sample

    # ---- whole benchmark --------------------------------------------------

    def run(self, on_sample=None) -> RunReport:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._write_config()
        work = [(problem, index) for problem in self.problem_set for index in range(self.config.k)]
        samples: dict[tuple[str, int], PipelineSample] = {}
        if self.config.workers == 1:
            for problem, index in work:
                sample = self.run_sample(problem, index)
                samples[(problem.id, index)] = sample
                if on_sample is not None:
                    on_sample(sample)
        else:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                futures = {
                    pool.submit(self.run_sample, problem, index): (problem.id, index)
                    for problem, index in work
                }
                try:
                    for future in as_completed(futures):
                        sample = future.result()
                        samples[futures[future]] = sample
                        if on_sample is not None:
                            on_sample(sample)
                except BaseException:
                    # abandon queued samples; in-flight ones finish and persist
                    pool.shutdown(wait=False, cancel_futures=True)
                    raise
        matrix = VerdictMatrix(
            {
                problem.id: [samples[(problem.id, index)].verdict for index in range(self.config.k)]
                for problem in self.problem_set
            }
        )
        report = self._build_report(matrix, samples)
        self._write_outputs(matrix, report)
        return report

    def _build_report(self, matrix: VerdictMatrix, samples: dict) -> RunReport:
        pins = {"formalqa": __version__, "lean_toolchain": None}
        if self.verifier is not None:
            pins["lean_toolchain"] = self.verifier.toolchain_pin()
        report = build_report(
            matrix,
            self.problem_set,
            self.config.k,
            self.config.method.value,
            ledger=self.ledger,
            config_digest=self.config.digest(),
            pins=pins,
        )
        report.routes = {
            "fl_pipeline": sum(1 for s in samples.values() if s.route is Route.FL_PIPELINE),
            "nl_direct": sum(1 for s in samples.values() if s.route is Route.NL_DIRECT),
            "rerouted": sum(1 for s in samples.values() if s.rerouted),
        }
        return report

    def _write_config(self) -> None:
        path = self.run_dir / "config.json"
        payload = self.config.to_dict()
        payload["digest"] = self.config.digest()
        if path.exists():
            existing = json.loads(path.read_text(encoding="utf-8"))
            if existing.get("digest") != payload["digest"]:
                raise ConfigError(
                    "run directory was created with a different configuration; "
                    "refusing to resume"
                )
            return
        atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def _write_outputs(self, matrix: VerdictMatrix, report: RunReport) -> None:
        write_verdicts(self.run_dir / "verdicts.jsonl", matrix)
        atomic_write_text(
            self.run_dir / "report.json",
            json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n",
        )
        atomic_write_text(self.run_dir / "report.txt", render_report_text(report))


def run_benchmark(config: RunConfig, on_sample=None, backend=None) -> RunReport:
    """Run k samples of every problem and emit verdicts plus reports."""
    return PipelineRunner(config, backend=backend).run(on_sample=on_sample)


def run_sample(problem: Problem, sample_index: int, config: RunConfig, backend=None) -> PipelineSample:
    """Run a single (problem, sample) attempt under a config."""
    return PipelineRunner(config, backend=backend).run_sample(problem, sample_index)


# ---- re-aggregation over persisted artifacts -------------------------------


def load_run_config(run_dir: str | Path) -> RunConfig:
    return RunConfig.from_file(Path(run_dir) / "config.json")


def iter_sample_records(run_dir: str | Path):
    """Yield (path, record) for every persisted stage4.json under a run."""
    samples_root = Path(run_dir) / "samples"
    if not samples_root.is_dir():
        return
    for marker in sorted(samples_root.glob("*/*/stage4.json")):
        yield marker, json.loads(marker.read_text(encoding="utf-8"))


def reaggregate(run_dir: str | Path, regrade: bool = False) -> RunReport:
    """Rebuild the verdict matrix and reports from persisted sample records.

    With ``regrade=True`` each record's boxed answer is re-judged against the
    gold answer first and the record rewritten when the verdict changed.
    """
    run_dir = Path(run_dir)
    config = load_run_config(run_dir)
    problem_set = load_problem_set(config.dataset_path)
    ledger = TokenLedger()
    records: dict[tuple[str, int], dict] = {}
    for marker, record in iter_sample_records(run_dir):
        if regrade:
            problem = problem_set.by_id(record["problem_id"])
            verdict = bool(record.get("raw_boxed")) and grade_sample(
                record["raw_boxed"],
                problem.gold_answer,
                degree_radian_coercion=config.degree_radian_coercion,
            )
            if verdict != record["verdict"]:
                record["verdict"] = verdict
                atomic_write_text(marker, json.dumps(record, indent=2, sort_keys=True) + "\n")
        records[(record["problem_id"], record["sample_index"])] = record
        for stage, count in record.get("tokens", {}).items():
            ledger.record(f"{config.method.value}:{stage}", problem_set.name, count)
            ledger.record(config.method.value, problem_set.name, count)
    rows: dict[str, list[bool]] = {}
    for problem in problem_set:
        row = []
        for index in range(config.k):
            record = records.get((problem.id, index))
            if record is None:
                raise MissingRowError(
                    f"no persisted sample for problem {problem.id!r} index {index}"
                )
            row.append(bool(record["verdict"]))
        rows[problem.id] = row
    matrix = VerdictMatrix(rows)
    report = build_report(
        matrix,
        problem_set,
        config.k,
        config.method.value,
        ledger=ledger,
        config_digest=config.digest(),
        pins={"formalqa": __version__, "lean_toolchain": None},
    )
    report.routes = {
        "fl_pipeline": sum(
            1 for r in records.values() if r["route"] == Route.FL_PIPELINE.value
        ),
        "nl_direct": sum(1 for r in records.values() if r["route"] == Route.NL_DIRECT.value),
        "rerouted": sum(1 for r in records.values() if r.get("rerouted")),
    }
    write_verdicts(run_dir / "verdicts.jsonl", matrix)
    atomic_write_text(
        run_dir / "report.json",
        json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n",
    )
    atomic_write_text(run_dir / "report.txt", render_report_text(report))
    return report

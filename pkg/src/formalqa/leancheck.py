"""Optional verification of Lean4 statements and proofs via an external toolchain.

Verification never gates grading: accuracy is answer-match, and proof status
is reported as a separate column. A pre-built Lean project workspace (with the
mathematics library already fetched and compiled) must be supplied, either as
an argument or through the ``FORMALQA_LEAN_WORKSPACE`` environment variable;
without one every call reports ``toolchain_missing``.

Each check compiles one source in its own temp module inside the workspace,
so concurrent checks cannot contaminate each other. Sources pin heartbeats to
unbounded, so the wall-clock timeout here is the only stop.
"""

from __future__ import annotations

import os
import re
import shutil
import subprocess
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

WORKSPACE_ENV = "FORMALQA_LEAN_WORKSPACE"
DEFAULT_TIMEOUT = 300.0
GRACE_SECONDS = 10.0

_SORRY = re.compile(r"\bsorry\b")


class VerifyStatus(str, Enum):
    PROVED = "proved"
    VALID_STATEMENT_WITH_SORRY = "valid_statement_with_sorry"
    COMPILE_ERROR = "compile_error"
    TIMEOUT = "timeout"
    TOOLCHAIN_MISSING = "toolchain_missing"


@dataclass(frozen=True)
class VerifyResult:
    status: VerifyStatus
    diagnostics: str
    wall_time: float

    def __post_init__(self):
        if self.status is VerifyStatus.COMPILE_ERROR and not self.diagnostics.strip():
            raise ValueError("compile_error requires non-empty diagnostics")


class LeanVerifier:
    def __init__(
        self,
        workspace: str | Path | None = None,
        lake_exe: str = "lake",
        timeout: float = DEFAULT_TIMEOUT,
        grace: float = GRACE_SECONDS,
    ):
        env_workspace = os.environ.get(WORKSPACE_ENV)
        self.workspace = Path(workspace or env_workspace) if (workspace or env_workspace) else None
        self.lake_exe = lake_exe
        self.timeout = timeout
        self.grace = grace

    def available(self) -> bool:
        return (
            self.workspace is not None
            and self.workspace.is_dir()
            and shutil.which(self.lake_exe) is not None
        )

    def toolchain_pin(self) -> str | None:
        """Contents of the workspace's lean-toolchain file, for report pins."""
        if self.workspace is None:
            return None
        pin = self.workspace / "lean-toolchain"
        return pin.read_text(encoding="utf-8").strip() if pin.exists() else None

    def verify(self, lean_source: str, timeout: float | None = None) -> VerifyResult:
        """Compile one source in isolation and classify the outcome.

        Clean compile with a ``sorry`` is a valid statement; without one, a
        completed proof. The call never blocks past ``timeout + grace``.
        """
        if not self.available():
            return VerifyResult(
                status=VerifyStatus.TOOLCHAIN_MISSING,
                diagnostics="no Lean workspace configured or lake executable not found",
                wall_time=0.0,
            )
        limit = self.timeout if timeout is None else timeout
        scratch = self.workspace / ".formalqa_checks"
        scratch.mkdir(exist_ok=True)
        module = scratch / f"Check_{uuid.uuid4().hex}.lean"
        module.write_text(lean_source, encoding="utf-8")
        started = time.monotonic()
        try:
            process = subprocess.Popen(
                [self.lake_exe, "env", "lean", str(module)],
                cwd=self.workspace,
                stdout=subprocess.PIPE,
                stderr=subprocess.STDOUT,
                text=True,
            )
            try:
                output, _ = process.communicate(timeout=limit)
            except subprocess.TimeoutExpired:
                process.kill()
                try:
                    process.communicate(timeout=self.grace)
                except subprocess.TimeoutExpired:
                    pass
                return VerifyResult(
                    status=VerifyStatus.TIMEOUT,
                    diagnostics=f"exceeded {limit}s wall-clock limit",
                    wall_time=time.monotonic() - started,
                )
            wall = time.monotonic() - started
            if process.returncode != 0:
                return VerifyResult(
                    status=VerifyStatus.COMPILE_ERROR,
                    diagnostics=output.strip() or f"exit code {process.returncode}",
                    wall_time=wall,
                )
            status = (
                VerifyStatus.VALID_STATEMENT_WITH_SORRY
                if _SORRY.search(lean_source)
                else VerifyStatus.PROVED
            )
            return VerifyResult(status=status, diagnostics=output, wall_time=wall)
        finally:
            module.unlink(missing_ok=True)

    def verify_batch(
        self, sources: list[str], workers: int = 4, timeout: float | None = None
    ) -> list[VerifyResult]:
        """Verify many sources on a bounded worker pool; order preserved."""
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            return list(pool.map(lambda src: self.verify(src, timeout=timeout), sources))


def verify(lean_source: str, timeout: float = DEFAULT_TIMEOUT, **kwargs) -> VerifyResult:
    """One-shot convenience wrapper around :class:`LeanVerifier`."""
    return LeanVerifier(timeout=timeout, **kwargs).verify(lean_source)

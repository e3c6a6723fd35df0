"""Verifier invocation and diagnostic parsing.

VerusRunner wraps the external toolchain binary; ScriptedVerifier replays
canned results for offline tests.  Diagnostics are categorized by an
ordered keyword rule table shipped as a data file, first match wins, so
the mapping can be tuned without touching code.
"""

from __future__ import annotations

import enum
import json
import re
import subprocess
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path


class ErrorCategory(str, enum.Enum):
    TYPE_MISMATCH = "TypeMismatch"
    DECREASES_MISSING = "DecreasesMissing"
    LOOP_INVARIANT = "LoopInvariant"
    ARITHMETIC_OVERFLOW = "ArithmeticOverflow"
    BIT_VECTOR = "BitVector"
    SPEC_SYNTAX = "SpecSyntax"
    PRECONDITION_FAIL = "PreconditionFail"
    POSTCONDITION_FAIL = "PostconditionFail"
    ASSERT_FAIL = "AssertFail"
    INVARIANT_NOT_PRESERVED = "InvariantNotPreserved"
    UNKNOWN = "Unknown"


CATEGORY_ORDER = list(ErrorCategory)


class ToolchainMissing(Exception):
    pass


class ScriptExhausted(Exception):
    pass


@dataclass
class Diagnostic:
    raw: str
    file: str = ""
    line: int = 0
    phase: str = "verification"  # "syntax" | "verification"
    category: ErrorCategory = ErrorCategory.UNKNOWN
    clause: str | None = None
    severity: str = "error"

    def to_dict(self) -> dict:
        return {
            "raw": self.raw,
            "file": self.file,
            "line": self.line,
            "phase": self.phase,
            "category": self.category.value,
            "clause": self.clause,
            "severity": self.severity,
        }


@dataclass
class VerificationResult:
    success: bool
    diagnostics: list[Diagnostic] = field(default_factory=list)
    elapsed: float = 0.0
    toolchain_version: str = ""
    timed_out: bool = False

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "elapsed": self.elapsed,
            "toolchain_version": self.toolchain_version,
            "timed_out": self.timed_out,
        }


def load_rules(path: str | Path | None = None) -> dict:
    if path is None:
        text = resources.files("proofkit").joinpath("data", "triage_rules.json").read_text()
    else:
        text = Path(path).read_text()
    data = json.loads(text)
    for rule in data["rules"]:
        ErrorCategory(rule["category"])
        for refine in rule.get("refine", ()):
            ErrorCategory(refine["category"])
    return data


_DEFAULT_RULES = None


def default_rules() -> dict:
    global _DEFAULT_RULES
    if _DEFAULT_RULES is None:
        _DEFAULT_RULES = load_rules()
    return _DEFAULT_RULES


_HEADER_RE = re.compile(r"^(error|warning|note)(\[[A-Za-z0-9]+\])?(:| )", re.M)
_LOCATION_RE = re.compile(r"-->\s*([^\s:]+):(\d+)(?::(\d+))?")
_ECODE_RE = re.compile(r"^error\[E\d+\]")
_SUMMARY_RE = re.compile(r"aborting due to|verification results::|\d+ verified, \d+ errors")


def _classify_phase(block: str, rules: dict) -> str:
    if _ECODE_RE.match(block):
        return "syntax"
    lowered = block.lower()
    for marker in rules.get("syntax_markers", ()):
        if marker in lowered:
            return "syntax"
    return "verification"


def classify_phase(block: str, rules: dict | None = None) -> str:
    """Phase of one diagnostic block: "syntax" or "verification"."""
    return _classify_phase(block, rules or default_rules())


def categorize(block: str, phase: str, rules: dict | None = None) -> ErrorCategory:
    """First matching rule wins; keyword matching is case-insensitive."""
    rules = rules or default_rules()
    lowered = block.lower()
    for rule in rules["rules"]:
        if rule.get("phase") and rule["phase"] != phase:
            continue
        if not any(k in lowered for k in rule["keywords"]):
            continue
        for refine in rule.get("refine", ()):
            if refine["keyword"] in lowered:
                return ErrorCategory(refine["category"])
        return ErrorCategory(rule["category"])
    return ErrorCategory.UNKNOWN


def _extract_clause(block: str) -> str | None:
    """Source text under a 'failed ...' label marker, when present."""
    lines = block.splitlines()
    code_line = None
    for line in lines:
        m = re.match(r"\s*\d+\s*\|\s?(.*)", line)
        if m:
            code_line = m.group(1).strip()
            continue
        if code_line and re.match(r"\s*\|?\s*[-^]+\s*failed", line):
            return code_line
    return None


def parse_diagnostics(raw: str, rules: dict | None = None) -> list[Diagnostic]:
    """Split tool output into diagnostic blocks and categorize each one.

    Unrecognizable but nonempty output becomes a single Unknown diagnostic
    with the raw text preserved.  Summary trailers (aborting counts,
    verification tallies) are not diagnostics.
    """
    rules = rules or default_rules()
    if not raw.strip():
        return []
    starts = [m.start() for m in _HEADER_RE.finditer(raw)]
    if not starts:
        return [Diagnostic(raw=raw.strip())]
    blocks = []
    for i, start in enumerate(starts):
        end = starts[i + 1] if i + 1 < len(starts) else len(raw)
        blocks.append(raw[start:end].rstrip())

    out: list[Diagnostic] = []
    for block in blocks:
        header = block.splitlines()[0]
        severity = header.split("[")[0].split(":")[0].split()[0]
        if severity == "note":
            continue
        if _SUMMARY_RE.search(header):
            continue
        file = ""
        line = 0
        m = _LOCATION_RE.search(block)
        if m:
            file = m.group(1)
            line = int(m.group(2))
        phase = _classify_phase(block, rules)
        category = categorize(block, phase, rules)
        out.append(
            Diagnostic(
                raw=block,
                file=file,
                line=line,
                phase=phase,
                category=category,
                clause=_extract_clause(block),
                severity=severity,
            )
        )
    if not out and raw.strip():
        return [Diagnostic(raw=raw.strip())]
    return out


class VerusRunner:
    """Runs the toolchain binary on a target file or crate root."""

    def __init__(
        self,
        binary: str = "verus",
        flags: tuple[str, ...] = (),
        timeout: float = 120.0,
        toolchain_version: str = "",
        rules: dict | None = None,
    ):
        self.binary = binary
        self.flags = tuple(flags)
        self.timeout = timeout
        self.toolchain_version = toolchain_version
        self.rules = rules or default_rules()

    def run_verifier(self, target: str | Path, timeout: float | None = None) -> VerificationResult:
        timeout = timeout if timeout is not None else self.timeout
        cmd = [self.binary, *self.flags, str(target)]
        start = time.monotonic()
        try:
            proc = subprocess.run(
                cmd, capture_output=True, text=True, timeout=timeout
            )
        except FileNotFoundError as exc:
            raise ToolchainMissing(f"verifier binary not found: {self.binary}") from exc
        except subprocess.TimeoutExpired:
            elapsed = time.monotonic() - start
            timeout_diag = Diagnostic(
                raw=f"verification timed out after {timeout:g}s",
                file=str(target),
                phase="verification",
                category=ErrorCategory.UNKNOWN,
            )
            return VerificationResult(
                success=False,
                diagnostics=[timeout_diag],
                elapsed=elapsed,
                toolchain_version=self.toolchain_version,
                timed_out=True,
            )
        elapsed = time.monotonic() - start
        output = (proc.stdout or "") + (proc.stderr or "")
        success = proc.returncode == 0
        diagnostics = [] if success else parse_diagnostics(output, self.rules)
        return VerificationResult(
            success=success,
            diagnostics=diagnostics,
            elapsed=elapsed,
            toolchain_version=self.toolchain_version,
        )


class ScriptedVerifier:
    """Replays verification outcomes from a JSON script.

    Each entry is {"exit": int, "output": str}; entries are consumed in
    call order and running out of script raises ScriptExhausted.
    """

    def __init__(self, script: list[dict], toolchain_version: str = "scripted", rules: dict | None = None):
        self._script = list(script)
        self._cursor = 0
        self.toolchain_version = toolchain_version
        self.rules = rules or default_rules()
        self.calls: list[str] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedVerifier":
        data = json.loads(Path(path).read_text())
        if not isinstance(data, list):
            raise ValueError(f"{path}: verifier script must be a JSON array")
        return cls(data)

    def remaining(self) -> int:
        return len(self._script) - self._cursor

    def run_verifier(self, target: str | Path, timeout: float | None = None) -> VerificationResult:
        if self._cursor >= len(self._script):
            raise ScriptExhausted(
                f"verifier script exhausted after {len(self._script)} results"
            )
        entry = self._script[self._cursor]
        self._cursor += 1
        self.calls.append(str(target))
        exit_code = int(entry.get("exit", 1))
        output = entry.get("output", "")
        success = exit_code == 0
        diagnostics = [] if success else parse_diagnostics(output, self.rules)
        return VerificationResult(
            success=success,
            diagnostics=diagnostics,
            elapsed=0.0,
            toolchain_version=self.toolchain_version,
        )

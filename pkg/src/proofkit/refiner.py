"""Refinement loop, error triage, lemma harvesting, proof minimization.

A session makes one initial generation and at most max_attempts
refinements.  Each refinement triages the diagnostics, pulls matching
toolchain knowledge, and asks the model to repair the candidate.  After
a success the proof is minimized by removing redundant asserts one at a
time and new lemma functions are harvested into the lemma store.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .code_index import (
    LanguageObject,
    MetadataGraph,
    ObjectKind,
    ParseError,
    ingest_texts,
)
from .gateway import CompletionRequest, EmptyCompletion, Gateway, GatewayError, UsageRecord
from .lemma_kb import LemmaRecord, LemmaStore, parse_params
from .prover import Prover, _render_verus_section, extract_code_block, splice
from .runner import (
    CATEGORY_ORDER,
    Diagnostic,
    ErrorCategory,
    ScriptExhausted,
    ToolchainMissing,
    VerificationResult,
)
from .templating import render_template
from .verus_kb import KnowledgeStore

log = logging.getLogger(__name__)


@dataclass
class Attempt:
    index: int
    prompt: str
    candidate: str
    result: VerificationResult
    usage: UsageRecord

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "prompt": self.prompt,
            "candidate": self.candidate,
            "result": self.result.to_dict(),
            "usage": self.usage.to_dict(),
        }


@dataclass
class ProofSession:
    target: str
    attempts: list[Attempt] = field(default_factory=list)
    outcome: str = "failed"  # "proved" | "failed" | "budget_exhausted"
    max_attempts: int = 10
    harvested_lemmas: list[str] = field(default_factory=list)
    error: str | None = None
    final_source: str | None = None
    minimized: bool = False
    removed_asserts: int = 0

    @property
    def usage_totals(self) -> UsageRecord:
        total = UsageRecord()
        for attempt in self.attempts:
            total = total + attempt.usage
        return total

    def primary_category(self) -> ErrorCategory:
        """Top triage category of the last failing attempt, for reporting."""
        for attempt in reversed(self.attempts):
            if not attempt.result.success:
                cats = triage(attempt.result.diagnostics)
                if cats:
                    return cats[0]
        return ErrorCategory.UNKNOWN

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "outcome": self.outcome,
            "max_attempts": self.max_attempts,
            "refinements": max(0, len(self.attempts) - 1),
            "attempts": [a.to_dict() for a in self.attempts],
            "usage_totals": self.usage_totals.to_dict(),
            "harvested_lemmas": list(self.harvested_lemmas),
            "error": self.error,
            "final_source": self.final_source,
            "minimized": self.minimized,
            "removed_asserts": self.removed_asserts,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def triage(diagnostics: list[Diagnostic]) -> list[ErrorCategory]:
    """Distinct categories of error diagnostics, most frequent first.

    Ties break on enum declaration order.  Unknown appears only when it is
    the sole category present.
    """
    counts = Counter(
        d.category for d in diagnostics if d.severity == "error"
    )
    if not counts:
        return []
    known = {c: n for c, n in counts.items() if c is not ErrorCategory.UNKNOWN}
    if not known:
        return [ErrorCategory.UNKNOWN]
    return sorted(known, key=lambda c: (-known[c], CATEGORY_ORDER.index(c)))


def gather_knowledge(
    categories: list[ErrorCategory],
    store: KnowledgeStore | None,
    version: str,
    budget: int,
):
    """Docs for the triaged categories, unique, within one shared budget."""
    if store is None:
        return []
    chosen = []
    seen = set()
    remaining = budget
    for category in categories:
        if category is ErrorCategory.UNKNOWN:
            continue
        for doc in store.lookup(category, version, remaining):
            ident = (doc.source, doc.toolchain_version, doc.key)
            if ident in seen:
                continue
            if len(doc.body) > remaining:
                continue
            seen.add(ident)
            chosen.append(doc)
            remaining -= len(doc.body)
    return chosen


def build_refine_prompt(
    candidate: str,
    diagnostics: list[Diagnostic],
    docs,
    template_id: str = "refine_v1",
) -> str:
    diag_text = "\n\n".join(d.raw for d in diagnostics) or "(verifier reported failure with no diagnostics)"
    return render_template(
        template_id,
        candidate=candidate,
        diagnostics=diag_text,
        verus_section=_render_verus_section(docs),
    )


def refinement_loop(
    target: LanguageObject,
    source_text: str,
    prover: Prover,
    runner,
    gateway: Gateway,
    verus_store: KnowledgeStore | None = None,
    *,
    max_attempts: int = 10,
    knowledge_budget: int = 8000,
    toolchain_version: str = "",
    workdir: str | Path,
    work_name: str = "candidate.rs",
    refine_template: str = "refine_v1",
    verify_timeout: float | None = None,
) -> ProofSession:
    """Generate, verify, and refine until proved or out of budget.

    Gateway and runner errors abort the session with outcome "failed" and
    the error recorded; they are not raised.  Knowledge excerpts appear in
    a refinement prompt only when triage produced a non-Unknown category
    and the store returned at least one document.
    """
    session = ProofSession(target=target.path, max_attempts=max_attempts)
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    work_file = workdir / work_name

    def run_attempt(index: int, prompt: str, candidate: str, before: UsageRecord) -> VerificationResult:
        spliced = splice(source_text, target.span, candidate)
        work_file.write_text(spliced)
        result = runner.run_verifier(work_file, timeout=verify_timeout)
        session.attempts.append(
            Attempt(
                index=index,
                prompt=prompt,
                candidate=candidate,
                result=result,
                usage=gateway.usage_report() - before,
            )
        )
        if result.success:
            session.final_source = spliced
        return result

    try:
        before = gateway.usage_report()
        bundle = prover.make_bundle(target, gateway)
        prompt, candidate, _ = prover.generate(bundle, gateway)
        result = run_attempt(0, prompt, candidate, before)

        refinements = 0
        while not result.success and refinements < max_attempts:
            before = gateway.usage_report()
            categories = triage(result.diagnostics)
            docs = []
            if prover.ablation.use_verus and categories and categories != [ErrorCategory.UNKNOWN]:
                docs = gather_knowledge(categories, verus_store, toolchain_version, knowledge_budget)
            prompt = build_refine_prompt(candidate, result.diagnostics, docs, refine_template)
            reply, _ = gateway.complete(
                CompletionRequest(
                    prompt=prompt,
                    temperature=prover.temperature,
                    max_tokens=prover.max_tokens,
                    model_id=prover.model_id,
                )
            )
            candidate = extract_code_block(reply)
            if not candidate.strip():
                raise EmptyCompletion(f"empty refinement candidate for {target.path}")
            refinements += 1
            result = run_attempt(refinements, prompt, candidate, before)

        session.outcome = "proved" if result.success else "budget_exhausted"
    except (GatewayError, ScriptExhausted, ToolchainMissing, ParseError, ValueError) as exc:
        session.outcome = "failed"
        session.error = f"{type(exc).__name__}: {exc}"
        log.warning("session for %s aborted: %s", target.path, session.error)
    return session


# -- lemma harvesting ------------------------------------------------------


def harvest_new_lemmas(
    final_source: str,
    rel_path: str,
    known_paths: set[str],
    runner,
    lemma_store: LemmaStore | None,
    gateway: Gateway,
    *,
    workdir: str | Path,
    comment_threshold: int = 40,
    verify_timeout: float | None = None,
) -> list[LemmaRecord]:
    """Index lemma functions the model introduced in a successful proof.

    Each new lemma is re-verified in the context of the final source before
    it is admitted; failures are skipped and logged.  Unparseable sources
    harvest nothing.
    """
    if lemma_store is None:
        return []
    try:
        facts = ingest_texts({rel_path: final_source})
    except ParseError as exc:
        log.warning("cannot harvest lemmas, final candidate unparseable: %s", exc)
        return []
    new_lemmas = [
        obj
        for obj in facts.objects
        if obj.kind is ObjectKind.LEMMA_FUNCTION and obj.path not in known_paths
    ]
    if not new_lemmas:
        return []
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    check_file = workdir / "harvest_check.rs"
    check_file.write_text(final_source)
    added: list[LemmaRecord] = []
    for obj in sorted(new_lemmas, key=lambda o: o.path):
        result = runner.run_verifier(check_file, timeout=verify_timeout)
        if not result.success:
            log.warning("harvested lemma %s failed verification; skipped", obj.path)
            continue
        comment = (obj.doc_comment or "").strip()
        record = LemmaRecord(
            path=obj.path,
            signature=obj.signature,
            params=parse_params(obj.signature),
            requires=list(obj.requires),
            ensures=list(obj.ensures),
            comment=comment or None,
            provenance="documented" if len(comment) >= comment_threshold else "synthesized",
            module_location="::".join(obj.path.split("::")[:-1]),
        )
        try:
            lemma_store.add(record, gateway, comment_threshold)
        except (GatewayError, EmptyCompletion) as exc:
            log.warning("could not describe harvested lemma %s: %s", obj.path, exc)
            continue
        added.append(record)
    return added


# -- assert minimization ---------------------------------------------------


_ASSERT_RE = re.compile(r"(?<![A-Za-z0-9_])assert\b")


def find_assert_statements(text: str) -> list[tuple[int, int]]:
    """Character spans of assert statements, including `by` blocks.

    A statement runs from the assert keyword to its terminating semicolon
    at nesting depth zero, or to the close of a trailing `by { ... }`
    block (plus an optional semicolon).
    """
    from .code_index.parse import _mask_strings

    masked = _mask_strings(text)
    spans = []
    for m in _ASSERT_RE.finditer(masked):
        start = m.start()
        i = m.end()
        depth = 0
        last_word = "assert"
        end = None
        while i < len(masked):
            c = masked[i]
            if c in "([":
                depth += 1
            elif c in ")]":
                depth -= 1
            elif c == "{":
                if depth == 0 and last_word == "by":
                    j = i
                    d = 0
                    while j < len(masked):
                        if masked[j] == "{":
                            d += 1
                        elif masked[j] == "}":
                            d -= 1
                            if d == 0:
                                break
                        j += 1
                    i = j + 1
                    while i < len(masked) and masked[i] in " \t":
                        i += 1
                    if i < len(masked) and masked[i] == ";":
                        i += 1
                    end = i
                    break
                depth += 1
            elif c == "}":
                if depth == 0:
                    end = i
                    break
                depth -= 1
            elif c == ";" and depth == 0:
                end = i + 1
                break
            wm = re.match(r"[A-Za-z_][A-Za-z0-9_]*", masked[i:])
            if wm and (i == 0 or not (masked[i - 1].isalnum() or masked[i - 1] == "_")):
                last_word = wm.group(0)
                i += wm.end()
                continue
            i += 1
        if end is None:
            end = len(masked)
        spans.append((start, end))
    return spans


def _remove_span(text: str, span: tuple[int, int]) -> str:
    start, end = span
    line_start = text.rfind("\n", 0, start) + 1
    line_end = text.find("\n", end)
    line_end = len(text) if line_end == -1 else line_end + 1
    before = text[line_start:start]
    after = text[end:line_end]
    if before.strip() or after.strip():
        return text[:start] + text[end:]
    return text[:line_start] + text[line_end:]


class MinimizeError(Exception):
    pass


def minimize_proof(
    source: str,
    span: tuple[int, int],
    runner,
    *,
    workdir: str | Path,
    work_name: str = "minimize.rs",
    verify_timeout: float | None = None,
) -> tuple[str, int]:
    """Remove asserts inside the span while the proof still verifies.

    The input must verify as given.  Asserts are tried in source order;
    a removal is kept only if verification still succeeds.  Passes repeat
    until a full pass removes nothing, so the result is 1-minimal: no
    single remaining assert can be removed.  Returns (minimized source,
    removed count).
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    work_file = workdir / work_name

    work_file.write_text(source)
    baseline = runner.run_verifier(work_file, timeout=verify_timeout)
    if not baseline.success:
        raise MinimizeError("input does not verify; nothing to minimize")

    lines = source.splitlines(keepends=True)
    start, end = span
    if start < 1 or end > len(lines) or end < start:
        raise MinimizeError(f"span {span} out of range for {len(lines)}-line source")
    prefix = "".join(lines[: start - 1])
    region = "".join(lines[start - 1 : end])
    suffix = "".join(lines[end:])

    removed = 0
    while True:
        removed_this_pass = False
        i = 0
        while True:
            spans = find_assert_statements(region)
            if i >= len(spans):
                break
            trial_region = _remove_span(region, spans[i])
            work_file.write_text(prefix + trial_region + suffix)
            result = runner.run_verifier(work_file, timeout=verify_timeout)
            if result.success:
                region = trial_region
                removed += 1
                removed_this_pass = True
            else:
                i += 1
        if not removed_this_pass:
            break
    return prefix + region + suffix, removed

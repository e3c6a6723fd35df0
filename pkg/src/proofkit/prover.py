"""Proof generation: requirement analysis, retrieval, prompt assembly.

The prompt has a fixed section order: task instruction, target source,
dependent code, lemma candidates, knowledge excerpts, output-format
instruction.  Ablation flags remove whole sections.  When the rendered
prompt exceeds the character budget, content is dropped in priority
order: knowledge excerpts first, then lowest-scoring lemma candidates,
then deepest dependent snippets.  The target itself is never truncated.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .code_index import (
    EdgeFamily,
    LanguageObject,
    MetadataGraph,
    reach_info,
    render_snippet,
)
from .gateway import CompletionRequest, EmptyCompletion, Gateway, UsageRecord
from .lemma_kb import EmptyStore, LemmaRecord, LemmaStore
from .templating import render_template
from .verus_kb import KnowledgeDoc

import logging

log = logging.getLogger(__name__)


class TargetTooLarge(Exception):
    pass


@dataclass
class LemmaNeed:
    description: str
    origin: str = "analysis"


@dataclass
class AblationFlags:
    use_code: bool = True
    use_lemma: bool = True
    use_verus: bool = True


@dataclass
class DepSnippet:
    path: str
    depth: int
    text: str


@dataclass
class PromptBundle:
    target: LanguageObject
    dependent_snippets: list[DepSnippet] = field(default_factory=list)
    lemma_candidates: list[tuple[LemmaRecord, float]] = field(default_factory=list)
    knowledge_excerpts: list[KnowledgeDoc] = field(default_factory=list)
    ablation: AblationFlags = field(default_factory=AblationFlags)
    template_id: str = "prove_v1"


_STRICT_SUFFIX = (
    "\n\nReply with only a bulleted list of needed lemmas (one '-' line "
    "each) or the single word none. No other text."
)

_NONE_RE = re.compile(r"^\s*none[.!]?\s*$", re.I)
_BULLET_RE = re.compile(r"^\s*(?:[-*+]|\d+[.)])\s+(.*\S)\s*$")


def parse_need_list(reply: str) -> list[str] | None:
    """Bulleted or numbered lines from an analysis reply.

    Returns [] for an explicit "none", the item texts for a list, and
    None when the reply fits neither shape.
    """
    if _NONE_RE.match(reply or ""):
        return []
    items = []
    for line in (reply or "").splitlines():
        m = _BULLET_RE.match(line)
        if m:
            items.append(m.group(1))
    if items:
        return items
    return None


def analyze_requirements(
    target: LanguageObject,
    dependent_text: str,
    gateway: Gateway,
    temperature: float = 0.5,
    max_tokens: int = 4096,
    model_id: str = "",
    template_id: str = "analyze_v1",
) -> list[LemmaNeed]:
    """Ask the model which auxiliary lemmas the proof will need.

    An unparseable reply triggers one stricter re-prompt; if that also
    fails to parse, the need list is empty and a warning is logged.
    """
    prompt = render_template(
        template_id,
        target=target_source(target),
        context=dependent_text or "(no dependent code)",
    )
    for attempt, text in enumerate([prompt, prompt + _STRICT_SUFFIX]):
        reply, _ = gateway.complete(
            CompletionRequest(prompt=text, temperature=temperature, max_tokens=max_tokens, model_id=model_id)
        )
        needs = parse_need_list(reply)
        if needs is not None:
            return [LemmaNeed(description=n) for n in needs]
    log.warning("analysis reply unparseable after retry for %s; assuming no lemma needs", target.path)
    return []


def retrieve_candidates(
    needs: list[LemmaNeed],
    store: LemmaStore | None,
    k: int,
    gateway: Gateway,
) -> list[tuple[LemmaRecord, float]]:
    """Union of top-k retrievals over all needs.

    Duplicates keep their maximum score; the result is ordered by score
    descending with lexicographic path tie-breaks.
    """
    if store is None or len(store) == 0 or not needs:
        return []
    best: dict[str, float] = {}
    for need in needs:
        try:
            hits = store.search(need.description, k, gateway)
        except EmptyStore:
            return []
        for path, score in hits:
            if path not in best or score > best[path]:
                best[path] = score
    ordered = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(store.record_for(path), score) for path, score in ordered]


def target_source(target: LanguageObject) -> str:
    """The target exactly as the prompt presents it: header, clauses, body."""
    parts = [target.signature]
    if target.requires:
        parts.append("    requires")
        parts.extend(f"        {c}," for c in target.requires)
    if target.ensures:
        parts.append("    ensures")
        parts.extend(f"        {c}," for c in target.ensures)
    parts.append(target.body if target.body else "{\n}")
    return "\n".join(parts)


def snippet_entries(graph: MetadataGraph, target_path: str, max_depth: int = 3) -> list[DepSnippet]:
    """Dependent-code snippets with depth annotations, in prompt order."""
    info = reach_info(graph, target_path, max_depth)
    ts = sorted(p for p, (_, fam) in info.items() if fam is EdgeFamily.TYPE_STRUCTURE)
    cs = sorted(p for p, (_, fam) in info.items() if fam is EdgeFamily.CALL_SPEC)
    return [
        DepSnippet(path=p, depth=info[p][0], text=render_snippet(graph.nodes[p]))
        for p in ts + cs
    ]


def _render_code_section(snippets: list[DepSnippet]) -> str:
    if not snippets:
        return ""
    body = "\n\n".join(s.text for s in snippets)
    return f"## Dependent code\n{body}\n\n"


def _render_lemma_section(candidates: list[tuple[LemmaRecord, float]]) -> str:
    if not candidates:
        return ""
    entries = []
    for record, _ in candidates:
        lines = [f"- {record.path}"]
        lines.append(f"  {record.signature}")
        if record.requires:
            lines.append("  requires " + "; ".join(record.requires))
        if record.ensures:
            lines.append("  ensures " + "; ".join(record.ensures))
        if record.description:
            lines.append(f"  purpose: {record.description}")
        entries.append("\n".join(lines))
    body = "\n".join(entries)
    return f"## Lemma candidates\n{body}\n\n"


def _render_verus_section(docs: list[KnowledgeDoc]) -> str:
    if not docs:
        return ""
    entries = [f"### {d.key}\n{d.body}" for d in docs]
    body = "\n\n".join(entries)
    return f"## Toolchain knowledge\n{body}\n\n"


def _render(bundle: PromptBundle, snippets, candidates, docs) -> str:
    flags = bundle.ablation
    return render_template(
        bundle.template_id,
        target=target_source(bundle.target),
        code_section=_render_code_section(snippets) if flags.use_code else "",
        lemma_section=_render_lemma_section(candidates) if flags.use_lemma else "",
        verus_section=_render_verus_section(docs) if flags.use_verus else "",
    )


def build_prompt(bundle: PromptBundle, budget: int = 24000) -> str:
    """Render the bundle, dropping droppable content to fit the budget."""
    if len(target_source(bundle.target)) > budget:
        raise TargetTooLarge(
            f"target {bundle.target.path} alone exceeds the prompt budget ({budget})"
        )
    snippets = list(bundle.dependent_snippets)
    candidates = list(bundle.lemma_candidates)
    docs = list(bundle.knowledge_excerpts)
    while True:
        text = _render(bundle, snippets, candidates, docs)
        if len(text) <= budget:
            return text
        if docs:
            docs.pop()
        elif candidates:
            lowest = min(range(len(candidates)), key=lambda i: (candidates[i][1], candidates[i][0].path))
            candidates.pop(lowest)
        elif snippets:
            deepest = max(range(len(snippets)), key=lambda i: (snippets[i].depth, i))
            snippets.pop(deepest)
        else:
            return text


_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.S)


def extract_code_block(completion: str) -> str:
    """First fenced code block, or the whole reply when no fence exists."""
    m = _FENCE_RE.search(completion)
    if m:
        return m.group(1).strip("\n")
    return completion.strip()


def generate_proof(
    bundle: PromptBundle,
    gateway: Gateway,
    budget: int = 24000,
    temperature: float = 0.5,
    max_tokens: int = 4096,
    model_id: str = "",
) -> tuple[str, str, UsageRecord]:
    """Render the prompt, query the model, extract the candidate.

    Returns (prompt, candidate, usage delta).  An empty candidate raises
    EmptyCompletion.
    """
    prompt = build_prompt(bundle, budget)
    reply, delta = gateway.complete(
        CompletionRequest(prompt=prompt, temperature=temperature, max_tokens=max_tokens, model_id=model_id)
    )
    candidate = extract_code_block(reply)
    if not candidate.strip():
        raise EmptyCompletion(f"empty proof candidate for {bundle.target.path}")
    return prompt, candidate, delta


def splice(source: str, span: tuple[int, int], replacement: str) -> str:
    """Replace the 1-based inclusive line span of source with replacement.

    Only the spanned lines change; re-splicing the original lines restores
    the file byte for byte.
    """
    lines = source.splitlines(keepends=True)
    start, end = span
    if start < 1 or end < start or end > len(lines):
        raise ValueError(f"span {span} out of range for {len(lines)}-line source")
    replacement_lines = replacement.splitlines(keepends=True)
    if replacement_lines and not replacement_lines[-1].endswith("\n"):
        # keep the file shape stable when the span did not end the file
        if end < len(lines) or (lines and lines[end - 1].endswith("\n")):
            replacement_lines[-1] += "\n"
    return "".join(lines[: start - 1] + replacement_lines + lines[end:])


class Prover:
    """Bundles the index and stores behind the generation entry points."""

    def __init__(
        self,
        graph: MetadataGraph | None,
        lemma_store: LemmaStore | None,
        *,
        depth: int = 3,
        lemma_top_k: int = 5,
        prompt_budget: int = 24000,
        temperature: float = 0.5,
        max_tokens: int = 4096,
        model_id: str = "",
        ablation: AblationFlags | None = None,
        analyze_template: str = "analyze_v1",
        prove_template: str = "prove_v1",
    ):
        self.graph = graph
        self.lemma_store = lemma_store
        self.depth = depth
        self.lemma_top_k = lemma_top_k
        self.prompt_budget = prompt_budget
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.model_id = model_id
        self.ablation = ablation or AblationFlags()
        self.analyze_template = analyze_template
        self.prove_template = prove_template

    def make_bundle(self, target: LanguageObject, gateway: Gateway) -> PromptBundle:
        snippets: list[DepSnippet] = []
        if self.ablation.use_code and self.graph is not None and target.path in self.graph.nodes:
            snippets = snippet_entries(self.graph, target.path, self.depth)
        candidates: list[tuple[LemmaRecord, float]] = []
        if self.ablation.use_lemma and self.lemma_store is not None and len(self.lemma_store):
            needs = analyze_requirements(
                target,
                "\n\n".join(s.text for s in snippets),
                gateway,
                temperature=self.temperature,
                max_tokens=self.max_tokens,
                model_id=self.model_id,
                template_id=self.analyze_template,
            )
            candidates = retrieve_candidates(needs, self.lemma_store, self.lemma_top_k, gateway)
        return PromptBundle(
            target=target,
            dependent_snippets=snippets,
            lemma_candidates=candidates,
            knowledge_excerpts=[],
            ablation=self.ablation,
            template_id=self.prove_template,
        )

    def generate(self, bundle: PromptBundle, gateway: Gateway) -> tuple[str, str, UsageRecord]:
        return generate_proof(
            bundle,
            gateway,
            budget=self.prompt_budget,
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            model_id=self.model_id,
        )

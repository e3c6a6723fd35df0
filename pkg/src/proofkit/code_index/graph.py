"""Metadata dependency graph over parsed language objects.

build_graph resolves raw references into typed edges; unresolvable or
ill-typed references are dropped and counted, never guessed.  Queries are
depth-bounded breadth-first walks over outgoing edges.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .objects import (
    COMPOSITE_KINDS,
    FUNCTION_KINDS,
    DependencyEdge,
    EdgeFamily,
    EdgeKind,
    LanguageObject,
    ObjectKind,
    RefContext,
    SymbolFacts,
    build_name_index,
    lexical_module,
    resolve_name,
)


class UnknownTarget(KeyError):
    pass


_ALIAS_OK = COMPOSITE_KINDS | {ObjectKind.TYPE_ALIAS}

# per-kind constraints: (allowed referrer kinds, allowed target kinds);
# None means any kind is acceptable
_KIND_RULES: dict[EdgeKind, tuple[frozenset | None, frozenset | None]] = {
    EdgeKind.SIGNATURE_TYPE_REF: (FUNCTION_KINDS, frozenset(_ALIAS_OK)),
    EdgeKind.ASSOCIATED_FN: (FUNCTION_KINDS, COMPOSITE_KINDS),
    EdgeKind.FIELD_CONTAINS: (COMPOSITE_KINDS, frozenset(_ALIAS_OK)),
    EdgeKind.ALIAS_REDEFINES: (COMPOSITE_KINDS, frozenset({ObjectKind.TYPE_ALIAS})),
    EdgeKind.TRAIT_IMPL_FOR: (COMPOSITE_KINDS, frozenset({ObjectKind.TRAIT})),
    EdgeKind.ALIAS_DEFINES: (frozenset({ObjectKind.TYPE_ALIAS}), COMPOSITE_KINDS),
    EdgeKind.BODY_CALL: (FUNCTION_KINDS, FUNCTION_KINDS),
    EdgeKind.SPEC_REF: (FUNCTION_KINDS, None),
}


def _kind_for(context: RefContext, referrer_kind: ObjectKind) -> EdgeKind | None:
    if context is RefContext.SIGNATURE:
        return EdgeKind.SIGNATURE_TYPE_REF
    if context is RefContext.FIELD:
        return EdgeKind.FIELD_CONTAINS
    if context is RefContext.BODY:
        return EdgeKind.BODY_CALL
    if context is RefContext.SPEC_CLAUSE:
        return EdgeKind.SPEC_REF
    if context is RefContext.IMPL:
        if referrer_kind in FUNCTION_KINDS:
            return EdgeKind.ASSOCIATED_FN
        if referrer_kind in COMPOSITE_KINDS:
            return EdgeKind.TRAIT_IMPL_FOR
        return None
    if context is RefContext.ALIAS:
        if referrer_kind is ObjectKind.TYPE_ALIAS:
            return EdgeKind.ALIAS_DEFINES
        if referrer_kind in COMPOSITE_KINDS:
            return EdgeKind.ALIAS_REDEFINES
        return None
    return None


@dataclass
class MetadataGraph:
    nodes: dict[str, LanguageObject] = field(default_factory=dict)
    edges: list[DependencyEdge] = field(default_factory=list)
    adjacency: dict[str, list[int]] = field(default_factory=dict)
    dropped: dict[str, int] = field(default_factory=dict)

    def rebuild_adjacency(self) -> None:
        self.adjacency = {}
        for i, edge in enumerate(self.edges):
            self.adjacency.setdefault(edge.src, []).append(i)

    def outgoing(self, path: str) -> list[DependencyEdge]:
        return [self.edges[i] for i in self.adjacency.get(path, ())]

    def to_json(self) -> str:
        payload = {
            "nodes": [self.nodes[p].to_dict() for p in sorted(self.nodes)],
            "edges": [e.to_dict() for e in self.edges],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetadataGraph":
        data = json.loads(text)
        graph = cls()
        for entry in data["nodes"]:
            obj = LanguageObject.from_dict(entry)
            graph.nodes[obj.path] = obj
        graph.edges = [DependencyEdge.from_dict(e) for e in data["edges"]]
        graph.rebuild_adjacency()
        return graph

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "MetadataGraph":
        return cls.from_json(Path(path).read_text())


def build_graph(facts: SymbolFacts) -> MetadataGraph:
    """Resolve references into a typed dependency graph.

    Each resolvable reference yields exactly one edge whose kind is fixed
    by its context (impl and alias contexts disambiguate on the referrer's
    kind).  Edges are deduplicated on (from, to, kind) and stored sorted.
    """
    graph = MetadataGraph()
    for obj in facts.objects:
        graph.nodes[obj.path] = obj
    name_index = build_name_index(graph.nodes)
    dropped = {"unresolved": 0, "ambiguous": 0, "kind_mismatch": 0}

    seen: set[DependencyEdge] = set()
    for ref in facts.references:
        referrer = graph.nodes.get(ref.referrer)
        if referrer is None:
            dropped["unresolved"] += 1
            continue
        module = lexical_module(ref.referrer, graph.nodes)
        target, reason = resolve_name(ref.referee, module, graph.nodes, name_index)
        if target is None:
            dropped[reason] += 1
            continue
        kind = _kind_for(ref.context, referrer.kind)
        if kind is None:
            dropped["kind_mismatch"] += 1
            continue
        ok_src, ok_dst = _KIND_RULES[kind]
        if ok_src is not None and referrer.kind not in ok_src:
            dropped["kind_mismatch"] += 1
            continue
        if ok_dst is not None and graph.nodes[target].kind not in ok_dst:
            dropped["kind_mismatch"] += 1
            continue
        seen.add(DependencyEdge(ref.referrer, target, kind))

    graph.edges = sorted(seen, key=lambda e: (e.src, e.dst, int(e.kind)))
    graph.rebuild_adjacency()
    graph.dropped = dropped
    return graph


def reach_info(
    graph: MetadataGraph, target: str, max_depth: int = 3
) -> dict[str, tuple[int, EdgeFamily]]:
    """(depth, family) for every object within max_depth of target.

    Depth is the breadth-first distance over outgoing edges.  An object
    counts as TypeStructure if any edge into it from an expanded node
    carries a TypeStructure kind; otherwise CallSpec.  The target itself
    is excluded.
    """
    if target not in graph.nodes:
        raise UnknownTarget(target)
    depth = {target: 0}
    frontier = deque([target])
    while frontier:
        u = frontier.popleft()
        if depth[u] >= max_depth:
            continue
        for edge in graph.outgoing(u):
            if edge.dst not in depth:
                depth[edge.dst] = depth[u] + 1
                frontier.append(edge.dst)

    included = set(depth) - {target}
    families: dict[str, EdgeFamily] = {}
    for u, du in depth.items():
        if du >= max_depth:
            continue
        for edge in graph.outgoing(u):
            v = edge.dst
            if v not in included:
                continue
            if edge.family is EdgeFamily.TYPE_STRUCTURE:
                families[v] = EdgeFamily.TYPE_STRUCTURE
            else:
                families.setdefault(v, EdgeFamily.CALL_SPEC)
    return {p: (depth[p], families[p]) for p in included}


def reach_families(
    graph: MetadataGraph, target: str, max_depth: int = 3
) -> dict[str, EdgeFamily]:
    """Family classification of every object within max_depth of target."""
    return {p: fam for p, (_, fam) in reach_info(graph, target, max_depth).items()}


def dependent_code(
    graph: MetadataGraph, target: str, max_depth: int = 3
) -> list[LanguageObject]:
    """Objects the target may depend on, in snippet serialization order.

    Breadth-first over outgoing edges up to max_depth, deduplicated, the
    target excluded.  Ordering: objects reached through TypeStructure edges
    first, then objects reached only through CallSpec edges; lexicographic
    by path within each group.
    """
    families = reach_families(graph, target, max_depth)
    ts = sorted(p for p, f in families.items() if f is EdgeFamily.TYPE_STRUCTURE)
    cs = sorted(p for p, f in families.items() if f is EdgeFamily.CALL_SPEC)
    return [graph.nodes[p] for p in ts + cs]


def render_snippet(obj: LanguageObject) -> str:
    """Compact text for one object: location, docs, signature, spec clauses.

    Bodies are included only where they carry the definition itself: spec
    functions (the body is the predicate) and composite types (the field
    list).  Executable and proof bodies are omitted.
    """
    lines = [f"// {obj.path}  ({obj.file}:{obj.span[0]}-{obj.span[1]})"]
    if obj.doc_comment:
        lines.extend(f"/// {l}" if l else "///" for l in obj.doc_comment.splitlines())
    head = obj.signature
    if obj.kind in COMPOSITE_KINDS and obj.body:
        head = f"{head} {obj.body}"
    elif obj.kind is ObjectKind.SPEC_FUNCTION and obj.body:
        head = f"{head} {obj.body}"
    lines.append(head)
    if obj.requires:
        lines.append("    requires")
        lines.extend(f"        {c}," for c in obj.requires)
    if obj.ensures:
        lines.append("    ensures")
        lines.extend(f"        {c}," for c in obj.ensures)
    return "\n".join(lines)


def serialize_snippets(
    objects: list[LanguageObject],
    families: dict[str, EdgeFamily] | None = None,
) -> str:
    """Render objects as prompt-ready snippets.

    When a family map is given the objects are reordered TypeStructure
    first, CallSpec second, lexicographic within each group; otherwise the
    input order is preserved.  Empty input renders as empty text.
    """
    if families is not None:
        ts = sorted(
            (o for o in objects if families.get(o.path) is EdgeFamily.TYPE_STRUCTURE),
            key=lambda o: o.path,
        )
        cs = sorted(
            (o for o in objects if families.get(o.path) is not EdgeFamily.TYPE_STRUCTURE),
            key=lambda o: o.path,
        )
        objects = ts + cs
    return "\n\n".join(render_snippet(o) for o in objects)


def extract_lemmas(graph: MetadataGraph, comment_threshold: int = 40) -> list:
    """Lemma records for every proof function in the graph.

    A lemma whose doc comment is missing or shorter than the threshold is
    flagged for description synthesis; descriptions themselves are filled
    in later by the lemma store pipeline.
    """
    from ..lemma_kb import LemmaRecord, parse_params

    records = []
    for path in sorted(graph.nodes):
        obj = graph.nodes[path]
        if obj.kind is not ObjectKind.LEMMA_FUNCTION:
            continue
        comment = (obj.doc_comment or "").strip()
        documented = len(comment) >= comment_threshold
        records.append(
            LemmaRecord(
                path=obj.path,
                signature=obj.signature,
                params=parse_params(obj.signature),
                requires=list(obj.requires),
                ensures=list(obj.ensures),
                comment=comment or None,
                description="",
                provenance="documented" if documented else "synthesized",
                module_location=lexical_module(obj.path, graph.nodes),
            )
        )
    return records

"""Core types for the code index: language objects, references, edges.

A dependency edge u -> v means "checking u may require v".  Edge kinds come
in two families: TypeStructure (signature, association, containment, alias,
trait impl) and CallSpec (body calls, spec clause references).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field


class ObjectKind(str, enum.Enum):
    FUNCTION = "Function"
    SPEC_FUNCTION = "SpecFunction"
    LEMMA_FUNCTION = "LemmaFunction"
    STRUCT = "Struct"
    ENUM = "Enum"
    TRAIT = "Trait"
    TYPE_ALIAS = "TypeAlias"


FUNCTION_KINDS = frozenset(
    {ObjectKind.FUNCTION, ObjectKind.SPEC_FUNCTION, ObjectKind.LEMMA_FUNCTION}
)
COMPOSITE_KINDS = frozenset({ObjectKind.STRUCT, ObjectKind.ENUM})


class EdgeFamily(str, enum.Enum):
    TYPE_STRUCTURE = "TypeStructure"
    CALL_SPEC = "CallSpec"


class EdgeKind(enum.IntEnum):
    SIGNATURE_TYPE_REF = 1
    ASSOCIATED_FN = 2
    FIELD_CONTAINS = 3
    ALIAS_REDEFINES = 4
    TRAIT_IMPL_FOR = 5
    ALIAS_DEFINES = 6
    BODY_CALL = 7
    SPEC_REF = 8

    @property
    def label(self) -> str:
        return _KIND_LABELS[self]

    @property
    def family(self) -> EdgeFamily:
        if self in (EdgeKind.BODY_CALL, EdgeKind.SPEC_REF):
            return EdgeFamily.CALL_SPEC
        return EdgeFamily.TYPE_STRUCTURE

    @classmethod
    def from_label(cls, label: str) -> "EdgeKind":
        for kind, name in _KIND_LABELS.items():
            if name == label:
                return kind
        raise ValueError(f"unknown edge kind label: {label!r}")


_KIND_LABELS = {
    EdgeKind.SIGNATURE_TYPE_REF: "SignatureTypeRef",
    EdgeKind.ASSOCIATED_FN: "AssociatedFn",
    EdgeKind.FIELD_CONTAINS: "FieldContains",
    EdgeKind.ALIAS_REDEFINES: "AliasRedefines",
    EdgeKind.TRAIT_IMPL_FOR: "TraitImplFor",
    EdgeKind.ALIAS_DEFINES: "AliasDefines",
    EdgeKind.BODY_CALL: "BodyCall",
    EdgeKind.SPEC_REF: "SpecRef",
}


class RefContext(str, enum.Enum):
    SIGNATURE = "signature"
    FIELD = "field"
    ALIAS = "alias"
    IMPL = "impl"
    BODY = "body"
    SPEC_CLAUSE = "spec-clause"


@dataclass
class LanguageObject:
    """One parsed item: a function, type, trait, or alias."""

    path: str
    kind: ObjectKind
    signature: str
    requires: list[str] = field(default_factory=list)
    ensures: list[str] = field(default_factory=list)
    doc_comment: str | None = None
    body: str | None = None
    file: str = ""
    span: tuple[int, int] = (0, 0)

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "kind": self.kind.value,
            "signature": self.signature,
            "requires": list(self.requires),
            "ensures": list(self.ensures),
            "doc_comment": self.doc_comment,
            "body": self.body,
            "file": self.file,
            "span": list(self.span),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LanguageObject":
        return cls(
            path=data["path"],
            kind=ObjectKind(data["kind"]),
            signature=data["signature"],
            requires=list(data.get("requires") or []),
            ensures=list(data.get("ensures") or []),
            doc_comment=data.get("doc_comment"),
            body=data.get("body"),
            file=data.get("file", ""),
            span=tuple(data.get("span") or (0, 0)),
        )


@dataclass(frozen=True)
class Reference:
    """Raw reference from a parsed item, before name resolution."""

    referrer: str
    referee: str
    context: RefContext


@dataclass
class SymbolFacts:
    """Parser output: objects plus raw references between them.

    Serialized as JSON lines, one object per line, followed by a single
    trailer line holding the reference list.  Any front end that can emit
    this format can replace the bundled parser.
    """

    objects: list[LanguageObject] = field(default_factory=list)
    references: list[Reference] = field(default_factory=list)

    def to_jsonl(self) -> str:
        lines = [json.dumps(obj.to_dict(), sort_keys=True) for obj in self.objects]
        trailer = {
            "references": [
                {"referrer": r.referrer, "referee": r.referee, "context": r.context.value}
                for r in self.references
            ]
        }
        lines.append(json.dumps(trailer, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "SymbolFacts":
        objects: list[LanguageObject] = []
        references: list[Reference] = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            if "references" in data and "path" not in data:
                for r in data["references"]:
                    references.append(
                        Reference(r["referrer"], r["referee"], RefContext(r["context"]))
                    )
            else:
                objects.append(LanguageObject.from_dict(data))
        return cls(objects=objects, references=references)


@dataclass(frozen=True)
class DependencyEdge:
    src: str
    dst: str
    kind: EdgeKind

    @property
    def family(self) -> EdgeFamily:
        return self.kind.family

    def to_dict(self) -> dict:
        return {
            "from": self.src,
            "to": self.dst,
            "kind": self.kind.label,
            "family": self.family.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DependencyEdge":
        return cls(data["from"], data["to"], EdgeKind.from_label(data["kind"]))


def lexical_module(path: str, nodes: dict[str, LanguageObject]) -> str:
    """Enclosing module of an object path.

    Associated functions live at module::Type::name; the extra Type segment
    is stripped when the prefix names a composite type or trait.
    """
    parts = path.split("::")
    if len(parts) <= 1:
        return ""
    prefix = "::".join(parts[:-1])
    owner = nodes.get(prefix)
    if owner is not None and owner.kind in COMPOSITE_KINDS | {ObjectKind.TRAIT}:
        parts = parts[:-1]
        if len(parts) <= 1:
            return ""
        return "::".join(parts[:-1])
    return prefix


def build_name_index(nodes: dict[str, LanguageObject]) -> dict[str, list[str]]:
    """Map from last path segment to every object path ending in it."""
    index: dict[str, list[str]] = {}
    for path in nodes:
        index.setdefault(path.split("::")[-1], []).append(path)
    for paths in index.values():
        paths.sort()
    return index


def resolve_name(
    name: str,
    module: str,
    nodes: dict[str, LanguageObject],
    name_index: dict[str, list[str]],
) -> tuple[str | None, str | None]:
    """Resolve a referee name to an object path.

    Tries the innermost module first, then the crate root, then a unique
    suffix match over all paths.  Segmented names fall back to shorter
    prefixes so `Type::assoc` can land on `Type` when only the type is
    indexed.  Returns (path, None) on success or (None, reason) where
    reason is "unresolved" or "ambiguous".
    """
    name = name.strip()
    while name.startswith("crate::") or name.startswith("self::"):
        name = name.split("::", 1)[1]
    while name.startswith("super::"):
        name = name.split("::", 1)[1]
        module = "::".join(module.split("::")[:-1]) if module else ""
    if not name:
        return None, "unresolved"

    cur = name
    while True:
        if module:
            scoped = f"{module}::{cur}"
            if scoped in nodes:
                return scoped, None
        if cur in nodes:
            return cur, None
        last = cur.split("::")[-1]
        suffix = "::" + cur
        hits = [p for p in name_index.get(last, ()) if p == cur or p.endswith(suffix)]
        if len(hits) == 1:
            return hits[0], None
        if len(hits) > 1:
            return None, "ambiguous"
        if "::" in cur:
            cur = cur.rsplit("::", 1)[0]
            continue
        return None, "unresolved"

"""Code indexing: subset parsing, symbol facts, and the dependency graph."""

from .objects import (
    COMPOSITE_KINDS,
    FUNCTION_KINDS,
    DependencyEdge,
    EdgeFamily,
    EdgeKind,
    LanguageObject,
    ObjectKind,
    RefContext,
    Reference,
    SymbolFacts,
    build_name_index,
    lexical_module,
    resolve_name,
)
from .parse import (
    ParseError,
    ingest_source,
    ingest_texts,
    load_symbol_facts,
    module_for_file,
)
from .graph import (
    MetadataGraph,
    UnknownTarget,
    build_graph,
    dependent_code,
    extract_lemmas,
    reach_families,
    reach_info,
    render_snippet,
    serialize_snippets,
)

__all__ = [
    "COMPOSITE_KINDS",
    "FUNCTION_KINDS",
    "DependencyEdge",
    "EdgeFamily",
    "EdgeKind",
    "LanguageObject",
    "MetadataGraph",
    "ObjectKind",
    "ParseError",
    "RefContext",
    "Reference",
    "SymbolFacts",
    "UnknownTarget",
    "build_graph",
    "build_name_index",
    "dependent_code",
    "extract_lemmas",
    "ingest_source",
    "ingest_texts",
    "lexical_module",
    "load_symbol_facts",
    "module_for_file",
    "reach_families",
    "reach_info",
    "render_snippet",
    "resolve_name",
    "serialize_snippets",
]

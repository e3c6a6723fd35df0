"""proofkit: retrieval-augmented proof generation for Verus projects.

Pipeline: parse a source tree into symbol facts, build the metadata
dependency graph, retrieve dependent code / lemmas / toolchain knowledge,
prompt a model for a proof, verify, refine on diagnostics, then minimize
and harvest what worked.
"""

from .code_index import (
    DependencyEdge,
    EdgeFamily,
    EdgeKind,
    LanguageObject,
    MetadataGraph,
    ObjectKind,
    ParseError,
    RefContext,
    Reference,
    SymbolFacts,
    UnknownTarget,
    build_graph,
    dependent_code,
    extract_lemmas,
    ingest_source,
    ingest_texts,
    load_symbol_facts,
    render_snippet,
    serialize_snippets,
)
from .config import Config, ConfigError, load_config
from .gateway import (
    AuthError,
    CompletionRequest,
    EmptyCompletion,
    Gateway,
    GatewayError,
    HttpGateway,
    PriceTable,
    RateLimited,
    ScriptedGateway,
    TransportError,
    UsageRecord,
    estimate_tokens,
    pseudo_embedding,
)
from .lemma_kb import (
    EmptyStore,
    LemmaRecord,
    LemmaStore,
    StoreFormatError,
    VectorStore,
    build_lemma_store,
    describe_lemma,
    index_lemmas,
    parse_params,
)
from .prover import (
    AblationFlags,
    LemmaNeed,
    PromptBundle,
    Prover,
    TargetTooLarge,
    analyze_requirements,
    build_prompt,
    extract_code_block,
    generate_proof,
    parse_need_list,
    retrieve_candidates,
    splice,
)
from .refiner import (
    Attempt,
    MinimizeError,
    ProofSession,
    find_assert_statements,
    harvest_new_lemmas,
    minimize_proof,
    refinement_loop,
    triage,
)
from .runner import (
    Diagnostic,
    ErrorCategory,
    ScriptedVerifier,
    ToolchainMissing,
    VerificationResult,
    VerusRunner,
    categorize,
    parse_diagnostics,
)
from .verus_kb import KnowledgeDoc, KnowledgeStore, ManifestError, split_markdown

__version__ = "0.1.0"

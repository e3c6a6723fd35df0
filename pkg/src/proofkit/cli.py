"""Command line entry points.

Subcommands:
  index     parse a source tree into symbol facts, a dependency graph,
            and extracted lemma records
  ingest    build or update knowledge stores (markdown docs, feature
            manifests, lemma records)
  prove     run the generate/verify/refine loop for one target
  batch     run prove over a task list and write a run report
  minimize  remove redundant asserts from a verified file

Model access needs an API key in the environment (api_key_env, default
PROOFKIT_API_KEY) unless --script provides canned replies.  --mock-verifier
substitutes scripted verdicts for the real toolchain.
"""

from __future__ import annotations

import argparse
import json
import logging
import shlex
import sys
from collections import Counter
from pathlib import Path

from .code_index import (
    MetadataGraph,
    ObjectKind,
    ParseError,
    SymbolFacts,
    UnknownTarget,
    build_graph,
    extract_lemmas,
    ingest_source,
    ingest_texts,
    load_symbol_facts,
)
from .config import Config, ConfigError, load_config
from .gateway import (
    AuthError,
    Gateway,
    GatewayError,
    HttpGateway,
    PriceTable,
    ScriptedGateway,
    UsageRecord,
)
from .lemma_kb import LemmaRecord, LemmaStore, StoreFormatError, VectorStore, build_lemma_store
from .prover import AblationFlags, Prover, TargetTooLarge
from .refiner import (
    MinimizeError,
    ProofSession,
    harvest_new_lemmas,
    minimize_proof,
    refinement_loop,
)
from .runner import ScriptedVerifier, ToolchainMissing, VerusRunner
from .verus_kb import KnowledgeStore, ManifestError

log = logging.getLogger(__name__)


class CliError(Exception):
    pass


# -- shared construction ---------------------------------------------------


def _gateway_from(config: Config, script: str | None) -> Gateway:
    prices = PriceTable(config.price_input, config.price_output)
    if script:
        return ScriptedGateway.from_file(script, dimension=config.embed_dim, prices=prices)
    if not config.endpoint:
        raise CliError("no endpoint configured and no --script given")
    return HttpGateway(
        endpoint=config.endpoint,
        model_id=config.model_id,
        embed_endpoint=config.embed_endpoint or None,
        embed_model_id=config.embed_model_id or None,
        api_key_env=config.api_key_env,
        retry_count=config.retry_count,
        timeout=config.verify_timeout,
        prices=prices,
    )


def _runner_from(config: Config, mock: str | None):
    if mock:
        return ScriptedVerifier.from_file(mock)
    return VerusRunner(
        binary=config.toolchain_bin,
        flags=shlex.split(config.toolchain_flags),
        timeout=config.verify_timeout,
        toolchain_version=config.toolchain_version,
    )


def _load_facts(args) -> SymbolFacts:
    if getattr(args, "facts", None):
        return load_symbol_facts(args.facts)
    if not args.src:
        raise CliError("give a source directory or --facts")
    return ingest_source(args.src)


def _find_target(facts: SymbolFacts, name: str):
    exact = [o for o in facts.objects if o.path == name]
    if exact:
        return exact[0]
    suffix = [o for o in facts.objects if o.path.endswith("::" + name)]
    if len(suffix) == 1:
        return suffix[0]
    if len(suffix) > 1:
        raise CliError(f"target {name!r} is ambiguous: " + ", ".join(o.path for o in suffix))
    raise CliError(f"target {name!r} not found")


def _session_file(sessions_dir: Path, target: str) -> Path:
    return sessions_dir / (target.replace("::", ".") + ".json")


# -- index -----------------------------------------------------------------


def cmd_index(args) -> int:
    facts = _load_facts(args)
    graph = build_graph(facts)
    lemmas = extract_lemmas(graph, comment_threshold=args.comment_threshold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "facts.jsonl").write_text(facts.to_jsonl())
    graph.save(out / "graph.json")
    with (out / "lemmas.jsonl").open("w") as fh:
        for record in lemmas:
            fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
    dropped = ", ".join(f"{k}={v}" for k, v in sorted(graph.dropped.items()) if v) or "none"
    print(
        f"indexed {len(graph.nodes)} objects, {len(graph.edges)} edges, "
        f"{len(lemmas)} lemmas (dropped: {dropped})"
    )
    return 0


# -- ingest ----------------------------------------------------------------


def cmd_ingest(args) -> int:
    config = load_config(args.config)
    out = Path(args.out)

    if args.lemmas:
        records = []
        for line in Path(args.lemmas).read_text().splitlines():
            if line.strip():
                records.append(LemmaRecord.from_dict(json.loads(line)))
        gateway = _gateway_from(config, args.script)
        store, failed = build_lemma_store(
            records, gateway,
            dimension=config.embed_dim,
            comment_threshold=config.comment_threshold,
        )
        store.save(out)
        print(f"lemma store: {len(store.records)} indexed, {len(failed)} failed -> {out}")
        for path in failed:
            print(f"  excluded (no description): {path}")
        return 0

    if not args.version:
        raise CliError("--version is required for docs/manifest ingestion")
    store = KnowledgeStore.load(out) if (out / "docs.jsonl").exists() else KnowledgeStore()
    if args.docs:
        paths = sorted(p for p in Path(args.docs).iterdir() if p.suffix == ".md")
        skipped = store.ingest_docs(paths, args.version)
        print(f"docs: ingested {len(paths) - len(skipped)} files, skipped {len(skipped)}")
    if args.manifest:
        entries = store.ingest_feature_list(Path(args.manifest), args.version)
        print(f"manifest: ingested {len(entries)} feature entries")
    if args.category_map:
        mapping = json.loads(Path(args.category_map).read_text())
        store.set_category_map(mapping)
        print(f"category map: {len(mapping)} categories")
    store.save(out)
    print(f"knowledge store: {len(store.docs)} documents -> {out}")
    return 0


# -- prove / batch ---------------------------------------------------------


def _build_prover(args, config: Config, graph: MetadataGraph, lemma_store):
    ablation = AblationFlags(
        use_code=config.use_code and not args.no_code_knowledge,
        use_lemma=config.use_lemma and not args.no_lemma_knowledge,
        use_verus=config.use_verus and not args.no_verus_knowledge,
    )
    return ablation, Prover(
        graph=graph,
        lemma_store=lemma_store,
        depth=config.depth,
        lemma_top_k=config.lemma_top_k,
        prompt_budget=config.prompt_budget,
        temperature=config.temperature,
        max_tokens=config.max_tokens,
        model_id=config.model_id,
        ablation=ablation,
    )


def _prove_one(
    target_name: str,
    facts: SymbolFacts,
    prover: Prover,
    runner,
    gateway: Gateway,
    verus_store,
    lemma_store,
    config: Config,
    args,
    source_root: Path,
    sessions_dir: Path,
) -> ProofSession:
    target = _find_target(facts, target_name)
    source_text = (source_root / target.file).read_text()
    session = refinement_loop(
        target,
        source_text,
        prover,
        runner,
        gateway,
        verus_store,
        max_attempts=config.max_attempts,
        knowledge_budget=config.knowledge_budget,
        toolchain_version=config.toolchain_version,
        workdir=sessions_dir / "work",
        verify_timeout=config.verify_timeout,
    )
    if session.outcome == "proved" and lemma_store is not None and not args.no_harvest:
        known = {o.path for o in facts.objects}
        harvested = harvest_new_lemmas(
            session.final_source,
            target.file,
            known,
            runner,
            lemma_store,
            gateway,
            workdir=sessions_dir / "work",
            comment_threshold=config.comment_threshold,
            verify_timeout=config.verify_timeout,
        )
        session.harvested_lemmas = [r.path for r in harvested]
    session.save(_session_file(sessions_dir, target.path))
    return session


def _prove_setup(args):
    config = load_config(args.config)
    facts = _load_facts(args)
    graph = build_graph(facts)
    gateway = _gateway_from(config, args.script)
    runner = _runner_from(config, args.mock_verifier)
    lemma_store = None
    if args.lemma_store:
        lemma_store = LemmaStore.load(args.lemma_store, expect_embedder=gateway.embedder_id)
    verus_store = KnowledgeStore.load(args.verus_store) if args.verus_store else None
    _, prover = _build_prover(args, config, graph, lemma_store)
    sessions_dir = Path(args.sessions or config.sessions_dir)
    sessions_dir.mkdir(parents=True, exist_ok=True)
    source_root = Path(args.src) if args.src else Path(".")
    return config, facts, prover, runner, gateway, lemma_store, verus_store, sessions_dir, source_root


def cmd_prove(args) -> int:
    (config, facts, prover, runner, gateway, lemma_store,
     verus_store, sessions_dir, source_root) = _prove_setup(args)
    session = _prove_one(
        args.target, facts, prover, runner, gateway, verus_store,
        lemma_store, config, args, source_root, sessions_dir,
    )
    if lemma_store is not None and session.harvested_lemmas and args.lemma_store:
        lemma_store.save(args.lemma_store)
    usage = session.usage_totals
    print(
        f"{session.target}: {session.outcome} after {len(session.attempts)} attempt(s), "
        f"{usage.query_count} queries, {usage.input_tokens + usage.output_tokens} tokens"
    )
    if session.error:
        print(f"  error: {session.error}")
    return 0 if session.outcome == "proved" else 1


def cmd_batch(args) -> int:
    (config, facts, prover, runner, gateway, lemma_store,
     verus_store, sessions_dir, source_root) = _prove_setup(args)
    targets = []
    for line in Path(args.taskfile).read_text().splitlines():
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            targets.append(stripped)

    rows = []
    residual: Counter = Counter()
    for name in targets:
        try:
            session = _prove_one(
                name, facts, prover, runner, gateway, verus_store,
                lemma_store, config, args, source_root, sessions_dir,
            )
        except CliError as exc:
            session = ProofSession(target=name, outcome="failed", error=str(exc))
        rows.append(session)
        if session.outcome != "proved":
            residual[session.primary_category().value] += 1
    if lemma_store is not None and args.lemma_store:
        lemma_store.save(args.lemma_store)

    totals = sum((s.usage_totals for s in rows), start=UsageRecord())
    report = {
        "targets": [
            {
                "target": s.target,
                "outcome": s.outcome,
                "attempts": len(s.attempts),
                "harvested": len(s.harvested_lemmas),
                "usage": s.usage_totals.to_dict(),
                "error": s.error,
            }
            for s in rows
        ],
        "totals": {
            "tasks": len(rows),
            "proved": sum(1 for s in rows if s.outcome == "proved"),
            **totals.to_dict(),
        },
        "residual_categories": dict(sorted(residual.items())),
    }
    report_path = sessions_dir / "run_report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")

    width = max([len(s.target) for s in rows] + [len("target")])
    print(f"{'target'.ljust(width)}  outcome           attempts  harvested")
    for s in rows:
        print(f"{s.target.ljust(width)}  {s.outcome.ljust(16)}  {len(s.attempts):8d}  {len(s.harvested_lemmas):9d}")
    t = report["totals"]
    print(
        f"proved {t['proved']}/{t['tasks']}, {t['query_count']} queries, "
        f"{t['input_tokens'] + t['output_tokens']} tokens, cost {t['estimated_cost']:.4f}"
    )
    if residual:
        print("residual error categories: " + ", ".join(f"{k}={v}" for k, v in sorted(residual.items())))
    print(f"report: {report_path}")
    return 0 if t["proved"] == t["tasks"] else 1


# -- minimize --------------------------------------------------------------


def cmd_minimize(args) -> int:
    config = load_config(args.config)
    source_path = Path(args.file)
    source = source_path.read_text()
    facts = ingest_texts({source_path.name: source})
    target = _find_target(facts, args.target)
    runner = _runner_from(config, args.mock_verifier)
    minimized, removed = minimize_proof(
        source,
        target.span,
        runner,
        workdir=source_path.parent / ".minimize_work",
        verify_timeout=config.verify_timeout,
    )
    out_path = source_path.with_suffix(".min.rs")
    out_path.write_text(minimized)
    print(f"removed {removed} assert(s); wrote {out_path}")
    return 0


# -- argument parsing ------------------------------------------------------


def _add_prove_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--src", help="source tree root (for parsing and splicing)")
    p.add_argument("--facts", help="prebuilt facts.jsonl instead of parsing --src")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--script", help="canned model replies (JSON array) instead of HTTP")
    p.add_argument("--mock-verifier", help="canned verifier verdicts (JSON array)")
    p.add_argument("--lemma-store", help="lemma store directory")
    p.add_argument("--verus-store", help="toolchain knowledge store directory")
    p.add_argument("--sessions", help="directory for session logs")
    p.add_argument("--no-code-knowledge", action="store_true",
                   help="omit dependent code from prompts")
    p.add_argument("--no-lemma-knowledge", action="store_true",
                   help="omit lemma retrieval from prompts")
    p.add_argument("--no-verus-knowledge", action="store_true",
                   help="omit toolchain knowledge from prompts")
    p.add_argument("--no-harvest", action="store_true",
                   help="do not index new lemmas from successful proofs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proofkit",
                                     description="proof generation toolkit for Verus code")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="parse sources into facts, graph, and lemma records")
    p.add_argument("src", nargs="?", help="source tree root")
    p.add_argument("--facts", help="prebuilt facts.jsonl instead of parsing src")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--comment-threshold", type=int, default=40,
                   help="min doc comment length counted as documentation")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("ingest", help="build or update knowledge stores")
    p.add_argument("--docs", help="directory of markdown documents")
    p.add_argument("--manifest", help="feature manifest JSON file")
    p.add_argument("--lemmas", help="lemma records jsonl to embed and index")
    p.add_argument("--version", help="toolchain version tag for docs/manifest")
    p.add_argument("--category-map", help="JSON mapping of error category to doc keys")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--script", help="canned model replies for offline embedding")
    p.add_argument("--out", required=True, help="store directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("prove", help="prove one target function")
    p.add_argument("target", help="target path (full or unique suffix)")
    _add_prove_options(p)
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("batch", help="prove every target in a task file")
    p.add_argument("taskfile", help="one target path per line, # comments")
    _add_prove_options(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("minimize", help="drop redundant asserts from a verified file")
    p.add_argument("file", help="Rust source file that currently verifies")
    p.add_argument("--target", required=True, help="function whose body to minimize")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--mock-verifier", help="canned verifier verdicts (JSON array)")
    p.set_defaults(func=cmd_minimize)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (CliError, ConfigError, ParseError, ManifestError, StoreFormatError,
            UnknownTarget, ToolchainMissing, AuthError, GatewayError,
            TargetTooLarge, MinimizeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Lemma knowledge base: descriptions, embeddings, and similarity search.

Lemmas with substantial doc comments keep those as their description;
sparsely documented ones get a description synthesized from signature and
spec clauses by the LLM.  Descriptions are embedded into unit vectors and
searched by cosine similarity with an exact linear scan.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gateway import EmptyCompletion, Gateway
from .templating import render_template

log = logging.getLogger(__name__)

DEFAULT_COMMENT_THRESHOLD = 40


@dataclass
class LemmaRecord:
    path: str
    signature: str
    params: list[tuple[str, str]] = field(default_factory=list)
    requires: list[str] = field(default_factory=list)
    ensures: list[str] = field(default_factory=list)
    comment: str | None = None
    description: str = ""
    provenance: str = "synthesized"  # "documented" | "synthesized"
    module_location: str = ""
    vector_id: int | None = None

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "signature": self.signature,
            "params": [list(p) for p in self.params],
            "requires": list(self.requires),
            "ensures": list(self.ensures),
            "comment": self.comment,
            "description": self.description,
            "provenance": self.provenance,
            "module_location": self.module_location,
            "vector_id": self.vector_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LemmaRecord":
        return cls(
            path=data["path"],
            signature=data["signature"],
            params=[tuple(p) for p in data.get("params") or []],
            requires=list(data.get("requires") or []),
            ensures=list(data.get("ensures") or []),
            comment=data.get("comment"),
            description=data.get("description", ""),
            provenance=data.get("provenance", "synthesized"),
            module_location=data.get("module_location", ""),
            vector_id=data.get("vector_id"),
        )


def parse_params(signature: str) -> list[tuple[str, str]]:
    """(name, type) pairs from a verbatim function signature."""
    start = signature.find("(")
    if start == -1:
        return []
    depth = 0
    end = -1
    for i in range(start, len(signature)):
        if signature[i] == "(":
            depth += 1
        elif signature[i] == ")":
            depth -= 1
            if depth == 0:
                end = i
                break
    if end == -1:
        return []
    inner = signature[start + 1 : end]
    params: list[tuple[str, str]] = []
    depth = angle = 0
    buf = []
    parts = []
    for c in inner:
        if c in "([{":
            depth += 1
        elif c in ")]}":
            depth -= 1
        elif c == "<":
            angle += 1
        elif c == ">" and angle:
            angle -= 1
        if c == "," and depth == 0 and angle == 0:
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(c)
    parts.append("".join(buf))
    for part in parts:
        part = part.strip()
        if not part or part.lstrip("&").strip() in {"self", "mut self"}:
            continue
        m = re.match(r"(?:tracked\s+|ghost\s+|mut\s+)*([A-Za-z_][A-Za-z0-9_]*)\s*:\s*(.+)", part, re.S)
        if m:
            params.append((m.group(1), " ".join(m.group(2).split())))
    return params


def saveable_records(records: list[LemmaRecord]) -> str:
    return "\n".join(json.dumps(r.to_dict(), sort_keys=True) for r in records) + ("\n" if records else "")


class EmptyStore(Exception):
    pass


class StoreFormatError(Exception):
    pass


def _normalize(vector: np.ndarray) -> np.ndarray:
    vec = np.asarray(vector, dtype=float)
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        raise ValueError("cannot normalize a zero vector")
    return vec / norm


class VectorStore:
    """Unit-normalized vectors keyed by path; cosine similarity search."""

    def __init__(self, dimension: int, embedder_id: str):
        self.dimension = dimension
        self.embedder_id = embedder_id
        self.paths: list[str] = []
        self.vectors: list[np.ndarray] = []
        self._by_path: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.paths)

    def add(self, path: str, vector: np.ndarray) -> int:
        vec = _normalize(vector)
        if vec.shape != (self.dimension,):
            raise StoreFormatError(
                f"vector for {path} has dimension {vec.shape[0]}, store expects {self.dimension}"
            )
        if path in self._by_path:
            row = self._by_path[path]
            log.warning("replacing existing vector for %s", path)
            self.vectors[row] = vec
            return row
        row = len(self.paths)
        self.paths.append(path)
        self.vectors.append(vec)
        self._by_path[path] = row
        return row

    def search_vector(self, query: np.ndarray, k: int) -> list[tuple[str, float]]:
        """Top-k by cosine score, ties broken lexicographically by path."""
        if not self.paths:
            raise EmptyStore("vector store is empty")
        q = _normalize(query)
        matrix = np.vstack(self.vectors)
        scores = matrix @ q
        order = sorted(range(len(self.paths)), key=lambda i: (-scores[i], self.paths[i]))
        return [(self.paths[i], float(scores[i])) for i in order[: max(0, k)]]


def describe_lemma(record: LemmaRecord, gateway: Gateway, template_id: str = "describe_v1") -> str:
    """Synthesize a one-paragraph description for an undocumented lemma.

    Retries once on an empty completion, then raises EmptyCompletion so the
    caller can skip the record.
    """
    prompt = render_template(
        template_id,
        name=record.path,
        signature=record.signature,
        params="\n".join(f"- {n}: {t}" for n, t in record.params) or "- none",
        requires="\n".join(f"- {c}" for c in record.requires) or "- none",
        ensures="\n".join(f"- {c}" for c in record.ensures) or "- none",
    )
    from .gateway import CompletionRequest

    for _ in range(2):
        text, _ = gateway.complete(CompletionRequest(prompt=prompt))
        text = text.strip()
        if text:
            return text
    raise EmptyCompletion(f"empty description for {record.path} after retry")


def ensure_description(
    record: LemmaRecord,
    gateway: Gateway,
    comment_threshold: int = DEFAULT_COMMENT_THRESHOLD,
    template_id: str = "describe_v1",
) -> LemmaRecord:
    """Fill in record.description, synthesizing only when necessary."""
    if record.description:
        return record
    comment = (record.comment or "").strip()
    if record.provenance == "documented" or len(comment) >= comment_threshold:
        record.provenance = "documented"
        record.description = comment
        return record
    record.provenance = "synthesized"
    record.description = describe_lemma(record, gateway, template_id)
    return record


class LemmaStore:
    """Described lemma records plus their embedding vectors, row-aligned."""

    def __init__(self, store: VectorStore):
        self.store = store
        self.records: dict[str, LemmaRecord] = {}

    def __len__(self) -> int:
        return len(self.store)

    @property
    def dimension(self) -> int:
        return self.store.dimension

    @property
    def embedder_id(self) -> str:
        return self.store.embedder_id

    def record_for(self, path: str) -> LemmaRecord:
        return self.records[path]

    def add(self, record: LemmaRecord, gateway: Gateway, comment_threshold: int = DEFAULT_COMMENT_THRESHOLD) -> None:
        """Describe (if needed), embed, and insert one record.

        An existing record at the same path is replaced and the replacement
        logged; the store never holds duplicates.
        """
        ensure_description(record, gateway, comment_threshold)
        vec = gateway.embed([record.description])[0]
        if record.path in self.records:
            log.warning("replacing lemma record for %s", record.path)
        record.vector_id = self.store.add(record.path, vec)
        self.records[record.path] = record

    def search(self, query: str, k: int, gateway: Gateway) -> list[tuple[str, float]]:
        vec = gateway.embed([query])[0]
        return self.store.search_vector(vec, k)

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        ordered = [self.records[p] for p in self.store.paths]
        (directory / "records.jsonl").write_text(saveable_records(ordered))
        header = json.dumps(
            {"dimension": self.store.dimension, "embedder": self.store.embedder_id},
            sort_keys=True,
        )
        rows = [header]
        for vec in self.store.vectors:
            rows.append(" ".join(format(x, ".17g") for x in vec))
        (directory / "vectors.txt").write_text("\n".join(rows) + "\n")

    @classmethod
    def load(cls, directory: str | Path, expect_embedder: str | None = None) -> "LemmaStore":
        directory = Path(directory)
        vec_lines = (directory / "vectors.txt").read_text().splitlines()
        if not vec_lines:
            raise StoreFormatError(f"{directory}: empty vectors file")
        header = json.loads(vec_lines[0])
        dimension = int(header["dimension"])
        embedder = header["embedder"]
        if expect_embedder is not None and embedder != expect_embedder:
            raise StoreFormatError(
                f"{directory}: store embedder {embedder!r} does not match expected {expect_embedder!r}"
            )
        store = VectorStore(dimension, embedder)
        lemma_store = cls(store)
        record_lines = (directory / "records.jsonl").read_text().splitlines()
        vec_rows = vec_lines[1:]
        if len(record_lines) != len(vec_rows):
            raise StoreFormatError(
                f"{directory}: {len(record_lines)} records but {len(vec_rows)} vectors"
            )
        for line, row in zip(record_lines, vec_rows):
            record = LemmaRecord.from_dict(json.loads(line))
            vec = np.array([float(x) for x in row.split()], dtype=float)
            record.vector_id = store.add(record.path, vec)
            lemma_store.records[record.path] = record
        return lemma_store


def index_lemmas(records: list[LemmaRecord], gateway: Gateway, dimension: int | None = None) -> LemmaStore:
    """Embed already-described records into a fresh store.

    Empty input yields an empty store with the configured dimension.
    """
    described = [r for r in records]
    for r in described:
        if not r.description:
            raise ValueError(f"record {r.path} has no description; run ensure_description first")
    if not described:
        dim = dimension or getattr(gateway, "dimension", 0) or 64
        return LemmaStore(VectorStore(dim, gateway.embedder_id))
    vectors = gateway.embed([r.description for r in described])
    dim = len(vectors[0])
    if dimension is not None and dimension != dim:
        raise StoreFormatError(
            f"requested dimension {dimension} but embedder produced {dim}"
        )
    store = VectorStore(dim, gateway.embedder_id)
    lemma_store = LemmaStore(store)
    for record, vec in zip(described, vectors):
        record.vector_id = store.add(record.path, vec)
        lemma_store.records[record.path] = record
    return lemma_store


def build_lemma_store(
    records: list[LemmaRecord],
    gateway: Gateway,
    comment_threshold: int = DEFAULT_COMMENT_THRESHOLD,
    dimension: int | None = None,
    template_id: str = "describe_v1",
) -> tuple[LemmaStore, list[str]]:
    """Describe and index a record batch.

    Records whose description cannot be synthesized are excluded from the
    store and returned as a failure list instead of being indexed blank.
    """
    described: list[LemmaRecord] = []
    failed: list[str] = []
    for record in records:
        try:
            described.append(ensure_description(record, gateway, comment_threshold, template_id))
        except EmptyCompletion:
            log.warning("description failed for %s; record not indexed", record.path)
            failed.append(record.path)
    return index_lemmas(described, gateway, dimension), failed

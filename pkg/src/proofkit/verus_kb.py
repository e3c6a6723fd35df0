"""Toolchain knowledge store: official docs plus release-note features.

Official documentation is split into title-keyed entries at the top
heading level of each markdown file.  Features that only exist in pull
requests are ingested from a curated manifest.  Lookup maps an error
category to whole documents under a character budget; the per-category
ordering is a curated list first, then remaining tagged docs
lexicographically.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .runner import ErrorCategory

log = logging.getLogger(__name__)


class ManifestError(Exception):
    pass


@dataclass
class KnowledgeDoc:
    key: str
    body: str
    source: str  # "official_doc" | "pull_request"
    toolchain_version: str
    categories: set[ErrorCategory] = field(default_factory=set)

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "body": self.body,
            "source": self.source,
            "toolchain_version": self.toolchain_version,
            "categories": sorted(c.value for c in self.categories),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KnowledgeDoc":
        return cls(
            key=data["key"],
            body=data["body"],
            source=data["source"],
            toolchain_version=data["toolchain_version"],
            categories={ErrorCategory(c) for c in data.get("categories") or []},
        )


_HEADING_RE = re.compile(r"^(#{1,6})\s+(.+?)\s*$", re.M)


def split_markdown(text: str) -> list[tuple[str, str]]:
    """(title, body) sections split at the shallowest heading level used."""
    headings = [(m.start(), len(m.group(1)), m.group(2)) for m in _HEADING_RE.finditer(text)]
    if not headings:
        return []
    top = min(level for _, level, _ in headings)
    tops = [(pos, title) for pos, level, title in headings if level == top]
    sections = []
    for i, (pos, title) in enumerate(tops):
        end = tops[i + 1][0] if i + 1 < len(tops) else len(text)
        body_start = text.find("\n", pos)
        body = "" if body_start == -1 else text[body_start + 1 : end]
        sections.append((title, body.strip()))
    return sections


class KnowledgeStore:
    """Documents keyed per (source, version); per-category curated ordering."""

    def __init__(self):
        self.docs: list[KnowledgeDoc] = []
        self.curated: dict[ErrorCategory, list[str]] = {}

    def __len__(self) -> int:
        return len(self.docs)

    def _key_set(self, source: str, version: str) -> set[str]:
        return {d.key for d in self.docs if d.source == source and d.toolchain_version == version}

    def doc(self, key: str, version: str | None = None) -> KnowledgeDoc | None:
        for d in self.docs:
            if d.key == key and (version is None or d.toolchain_version == version):
                return d
        return None

    def _replace_slice(self, source: str, version: str, new_docs: list[KnowledgeDoc]) -> None:
        # build the replacement list fully, then swap in one assignment
        kept = [d for d in self.docs if not (d.source == source and d.toolchain_version == version)]
        self.docs = kept + new_docs

    def ingest_docs(
        self,
        corpus: Mapping[str, str] | Iterable[str | Path],
        version: str,
    ) -> list[str]:
        """Ingest official documentation files.

        Accepts either {name: markdown text} or an iterable of file paths.
        Files without headings are skipped with a warning.  Re-ingesting
        replaces the official slice for this version wholesale, so removed
        sections disappear.  Returns the skipped file names.
        """
        if not isinstance(corpus, Mapping):
            corpus = {Path(p).name: Path(p).read_text() for p in corpus}
        skipped: list[str] = []
        new_docs: list[KnowledgeDoc] = []
        used_keys: set[str] = set()
        for name in sorted(corpus):
            sections = split_markdown(corpus[name])
            if not sections:
                log.warning("no headings in %s; file skipped", name)
                skipped.append(name)
                continue
            for title, body in sections:
                key = title
                if key in used_keys:
                    key = f"{title} ({name})"
                used_keys.add(key)
                new_docs.append(
                    KnowledgeDoc(
                        key=key,
                        body=body,
                        source="official_doc",
                        toolchain_version=version,
                    )
                )
        self._replace_slice("official_doc", version, new_docs)
        self._apply_curated_tags()
        return skipped

    def ingest_feature_list(self, manifest: list[dict] | str | Path, version: str) -> list[KnowledgeDoc]:
        """Ingest the pull-request feature manifest for one version.

        The manifest is a JSON array of {title, pr_url, description,
        categories}; a malformed entry is rejected with its position.
        Entries absent from the manifest disappear from the store.
        """
        if isinstance(manifest, (str, Path)):
            data = json.loads(Path(manifest).read_text())
        else:
            data = manifest
        if not isinstance(data, list):
            raise ManifestError("feature manifest must be a JSON array")
        new_docs: list[KnowledgeDoc] = []
        for i, entry in enumerate(data):
            if not isinstance(entry, dict):
                raise ManifestError(f"entry {i}: expected an object")
            for field_name in ("title", "pr_url", "description"):
                if not entry.get(field_name):
                    raise ManifestError(f"entry {i}: missing field {field_name!r}")
            raw_categories = entry.get("categories", [])
            if not isinstance(raw_categories, list):
                raise ManifestError(f"entry {i}: categories must be a list")
            try:
                categories = {ErrorCategory(c) for c in raw_categories}
            except ValueError as exc:
                raise ManifestError(f"entry {i}: {exc}") from exc
            body = f"{entry['description'].strip()}\n\nSee: {entry['pr_url']}"
            new_docs.append(
                KnowledgeDoc(
                    key=entry["title"],
                    body=body,
                    source="pull_request",
                    toolchain_version=version,
                    categories=categories,
                )
            )
        keys = [d.key for d in new_docs]
        if len(keys) != len(set(keys)):
            raise ManifestError("duplicate titles in manifest")
        self._replace_slice("pull_request", version, new_docs)
        return new_docs

    def set_category_map(self, mapping: Mapping[str, list[str]]) -> None:
        """Install the curated category ordering.

        Every listed key must name an ingested doc; list order is
        preserved during lookup ahead of the lexicographic tail.
        """
        parsed: dict[ErrorCategory, list[str]] = {}
        known = {d.key for d in self.docs}
        missing = []
        for cat_name, keys in mapping.items():
            cat = ErrorCategory(cat_name)
            for key in keys:
                if key not in known:
                    missing.append(key)
            parsed[cat] = list(keys)
        if missing:
            raise ValueError(f"category map lists unknown doc keys: {missing}")
        self.curated = parsed
        self._apply_curated_tags()

    def _apply_curated_tags(self) -> None:
        for cat, keys in self.curated.items():
            for d in self.docs:
                if d.key in keys:
                    d.categories.add(cat)

    def lookup(
        self,
        category: ErrorCategory,
        version: str,
        budget: int = 8000,
    ) -> list[KnowledgeDoc]:
        """Docs for an error category within a character budget.

        Whole documents only: a doc that does not fit in the remaining
        budget is dropped, never split.  Curated keys come first in their
        curated order, then remaining tagged docs lexicographically.
        """
        by_key = {
            d.key: d
            for d in self.docs
            if d.toolchain_version == version
        }
        ordered: list[str] = []
        for key in self.curated.get(category, ()):
            if key in by_key and key not in ordered:
                ordered.append(key)
        tail = sorted(
            k
            for k, d in by_key.items()
            if category in d.categories and k not in ordered
        )
        ordered.extend(tail)

        chosen: list[KnowledgeDoc] = []
        remaining = budget
        for key in ordered:
            doc = by_key[key]
            if len(doc.body) <= remaining:
                chosen.append(doc)
                remaining -= len(doc.body)
        return chosen

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        ordered = sorted(self.docs, key=lambda d: (d.source, d.toolchain_version, d.key))
        lines = [json.dumps(d.to_dict(), sort_keys=True) for d in ordered]
        (directory / "docs.jsonl").write_text("\n".join(lines) + ("\n" if lines else ""))
        curated = {cat.value: keys for cat, keys in sorted(self.curated.items(), key=lambda kv: kv[0].value)}
        (directory / "category_map.json").write_text(json.dumps(curated, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory: str | Path) -> "KnowledgeStore":
        directory = Path(directory)
        store = cls()
        text = (directory / "docs.jsonl").read_text()
        for line in text.splitlines():
            if line.strip():
                store.docs.append(KnowledgeDoc.from_dict(json.loads(line)))
        map_path = directory / "category_map.json"
        if map_path.exists():
            mapping = json.loads(map_path.read_text())
            store.curated = {ErrorCategory(k): list(v) for k, v in mapping.items()}
            store._apply_curated_tags()
        return store


def load_category_map(path: str | Path) -> dict[str, list[str]]:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError(f"{path}: category map must be a JSON object")
    return data

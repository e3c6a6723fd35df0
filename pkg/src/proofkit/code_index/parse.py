"""Subset parser for Verus-flavored Rust sources.

Recognized items: fn / spec fn / proof fn (with requires and ensures
clauses), struct, enum, trait, impl blocks, and type aliases.  Modules may
nest inline; `verus! { ... }` wrappers are transparent.  Unrecognized but
benign items (use, const, static, macros) are skipped; anything else is a
ParseError.  Method calls through a receiver (`x.f()`) are not resolved.

Output is a SymbolFacts bundle: the parsed objects plus raw references
tagged with the context they were seen in (signature, field, alias, impl,
body, spec-clause).  Nothing is resolved here beyond what is needed to
attribute trait-impl and alias references to an existing object.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable, Mapping

from .objects import (
    COMPOSITE_KINDS,
    LanguageObject,
    ObjectKind,
    RefContext,
    Reference,
    SymbolFacts,
    build_name_index,
    resolve_name,
)


class ParseError(Exception):
    def __init__(self, file: str, line: int, reason: str):
        super().__init__(f"{file}:{line}: {reason}")
        self.file = file
        self.line = line
        self.reason = reason


_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_PATH_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:\s*::\s*[A-Za-z_][A-Za-z0-9_]*)*")
_CALL_RE = re.compile(
    r"(?<![A-Za-z0-9_.])"
    r"([A-Za-z_][A-Za-z0-9_]*(?:::[A-Za-z_][A-Za-z0-9_]*)*)"
    r"\s*(?:::<[^<>]*>)?\s*\("
)

# visibility / mode words that may precede an item keyword
_QUALIFIERS = {
    "pub", "open", "closed", "uninterp", "broadcast", "tracked", "exec",
    "const", "async", "unsafe", "default", "spec", "proof", "static",
    "external", "ghost",
}
_CLAUSE_KEYWORDS = {
    "requires", "ensures", "recommends", "decreases", "returns",
    "opens_invariants", "no_unwind", "when", "via", "invariant",
    "invariant_except_break",
}
# primitive and structural words never recorded as type references
_TYPE_NOISE = {
    "bool", "char", "str", "u8", "u16", "u32", "u64", "u128", "usize",
    "i8", "i16", "i32", "i64", "i128", "isize", "f32", "f64", "int", "nat",
    "Self", "self", "dyn", "impl", "mut", "ref", "where", "fn", "tracked",
    "ghost", "const", "static", "move",
}
# control flow and builtin operations never recorded as calls
_CALL_NOISE = {
    "if", "while", "for", "match", "loop", "return", "break", "continue",
    "let", "else", "move", "ref", "unsafe", "true", "false", "assert",
    "assume", "admit", "proof", "spec", "forall", "exists", "choose",
    "old", "fn", "closure_to_fn_spec",
}


def _mask_strings(text: str) -> str:
    """Replace string/char literal contents and comments with spaces.

    Length-preserving, so offsets into the masked text match the original.
    """
    out = list(text)
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                if text[j] == "\\":
                    j += 1
                j += 1
            for k in range(i + 1, min(j, n)):
                if out[k] != "\n":
                    out[k] = " "
            i = j + 1
        elif c == "'":
            # char literal vs lifetime tick
            if i + 1 < n and text[i + 1] == "\\":
                j = i + 2
                while j < n and text[j] != "'":
                    j += 1
                for k in range(i + 1, min(j, n)):
                    out[k] = " "
                i = j + 1
            elif i + 2 < n and text[i + 2] == "'":
                out[i + 1] = " "
                i = i + 3
            else:
                i += 1
        elif c == "/" and i + 1 < n and text[i + 1] == "/":
            j = text.find("\n", i)
            if j == -1:
                j = n
            for k in range(i, j):
                out[k] = " "
            i = j
        elif c == "/" and i + 1 < n and text[i + 1] == "*":
            depth = 1
            j = i + 2
            while j < n and depth:
                if text.startswith("/*", j):
                    depth += 1
                    j += 2
                elif text.startswith("*/", j):
                    depth -= 1
                    j += 2
                else:
                    j += 1
            for k in range(i, min(j, n)):
                if out[k] != "\n":
                    out[k] = " "
            i = j
        else:
            i += 1
    return "".join(out)


def _type_tokens(text: str) -> list[str]:
    """Path-like tokens inside a type expression, noise filtered."""
    tokens = []
    for m in _PATH_TOKEN_RE.finditer(_mask_strings(text)):
        tok = re.sub(r"\s*::\s*", "::", m.group(0))
        head = tok.split("::")[0]
        if head in _TYPE_NOISE and "::" not in tok:
            continue
        if head in {"crate", "self", "super"} and "::" not in tok:
            continue
        tokens.append(tok)
    return tokens


def _call_tokens(text: str, self_name: str | None = None) -> list[str]:
    """Free-function call targets inside a body or clause expression."""
    masked = _mask_strings(text)
    tokens = []
    for m in _CALL_RE.finditer(masked):
        tok = m.group(1)
        end = m.end(1)
        if end < len(masked) and masked[end] == "!":
            continue  # macro invocation
        head = tok.split("::")[0]
        if head in _CALL_NOISE and "::" not in tok:
            continue
        if head == "Self":
            if self_name is None:
                continue
            tok = self_name + tok[len("Self"):]
        tokens.append(tok)
    return tokens


_QUANTIFIERS = {"forall", "exists", "choose"}


def _split_top_level(text: str, sep: str = ",", angles: bool = True) -> list[str]:
    """Split on separators outside bracket groups.

    With angles=True, <...> generic argument lists also bind (type
    positions).  With angles=False, `<` is treated as a comparison operator
    (expression positions) and quantifier binders `forall|x, y|` group
    instead.
    """
    parts = []
    depth = 0
    angle = 0
    in_binder = False
    last_word = ""
    buf = []
    masked = _mask_strings(text)
    i = 0
    while i < len(text):
        c = masked[i]
        if c in "([{":
            depth += 1
        elif c in ")]}":
            depth -= 1
        elif angles and c == "<" and i > 0 and (masked[i - 1].isalnum() or masked[i - 1] in "_:<"):
            angle += 1
        elif angles and c == ">" and angle and (i == 0 or masked[i - 1] != "-"):
            angle -= 1
        elif not angles and c == "|":
            if in_binder:
                in_binder = False
            elif last_word in _QUANTIFIERS:
                in_binder = True
        if c.isalnum() or c == "_":
            m = _WORD_RE.match(masked, i) if (i == 0 or not (masked[i - 1].isalnum() or masked[i - 1] == "_")) else None
            if m:
                last_word = m.group(0)
        if c == sep and depth == 0 and angle == 0 and not in_binder:
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(text[i])
        i += 1
    parts.append("".join(buf))
    return [p.strip() for p in parts if p.strip()]


def _normalize_clause(text: str) -> str:
    return " ".join(text.split())


class _Scanner:
    """Character scanner with comment and doc-comment awareness."""

    def __init__(self, text: str, file: str):
        self.text = text
        self.file = file
        self.pos = 0
        self.n = len(text)
        self.pending_docs: list[str] = []

    def error(self, reason: str) -> ParseError:
        return ParseError(self.file, self.line_at(self.pos), reason)

    def line_at(self, pos: int) -> int:
        return self.text.count("\n", 0, pos) + 1

    def eof(self) -> bool:
        return self.pos >= self.n

    def skip_trivia(self) -> None:
        while self.pos < self.n:
            c = self.text[self.pos]
            if c.isspace():
                self.pos += 1
            elif self.text.startswith("///", self.pos):
                end = self.text.find("\n", self.pos)
                if end == -1:
                    end = self.n
                line = self.text[self.pos + 3 : end]
                self.pending_docs.append(line[1:] if line.startswith(" ") else line)
                self.pos = end
            elif self.text.startswith("//", self.pos):
                end = self.text.find("\n", self.pos)
                self.pos = self.n if end == -1 else end
            elif self.text.startswith("/*", self.pos):
                depth = 1
                self.pos += 2
                while self.pos < self.n and depth:
                    if self.text.startswith("/*", self.pos):
                        depth += 1
                        self.pos += 2
                    elif self.text.startswith("*/", self.pos):
                        depth -= 1
                        self.pos += 2
                    else:
                        self.pos += 1
            else:
                return

    def take_docs(self) -> str | None:
        if not self.pending_docs:
            return None
        text = "\n".join(self.pending_docs).strip("\n")
        self.pending_docs = []
        return text or None

    def skip_attributes(self) -> None:
        while True:
            self.skip_trivia()
            if self.text.startswith("#", self.pos):
                save = self.pos
                self.pos += 1
                if self.text.startswith("!", self.pos):
                    self.pos += 1
                self.skip_trivia()
                if self.text.startswith("[", self.pos):
                    self.read_balanced("[", "]")
                else:
                    self.pos = save
                    return
            else:
                return

    def peek_word(self) -> str | None:
        m = _WORD_RE.match(self.text, self.pos)
        return m.group(0) if m else None

    def read_word(self) -> str:
        m = _WORD_RE.match(self.text, self.pos)
        if not m:
            raise self.error("expected identifier")
        self.pos = m.end()
        return m.group(0)

    def at(self, literal: str) -> bool:
        return self.text.startswith(literal, self.pos)

    def expect(self, literal: str) -> None:
        if not self.at(literal):
            raise self.error(f"expected {literal!r}")
        self.pos += len(literal)

    def read_balanced(self, open_ch: str, close_ch: str) -> str:
        """Consume a balanced bracket group, returning it verbatim."""
        if not self.at(open_ch):
            raise self.error(f"expected {open_ch!r}")
        start = self.pos
        depth = 0
        while self.pos < self.n:
            c = self.text[self.pos]
            if c == '"':
                self.pos += 1
                while self.pos < self.n and self.text[self.pos] != '"':
                    if self.text[self.pos] == "\\":
                        self.pos += 1
                    self.pos += 1
                self.pos += 1
                continue
            if c == "'":
                if self.pos + 1 < self.n and self.text[self.pos + 1] == "\\":
                    self.pos += 2
                    while self.pos < self.n and self.text[self.pos] != "'":
                        self.pos += 1
                    self.pos += 1
                elif self.pos + 2 < self.n and self.text[self.pos + 2] == "'":
                    self.pos += 3
                else:
                    self.pos += 1
                continue
            if self.text.startswith("//", self.pos):
                end = self.text.find("\n", self.pos)
                self.pos = self.n if end == -1 else end
                continue
            if self.text.startswith("/*", self.pos):
                d = 1
                self.pos += 2
                while self.pos < self.n and d:
                    if self.text.startswith("/*", self.pos):
                        d += 1
                        self.pos += 2
                    elif self.text.startswith("*/", self.pos):
                        d -= 1
                        self.pos += 2
                    else:
                        self.pos += 1
                continue
            if c == open_ch:
                depth += 1
            elif c == close_ch:
                depth -= 1
                if depth == 0:
                    self.pos += 1
                    return self.text[start : self.pos]
            self.pos += 1
        raise ParseError(self.file, self.line_at(start), f"unbalanced {open_ch!r}")

    def read_generics(self) -> str:
        """Consume a <...> generic parameter list if present."""
        self.skip_trivia()
        if not self.at("<"):
            return ""
        start = self.pos
        depth = 0
        while self.pos < self.n:
            c = self.text[self.pos]
            if c == "<":
                depth += 1
            elif c == ">":
                if self.pos > 0 and self.text[self.pos - 1] == "-":
                    pass
                else:
                    depth -= 1
                    if depth == 0:
                        self.pos += 1
                        return self.text[start : self.pos]
            elif c in "([{":
                # bracket groups inside generics (const generic defaults)
                self.read_balanced(c, {"(": ")", "[": "]", "{": "}"}[c])
                continue
            self.pos += 1
        raise ParseError(self.file, self.line_at(start), "unbalanced generics")

    def skip_to_semicolon(self) -> None:
        while self.pos < self.n:
            self.skip_trivia()
            if self.eof():
                return
            c = self.text[self.pos]
            if c == ";":
                self.pos += 1
                return
            if c in "([{":
                self.read_balanced(c, {"(": ")", "[": "]", "{": "}"}[c])
                continue
            if c == '"':
                self.pos += 1
                while self.pos < self.n and self.text[self.pos] != '"':
                    if self.text[self.pos] == "\\":
                        self.pos += 1
                    self.pos += 1
                self.pos += 1
                continue
            if c == "'":
                if self.pos + 1 < self.n and self.text[self.pos + 1] == "\\":
                    self.pos += 2
                    while self.pos < self.n and self.text[self.pos] != "'":
                        self.pos += 1
                    self.pos += 1
                elif self.pos + 2 < self.n and self.text[self.pos + 2] == "'":
                    self.pos += 3
                else:
                    self.pos += 1
                continue
            self.pos += 1
        return


class _FileParser:
    def __init__(self, text: str, file: str, module: str):
        self.sc = _Scanner(text, file)
        self.file = file
        self.root_module = module
        self.objects: list[LanguageObject] = []
        self.references: list[Reference] = []
        # trait impls needing referrer resolution once all objects are known
        self.deferred_impl_refs: list[tuple[str, str, str]] = []  # (self name, trait name, module)

    # -- item walkers ------------------------------------------------------

    def parse(self) -> None:
        self.parse_items(self.root_module, stop_at_brace=False)
        self.sc.skip_trivia()
        if not self.sc.eof():
            raise self.sc.error("unexpected trailing input")

    def parse_items(self, module: str, stop_at_brace: bool) -> None:
        sc = self.sc
        while True:
            sc.skip_attributes()
            sc.skip_trivia()
            if sc.eof():
                if stop_at_brace:
                    raise sc.error("unexpected end of file in block")
                return
            if sc.at("}"):
                if stop_at_brace:
                    sc.pos += 1
                    return
                raise sc.error("unbalanced '}'")
            self.parse_item(module)

    def parse_item(self, module: str) -> None:
        sc = self.sc
        docs = sc.take_docs()
        start = sc.pos
        quals: list[str] = []
        while True:
            word = sc.peek_word()
            if word is None:
                raise sc.error("expected item")
            if word == "verus":
                save = sc.pos
                sc.read_word()
                sc.skip_trivia()
                if sc.at("!"):
                    sc.pos += 1
                    sc.skip_trivia()
                    sc.expect("{")
                    self.parse_items(module, stop_at_brace=True)
                    return
                sc.pos = save
                raise sc.error("unsupported item 'verus'")
            if word in _QUALIFIERS:
                sc.read_word()
                sc.skip_trivia()
                if word == "pub" and sc.at("("):
                    sc.read_balanced("(", ")")
                    sc.skip_trivia()
                if word == "spec" and sc.at("("):
                    sc.read_balanced("(", ")")  # spec(checked)
                    sc.skip_trivia()
                quals.append(word)
                continue
            break

        word = sc.peek_word()
        if word == "fn":
            sc.read_word()
            self.parse_fn(module, quals, docs, start, self_type=None)
        elif word == "struct":
            sc.read_word()
            self.parse_struct(module, docs, start)
        elif word == "enum":
            sc.read_word()
            self.parse_enum(module, docs, start)
        elif word == "trait":
            sc.read_word()
            self.parse_trait(module, docs, start)
        elif word == "type":
            sc.read_word()
            self.parse_alias(module, docs, start)
        elif word == "impl":
            sc.read_word()
            self.parse_impl(module)
        elif word == "mod":
            sc.read_word()
            sc.skip_trivia()
            name = sc.read_word()
            sc.skip_trivia()
            if sc.at(";"):
                sc.pos += 1
                return
            sc.expect("{")
            child = f"{module}::{name}" if module else name
            self.parse_items(child, stop_at_brace=True)
        elif word in {"use", "extern", "global", "macro_rules"} or "const" in quals or "static" in quals:
            if word == "macro_rules":
                sc.read_word()
                sc.skip_trivia()
                if sc.at("!"):
                    sc.pos += 1
                sc.skip_trivia()
                sc.read_word()
                sc.skip_trivia()
                sc.read_balanced("{", "}")
                return
            sc.skip_to_semicolon()
        elif word is not None and not quals:
            # bare macro invocation at item level: name!(...) or name!{...}
            save = sc.pos
            sc.read_word()
            sc.skip_trivia()
            if sc.at("!"):
                sc.pos += 1
                sc.skip_trivia()
                if sc.at("{"):
                    sc.read_balanced("{", "}")
                else:
                    sc.skip_to_semicolon()
                return
            sc.pos = save
            raise sc.error(f"unsupported item {word!r}")
        else:
            raise sc.error(f"unsupported item {word!r}")

    # -- functions ---------------------------------------------------------

    def parse_fn(
        self,
        module: str,
        quals: list[str],
        docs: str | None,
        start: int,
        self_type: str | None,
    ) -> None:
        sc = self.sc
        sc.skip_trivia()
        name = sc.read_word()
        sc.read_generics()
        sc.skip_trivia()
        params = sc.read_balanced("(", ")")

        # scan the return type and any where clause up to a clause keyword,
        # the body, or a terminating semicolon
        ret_start = sc.pos
        clause_word = None
        while True:
            sc.skip_trivia()
            if sc.eof():
                raise sc.error("unexpected end of function")
            if sc.at("{") or sc.at(";"):
                break
            c = sc.text[sc.pos]
            if c in "([":
                sc.read_balanced(c, ")" if c == "(" else "]")
                continue
            if c == "<":
                sc.read_generics()
                continue
            word = sc.peek_word()
            if word and word in _CLAUSE_KEYWORDS:
                clause_word = word
                break
            if word:
                sc.read_word()
            else:
                sc.pos += 1
        sig_end = sc.pos
        signature = sc.text[start:sig_end].rstrip()
        ret_text = sc.text[ret_start:sig_end]

        requires: list[str] = []
        ensures: list[str] = []
        while clause_word is not None:
            sc.read_word()  # consume the keyword
            section_start = sc.pos
            next_word = None
            while True:
                sc.skip_trivia()
                if sc.eof():
                    break
                if sc.at("{") or sc.at(";"):
                    break
                c = sc.text[sc.pos]
                if c in "([":
                    sc.read_balanced(c, ")" if c == "(" else "]")
                    continue
                w = sc.peek_word()
                if w and w in _CLAUSE_KEYWORDS:
                    next_word = w
                    break
                if w:
                    sc.read_word()
                elif c == "|":
                    sc.pos += 1
                else:
                    sc.pos += 1
            section = sc.text[section_start : sc.pos]
            if clause_word == "requires":
                requires = [_normalize_clause(c) for c in _split_top_level(section, angles=False)]
            elif clause_word == "ensures":
                ensures = [_normalize_clause(c) for c in _split_top_level(section, angles=False)]
            clause_word = next_word

        sc.skip_trivia()
        body = None
        if sc.at("{"):
            body = sc.read_balanced("{", "}")
        elif sc.at(";"):
            sc.pos += 1
        else:
            raise sc.error("expected function body or ';'")
        end = sc.pos

        if "spec" in quals:
            kind = ObjectKind.SPEC_FUNCTION
        elif "proof" in quals:
            kind = ObjectKind.LEMMA_FUNCTION
        else:
            kind = ObjectKind.FUNCTION

        if self_type:
            path = f"{module}::{self_type}::{name}" if module else f"{self_type}::{name}"
        else:
            path = f"{module}::{name}" if module else name

        self.objects.append(
            LanguageObject(
                path=path,
                kind=kind,
                signature=signature,
                requires=requires,
                ensures=ensures,
                doc_comment=docs,
                body=body,
                file=self.file,
                span=(sc.line_at(start), sc.line_at(end - 1)),
            )
        )

        for tok in self._signature_tokens(params, ret_text, self_type):
            self.references.append(Reference(path, tok, RefContext.SIGNATURE))
        if self_type:
            self.references.append(Reference(path, self_type, RefContext.IMPL))
        if body:
            inner = body[1:-1]
            for tok in _call_tokens(inner, self_type):
                self.references.append(Reference(path, tok, RefContext.BODY))
        for clause in requires + ensures:
            for tok in _call_tokens(clause, self_type):
                self.references.append(Reference(path, tok, RefContext.SPEC_CLAUSE))

    def _signature_tokens(
        self, params: str, ret_text: str, self_type: str | None
    ) -> list[str]:
        tokens: list[str] = []
        inner = params[1:-1]
        for param in _split_top_level(inner):
            bare = param.lstrip("&").strip()
            for prefix in ("mut ", "tracked ", "ghost "):
                if bare.startswith(prefix):
                    bare = bare[len(prefix):].strip()
            if bare == "self" or bare.startswith("self:") or bare.startswith("self "):
                continue
            pieces = _split_top_level(param, ":")
            type_part = pieces[-1] if len(pieces) > 1 else param
            tokens.extend(_type_tokens(type_part))
        arrow = ret_text.find("->")
        if arrow != -1:
            rest = ret_text[arrow + 2 :]
            where = re.search(r"\bwhere\b", rest)
            if where:
                rest = rest[: where.start()]
            tokens.extend(_type_tokens(rest))
        if self_type:
            tokens = [self_type + t[len("Self"):] if t.split("::")[0] == "Self" else t for t in tokens]
        return [t for t in tokens if t.split("::")[0] != "Self"]

    # -- types -------------------------------------------------------------

    def parse_struct(self, module: str, docs: str | None, start: int) -> None:
        sc = self.sc
        sc.skip_trivia()
        name = sc.read_word()
        sc.read_generics()
        sig_end = sc.pos
        sc.skip_trivia()
        path = f"{module}::{name}" if module else name
        body = None
        field_types: list[str] = []
        if sc.at("{"):
            body = sc.read_balanced("{", "}")
            for fld in _split_top_level(body[1:-1]):
                pieces = _split_top_level(fld, ":")
                if len(pieces) > 1:
                    field_types.extend(_type_tokens(pieces[-1]))
        elif sc.at("("):
            tup = sc.read_balanced("(", ")")
            body = tup
            for part in _split_top_level(tup[1:-1]):
                field_types.extend(_type_tokens(part))
            sc.skip_trivia()
            if sc.at(";"):
                sc.pos += 1
        elif sc.at(";"):
            sc.pos += 1
        else:
            raise sc.error("expected struct body")
        end = sc.pos
        self.objects.append(
            LanguageObject(
                path=path,
                kind=ObjectKind.STRUCT,
                signature=sc.text[start:sig_end].rstrip(),
                doc_comment=docs,
                body=body,
                file=self.file,
                span=(sc.line_at(start), sc.line_at(end - 1)),
            )
        )
        for tok in field_types:
            self.references.append(Reference(path, tok, RefContext.FIELD))

    def parse_enum(self, module: str, docs: str | None, start: int) -> None:
        sc = self.sc
        sc.skip_trivia()
        name = sc.read_word()
        sc.read_generics()
        sig_end = sc.pos
        sc.skip_trivia()
        path = f"{module}::{name}" if module else name
        body = sc.read_balanced("{", "}")
        member_types: list[str] = []
        for variant in _split_top_level(body[1:-1]):
            m = re.match(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*(.*)", variant, re.S)
            if not m:
                continue
            payload = m.group(2).strip()
            if payload.startswith("("):
                for part in _split_top_level(payload[1 : payload.rfind(")")]):
                    member_types.extend(_type_tokens(part))
            elif payload.startswith("{"):
                for fld in _split_top_level(payload[1 : payload.rfind("}")]):
                    pieces = _split_top_level(fld, ":")
                    if len(pieces) > 1:
                        member_types.extend(_type_tokens(pieces[-1]))
        end = sc.pos
        self.objects.append(
            LanguageObject(
                path=path,
                kind=ObjectKind.ENUM,
                signature=sc.text[start:sig_end].rstrip(),
                doc_comment=docs,
                body=body,
                file=self.file,
                span=(sc.line_at(start), sc.line_at(end - 1)),
            )
        )
        for tok in member_types:
            self.references.append(Reference(path, tok, RefContext.FIELD))

    def parse_trait(self, module: str, docs: str | None, start: int) -> None:
        sc = self.sc
        sc.skip_trivia()
        name = sc.read_word()
        sc.read_generics()
        sig_end = sc.pos
        # skip supertraits / where clause up to the body
        while True:
            sc.skip_trivia()
            if sc.eof():
                raise sc.error("unexpected end of trait")
            if sc.at("{"):
                break
            if sc.at(";"):
                sc.pos += 1
                break
            c = sc.text[sc.pos]
            if c == "<":
                sc.read_generics()
            elif _WORD_RE.match(sc.text, sc.pos):
                sc.read_word()
            else:
                sc.pos += 1
        if sc.text[sc.pos - 1] != ";":
            sc.read_balanced("{", "}")
        end = sc.pos
        path = f"{module}::{name}" if module else name
        self.objects.append(
            LanguageObject(
                path=path,
                kind=ObjectKind.TRAIT,
                signature=sc.text[start:sig_end].rstrip(),
                doc_comment=docs,
                file=self.file,
                span=(sc.line_at(start), sc.line_at(end - 1)),
            )
        )

    def parse_alias(self, module: str, docs: str | None, start: int) -> None:
        sc = self.sc
        sc.skip_trivia()
        name = sc.read_word()
        sc.read_generics()
        sc.skip_trivia()
        sc.expect("=")
        rhs_start = sc.pos
        while not sc.eof() and not sc.at(";"):
            c = sc.text[sc.pos]
            if c in "([{<":
                if c == "<":
                    sc.read_generics()
                else:
                    sc.read_balanced(c, {"(": ")", "[": "]", "{": "}"}[c])
                continue
            sc.pos += 1
        rhs = sc.text[rhs_start : sc.pos]
        sc.expect(";")
        end = sc.pos
        path = f"{module}::{name}" if module else name
        self.objects.append(
            LanguageObject(
                path=path,
                kind=ObjectKind.TYPE_ALIAS,
                signature=sc.text[start:end].rstrip(),
                doc_comment=docs,
                file=self.file,
                span=(sc.line_at(start), sc.line_at(end - 1)),
            )
        )
        for tok in _type_tokens(rhs):
            self.references.append(Reference(path, tok, RefContext.ALIAS))

    # -- impl blocks -------------------------------------------------------

    def parse_impl(self, module: str) -> None:
        sc = self.sc
        sc.read_generics()
        header_start = sc.pos
        while True:
            sc.skip_trivia()
            if sc.eof():
                raise sc.error("unexpected end of impl header")
            if sc.at("{"):
                break
            c = sc.text[sc.pos]
            if c == "<":
                sc.read_generics()
            elif c in "([":
                sc.read_balanced(c, ")" if c == "(" else "]")
            elif _WORD_RE.match(sc.text, sc.pos):
                sc.read_word()
            else:
                sc.pos += 1
        header = sc.text[header_start : sc.pos]
        where = re.search(r"\bwhere\b", header)
        if where:
            header = header[: where.start()]
        parts = re.split(r"\bfor\b", header, maxsplit=1)
        if len(parts) == 2:
            trait_name = self._head_name(parts[0])
            self_name = self._head_name(parts[1])
        else:
            trait_name = None
            self_name = self._head_name(parts[0])
        if self_name is None:
            raise sc.error("cannot determine impl self type")
        if trait_name is not None:
            self.deferred_impl_refs.append((self_name, trait_name, module))

        sc.expect("{")
        while True:
            sc.skip_attributes()
            sc.skip_trivia()
            if sc.eof():
                raise sc.error("unexpected end of impl block")
            if sc.at("}"):
                sc.pos += 1
                return
            docs = sc.take_docs()
            start = sc.pos
            quals: list[str] = []
            while True:
                word = sc.peek_word()
                if word is not None and word in _QUALIFIERS:
                    sc.read_word()
                    sc.skip_trivia()
                    if word in {"pub", "spec"} and sc.at("("):
                        sc.read_balanced("(", ")")
                        sc.skip_trivia()
                    quals.append(word)
                    continue
                break
            word = sc.peek_word()
            if word == "fn":
                sc.read_word()
                self.parse_fn(module, quals, docs, start, self_type=self_name)
            elif word == "type" or "const" in quals or "static" in quals or word in {"use",}:
                sc.skip_to_semicolon()
            else:
                raise sc.error(f"unsupported impl item {word!r}")

    @staticmethod
    def _head_name(text: str) -> str | None:
        text = text.strip().lstrip("&").strip()
        for prefix in ("mut ", "dyn "):
            if text.startswith(prefix):
                text = text[len(prefix):].strip()
        m = _PATH_TOKEN_RE.match(text)
        if not m:
            return None
        return re.sub(r"\s*::\s*", "::", m.group(0))


def module_for_file(rel_path: str) -> str:
    """Module path for a source file, from its crate-relative location."""
    parts = list(Path(rel_path).with_suffix("").parts)
    if parts and parts[0] == "src":
        parts = parts[1:]
    if parts and parts[-1] in {"lib", "main", "mod"}:
        parts = parts[:-1]
    return "::".join(parts)


def ingest_texts(texts: Mapping[str, str]) -> SymbolFacts:
    """Parse a corpus given as {relative path: source text}."""
    facts = SymbolFacts()
    deferred: list[tuple[str, str, str]] = []
    alias_refs: list[Reference] = []
    for rel_path in sorted(texts):
        parser = _FileParser(texts[rel_path], rel_path, module_for_file(rel_path))
        parser.parse()
        facts.objects.extend(parser.objects)
        facts.references.extend(parser.references)
        deferred.extend(parser.deferred_impl_refs)

    nodes: dict[str, LanguageObject] = {}
    for obj in facts.objects:
        if obj.path in nodes:
            raise ParseError(obj.file, obj.span[0], f"duplicate path {obj.path}")
        nodes[obj.path] = obj
    name_index = build_name_index(nodes)

    # attribute trait-impl references to the implementing type
    for self_name, trait_name, module in deferred:
        path, _ = resolve_name(self_name, module, nodes, name_index)
        if path is not None and nodes[path].kind in COMPOSITE_KINDS:
            facts.references.append(Reference(path, trait_name, RefContext.IMPL))

    # reciprocal alias references: the composite named by an alias also
    # points back at the alias
    for ref in list(facts.references):
        if ref.context is not RefContext.ALIAS:
            continue
        alias_obj = nodes.get(ref.referrer)
        if alias_obj is None or alias_obj.kind is not ObjectKind.TYPE_ALIAS:
            continue
        module = "::".join(ref.referrer.split("::")[:-1])
        path, _ = resolve_name(ref.referee, module, nodes, name_index)
        if path is not None and nodes[path].kind in COMPOSITE_KINDS:
            alias_refs.append(Reference(path, ref.referrer, RefContext.ALIAS))
    facts.references.extend(alias_refs)
    return facts


def ingest_source(root: str | Path, files: Iterable[str] | None = None) -> SymbolFacts:
    """Parse every .rs file under root (or just the named relative files)."""
    root = Path(root)
    if files is None:
        paths = sorted(p.relative_to(root).as_posix() for p in root.rglob("*.rs"))
    else:
        paths = sorted(files)
    texts = {rel: (root / rel).read_text() for rel in paths}
    return ingest_texts(texts)


def load_symbol_facts(path: str | Path) -> SymbolFacts:
    """Load pre-extracted facts from the JSON-lines interchange format."""
    return SymbolFacts.from_jsonl(Path(path).read_text())

"""Tokenizer for MM source text."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .diagnostics import Diagnostic, MMSyntaxError

KEYWORDS = frozenset("""
    attributes attribute where and all include constant base unit plus range
    name br format layout
""".split())

PUNCTUATION = ("<=", ">=", "<>", "(", ")", "[", "]", "{", "}", "<", ">", ",",
               ";", ":", "=", "+", "-", "*", "/", "^", "&")

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER = re.compile(r"[0-9]+(?:\.[0-9]+)?")
_UNIT_SYMBOL = re.compile(r"(?:[^\x00-\x7f]|\$)[^\s\x00-\x2f\x3a-\x40\x5b-\x5e\x60\x7b-\x7f]*")
_WS = re.compile(r"[ \t\r\f\v]+")
_TAG = re.compile(r"<[^<>]*>")


@dataclass(frozen=True)
class Token:
    kind: str   # keyword | ident | number | string | unit-symbol | punctuation | comment | tag | text
    text: str   # the exact source lexeme
    line: int
    col: int
    value: str | None = None  # decoded contents of string and text tokens

    @property
    def pos(self) -> tuple:
        return (self.line, self.col)

    @property
    def end_col(self) -> int:
        return self.col + len(self.text)

    def is_(self, kind: str, text: str | None = None) -> bool:
        return self.kind == kind and (text is None or self.text == text)


class _Scanner:
    def __init__(self, source: str):
        self.src = source
        self.i = 0
        self.line = 1
        self.col = 1
        self.tokens: list[Token] = []
        self.diags: list[Diagnostic] = []

    def advance(self, n: int) -> str:
        chunk = self.src[self.i:self.i + n]
        for ch in chunk:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.i += n
        return chunk

    def emit(self, kind: str, n: int, value: str | None = None) -> Token:
        line, col = self.line, self.col
        tok = Token(kind, self.advance(n), line, col, value)
        self.tokens.append(tok)
        return tok

    def error(self, line, col, message, code):
        self.diags.append(Diagnostic(line, col, message, "error", code))

    def run(self) -> list:
        src = self.src
        while self.i < len(src):
            ch = src[self.i]
            if ch == "\n":
                self.advance(1)
                continue
            m = _WS.match(src, self.i)
            if m:
                self.advance(m.end() - self.i)
                continue
            if src.startswith("//", self.i):
                end = src.find("\n", self.i)
                end = len(src) if end < 0 else end
                self.emit("comment", end - self.i)
                continue
            if src.startswith("/*", self.i):
                self.block_comment()
                continue
            if ch == '"':
                self.string()
                continue
            m = _NUMBER.match(src, self.i)
            if m:
                self.emit("number", m.end() - self.i)
                continue
            m = _IDENT.match(src, self.i)
            if m:
                word = m.group()
                tok = self.emit("keyword" if word in KEYWORDS else "ident", len(word))
                if tok.text == "layout":
                    self.layout()
                continue
            m = _UNIT_SYMBOL.match(src, self.i)
            if m:
                self.emit("unit-symbol", m.end() - self.i)
                continue
            for p in PUNCTUATION:
                if src.startswith(p, self.i):
                    self.emit("punctuation", len(p))
                    break
            else:
                self.error(self.line, self.col, f"Illegal character {ch!r}", "IllegalCharacter")
                self.advance(1)
        return self.tokens

    def block_comment(self):
        start = self.i
        line, col = self.line, self.col
        depth = 0
        j = self.i
        while j < len(self.src):
            if self.src.startswith("/*", j):
                depth += 1
                j += 2
            elif self.src.startswith("*/", j):
                depth -= 1
                j += 2
                if depth == 0:
                    break
            else:
                j += 1
        if depth:
            self.error(line, col, "Unterminated comment", "UnterminatedComment")
        self.emit("comment", j - start)

    def string(self):
        line, col = self.line, self.col
        j = self.i + 1
        out = []
        while j < len(self.src) and self.src[j] != "\n":
            ch = self.src[j]
            if ch == "\\" and j + 1 < len(self.src) and self.src[j + 1] in '"\\':
                out.append(self.src[j + 1])
                j += 2
                continue
            if ch == '"':
                self.emit("string", j + 1 - self.i, "".join(out))
                return
            out.append(ch)
            j += 1
        self.error(line, col, "Unterminated string", "UnterminatedString")
        self.advance(j - self.i)

    def layout(self):
        """Everything after ``layout`` is HTML-like tags and text runs."""
        src = self.src
        while self.i < len(src):
            ch = src[self.i]
            if ch.isspace():
                self.advance(1)
                continue
            if src.startswith("//", self.i):
                end = src.find("\n", self.i)
                end = len(src) if end < 0 else end
                self.emit("comment", end - self.i)
                continue
            if ch == "<":
                m = _TAG.match(src, self.i)
                if not m:
                    self.error(self.line, self.col, "Unterminated tag", "UnterminatedTag")
                    self.advance(len(src) - self.i)
                    return
                self.emit("tag", m.end() - self.i)
                continue
            end = src.find("<", self.i)
            end = len(src) if end < 0 else end
            raw = src[self.i:end].rstrip()
            self.emit("text", len(raw), unescape_text(" ".join(raw.split())))


def unescape_text(text: str) -> str:
    return (text.replace("&lt;", "<").replace("&gt;", ">")
            .replace("&quot;", '"').replace("&amp;", "&"))


def escape_text(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def tokenize(source: str, keep_comments: bool = True) -> list:
    """Split MM source into tokens.

    Raises :class:`MMSyntaxError` carrying every lexical diagnostic when the
    text contains unterminated strings or comments or illegal characters.
    """
    scanner = _Scanner(source)
    tokens = scanner.run()
    if scanner.diags:
        raise MMSyntaxError(scanner.diags)
    if not keep_comments:
        tokens = [t for t in tokens if t.kind != "comment"]
    return tokens


def render_tokens(tokens) -> str:
    """Join token lexemes with single spaces (comments end with a newline)."""
    parts = []
    for t in tokens:
        parts.append(t.text + ("\n" if t.kind == "comment" else " "))
    return "".join(parts)

"""Tokenizer for RailLite source text."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ParseError

KEYWORDS = frozenset({
    "model", "field", "controller", "action", "def", "let", "for", "in",
    "if", "else", "render", "link_to", "form_to", "global", "param",
})

_PUNCT2 = ("==", "!=", "&&", "||")
_PUNCT1 = "{}(),:.<>=+-*/!"


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT | KW | INT | FLOAT | STRING | punct text | EOF
    text: str
    line: int
    col: int

    @property
    def value(self):
        if self.kind == "INT":
            return int(self.text)
        if self.kind == "FLOAT":
            return float(self.text)
        return self.text


def tokenize(source: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch == '"':
            j = i + 1
            buf = []
            while j < n and source[j] != '"':
                if source[j] == "\\" and j + 1 < n:
                    buf.append(source[j + 1])
                    j += 2
                elif source[j] == "\n":
                    raise ParseError(start_line, start_col, "closing quote", "newline")
                else:
                    buf.append(source[j])
                    j += 1
            if j >= n:
                raise ParseError(start_line, start_col, "closing quote", "end of input")
            toks.append(Token("STRING", "".join(buf), start_line, start_col))
            col += (j + 1) - i
            i = j + 1
            continue
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            is_float = False
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            text = source[i:j]
            toks.append(Token("FLOAT" if is_float else "INT", text, start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            kind = "KW" if text in KEYWORDS else "IDENT"
            toks.append(Token(kind, text, start_line, start_col))
            col += j - i
            i = j
            continue
        two = source[i:i + 2]
        if two in _PUNCT2:
            toks.append(Token(two, two, start_line, start_col))
            i += 2
            col += 2
            continue
        if ch in _PUNCT1:
            toks.append(Token(ch, ch, start_line, start_col))
            i += 1
            col += 1
            continue
        raise ParseError(line, col, "a token", ch)
    toks.append(Token("EOF", "", line, col))
    return toks

from __future__ import annotations

import re
from typing import NamedTuple

from ..errors import ModelSyntaxError


class Token(NamedTuple):
    kind: str  # NUM, STR, IDENT, OP, EOF
    value: object
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<str>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<op><=|>=|==|!=|~=|[-+*/^<>=(){}\[\],;.])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", "\\": "\\", '"': '"', "'": "'"}


def _unescape(body: str) -> str:
    out = []
    it = iter(body)
    for ch in it:
        if ch == "\\":
            nxt = next(it, "")
            out.append(_ESCAPES.get(nxt, nxt))
        else:
            out.append(ch)
    return "".join(out)


def tokenize(text: str, source=None) -> list:
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ModelSyntaxError(f"unexpected character {text[pos]!r}", line, col, source)
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "num":
            tokens.append(Token("NUM", float(lexeme), line, col))
        elif kind == "ident":
            tokens.append(Token("IDENT", lexeme, line, col))
        elif kind == "str":
            tokens.append(Token("STR", _unescape(lexeme[1:-1]), line, col))
        elif kind == "op":
            tokens.append(Token("OP", "!=" if lexeme == "~=" else lexeme, line, col))
        pos = m.end()
    tokens.append(Token("EOF", None, line, pos - line_start + 1))
    return tokens

"""Tokenizer shared by the document parser and the quoted guarantee/demand syntax."""

from __future__ import annotations

import re
from dataclasses import dataclass

_TOKEN_RE = re.compile(
    r"""
     (?P<ws>[ \t\r\f\v]+)
    |(?P<nl>\n)
    |(?P<comment>\#[^\n]*)
    |(?P<string>"[^"\n]*")
    |(?P<badstring>"[^"\n]*)
    |(?P<arrow>->)
    |(?P<number>\d+[A-Za-z0-9_]*)
    |(?P<word>[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z0-9_]+)*)
    |(?P<punct>[{}(),.:=])
    |(?P<char>.)
    """,
    re.VERBOSE,
)

_DURATION = re.compile(r"\d+s")
_INT = re.compile(r"\d+")
IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class Token:
    kind: str  # word | int | duration | string | arrow | punct | badnumber | badstring | char | eof
    text: str
    line: int
    col: int

    def __str__(self) -> str:
        if self.kind == "eof":
            return "end of input"
        return repr(self.text)


def tokenize(text: str, line: int = 1, col: int = 1) -> list[Token]:
    """Split ``text`` into tokens; never raises.

    ``line``/``col`` give the 1-based position of ``text[0]`` so that the
    contents of a quoted string can be re-tokenized with real positions.
    Unrecognised characters come back as ``char`` tokens for the parser to
    reject with a location.
    """
    out: list[Token] = []
    line_start = -col  # col = pos - line_start
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        pos = m.start()
        tcol = pos - line_start
        s = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end() - 1
            continue
        if kind in ("ws", "comment"):
            continue
        if kind == "number":
            if _INT.fullmatch(s):
                kind = "int"
            elif _DURATION.fullmatch(s):
                kind = "duration"
            else:
                kind = "badnumber"
        out.append(Token(kind, s, line, tcol))
    end_col = len(text) - line_start
    out.append(Token("eof", "", line, max(end_col, 1)))
    return out

"""Recursive-descent parser for catalogs, system manifests and scenarios.

Parsing never raises on bad input. Every failure becomes a located
:class:`Diagnostic`; after an error the parser skips to the next line that
starts with a declaration keyword and carries on, so one run reports as many
independent problems as possible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from consert.dsl.diagnostics import Diagnostic, DslError, Severity
from consert.dsl.lexer import IDENT, Token, tokenize
from consert.events import Bind, Expect, Join, Leave, Load, Root, Scenario, SetRte, Step
from consert.model import (
    TRUE,
    Catalog,
    CatalogProperty,
    ConditionFunction,
    ConSert,
    Demand,
    DemandRef,
    GateExpr,
    GateOp,
    Guarantee,
    IntegrityLevel,
    Loc,
    Mode,
    PropertyGuarantee,
    PropertyParams,
    RequiredSlot,
    RteKind,
    RteRef,
    RuntimeEvidence,
    ServiceType,
    SystemManifest,
    Tri,
)

Model = Union[Catalog, SystemManifest, Scenario]

HEADERS = {"catalog": "catalog", "system": "manifest", "scenario": "scenario"}
EXTENSIONS = {".consert-catalog": "catalog", ".consert": "manifest", ".consert-scenario": "scenario"}

_KEYWORDS = {
    "catalog": ("servicetype",),
    "manifest": ("provides", "requires", "rte", "demand", "guarantee"),
    "scenario": ("load", "root", "event"),
}

_LEVELS = {lvl.value: lvl for lvl in IntegrityLevel}
_MODES = {m.value: m for m in Mode}
_KINDS = {k.value: k for k in RteKind}
_TRI = {t.value: t for t in Tri}


@dataclass(frozen=True)
class SourceDocument:
    text: str
    path: str = "<string>"

    @property
    def kind(self) -> Optional[str]:
        """``catalog``, ``manifest`` or ``scenario`` from the header line, if recognisable."""
        for tok in tokenize(self.text):
            return HEADERS.get(tok.text) if tok.kind == "word" else None
        return None

    @classmethod
    def from_path(cls, path) -> "SourceDocument":
        p = Path(path)
        return cls(p.read_text(encoding="utf-8"), str(path))


@dataclass
class ParseResult:
    model: Optional[Model]
    diagnostics: list[Diagnostic] = field(default_factory=list)
    kind: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.model is not None


class _Fail(Exception):
    def __init__(self, code: str, message: str, tok: Token):
        super().__init__(message)
        self.code = code
        self.message = message
        self.line = tok.line
        self.col = tok.col


class _Stream:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.peek()
        if t.kind != "eof":
            self.pos += 1
        return t

    def at_eof(self) -> bool:
        return self.peek().kind == "eof"

    def is_punct(self, p: str) -> bool:
        t = self.peek()
        return t.kind == "punct" and t.text == p

    def is_word(self, w: str) -> bool:
        t = self.peek()
        return t.kind == "word" and t.text == w

    def punct(self, p: str) -> Token:
        t = self.peek()
        if t.kind == "punct" and t.text == p:
            return self.next()
        raise _unexpected(t, f"'{p}'")

    def word(self, w: str) -> Token:
        t = self.peek()
        if t.kind == "word" and t.text == w:
            return self.next()
        raise _unexpected(t, f"'{w}'")

    def ident(self, what: str) -> Token:
        t = self.peek()
        if t.kind == "word" and IDENT.fullmatch(t.text):
            return self.next()
        raise _unexpected(t, what)


def _unexpected(tok: Token, expected: str) -> _Fail:
    if tok.kind == "badstring":
        return _Fail("UNTERMINATED_STRING", "string is not closed on this line", tok)
    if tok.kind == "badnumber":
        return _Fail("BAD_NUMBER", f"malformed number {tok.text!r} (durations are <int>s)", tok)
    return _Fail("SYNTAX_ERROR", f"expected {expected}, found {tok}", tok)


def _loc(tok: Token) -> Loc:
    return Loc(tok.line, tok.col)


# --- quoted guarantee / demand syntax ------------------------------------

def _sub_stream(tok: Token) -> _Stream:
    return _Stream(tokenize(tok.text[1:-1], tok.line, tok.col + 1))


def _level(s: _Stream) -> IntegrityLevel:
    t = s.peek()
    if t.kind == "word" and t.text in _LEVELS:
        s.next()
        return _LEVELS[t.text]
    if t.kind in ("word", "int"):
        raise _Fail("UNKNOWN_LEVEL", f"unknown integrity level {t.text!r} (QM, a..e)", t)
    raise _unexpected(t, "an integrity level")


def _params(s: _Stream, closer: str) -> PropertyParams:
    """``{[<n>s],<mode>}`` (or the catalog's parenthesised form)."""
    opener = s.next()
    body: list[Token] = []
    while not (s.peek().kind == "punct" and s.peek().text == closer):
        t = s.peek()
        if t.kind == "eof":
            raise _Fail("BAD_PARAMS", f"parameter block opened here is not closed with '{closer}'", opener)
        body.append(s.next())
    s.next()
    shape = [t.kind if t.kind != "punct" else t.text for t in body]
    if shape == [",", "word"]:
        window_tok, mode_tok = None, body[1]
    elif len(shape) == 3 and shape[1:] == [",", "word"] and shape[0] in ("duration", "int", "badnumber"):
        window_tok, mode_tok = body[0], body[2]
    else:
        raise _Fail(
            "BAD_PARAMS",
            f"malformed parameter block, expected {opener.text}[<n>s],<mode>{closer}",
            opener,
        )
    window = None
    if window_tok is not None:
        if window_tok.kind != "duration":
            raise _Fail("BAD_DURATION", f"duration {window_tok.text!r} must be whole seconds like 30s", window_tok)
        window = int(window_tok.text[:-1])
    if mode_tok.text not in _MODES:
        raise _Fail("UNKNOWN_MODE", f"unknown mode {mode_tok.text!r} (Standstill, Moving, Any)", mode_tok)
    return PropertyParams(window, _MODES[mode_tok.text])


def _property(s: _Stream) -> PropertyGuarantee:
    name = s.ident("a property type name")
    if not s.is_punct("{"):
        raise _unexpected(s.peek(), "'{'")
    params = _params(s, "}")
    s.punct(".")
    s.word("AgPL")
    s.punct("=")
    return PropertyGuarantee(name.text, params, _level(s), _loc(name))


def _property_list(s: _Stream, allow_shortcut: bool):
    level = None
    props: list[PropertyGuarantee] = []
    if s.at_eof():
        return level, props
    while True:
        t = s.peek()
        if t.kind == "word" and t.text == "AgPL" and s.peek(1).text == "=":
            if not allow_shortcut:
                raise _Fail("SHORTCUT_NOT_ALLOWED", "a service-level integrity is only allowed in guarantees", t)
            if level is not None or props:
                raise _Fail("SHORTCUT_POSITION", "the service-level integrity must come first", t)
            s.next()
            s.next()
            level = _level(s)
        else:
            props.append(_property(s))
        if s.at_eof():
            break
        s.punct(",")
        if s.at_eof():
            break
    return level, props


def _guarantee_body(s: _Stream, label: str, loc: Optional[Loc]) -> Guarantee:
    name = s.ident("a service type name")
    s.punct("(")
    t = s.peek()
    if t.kind != "int":
        raise _unexpected(t, "an order number")
    s.next()
    order = int(t.text)
    if order < 1:
        raise _Fail("BAD_ORDER", "guarantee order numbers start at 1", t)
    s.punct(")")
    s.punct(":")
    level, props = _property_list(s, allow_shortcut=True)
    if not s.at_eof():
        raise _unexpected(s.peek(), "end of guarantee")
    return Guarantee(name.text, order, level, tuple(props), label, loc)


def parse_guarantee_spec(text: str, label: str = "") -> Guarantee:
    """Parse a bare guarantee string such as ``TIMBalingSwSc(1): AgPL = b, ...``.

    Raises :class:`DslError` with located diagnostics (columns relative to
    the start of ``text``).
    """
    s = _Stream(tokenize(text))
    try:
        return _guarantee_body(s, label, None)
    except _Fail as f:
        raise DslError([Diagnostic("<guarantee>", f.line, f.col, Severity.ERROR, f.code, f.message)]) from None


def _demand_body(s: _Stream, label: str, slot: str, loc: Optional[Loc]) -> Demand:
    name = s.ident("a service type name")
    s.punct(":")
    _, props = _property_list(s, allow_shortcut=False)
    if not s.at_eof():
        raise _unexpected(s.peek(), "end of demand")
    return Demand(label, slot, name.text, tuple(props), loc)


def _string(s: _Stream, what: str) -> Token:
    t = s.peek()
    if t.kind != "string":
        raise _unexpected(t, what)
    return s.next()


# --- condition expressions ----------------------------------------------

def _expr(s: _Stream, depth: int = 0):
    t = s.peek()
    if depth > 200:
        raise _Fail("NESTING_TOO_DEEP", "condition expression is nested too deeply", t)
    if t.kind == "word":
        if t.text == "TRUE":
            s.next()
            return TRUE
        if t.text == "demand":
            s.next()
            return DemandRef(s.ident("a demand label").text)
        if t.text == "rte":
            s.next()
            return RteRef(s.ident("a runtime evidence label").text)
        if t.text in ("AND", "OR"):
            s.next()
            s.punct("(")
            inputs = [_expr(s, depth + 1)]
            while s.is_punct(","):
                s.next()
                inputs.append(_expr(s, depth + 1))
            s.punct(")")
            return GateExpr(GateOp(t.text), tuple(inputs))
        if t.text in ("NOT", "XOR", "NAND", "NOR"):
            raise _Fail("UNKNOWN_GATE", f"gate {t.text} is not supported (AND, OR only)", t)
    raise _unexpected(t, "TRUE, demand <label>, rte <label>, AND(...) or OR(...)")


# --- documents ----------------------------------------------------------

class _DocParser:
    def __init__(self, text: str, path: str):
        self.text = text
        self.lines = text.split("\n")
        self.path = path
        self.s = _Stream(tokenize(text))
        self.diags: list[Diagnostic] = []
        self.labels: dict[str, Token] = {}
        first_on_line = set()
        seen_lines = set()
        for i, t in enumerate(self.s.toks):
            if t.line not in seen_lines:
                seen_lines.add(t.line)
                first_on_line.add(i)
        self.first_on_line = first_on_line

    def error(self, code: str, message: str, line: int, col: int) -> None:
        self.diags.append(Diagnostic(self.path, line, col, Severity.ERROR, code, message))

    def fail(self, f: _Fail) -> None:
        self.error(f.code, f.message, f.line, f.col)

    def resync(self, keywords, start: int) -> None:
        i = max(self.s.pos, start + 1)
        toks = self.s.toks
        while i < len(toks) and toks[i].kind != "eof":
            t = toks[i]
            if i in self.first_on_line and t.kind == "word" and t.text in keywords:
                break
            i += 1
        self.s.pos = min(i, len(toks) - 1)

    def unique_label(self, tok: Token) -> None:
        if tok.text in self.labels:
            prev = self.labels[tok.text]
            raise _Fail(
                "DUPLICATE_LABEL",
                f"label {tok.text!r} already declared at line {prev.line}",
                tok,
            )
        self.labels[tok.text] = tok

    def run(self) -> ParseResult:
        s = self.s
        if s.at_eof():
            self.error("EMPTY_DOCUMENT", "expected a 'catalog', 'system' or 'scenario' header", 1, 1)
            return ParseResult(None, self.diags)
        head = s.peek()
        kind = HEADERS.get(head.text) if head.kind == "word" else None
        if kind is None:
            self.error(
                "UNKNOWN_KEYWORD",
                f"document must start with 'catalog', 'system' or 'scenario', found {head}",
                head.line,
                head.col,
            )
            return ParseResult(None, self.diags)
        s.next()
        try:
            name = s.ident(f"a {head.text} name")
        except _Fail as f:
            self.fail(f)
            return ParseResult(None, self.diags, kind)
        body = getattr(self, f"_{kind}")
        model = body(name)
        if self.diags:
            return ParseResult(None, self.diags, kind)
        return ParseResult(model, [], kind)

    def _decls(self, kind: str, handlers) -> None:
        s = self.s
        keywords = _KEYWORDS[kind]
        while not s.at_eof():
            start = s.pos
            t = s.peek()
            try:
                if t.kind == "word" and t.text in keywords:
                    s.next()
                    handlers[t.text](t)
                elif t.kind == "word" and IDENT.fullmatch(t.text.replace("-", "_")):
                    raise _Fail("UNKNOWN_KEYWORD", f"unknown keyword {t.text!r} in {kind}", t)
                else:
                    raise _unexpected(t, "a declaration keyword (" + ", ".join(keywords) + ")")
                if not s.at_eof() and s.pos not in self.first_on_line:
                    raise _unexpected(s.peek(), "end of line")
            except _Fail as f:
                self.fail(f)
                self.resync(keywords, start)

    # catalog ------------------------------------------------------------

    def _catalog(self, name: Token) -> Catalog:
        s = self.s
        types: list[ServiceType] = []
        seen: dict[str, Token] = {}

        def servicetype(kw: Token) -> None:
            st = s.ident("a service type name")
            if st.text in seen:
                raise _Fail("DUPLICATE_LABEL", f"service type {st.text!r} already declared", st)
            seen[st.text] = st
            s.punct("{")
            props: list[CatalogProperty] = []
            pnames: set[str] = set()
            while not s.is_punct("}"):
                pk = s.peek()
                if pk.kind == "word" and pk.text == "property":
                    s.next()
                else:
                    if s.at_eof():
                        raise _Fail("SYNTAX_ERROR", f"service type {st.text!r} is not closed with '}}'", st)
                    raise _unexpected(pk, "'property' or '}'")
                pn = s.ident("a property type name")
                if pn.text in pnames:
                    raise _Fail("DUPLICATE_LABEL", f"property {pn.text!r} already declared", pn)
                if not s.is_punct("("):
                    raise _unexpected(s.peek(), "'('")
                props.append(CatalogProperty(pn.text, _params(s, ")"), _loc(pn)))
                pnames.add(pn.text)
            s.punct("}")
            types.append(ServiceType(st.text, tuple(props), _loc(st)))

        self._decls("catalog", {"servicetype": servicetype})
        return Catalog(name.text, tuple(types), _loc(name))

    # manifest -----------------------------------------------------------

    def _manifest(self, name: Token) -> SystemManifest:
        s = self.s
        provided: dict[str, Token] = {}
        slots: dict[str, RequiredSlot] = {}
        rtes: list[RuntimeEvidence] = []
        demands: list[Demand] = []
        pairs: list[tuple[Guarantee, ConditionFunction]] = []

        def provides(kw: Token) -> None:
            t = s.ident("a service type name")
            if t.text in provided:
                raise _Fail("DUPLICATE_LABEL", f"service {t.text!r} already provided", t)
            provided[t.text] = t

        def requires(kw: Token) -> None:
            slot = s.ident("a slot name")
            s.punct(":")
            st = s.ident("a service type name")
            if slot.text in slots:
                raise _Fail("DUPLICATE_LABEL", f"slot {slot.text!r} already declared", slot)
            slots[slot.text] = RequiredSlot(slot.text, st.text, _loc(slot))

        def rte(kw: Token) -> None:
            label = s.ident("a runtime evidence label")
            s.word("kind")
            k = s.peek()
            if not (k.kind == "word" and k.text in _KINDS):
                raise _unexpected(k, "'intra-device' or 'inter-device'")
            s.next()
            self.unique_label(label)
            rtes.append(RuntimeEvidence(label.text, _KINDS[k.text], Tri.UNKNOWN, _loc(label)))

        def demand(kw: Token) -> None:
            label = s.ident("a demand label")
            s.punct("=")
            text = _string(s, "a quoted demand")
            s.word("on")
            slot = s.ident("a slot name")
            d = _demand_body(_sub_stream(text), label.text, slot.text, _loc(label))
            self.unique_label(label)
            demands.append(d)

        def guarantee(kw: Token) -> None:
            label = s.ident("a guarantee label")
            s.punct("=")
            text = _string(s, "a quoted guarantee")
            s.word("when")
            when = s.peek()
            expr = _expr(s)
            g = _guarantee_body(_sub_stream(text), label.text, _loc(label))
            self.unique_label(label)
            pairs.append((g, ConditionFunction.from_expr(expr, label.text, _loc(when))))

        self._decls(
            "manifest",
            {"provides": provides, "requires": requires, "rte": rte, "demand": demand, "guarantee": guarantee},
        )
        return SystemManifest(
            name.text,
            tuple(provided),
            tuple(slots.values()),
            tuple(rtes),
            tuple(demands),
            ConSert.from_pairs(pairs),
            _loc(name),
        )

    # scenario -----------------------------------------------------------

    def _scenario(self, name: Token) -> Scenario:
        s = self.s
        steps: list = []

        def load(kw: Token) -> None:
            line = self.lines[kw.line - 1]
            raw = line[kw.col - 1 + len(kw.text):].split("#", 1)[0].strip()
            if len(raw) >= 2 and raw[0] == raw[-1] == '"':
                raw = raw[1:-1]
            if not raw or '"' in raw:
                raise _Fail("SYNTAX_ERROR", "expected a path after 'load'", kw)
            while not s.at_eof() and s.peek().line == kw.line:
                s.next()
            steps.append(Load(raw, _loc(kw)))

        def dotted() -> tuple[Token, Token]:
            a = s.ident("a system name")
            s.punct(".")
            return a, s.ident("a name")

        def root(kw: Token) -> None:
            a, b = dotted()
            steps.append(Root(a.text, b.text, _loc(kw)))

        def event(kw: Token) -> None:
            t = s.peek()
            w = t.text if t.kind == "word" else None
            if w == "join":
                s.next()
                action = Join(s.ident("a system name").text)
            elif w == "leave":
                s.next()
                action = Leave(s.ident("a system name").text)
            elif w == "bind":
                s.next()
                c, slot = dotted()
                if s.peek().kind != "arrow":
                    raise _unexpected(s.peek(), "'->'")
                s.next()
                p, svc = dotted()
                action = Bind(c.text, slot.text, p.text, svc.text)
            elif w == "set-rte":
                s.next()
                sys_, label = dotted()
                v = s.peek()
                if not (v.kind == "word" and v.text in _TRI):
                    raise _unexpected(v, "'true', 'false' or 'unknown'")
                s.next()
                action = SetRte(sys_.text, label.text, _TRI[v.text])
            elif w == "expect":
                s.next()
                sys_, svc = dotted()
                v = s.peek()
                if v.kind == "word" and v.text == "none":
                    s.next()
                    order = None
                elif v.kind == "word" and v.text == "order":
                    s.next()
                    n = s.peek()
                    if n.kind != "int":
                        raise _unexpected(n, "an order number")
                    s.next()
                    order = int(n.text)
                    if order < 1:
                        raise _Fail("BAD_ORDER", "guarantee order numbers start at 1", n)
                else:
                    raise _unexpected(v, "'order <n>' or 'none'")
                action = Expect(sys_.text, svc.text, order)
            elif w is not None and IDENT.fullmatch(w.replace("-", "_")):
                raise _Fail("UNKNOWN_KEYWORD", f"unknown event {w!r}", t)
            else:
                raise _unexpected(t, "join, leave, bind, set-rte or expect")
            steps.append(Step(action, _loc(kw)))

        self._decls("scenario", {"load": load, "root": root, "event": event})
        return Scenario(name.text, tuple(steps), _loc(name))


def parse(doc: Union[SourceDocument, str], path: str = "<string>") -> ParseResult:
    """Parse a catalog, manifest or scenario document."""
    if isinstance(doc, SourceDocument):
        text, path = doc.text, doc.path
    else:
        text = doc
    return _DocParser(text, path).run()


def load_document(path, expect: Optional[str] = None) -> Model:
    """Read and parse ``path``; raise :class:`DslError` on any error diagnostic."""
    res = parse(SourceDocument.from_path(path))
    if not res.ok:
        raise DslError(res.diagnostics)
    if expect is not None and res.kind != expect:
        raise DslError(
            [Diagnostic(str(path), 1, 1, Severity.ERROR, "WRONG_KIND", f"expected a {expect}, found a {res.kind}")]
        )
    return res.model

"""Textual process notation for environments, controllers, properties and
constraints, plus canonical serialization and Graphviz export.

Grammar (LL(1), comments run from ``//`` to end of line)::

    file   := decl+
    decl   := kind IDENT mods? "{" "init" IDENT ";" item* "}"
    kind   := "environment" | "controller" | "property" | "constraint"
    mods   := "complete"
    item   := ("alphabet" IDENT ("," IDENT)* ";")
            | (IDENT "-" IDENT ("," IDENT)* "->" IDENT ";")

States are introduced implicitly at first mention. A transition arrow with
several action names declares one transition per action. An ``alphabet``
item extends an LTS's action set beyond the actions its transitions
mention (a controller may need to disable an action everywhere, which
means carrying it in the alphabet without any transition). "err" is the
reserved error state name inside property and constraint declarations;
properties declared ``complete``, or written without mentioning "err",
get every missing (state, action) pair routed to the error state.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .lts import ERR, Alphabet, Kind, Lts, Triple, complete_property

KEYWORDS = frozenset(
    {"environment", "controller", "property", "constraint", "complete", "init", "alphabet"}
)

_KIND_WORDS = {
    "environment": Kind.ENVIRONMENT,
    "controller": Kind.CONTROLLER,
    "property": Kind.PROPERTY,
    "constraint": Kind.CONSTRAINT,
}

_IDENT_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_.]*\Z")
_TOKEN_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_.]*|->|[{};,\-]")

Span = tuple[int, int, int, int]  # start line, start col, end line, end col


class ParseError(Exception):
    """Syntax or semantic error with a position in the source text."""

    def __init__(self, message: str, line: int, column: int, token: str = ""):
        self.message = message
        self.line = line
        self.column = column
        self.token = token
        near = f" (near {token!r})" if token else ""
        super().__init__(f"{line}:{column}: {message}{near}")


@dataclass(frozen=True)
class ModelFile:
    """A parsed bundle: one environment plus named controllers, properties
    and constraints, with source spans for diagnostics."""

    environment: Lts
    controllers: dict[str, Lts] = field(default_factory=dict)
    properties: dict[str, Lts] = field(default_factory=dict)
    constraints: dict[str, Lts] = field(default_factory=dict)
    environment_name: str = "E"
    spans: dict[str, Span] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.environment.kind is not Kind.ENVIRONMENT:
            raise ValueError("environment slot must hold an environment LTS")
        for name, c in self.controllers.items():
            if c.kind is not Kind.CONTROLLER:
                raise ValueError(f"controller {name!r} has the wrong kind")
            missing = [a for a in self.environment.alphabet if a not in c.alphabet]
            if missing:
                raise ValueError(
                    f"controller {name!r} must include every environment action"
                    f" (missing: {', '.join(missing)})"
                )
        for name, p in self.properties.items():
            if p.kind is not Kind.PROPERTY:
                raise ValueError(f"property {name!r} has the wrong kind")
        for name, p in self.constraints.items():
            if p.kind is not Kind.CONSTRAINT:
                raise ValueError(f"constraint {name!r} has the wrong kind")


@dataclass(frozen=True)
class _Token:
    kind: str  # "ident" or "punct"
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//", 1)[0]
        pos = 0
        while pos < len(line):
            ch = line[pos]
            if ch.isspace():
                pos += 1
                continue
            m = _TOKEN_RE.match(line, pos)
            if m is None:
                raise ParseError("unexpected character", lineno, pos + 1, ch)
            text_ = m.group()
            kind = "ident" if _IDENT_RE.match(text_) else "punct"
            tokens.append(_Token(kind, text_, lineno, pos + 1))
            pos = m.end()
    last_line = text.count("\n") + 1
    tokens.append(_Token("eof", "", last_line, 1))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, message: str, tok: _Token | None = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(message, tok.line, tok.col, tok.text)

    def expect_punct(self, text: str) -> _Token:
        tok = self.peek()
        if tok.kind != "punct" or tok.text != text:
            raise self.fail(f"expected {text!r}")
        return self.advance()

    def expect_ident(self, what: str) -> _Token:
        tok = self.peek()
        if tok.kind != "ident":
            raise self.fail(f"expected {what}")
        return self.advance()

    def expect_name(self, what: str) -> _Token:
        tok = self.expect_ident(what)
        if tok.text in KEYWORDS:
            raise self.fail(f"reserved word {tok.text!r} cannot name a {what}", tok)
        return tok


class _Decl:
    def __init__(self, kind: Kind, name: str, complete: bool, span: Span):
        self.kind = kind
        self.name = name
        self.complete = complete
        self.span = span
        self.states: list[str] = []
        self._state_idx: dict[str, int] = {}
        self.actions: list[str] = []
        self._action_idx: dict[str, int] = {}
        self.transitions: set[Triple] = set()

    def state(self, name: str) -> int:
        idx = self._state_idx.get(name)
        if idx is None:
            idx = len(self.states)
            self._state_idx[name] = idx
            self.states.append(name)
        return idx

    def action(self, name: str) -> int:
        idx = self._action_idx.get(name)
        if idx is None:
            idx = len(self.actions)
            self._action_idx[name] = idx
            self.actions.append(name)
        return idx

    def to_lts(self) -> Lts:
        lts = Lts(
            tuple(self.states),
            Alphabet(tuple(self.actions)),
            frozenset(self.transitions),
            0,
            self.kind,
        )
        if self.kind in (Kind.PROPERTY, Kind.CONSTRAINT) and (
            self.complete or ERR not in self._state_idx
        ):
            lts = complete_property(lts)
        return lts


def _parse_decl(p: _Parser) -> _Decl:
    kind_tok = p.expect_ident("declaration kind")
    kind = _KIND_WORDS.get(kind_tok.text)
    if kind is None:
        raise p.fail(f"unknown kind {kind_tok.text!r}", kind_tok)
    name_tok = p.expect_name("declaration name")
    complete = False
    if p.peek().kind == "ident" and p.peek().text == "complete":
        p.advance()
        complete = True
        if kind not in (Kind.PROPERTY, Kind.CONSTRAINT):
            raise p.fail(
                "the complete modifier applies to properties and constraints only",
                name_tok,
            )
    p.expect_punct("{")
    init_tok = p.expect_ident("init")
    if init_tok.text != "init":
        raise p.fail("declaration body must start with an init line", init_tok)
    init_name = p.expect_name("state")
    p.expect_punct(";")

    decl = _Decl(kind, name_tok.text, complete, (kind_tok.line, kind_tok.col, 0, 0))
    decl.state(init_name.text)
    err_reserved = kind in (Kind.PROPERTY, Kind.CONSTRAINT)

    def state_token(what: str) -> _Token:
        tok = p.expect_ident(what)
        if tok.text in KEYWORDS:
            raise p.fail(f"reserved word {tok.text!r} cannot name a {what}", tok)
        return tok

    while True:
        tok = p.peek()
        if tok.kind == "punct" and tok.text == "}":
            closing = p.advance()
            decl.span = (decl.span[0], decl.span[1], closing.line, closing.col)
            return decl
        if tok.kind == "eof":
            raise p.fail("unterminated declaration")
        if tok.kind == "ident" and tok.text == "alphabet":
            p.advance()
            listed: set[str] = set()
            while True:
                act = state_token("action")
                if act.text in listed:
                    raise p.fail(f"duplicate action {act.text!r} in alphabet", act)
                listed.add(act.text)
                decl.action(act.text)
                if p.peek().kind == "punct" and p.peek().text == ",":
                    p.advance()
                    continue
                break
            p.expect_punct(";")
            continue
        src_tok = state_token("state")
        if err_reserved and src_tok.text == ERR:
            raise p.fail("the error state must be a sink", src_tok)
        p.expect_punct("-")
        action_toks = [state_token("action")]
        while p.peek().kind == "punct" and p.peek().text == ",":
            p.advance()
            action_toks.append(state_token("action"))
        p.expect_punct("->")
        dst_tok = state_token("state")
        p.expect_punct(";")
        src = decl.state(src_tok.text)
        dst = decl.state(dst_tok.text)
        for act in action_toks:
            decl.transitions.add((src, decl.action(act.text), dst))


def parse_model(text: str) -> ModelFile:
    """Parse the model notation; raises ParseError with a source position."""
    p = _Parser(_tokenize(text))
    if p.peek().kind == "eof":
        raise p.fail("empty model")
    decls: list[tuple[_Decl, _Token]] = []
    names: set[str] = set()
    while p.peek().kind != "eof":
        start = p.peek()
        decl = _parse_decl(p)
        if decl.name in names:
            raise ParseError(
                f"duplicate declaration name {decl.name!r}", start.line, start.col, decl.name
            )
        names.add(decl.name)
        decls.append((decl, start))

    environment: Lts | None = None
    environment_name = ""
    controllers: dict[str, Lts] = {}
    properties: dict[str, Lts] = {}
    constraints: dict[str, Lts] = {}
    spans: dict[str, Span] = {}
    controller_tokens: dict[str, _Token] = {}
    for decl, start in decls:
        lts = decl.to_lts()
        spans[decl.name] = decl.span
        if decl.kind is Kind.ENVIRONMENT:
            if environment is not None:
                raise ParseError(
                    "multiple environment declarations", start.line, start.col, decl.name
                )
            environment = lts
            environment_name = decl.name
        elif decl.kind is Kind.CONTROLLER:
            controllers[decl.name] = lts
            controller_tokens[decl.name] = start
        elif decl.kind is Kind.PROPERTY:
            properties[decl.name] = lts
        else:
            constraints[decl.name] = lts
    if environment is None:
        eof = p.peek()
        raise ParseError("missing environment declaration", eof.line, eof.col)
    for name, c in controllers.items():
        missing = [a for a in environment.alphabet if a not in c.alphabet]
        if missing:
            tok = controller_tokens[name]
            raise ParseError(
                f"controller {name!r} must include every environment action"
                f" (missing: {', '.join(missing)})",
                tok.line,
                tok.col,
                name,
            )
    return ModelFile(
        environment=environment,
        controllers=controllers,
        properties=properties,
        constraints=constraints,
        environment_name=environment_name,
        spans=spans,
    )


def _safe_names(names: tuple[str, ...], avoid: set[str]) -> list[str]:
    """Rewrite names into unique grammar-safe identifiers."""
    out: list[str] = []
    used = set(avoid)
    for name in names:
        cand = re.sub(r"[^A-Za-z0-9_.]", "_", name).strip("_.") or "s"
        if not _IDENT_RE.match(cand):
            cand = "s_" + cand
        if cand in KEYWORDS or (cand == ERR and name != ERR):
            cand = cand + "_"
        if name == ERR:
            cand = ERR
        base = cand
        bump = 1
        while cand in used:
            bump += 1
            cand = f"{base}_{bump}"
        used.add(cand)
        out.append(cand)
    return out


def _serialize_decl(kindword: str, name: str, lts: Lts) -> list[str]:
    mentioned = {lts.initial}
    for (s, _, t) in lts.transitions:
        mentioned.add(s)
        mentioned.add(t)
    silent = [lts.states[i] for i in range(len(lts.states)) if i not in mentioned]
    if silent:
        raise ValueError(
            f"states {silent} have no transitions and cannot be written in the notation"
        )
    states = _safe_names(lts.states, avoid=set())
    actions = _safe_names(lts.alphabet.actions, avoid=set())
    decl_name = _safe_names((name,), avoid=set())[0]
    lines = [f"{kindword} {decl_name} {{"]
    lines.append(f"  init {states[lts.initial]};")
    if actions:
        lines.append(f"  alphabet {', '.join(actions)};")
    for (s, a, t) in sorted(lts.transitions):
        lines.append(f"  {states[s]} -{actions[a]}-> {states[t]};")
    lines.append("}")
    return lines


def serialize(model: ModelFile) -> str:
    """Canonical text form; reparsing yields an isomorphic model."""
    chunks: list[str] = []
    chunks.extend(_serialize_decl("environment", model.environment_name, model.environment))
    for name, lts in model.controllers.items():
        chunks.append("")
        chunks.extend(_serialize_decl("controller", name, lts))
    for name, lts in model.properties.items():
        chunks.append("")
        chunks.extend(_serialize_decl("property", name, lts))
    for name, lts in model.constraints.items():
        chunks.append("")
        chunks.extend(_serialize_decl("constraint", name, lts))
    return "\n".join(chunks) + "\n"


def _dq(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def dot_export(
    e: Lts,
    normative: set[Triple] | frozenset[Triple],
    deviated: set[Triple] | frozenset[Triple],
) -> str:
    """Graphviz digraph with dashed blue normative edges and solid green
    deviated edges; the initial state gets an inbound arrow. Byte-stable."""
    lines = [
        "digraph lts {",
        "  rankdir=LR;",
        "  node [shape=circle];",
        '  __init [shape=point, label=""];',
    ]
    for name in e.states:
        lines.append(f"  {_dq(name)};")
    lines.append(f"  __init -> {_dq(e.states[e.initial])};")
    for triple in sorted(e.transitions):
        src, action, dst = e.triple_names(triple)
        if triple in deviated:
            style = 'color="green", style="solid"'
        elif triple in normative:
            style = 'color="blue", style="dashed"'
        else:
            raise ValueError(f"transition {triple} is in neither styling set")
        lines.append(f"  {_dq(src)} -> {_dq(dst)} [label={_dq(action)}, {style}];")
    lines.append("}")
    return "\n".join(lines) + "\n"

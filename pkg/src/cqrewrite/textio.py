"""Line-oriented Datalog-style text format for problems and databases.

Problem files hold one `query` rule and any number of `view` rules:

    # comment
    query H(x,y,y') :- P(u,u',x), R(x,w), S(w), T(w,y), T(w,y').
    view V1(x,w) :- P(v,v',x), R(x,w), S(w).

Relation symbols match [A-Za-z][A-Za-z0-9_']*; variables additionally may
start with an underscore (fresh variables in emitted rewritings are named
_f1, _f2, ... and must re-parse).  Schema arities are inferred from the
first occurrence of each relation and checked thereafter.  Database files
hold facts `R(a,b).` whose arguments are constants.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .model import (
    Atom,
    CQError,
    Const,
    ConjunctiveQuery,
    Database,
    Fact,
    Schema,
    Var,
    ViewSet,
    fact_key,
    make_query,
    make_view_set,
)


class ParseError(CQError):
    def __init__(self, code: str, message: str, line: int, col: int):
        super().__init__(code, f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>\#[^\n]*)
    | (?P<implies>:-)
    | (?P<lparen>\()
    | (?P<rparen>\))
    | (?P<comma>,)
    | (?P<dot>\.)
    | (?P<string>'[^'\n]*')
    | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
    | (?P<number>[0-9]+)
    """,
    re.VERBOSE,
)

_RELATION_RE = re.compile(r"[A-Za-z][A-Za-z0-9_']*\Z")


def _tokenize(text: str) -> List[Token]:
    line_starts = [0]
    for m in re.finditer("\n", text):
        line_starts.append(m.end())

    def linecol(pos: int) -> Tuple[int, int]:
        lo, hi = 0, len(line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if line_starts[mid] <= pos:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1, pos - line_starts[lo] + 1

    tokens: List[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            line, col = linecol(pos)
            raise ParseError("SYNTAX_ERROR", f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        assert kind is not None
        if kind not in ("ws", "comment"):
            line, col = linecol(m.start())
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    eline, ecol = linecol(len(text))
    tokens.append(Token("eof", "", eline, ecol))
    return tokens


class _Parser:
    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def at_end(self) -> bool:
        return self.peek().kind == "eof"

    def expect(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError("SYNTAX_ERROR", f"expected {what}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        self.pos += 1
        return tok

    def parse_atom(self, constants: bool = False) -> Tuple[Atom, Token]:
        rel = self.expect("ident", "a relation symbol")
        if not _RELATION_RE.match(rel.text):
            raise ParseError("SYNTAX_ERROR", f"invalid relation symbol {rel.text!r}", rel.line, rel.col)
        self.expect("lparen", "'('")
        args: List = []
        if self.peek().kind != "rparen":
            while True:
                tok = self.peek()
                if constants:
                    if tok.kind == "string":
                        args.append(Const(tok.text[1:-1]))
                    elif tok.kind in ("ident", "number"):
                        args.append(Const(tok.text))
                    else:
                        raise ParseError("SYNTAX_ERROR", "expected a constant", tok.line, tok.col)
                else:
                    if tok.kind != "ident":
                        raise ParseError("SYNTAX_ERROR", "expected a variable", tok.line, tok.col)
                    args.append(Var(tok.text))
                self.pos += 1
                if self.peek().kind == "comma":
                    self.pos += 1
                    continue
                break
        self.expect("rparen", "')'")
        return Atom(rel.text, tuple(args)), rel


@dataclass
class ProblemFile:
    schema: Schema
    query: ConjunctiveQuery
    views: ViewSet


Rule = Tuple[Atom, List[Tuple[Atom, Token]], Token]


def _parse_rules(p: _Parser) -> Tuple[Optional[Rule], List[Rule]]:
    query_rule: Optional[Rule] = None
    view_rules: List[Rule] = []
    while not p.at_end():
        kw = p.expect("ident", "'query' or 'view'")
        if kw.text not in ("query", "view"):
            raise ParseError("SYNTAX_ERROR", f"expected 'query' or 'view', found {kw.text!r}", kw.line, kw.col)
        head, head_tok = p.parse_atom()
        p.expect("implies", "':-'")
        body: List[Tuple[Atom, Token]] = [p.parse_atom()]
        while p.peek().kind == "comma":
            p.pos += 1
            body.append(p.parse_atom())
        p.expect("dot", "'.'")
        rule = (head, body, head_tok)
        if kw.text == "query":
            if query_rule is not None:
                raise ParseError("MULTIPLE_QUERY", "more than one query rule", kw.line, kw.col)
            query_rule = rule
        else:
            view_rules.append(rule)
    return query_rule, view_rules


def _infer_schema(rules: List[Rule]) -> Schema:
    schema: Schema = {}
    for _, body, _ in rules:
        for atom, tok in body:
            if atom.relation in schema and schema[atom.relation] != len(atom.args):
                raise ParseError(
                    "ARITY_CONFLICT",
                    f"{atom.relation} used with arity {len(atom.args)} after arity {schema[atom.relation]}",
                    tok.line,
                    tok.col,
                )
            schema[atom.relation] = len(atom.args)
    return schema


def parse_problem(text: str) -> ProblemFile:
    p = _Parser(_tokenize(text))
    query_rule, view_rules = _parse_rules(p)
    if query_rule is None:
        tok = p.peek()
        raise ParseError("MISSING_QUERY", "no query rule in file", tok.line, tok.col)
    schema = _infer_schema([query_rule] + view_rules)
    view_names = set()
    for head, _, tok in view_rules:
        if head.relation in view_names:
            raise ParseError("DUPLICATE_VIEW", f"two views named {head.relation}", tok.line, tok.col)
        if head.relation in schema:
            raise ParseError(
                "VIEW_NAME_IN_SCHEMA",
                f"view name {head.relation} also occurs as a body relation",
                tok.line,
                tok.col,
            )
        view_names.add(head.relation)
    qhead, qbody, qtok = query_rule
    if qhead.relation in view_names:
        raise ParseError(
            "HEAD_SYMBOL_CONFLICT",
            f"query head {qhead.relation} is also a view name",
            qtok.line,
            qtok.col,
        )
    query = make_query(qhead, [a for a, _ in qbody], schema)
    views = [make_query(h, [a for a, _ in b], schema) for h, b, _ in view_rules]
    return ProblemFile(schema, query, make_view_set(views, schema))


def parse_query_text(text: str) -> ConjunctiveQuery:
    """A single bare rule `H(...) :- A1(...), ..., Ak(...).`; schema inferred."""
    p = _Parser(_tokenize(text))
    head, _ = p.parse_atom()
    p.expect("implies", "':-'")
    body = [p.parse_atom()]
    while p.peek().kind == "comma":
        p.pos += 1
        body.append(p.parse_atom())
    p.expect("dot", "'.'")
    tok = p.peek()
    if tok.kind != "eof":
        raise ParseError("SYNTAX_ERROR", "trailing input after rule", tok.line, tok.col)
    rules: List[Rule] = [(head, body, tok)]
    schema = _infer_schema(rules)
    return make_query(head, [a for a, _ in body], schema)


def parse_database(text: str, schema: Schema) -> Database:
    p = _Parser(_tokenize(text))
    facts = set()
    while not p.at_end():
        atom, tok = p.parse_atom(constants=True)
        p.expect("dot", "'.'")
        if atom.relation not in schema:
            raise ParseError("UNKNOWN_RELATION", f"unknown relation {atom.relation}", tok.line, tok.col)
        if schema[atom.relation] != len(atom.args):
            raise ParseError(
                "ARITY_MISMATCH",
                f"{atom.relation} has arity {schema[atom.relation]}, fact has {len(atom.args)}",
                tok.line,
                tok.col,
            )
        facts.add(Fact(atom.relation, atom.args))
    return frozenset(facts)


def serialize_atom(a: Atom) -> str:
    return str(a)


def serialize_query(q: ConjunctiveQuery) -> str:
    """Rule text with the body in canonical atom order; round-trips through
    parse_query_text up to body ordering."""
    body = ", ".join(str(a) for a in q.body_sorted())
    return f"{q.head} :- {body}."


def serialize_problem(pf: ProblemFile) -> str:
    lines = [f"query {serialize_query(pf.query)}"]
    lines.extend(f"view {serialize_query(v)}" for v in pf.views)
    return "\n".join(lines) + "\n"


def serialize_database(db: Database) -> str:
    return "\n".join(f"{f}." for f in sorted(db, key=fact_key)) + ("\n" if db else "")


def render_json(envelope: dict) -> str:
    return json.dumps(envelope, sort_keys=True, indent=2) + "\n"

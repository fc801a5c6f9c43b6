"""Parser for the rule language.

Grammar, informally:

    rule      := head? (":-" body?)? "."
    head      := atom | "{" elems "}" (rel INT)?
    body      := elem ("," elem)*
    elem      := "not" atom | atom | comparison | "{" elems "}" rel INT
    elems     := atom (":" atom ("," atom)*)? (";" ...)*
    comparison:= term rel term          rel in  = != < <= > >=
    term      := additive arithmetic over integers, constants, variables,
                 compound terms; "l..u" intervals in arguments and after "="

Variables start with an upper-case letter, constants and predicate names
with a lower-case letter or underscore.  `%` starts a line comment.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .syntax import (
    Atom,
    BinOp,
    CardAtom,
    CardElement,
    Comparison,
    Fn,
    Interval,
    Literal,
    Rule,
    Term,
    Var,
    term_to_atom,
)


class ParseError(Exception):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>%[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[_a-z][A-Za-z0-9_]*)
  | (?P<var>[A-Z][A-Za-z0-9_]*)
  | (?P<punct>:-|\.\.|!=|<=|>=|=|<|>|\.|,|;|:|\(|\)|\{|\}|\[|\]|\?|\+|-|\*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # int, ident, var, punct, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup or ""
        val = m.group()
        if kind not in ("ws", "comment"):
            out.append(Token(kind, val, line, col))
        nl = val.count("\n")
        if nl:
            line += nl
            col = len(val) - val.rfind("\n")
        else:
            col += len(val)
        pos = m.end()
    out.append(Token("eof", "", line, col))
    return out


_REL_OPS = {"=", "!=", "<", "<=", ">", ">="}


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg: str):
        t = self.peek()
        raise ParseError(msg, t.line, t.col)

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.text != text or t.kind == "eof":
            self.error(f"expected {text!r}, found {t.text!r}" if t.kind != "eof" else f"expected {text!r}, found end of input")
        return self.next()

    # --- terms ---------------------------------------------------------

    def parse_term(self) -> Term:
        t = self.parse_mul()
        while self.peek().text in ("+", "-") and self.peek().kind == "punct":
            op = self.next().text
            rhs = self.parse_mul()
            t = BinOp(op, t, rhs)
        return t

    def parse_mul(self) -> Term:
        t = self.parse_primary()
        while self.peek().text == "*" and self.peek().kind == "punct":
            self.next()
            rhs = self.parse_primary()
            t = BinOp("*", t, rhs)
        return t

    def parse_primary(self) -> Term:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return int(t.text)
        if t.kind == "punct" and t.text == "-":
            self.next()
            inner = self.parse_primary()
            if isinstance(inner, int):
                return -inner
            return BinOp("-", 0, inner)
        if t.kind == "var":
            self.next()
            return Var(t.text)
        if t.kind == "ident":
            self.next()
            if self.peek().text == "(":
                self.next()
                args = [self.parse_arg()]
                while self.peek().text == ",":
                    self.next()
                    args.append(self.parse_arg())
                self.expect(")")
                return Fn(t.text, tuple(args))
            return t.text
        self.error(f"expected a term, found {t.text!r}")
        raise AssertionError

    def parse_arg(self) -> Term:
        t = self.parse_term()
        if self.peek().text == "..":
            self.next()
            hi = self.parse_term()
            return Interval(t, hi)
        return t

    def parse_atom(self) -> Atom:
        t = self.parse_primary()
        try:
            return term_to_atom(t)
        except ValueError:
            self.error("expected an atom")
            raise AssertionError

    # --- body elements -------------------------------------------------

    def parse_card(self) -> CardAtom:
        self.expect("{")
        elems = []
        if self.peek().text != "}":
            elems.append(self.parse_card_element())
            while self.peek().text == ";":
                self.next()
                elems.append(self.parse_card_element())
        self.expect("}")
        if self.peek().text in _REL_OPS:
            rel = self.next().text
            bt = self.peek()
            if bt.kind != "int":
                self.error("cardinality bound must be an integer")
            self.next()
            return CardAtom(tuple(elems), rel, int(bt.text))
        return CardAtom(tuple(elems))

    def parse_card_element(self) -> CardElement:
        atom = self.parse_atom()
        cond: list[Atom] = []
        if self.peek().text == ":":
            self.next()
            cond.append(self.parse_atom())
            while self.peek().text == ",":
                # within braces a comma continues the condition
                self.next()
                cond.append(self.parse_atom())
        return CardElement(atom, tuple(cond))

    def parse_body_elem(self):
        t = self.peek()
        if t.kind == "ident" and t.text == "not":
            self.next()
            return Literal(self.parse_atom(), neg=True)
        if t.text == "{":
            return self.parse_card()
        term = self.parse_term()
        if self.peek().text in _REL_OPS:
            op = self.next().text
            if op == "=" or op == "!=":
                rhs = self.parse_arg()  # allows intervals
            else:
                rhs = self.parse_term()
            return Comparison(op, term, rhs)
        try:
            return Literal(term_to_atom(term))
        except ValueError:
            self.error("expected an atom or comparison")

    def parse_body(self) -> tuple:
        elems = [self.parse_body_elem()]
        while self.peek().text == ",":
            self.next()
            elems.append(self.parse_body_elem())
        return tuple(elems)

    # --- rules -----------------------------------------------------------

    def parse_rule(self) -> Rule:
        t = self.peek()
        head: object
        choice = False
        if t.text == ":-":
            self.next()
            # the grounder emits ":- ." for a statically violated constraint
            body = () if self.peek().text == "." else self.parse_body()
            self.expect(".")
            return Rule(None, body)
        if t.text == "{":
            card = self.parse_card()
            if card.rel == ">=" and card.bound == 0 and len(card.elements) == 1 and not card.elements[0].condition:
                head = card.elements[0].atom
                choice = True
            else:
                head = card
        else:
            head = self.parse_atom()
        body: tuple = ()
        if self.peek().text == ":-":
            self.next()
            if self.peek().text != ".":
                body = self.parse_body()
        self.expect(".")
        return Rule(head, body, choice=choice)

    def parse_rules(self) -> list[Rule]:
        out = []
        while self.peek().kind != "eof":
            out.append(self.parse_rule())
        return out


def parse_program(text: str) -> list[Rule]:
    """Parse rule text into a list of (possibly non-ground) rules."""
    return _Parser(tokenize(text)).parse_rules()


def _parse_whole(text: str, method: str):
    p = _Parser(tokenize(text))
    out = getattr(p, method)()
    if p.peek().kind != "eof":
        p.error(f"trailing input after {p.toks[p.i - 1].text!r}")
    return out


def parse_atom(text: str) -> Atom:
    return _parse_whole(text, "parse_atom")


def parse_term(text: str) -> Term:
    return _parse_whole(text, "parse_term")

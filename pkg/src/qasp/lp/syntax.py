"""Core syntax for ground logic programs and the pre-grounding rule language.

A program is a set of rules over ground atoms.  Rule heads are a single atom
(normal rule), a choice `{p}`, a cardinality atom with a bound, or absent
(integrity constraint).  Bodies are sets of literals, comparisons (before
grounding) and cardinality atoms.  Terms are integers, symbolic constants,
compound terms, and, before grounding, variables, arithmetic expressions and
intervals `l..u`.

Atoms carry a canonical total order (predicate, arity, argument terms) which
every other module relies on for deterministic output.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union


# ---------------------------------------------------------------------------
# terms


@dataclass(frozen=True)
class Fn:
    """Compound ground term such as sense(occupied(1))."""

    name: str
    args: tuple["Term", ...] = ()


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    """Integer arithmetic over terms; only +, - and * are supported."""

    op: str
    lhs: "Term"
    rhs: "Term"


@dataclass(frozen=True)
class Interval:
    """Integer interval l..u; legal in fact arguments and `=` comparisons."""

    lo: "Term"
    hi: "Term"


Term = Union[int, str, Fn, Var, BinOp, Interval]


def term_is_ground(t: Term) -> bool:
    if isinstance(t, (int, str)):
        return True
    if isinstance(t, Fn):
        return all(term_is_ground(a) for a in t.args)
    return False


def term_vars(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Fn):
        out: set[str] = set()
        for a in t.args:
            out |= term_vars(a)
        return out
    if isinstance(t, BinOp):
        return term_vars(t.lhs) | term_vars(t.rhs)
    if isinstance(t, Interval):
        return term_vars(t.lo) | term_vars(t.hi)
    return set()


def term_key(t: Term):
    """Total order over terms: integers, then symbols, then compound terms."""
    if isinstance(t, int):
        return (0, t, "", ())
    if isinstance(t, str):
        return (1, 0, t, ())
    if isinstance(t, Fn):
        return (2, 0, t.name, tuple(term_key(a) for a in t.args))
    # non-ground constructs sort after ground ones; only used pre-grounding
    if isinstance(t, Var):
        return (3, 0, t.name, ())
    if isinstance(t, BinOp):
        return (4, 0, t.op, (term_key(t.lhs), term_key(t.rhs)))
    if isinstance(t, Interval):
        return (5, 0, "..", (term_key(t.lo), term_key(t.hi)))
    raise TypeError(f"not a term: {t!r}")


def format_term(t: Term) -> str:
    if isinstance(t, int):
        return str(t)
    if isinstance(t, str):
        return t
    if isinstance(t, Fn):
        if not t.args:
            return t.name
        return f"{t.name}({','.join(format_term(a) for a in t.args)})"
    if isinstance(t, Var):
        return t.name
    if isinstance(t, BinOp):
        return f"{format_term(t.lhs)}{t.op}{format_term(t.rhs)}"
    if isinstance(t, Interval):
        return f"{format_term(t.lo)}..{format_term(t.hi)}"
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------------------
# atoms and literals


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple[Term, ...] = ()

    @property
    def is_ground(self) -> bool:
        return all(term_is_ground(a) for a in self.args)


def atom_key(a: Atom):
    return (a.pred, len(a.args), tuple(term_key(t) for t in a.args))


def atom_to_term(a: Atom) -> Term:
    """View an atom as a term so it can appear as an argument elsewhere."""
    if not a.args:
        return a.pred
    return Fn(a.pred, a.args)


def term_to_atom(t: Term) -> Atom:
    if isinstance(t, str):
        return Atom(t, ())
    if isinstance(t, Fn):
        return Atom(t.name, t.args)
    raise ValueError(f"term {format_term(t)} does not name an atom")


def format_atom(a: Atom) -> str:
    if not a.args:
        return a.pred
    return f"{a.pred}({','.join(format_term(t) for t in a.args)})"


@dataclass(frozen=True)
class Literal:
    atom: Atom
    neg: bool = False

    def __str__(self) -> str:
        return f"not {format_atom(self.atom)}" if self.neg else format_atom(self.atom)


@dataclass(frozen=True)
class Comparison:
    """Built-in comparison between terms; resolved away by grounding."""

    op: str  # = != < <= > >=
    lhs: Term
    rhs: Term

    def __str__(self) -> str:
        return f"{format_term(self.lhs)} {self.op} {format_term(self.rhs)}"


@dataclass(frozen=True)
class CardElement:
    atom: Atom
    condition: tuple[Atom, ...] = ()

    def __str__(self) -> str:
        if self.condition:
            return f"{format_atom(self.atom)}: {', '.join(format_atom(c) for c in self.condition)}"
        return format_atom(self.atom)


@dataclass(frozen=True)
class CardAtom:
    """Cardinality atom `{e1; ...; em} rel k` over the truth count of elements.

    With rel '>=' and bound 0 the bound is vacuous, which is how an unbounded
    multi-element choice head is represented.
    """

    elements: tuple[CardElement, ...]
    rel: str = ">="
    bound: int = 0

    def __str__(self) -> str:
        inner = "; ".join(str(e) for e in self.elements)
        if self.rel == ">=" and self.bound == 0:
            return "{" + inner + "}"
        return "{" + inner + "} " + f"{self.rel} {self.bound}"


BodyElem = Union[Literal, Comparison, CardAtom]


def body_elem_key(e: BodyElem):
    if isinstance(e, Literal):
        return (0, atom_key(e.atom), e.neg, ())
    if isinstance(e, Comparison):
        return (1, (e.op, 0, ()), False, (term_key(e.lhs), term_key(e.rhs)))
    if isinstance(e, CardAtom):
        return (
            2,
            (e.rel, e.bound, ()),
            False,
            tuple((atom_key(el.atom), tuple(atom_key(c) for c in el.condition)) for el in e.elements),
        )
    raise TypeError(f"not a body element: {e!r}")


# ---------------------------------------------------------------------------
# rules


@dataclass(frozen=True)
class Rule:
    """head :- body.  head None means integrity constraint; choice means {head}."""

    head: Union[Atom, CardAtom, None]
    body: tuple[BodyElem, ...] = ()
    choice: bool = False

    def __post_init__(self):
        if self.choice and not isinstance(self.head, Atom):
            raise ValueError("choice rule head must be a single atom")
        # bodies are sets: canonical order, duplicates removed
        ordered = tuple(sorted(set(self.body), key=body_elem_key))
        object.__setattr__(self, "body", ordered)

    @property
    def is_constraint(self) -> bool:
        return self.head is None

    @property
    def is_fact(self) -> bool:
        return isinstance(self.head, Atom) and not self.choice and not self.body

    def __str__(self) -> str:
        if self.head is None:
            head = ""
        elif isinstance(self.head, CardAtom):
            head = str(self.head)
        elif self.choice:
            head = "{" + format_atom(self.head) + "}"
        else:
            head = format_atom(self.head)
        if not self.body:
            return head + "." if head else ":- ."
        body = ", ".join(str(e) for e in self.body)
        if head:
            return f"{head} :- {body}."
        return f":- {body}."


def rule_key(r: Rule):
    if r.head is None:
        hk = (0, ("", 0, ()))
    elif isinstance(r.head, CardAtom):
        hk = (3, body_elem_key(r.head))
    elif r.choice:
        hk = (2, atom_key(r.head))
    else:
        hk = (1, atom_key(r.head))
    return (hk, tuple(body_elem_key(e) for e in r.body))


def rule_atoms(r: Rule) -> Iterator[Atom]:
    """All atoms occurring in the rule, including cardinality elements."""
    if isinstance(r.head, Atom):
        yield r.head
    elif isinstance(r.head, CardAtom):
        for el in r.head.elements:
            yield el.atom
            yield from el.condition
    for e in r.body:
        if isinstance(e, Literal):
            yield e.atom
        elif isinstance(e, CardAtom):
            for el in e.elements:
                yield el.atom
                yield from el.condition


def rule_is_ground(r: Rule) -> bool:
    if any(isinstance(e, Comparison) for e in r.body):
        return False
    return all(a.is_ground for a in rule_atoms(r))


def rule_has_cards(r: Rule) -> bool:
    return isinstance(r.head, CardAtom) or any(isinstance(e, CardAtom) for e in r.body)


# ---------------------------------------------------------------------------
# programs


@dataclass(frozen=True)
class Program:
    """Ground program: canonically ordered rules plus its atom universe.

    The universe is every atom occurring in the rules together with any
    declared extras, so quantifier prefixes can mention atoms the rules do
    not define.
    """

    rules: tuple[Rule, ...]
    universe: frozenset[Atom]

    @staticmethod
    def of(rules: Iterable[Rule], extra_atoms: Iterable[Atom] = ()) -> "Program":
        rs = tuple(sorted(set(rules), key=rule_key))
        occurring: set[Atom] = set()
        for r in rs:
            if not rule_is_ground(r):
                raise ValueError(f"program rules must be ground: {r}")
            occurring.update(rule_atoms(r))
        return Program(rs, frozenset(occurring) | frozenset(extra_atoms))

    @property
    def is_plain(self) -> bool:
        """True when no cardinality constructs remain."""
        return not any(rule_has_cards(r) for r in self.rules)

    def occurring_atoms(self) -> frozenset[Atom]:
        out: set[Atom] = set()
        for r in self.rules:
            out.update(rule_atoms(r))
        return frozenset(out)

    def extend(self, rules: Iterable[Rule], extra_atoms: Iterable[Atom] = ()) -> "Program":
        return Program.of(list(self.rules) + list(rules), self.universe | frozenset(extra_atoms))

    def __str__(self) -> str:
        return format_program(self)


def format_program(p: Program) -> str:
    """Canonical text: one rule per line, rules and bodies in canonical order."""
    return "\n".join(str(r) for r in p.rules) + ("\n" if p.rules else "")


def sorted_atoms(atoms: Iterable[Atom]) -> list[Atom]:
    return sorted(atoms, key=atom_key)

"""Compile cardinality atoms away, preserving stable models up to projection.

Counting uses a sequential counter chain: auxiliary atoms `_cnt<k>(i,j)`
("at least j of the first i elements are true") defined by definite rules,
so the compiled program stays stratified whenever the input was.  A second,
exponential expansion (`style="enumerate"`) exists purely as an independent
cross-check for tests.

The projection guarantee assumes no cardinality atom lies on a dependency
cycle (no rule defining an element of a card can depend on the rule carrying
the card).  Cards whose elements are guessed or derived in earlier strata,
the only shape produced by the planning encoders, are always safe.
"""
from __future__ import annotations

from itertools import combinations
from typing import Iterable, Optional

from .syntax import (
    Atom,
    CardAtom,
    CardElement,
    Literal,
    Program,
    Rule,
    atom_key,
    rule_has_cards,
)


class CardinalityError(Exception):
    pass


def _normalize(rel: str, bound: int) -> tuple[str, int]:
    if rel == "<":
        return ("<=", bound - 1)
    if rel == ">":
        return (">=", bound + 1)
    return (rel, bound)


def _used_predicates(p: Program) -> set[str]:
    preds = {a.pred for a in p.universe}
    for r in p.rules:
        if isinstance(r.head, CardAtom):
            preds.update(el.atom.pred for el in r.head.elements)
        for e in r.body:
            if isinstance(e, CardAtom):
                preds.update(el.atom.pred for el in e.elements)
    return preds


class _Namer:
    def __init__(self, used: set[str], prefix: str):
        self.used = used
        self.prefix = prefix
        self.k = 0

    def fresh(self) -> str:
        while True:
            self.k += 1
            name = f"{self.prefix}{self.k}"
            if name not in self.used and f"{name}_ok" not in self.used:
                self.used.add(name)
                self.used.add(f"{name}_ok")
                return name


def _counter_rules(name: str, elements: list[Atom], thresholds: set[int]) -> tuple[list[Rule], dict[int, Optional[Atom]]]:
    """Chain rules for `at least j` atoms; returns rules and threshold atoms.

    The returned map sends each requested threshold j to the atom meaning
    `count >= j`, to None when j > len(elements) (statically false), and is
    not defined for j == 0 (statically true).
    """
    m = len(elements)
    want = {j for j in thresholds if 1 <= j <= m}
    rules: list[Rule] = []
    geq: dict[int, Optional[Atom]] = {j: None for j in thresholds if j > m}
    if not want:
        return rules, geq
    maxj = max(want)

    def cnt(i: int, j: int) -> Atom:
        return Atom(name, (i, j))

    for i in range(1, m + 1):
        top = min(i, maxj)
        for j in range(1, top + 1):
            if i > 1 and j <= min(i - 1, maxj):
                rules.append(Rule(cnt(i, j), (Literal(cnt(i - 1, j)),)))
            if j == 1:
                rules.append(Rule(cnt(i, 1), (Literal(elements[i - 1]),)))
            elif j <= i:
                if j - 1 <= min(i - 1, maxj):
                    rules.append(Rule(cnt(i, j), (Literal(cnt(i - 1, j - 1)), Literal(elements[i - 1]))))
    for j in want:
        geq[j] = cnt(m, j)
    return rules, geq


def compile_cardinality(p: Program, *, style: str = "counter", enumerate_limit: int = 12) -> Program:
    """Replace cardinality atoms by choices, auxiliary counters and constraints.

    Stable models of the result, projected to `p.universe`, are exactly the
    stable models of `p`.
    """
    if style not in ("counter", "enumerate"):
        raise ValueError(f"unknown style {style!r}")
    if p.is_plain:
        return p

    namer = _Namer(_used_predicates(p), "_cnt")
    out: list[Rule] = []

    def truth_atom_rules(card: CardAtom) -> tuple[Atom, list[Rule]]:
        """Define an atom that is true in a model iff the bound holds."""
        rel, k = _normalize(card.rel, card.bound)
        elements = [el.atom for el in card.elements]
        m = len(elements)
        name = namer.fresh()
        ok = Atom(f"{name}_ok", ())
        rules: list[Rule] = []
        if style == "enumerate":
            if m > enumerate_limit:
                raise CardinalityError(f"enumerative compilation over {m} elements refused")
            for size in range(0, m + 1):
                if not _rel_holds(rel, size, k):
                    continue
                for inc in combinations(range(m), size):
                    body = [Literal(elements[i], neg=(i not in inc)) for i in range(m)]
                    rules.append(Rule(ok, tuple(body)))
            return ok, rules

        if rel == "=":
            thresholds = {k, k + 1}
        elif rel == "<=":
            thresholds = {k + 1}
        elif rel == ">=":
            thresholds = {k}
        elif rel == "!=":
            thresholds = {k, k + 1}
        else:
            raise CardinalityError(f"unsupported relation {rel}")
        cnt_rules, geq = _counter_rules(name, elements, thresholds)
        rules.extend(cnt_rules)

        def static_geq(j: int) -> Optional[bool]:
            if j <= 0:
                return True
            if j > m:
                return False
            return None

        if rel == "=":
            if k < 0 or k > m:
                return ok, rules  # never true, ok has no rules
            body = []
            s = static_geq(k)
            if s is None:
                body.append(Literal(geq[k]))
            elif s is False:
                return ok, rules
            s = static_geq(k + 1)
            if s is None:
                body.append(Literal(geq[k + 1], neg=True))
            elif s is True:
                return ok, rules
            rules.append(Rule(ok, tuple(body)))
        elif rel == "<=":
            if k < 0:
                return ok, rules
            s = static_geq(k + 1)
            if s is True:
                return ok, rules
            if s is False:
                rules.append(Rule(ok))
            else:
                rules.append(Rule(ok, (Literal(geq[k + 1], neg=True),)))
        elif rel == ">=":
            s = static_geq(k)
            if s is False:
                return ok, rules
            if s is True:
                rules.append(Rule(ok))
            else:
                rules.append(Rule(ok, (Literal(geq[k]),)))
        elif rel == "!=":
            if k < 0 or k > m:
                rules.append(Rule(ok))
                return ok, rules
            s = static_geq(k)
            if s is None:
                rules.append(Rule(ok, (Literal(geq[k], neg=True),)))
            elif s is False:
                rules.append(Rule(ok))
            s2 = static_geq(k + 1)
            if s2 is None:
                rules.append(Rule(ok, (Literal(geq[k + 1]),)))
            elif s2 is True:
                rules.append(Rule(ok))
        return ok, rules

    for r in p.rules:
        if not rule_has_cards(r):
            out.append(r)
            continue
        body: list = []
        for e in r.body:
            if isinstance(e, CardAtom):
                ok, defs = truth_atom_rules(e)
                out.extend(defs)
                body.append(Literal(ok))
            else:
                body.append(e)
        if isinstance(r.head, CardAtom):
            card = r.head
            rel, k = _normalize(card.rel, card.bound)
            elements = sorted({el.atom for el in card.elements}, key=atom_key)
            for a in elements:
                out.append(Rule(a, tuple(body), choice=True))
            vacuous = rel == ">=" and k <= 0
            if not vacuous:
                # forbid models where the body holds but the count is off
                viol = CardAtom(tuple(CardElement(a) for a in elements), *_complement(rel, k))
                ok, defs = truth_atom_rules(viol)
                out.extend(defs)
                out.append(Rule(None, tuple(body) + (Literal(ok),)))
        else:
            out.append(Rule(r.head, tuple(body), choice=r.choice))

    return Program.of(out, p.universe)


def _complement(rel: str, k: int) -> tuple[str, int]:
    if rel == "=":
        return ("!=", k)
    if rel == "!=":
        return ("=", k)
    if rel == "<=":
        return (">=", k + 1)
    if rel == ">=":
        return ("<=", k - 1)
    raise CardinalityError(f"unsupported relation {rel}")


def _rel_holds(rel: str, count: int, k: int) -> bool:
    if rel == "=":
        return count == k
    if rel == "!=":
        return count != k
    if rel == "<=":
        return count <= k
    if rel == ">=":
        return count >= k
    raise CardinalityError(f"unsupported relation {rel}")

"""Grounder: instantiate rule variables over the derivable atom base.

The base of possible atoms is computed as a least fixpoint that ignores
negation, treats choice and cardinality heads as derivable, and applies
comparisons.  The final pass instantiates each rule against that base,
evaluates arithmetic, drops instances whose comparisons fail, removes
negative literals whose atom is not derivable at all, and expands local
variables of cardinality atoms.

Safety: every variable must be bound by a positive body literal, by an
interval comparison `V = l..u`, or by an equality with an otherwise ground
term.  Matching solves single-variable offsets such as `at(R-1)`.
"""
from __future__ import annotations

from typing import Iterable, Iterator, Optional

from .syntax import (
    Atom,
    BinOp,
    CardAtom,
    CardElement,
    Comparison,
    Fn,
    Interval,
    Literal,
    Program,
    Rule,
    Term,
    Var,
    atom_key,
    format_atom,
    term_is_ground,
    term_key,
    term_vars,
)


class GroundingError(Exception):
    pass


class UnsafeRuleError(GroundingError):
    pass


Subst = dict


def _eval_term(t: Term, subst: Subst) -> Term:
    """Evaluate a term to a ground term; arithmetic demands integers."""
    if isinstance(t, (int, str)):
        return t
    if isinstance(t, Var):
        if t.name not in subst:
            raise GroundingError(f"unbound variable {t.name}")
        return subst[t.name]
    if isinstance(t, Fn):
        return Fn(t.name, tuple(_eval_term(a, subst) for a in t.args))
    if isinstance(t, BinOp):
        l = _eval_term(t.lhs, subst)
        r = _eval_term(t.rhs, subst)
        if not isinstance(l, int) or not isinstance(r, int):
            raise GroundingError(f"arithmetic on non-integer term: {t.op} applied to {l!r}, {r!r}")
        if t.op == "+":
            return l + r
        if t.op == "-":
            return l - r
        if t.op == "*":
            return l * r
        raise GroundingError(f"unknown operator {t.op}")
    raise GroundingError(f"cannot evaluate term {t!r}")


def _term_bound(t: Term, subst: Subst) -> bool:
    return all(v in subst for v in term_vars(t))


def _affine_parts(t: BinOp) -> Optional[tuple[str, int]]:
    """Recognize V+c, V-c, c+V; returns (variable name, offset added to V)."""
    if t.op == "+" and isinstance(t.lhs, Var) and isinstance(t.rhs, int):
        return (t.lhs.name, t.rhs)
    if t.op == "+" and isinstance(t.lhs, int) and isinstance(t.rhs, Var):
        return (t.rhs.name, t.lhs)
    if t.op == "-" and isinstance(t.lhs, Var) and isinstance(t.rhs, int):
        return (t.lhs.name, -t.rhs)
    return None


def _match_term(pattern: Term, value: Term, subst: Subst) -> Optional[Subst]:
    """Match a pattern term against a ground value, extending subst or failing."""
    if isinstance(pattern, Var):
        bound = subst.get(pattern.name)
        if bound is None:
            out = dict(subst)
            out[pattern.name] = value
            return out
        return subst if bound == value else None
    if isinstance(pattern, (int, str)):
        return subst if pattern == value else None
    if isinstance(pattern, Fn):
        if not isinstance(value, Fn) or value.name != pattern.name or len(value.args) != len(pattern.args):
            return None
        cur = subst
        for p, v in zip(pattern.args, value.args):
            cur = _match_term(p, v, cur)
            if cur is None:
                return None
        return cur
    if isinstance(pattern, BinOp):
        if _term_bound(pattern, subst):
            return subst if _eval_term(pattern, subst) == value else None
        aff = _affine_parts(pattern)
        if aff is not None:
            name, off = aff
            if name in subst:
                base = subst[name]
                if not isinstance(base, int) or not isinstance(value, int):
                    return None
                return subst if base + off == value else None
            if not isinstance(value, int):
                return None
            out = dict(subst)
            out[name] = value - off
            return out
        return None
    return None


def _pattern_matchable(t: Term, subst: Subst) -> bool:
    """True when matching can handle every argument position right now."""
    if isinstance(t, (int, str, Var)):
        return True
    if isinstance(t, Fn):
        return all(_pattern_matchable(a, subst) for a in t.args)
    if isinstance(t, BinOp):
        return _term_bound(t, subst) or _affine_parts(t) is not None
    return False  # intervals are expanded before matching


def _match_atom(pattern: Atom, value: Atom, subst: Subst) -> Optional[Subst]:
    if pattern.pred != value.pred or len(pattern.args) != len(value.args):
        return None
    cur = subst
    for p, v in zip(pattern.args, value.args):
        cur = _match_term(p, v, cur)
        if cur is None:
            return None
    return cur


def _expand_intervals(rule: Rule) -> Iterator[Rule]:
    """Expand l..u occurring in atom arguments into one rule per value."""

    slots: list[tuple[int, int]] = []  # (range lo..hi) discovered in order
    found: list[Interval] = []

    def scan_term(t: Term):
        if isinstance(t, Interval):
            found.append(t)
        elif isinstance(t, Fn):
            for a in t.args:
                scan_term(a)
        elif isinstance(t, BinOp):
            scan_term(t.lhs)
            scan_term(t.rhs)

    def scan_atom(a: Atom):
        for t in a.args:
            scan_term(t)

    if isinstance(rule.head, Atom):
        scan_atom(rule.head)
    elif isinstance(rule.head, CardAtom):
        for el in rule.head.elements:
            scan_atom(el.atom)
            for c in el.condition:
                scan_atom(c)
    for e in rule.body:
        if isinstance(e, Literal):
            scan_atom(e.atom)
        elif isinstance(e, CardAtom):
            for el in e.elements:
                scan_atom(el.atom)
                for c in el.condition:
                    scan_atom(c)

    if not found:
        yield rule
        return

    ranges: list[range] = []
    for iv in found:
        if not (term_is_ground(iv.lo) and term_is_ground(iv.hi)):
            raise GroundingError(f"interval bounds must be ground integers: {iv}")
        lo = _eval_term(iv.lo, {})
        hi = _eval_term(iv.hi, {})
        if not isinstance(lo, int) or not isinstance(hi, int):
            raise GroundingError(f"interval bounds must be integers: {iv}")
        ranges.append(range(lo, hi + 1))

    def subst_term(t: Term, values: dict[int, int], counter: list[int]) -> Term:
        if isinstance(t, Interval):
            idx = counter[0]
            counter[0] += 1
            return values[idx]
        if isinstance(t, Fn):
            return Fn(t.name, tuple(subst_term(a, values, counter) for a in t.args))
        if isinstance(t, BinOp):
            return BinOp(t.op, subst_term(t.lhs, values, counter), subst_term(t.rhs, values, counter))
        return t

    def subst_atom(a: Atom, values, counter) -> Atom:
        return Atom(a.pred, tuple(subst_term(t, values, counter) for t in a.args))

    def product(idx: int, chosen: dict[int, int]):
        if idx == len(ranges):
            counter = [0]
            head = rule.head
            if isinstance(head, Atom):
                head = subst_atom(head, chosen, counter)
            elif isinstance(head, CardAtom):
                head = CardAtom(
                    tuple(
                        CardElement(
                            subst_atom(el.atom, chosen, counter),
                            tuple(subst_atom(c, chosen, counter) for c in el.condition),
                        )
                        for el in head.elements
                    ),
                    head.rel,
                    head.bound,
                )
            body = []
            for e in rule.body:
                if isinstance(e, Literal):
                    body.append(Literal(subst_atom(e.atom, chosen, counter), e.neg))
                elif isinstance(e, CardAtom):
                    body.append(
                        CardAtom(
                            tuple(
                                CardElement(
                                    subst_atom(el.atom, chosen, counter),
                                    tuple(subst_atom(c, chosen, counter) for c in el.condition),
                                )
                                for el in e.elements
                            ),
                            e.rel,
                            e.bound,
                        )
                    )
                else:
                    body.append(e)
            yield Rule(head, tuple(body), choice=rule.choice)
            return
        for v in ranges[idx]:
            chosen[idx] = v
            yield from product(idx + 1, chosen)
        chosen.pop(idx, None)

    yield from product(0, {})


def _compare(op: str, l: Term, r: Term) -> bool:
    if op == "=":
        return l == r
    if op == "!=":
        return l != r
    if not isinstance(l, int) or not isinstance(r, int):
        raise GroundingError(f"ordering comparison on non-integers: {l!r} {op} {r!r}")
    if op == "<":
        return l < r
    if op == "<=":
        return l <= r
    if op == ">":
        return l > r
    if op == ">=":
        return l >= r
    raise GroundingError(f"unknown comparison {op}")


class _Base:
    """Indexed set of possible atoms."""

    def __init__(self):
        self.atoms: set[Atom] = set()
        self.by_sig: dict[tuple[str, int], list[Atom]] = {}

    def add(self, a: Atom) -> bool:
        if a in self.atoms:
            return False
        self.atoms.add(a)
        self.by_sig.setdefault((a.pred, len(a.args)), []).append(a)
        return True

    def candidates(self, pattern: Atom) -> list[Atom]:
        return self.by_sig.get((pattern.pred, len(pattern.args)), [])


def _instantiate(
    rule: Rule,
    base: _Base,
    facts: set[Atom],
    *,
    for_base: bool,
) -> Iterator[Rule]:
    """Enumerate ground instances of `rule` against `base`.

    In base mode negative literals are ignored and instances are yielded
    without simplification; otherwise negative literals over underivable
    atoms are removed (they are vacuously true).
    """

    pending = list(rule.body)

    def processable(e, subst) -> Optional[str]:
        if isinstance(e, Literal):
            if not e.neg:
                if all(_pattern_matchable(t, subst) for t in e.atom.args):
                    return "pos"
                return None
            if all(_term_bound(t, subst) for t in e.atom.args):
                return "neg"
            return None
        if isinstance(e, Comparison):
            lhs_b = _term_bound(e.lhs, subst)
            rhs_iv = isinstance(e.rhs, Interval)
            rhs_b = (not rhs_iv) and _term_bound(e.rhs, subst)
            if e.op == "=" and isinstance(e.lhs, Var) and e.lhs.name not in subst:
                if rhs_iv and _term_bound(e.rhs.lo, subst) and _term_bound(e.rhs.hi, subst):
                    return "bind_interval"
                if rhs_b:
                    return "bind"
            if e.op == "=" and isinstance(e.rhs, Var) and e.rhs.name not in subst and lhs_b:
                return "bind_rev"
            if lhs_b and rhs_iv and _term_bound(e.rhs.lo, subst) and _term_bound(e.rhs.hi, subst):
                return "check_interval"
            if lhs_b and rhs_b:
                return "check"
            return None
        if isinstance(e, CardAtom):
            # cardinality atoms wait until nothing else can bind variables
            return "card"
        return None

    def ground_card(card: CardAtom, subst) -> CardAtom:
        elements: list[Atom] = []
        for el in card.elements:
            if el.condition:
                # conditions range over certain facts only
                def walk(ci: int, s) -> Iterator[Subst]:
                    if ci == len(el.condition):
                        yield s
                        return
                    pat = el.condition[ci]
                    for cand in sorted(base.candidates(pat), key=atom_key):
                        if cand not in facts:
                            continue
                        s2 = _match_atom(pat, cand, s)
                        if s2 is not None:
                            yield from walk(ci + 1, s2)

                for s in walk(0, dict(subst)):
                    if all(_term_bound(t, s) for t in el.atom.args):
                        elements.append(Atom(el.atom.pred, tuple(_eval_term(t, s) for t in el.atom.args)))
                    else:
                        for cand in sorted(base.candidates(el.atom), key=atom_key):
                            s2 = _match_atom(el.atom, cand, s)
                            if s2 is not None:
                                elements.append(cand)
            elif all(_term_bound(t, subst) for t in el.atom.args):
                elements.append(Atom(el.atom.pred, tuple(_eval_term(t, subst) for t in el.atom.args)))
            else:
                for cand in sorted(base.candidates(el.atom), key=atom_key):
                    if _match_atom(el.atom, cand, dict(subst)) is not None:
                        elements.append(cand)
        uniq = sorted(set(elements), key=atom_key)
        return CardAtom(tuple(CardElement(a) for a in uniq), card.rel, card.bound)

    def emit(subst) -> Optional[Rule]:
        body: list = []
        for e in done_elems:
            kind, payload = e
            if kind == "lit":
                lit, s_atom = payload
                body.append(Literal(s_atom, lit.neg))
            elif kind == "card":
                body.append(payload)
        head = rule.head
        if isinstance(head, Atom):
            if not all(_term_bound(t, subst) for t in head.args):
                missing = set().union(*(term_vars(t) for t in head.args)) - set(subst)
                raise UnsafeRuleError(f"unsafe rule, head variable(s) {sorted(missing)} unbound: {rule}")
            head = Atom(head.pred, tuple(_eval_term(t, subst) for t in head.args))
        elif isinstance(head, CardAtom):
            head = ground_card(head, subst)
        return Rule(head, tuple(body), choice=rule.choice)

    done_elems: list = []

    def walk(pending_elems: list, subst) -> Iterator[Rule]:
        if not pending_elems:
            yield emit(subst)
            return
        choice_idx = None
        action = None
        for idx, e in enumerate(pending_elems):
            a = processable(e, subst)
            if a == "card" and len(pending_elems) > 1 and any(
                processable(x, subst) not in (None, "card") for x in pending_elems[idx + 1 :] + pending_elems[:idx]
            ):
                continue  # defer cards until only cards remain
            if a is not None:
                choice_idx, action = idx, a
                break
        if action is None:
            vars_left = set()
            for e in pending_elems:
                if isinstance(e, Literal):
                    for t in e.atom.args:
                        vars_left |= term_vars(t)
                elif isinstance(e, Comparison):
                    vars_left |= term_vars(e.lhs) | term_vars(e.rhs)
            raise UnsafeRuleError(
                f"unsafe rule, cannot bind variable(s) {sorted(v for v in vars_left if v not in subst)}: {rule}"
            )
        e = pending_elems[choice_idx]
        rest = pending_elems[:choice_idx] + pending_elems[choice_idx + 1 :]
        if action == "pos":
            assert isinstance(e, Literal)
            for cand in sorted(base.candidates(e.atom), key=atom_key):
                s2 = _match_atom(e.atom, cand, subst)
                if s2 is not None:
                    done_elems.append(("lit", (e, cand)))
                    yield from walk(rest, s2)
                    done_elems.pop()
        elif action == "neg":
            assert isinstance(e, Literal)
            ground_atom = Atom(e.atom.pred, tuple(_eval_term(t, subst) for t in e.atom.args))
            if for_base:
                yield from walk(rest, subst)
            elif ground_atom in base.atoms:
                done_elems.append(("lit", (e, ground_atom)))
                yield from walk(rest, subst)
                done_elems.pop()
            else:
                # not p with underivable p holds vacuously
                yield from walk(rest, subst)
        elif action in ("bind", "bind_rev"):
            assert isinstance(e, Comparison)
            if action == "bind":
                var, val = e.lhs, _eval_term(e.rhs, subst)
            else:
                var, val = e.rhs, _eval_term(e.lhs, subst)
            s2 = dict(subst)
            s2[var.name] = val
            yield from walk(rest, s2)
        elif action == "bind_interval":
            assert isinstance(e, Comparison) and isinstance(e.rhs, Interval)
            lo = _eval_term(e.rhs.lo, subst)
            hi = _eval_term(e.rhs.hi, subst)
            if not isinstance(lo, int) or not isinstance(hi, int):
                raise GroundingError(f"interval bounds must be integers: {e}")
            for v in range(lo, hi + 1):
                s2 = dict(subst)
                s2[e.lhs.name] = v
                yield from walk(rest, s2)
        elif action == "check_interval":
            assert isinstance(e, Comparison) and isinstance(e.rhs, Interval)
            val = _eval_term(e.lhs, subst)
            lo = _eval_term(e.rhs.lo, subst)
            hi = _eval_term(e.rhs.hi, subst)
            if isinstance(val, int) and isinstance(lo, int) and isinstance(hi, int) and lo <= val <= hi:
                yield from walk(rest, subst)
        elif action == "check":
            assert isinstance(e, Comparison)
            if _compare(e.op, _eval_term(e.lhs, subst), _eval_term(e.rhs, subst)):
                yield from walk(rest, subst)
        elif action == "card":
            assert isinstance(e, CardAtom)
            done_elems.append(("card", ground_card(e, subst)))
            yield from walk(rest, subst)
            done_elems.pop()

    yield from walk(pending, {})


_BASE_LIMIT = 200_000


def ground(rules: Iterable[Rule], extra_atoms: Iterable[Atom] = ()) -> Program:
    """Ground a rule list into a Program.

    `extra_atoms` seeds the derivable base (and the universe) with atoms that
    are possible for reasons outside the program, such as state atoms.
    """

    expanded: list[Rule] = []
    for r in rules:
        expanded.extend(_expand_intervals(r))

    base = _Base()
    facts: set[Atom] = set()
    for a in extra_atoms:
        base.add(a)
    for r in expanded:
        if r.is_fact and r.head.is_ground:
            facts.add(r.head)

    # least fixpoint of possible atoms, negation ignored
    changed = True
    while changed:
        changed = False
        for r in expanded:
            if r.is_constraint:
                continue
            neg_free = not r.choice and all(
                not e.neg for e in r.body if isinstance(e, Literal)
            )
            for inst in _instantiate(r, base, facts, for_base=True):
                heads: list[Atom] = []
                if isinstance(inst.head, Atom):
                    heads.append(inst.head)
                elif isinstance(inst.head, CardAtom):
                    heads.extend(el.atom for el in inst.head.elements)
                # an atom is a certain fact when derived without negation,
                # choice, or cardinality from certain facts alone
                certain = (
                    neg_free
                    and isinstance(inst.head, Atom)
                    and all(isinstance(e, Literal) and e.atom in facts for e in inst.body)
                )
                for h in heads:
                    if base.add(h):
                        changed = True
                    if certain and h not in facts:
                        facts.add(h)
                        changed = True
                    if len(base.atoms) > _BASE_LIMIT:
                        raise GroundingError("grounding did not converge (atom base too large)")

    out: list[Rule] = []
    for r in expanded:
        out.extend(_instantiate(r, base, facts, for_base=False))
    return Program.of(out, extra_atoms)

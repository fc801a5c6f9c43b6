"""Dependency analysis: predicate graph, stratification, tightness, GDT form."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .syntax import (
    Atom,
    CardAtom,
    Comparison,
    Literal,
    Program,
    Rule,
    atom_key,
)


class NotStratifiedError(Exception):
    def __init__(self, msg: str, cycle: tuple[Atom, ...] = ()):
        super().__init__(msg)
        self.cycle = cycle


@dataclass
class DependencyGraph:
    """Atom-level dependency graph of a ground program.

    Edges head -> body atom, labelled positive or negative.  Cardinality
    atoms contribute their elements: positively when counted towards a
    lower bound and negatively as well, since a count can also constrain
    from above; we keep it simple and add both polarities for card bodies,
    which is conservative for stratification checks.
    """

    pos: dict[Atom, set[Atom]] = field(default_factory=dict)
    neg: dict[Atom, set[Atom]] = field(default_factory=dict)
    atoms: set[Atom] = field(default_factory=set)

    def add_atom(self, a: Atom) -> None:
        self.atoms.add(a)
        self.pos.setdefault(a, set())
        self.neg.setdefault(a, set())

    def add_edge(self, head: Atom, body: Atom, negative: bool) -> None:
        self.add_atom(head)
        self.add_atom(body)
        (self.neg if negative else self.pos)[head].add(body)

    @staticmethod
    def of(p: Program) -> "DependencyGraph":
        g = DependencyGraph()
        for a in p.universe:
            g.add_atom(a)
        for r in p.rules:
            heads: list[Atom] = []
            if isinstance(r.head, Atom):
                heads = [r.head]
            elif isinstance(r.head, CardAtom):
                heads = [el.atom for el in r.head.elements]
            for h in heads:
                g.add_atom(h)
            for e in r.body:
                if isinstance(e, Literal):
                    for h in heads:
                        g.add_edge(h, e.atom, e.neg)
                elif isinstance(e, CardAtom):
                    for el in e.elements:
                        for h in heads:
                            g.add_edge(h, el.atom, False)
                            g.add_edge(h, el.atom, True)
        return g

    def sccs(self) -> list[list[Atom]]:
        """Strongly connected components over pos+neg edges, iterative Tarjan.

        Returned in reverse topological order (dependencies before
        dependents), each component sorted canonically.
        """
        index: dict[Atom, int] = {}
        low: dict[Atom, int] = {}
        onstack: set[Atom] = set()
        stack: list[Atom] = []
        out: list[list[Atom]] = []
        counter = [0]
        succ = {a: sorted(self.pos[a] | self.neg[a], key=atom_key) for a in self.atoms}

        for root in sorted(self.atoms, key=atom_key):
            if root in index:
                continue
            work: list[tuple[Atom, int]] = [(root, 0)]
            while work:
                v, i = work.pop()
                if i == 0:
                    index[v] = low[v] = counter[0]
                    counter[0] += 1
                    stack.append(v)
                    onstack.add(v)
                recurse = False
                for j in range(i, len(succ[v])):
                    w = succ[v][j]
                    if w not in index:
                        work.append((v, j + 1))
                        work.append((w, 0))
                        recurse = True
                        break
                    if w in onstack:
                        low[v] = min(low[v], index[w])
                if recurse:
                    continue
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        onstack.discard(w)
                        comp.append(w)
                        if w == v:
                            break
                    out.append(sorted(comp, key=atom_key))
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[v])
        return out

    def pos_sccs(self) -> list[list[Atom]]:
        """Components over positive edges only, reverse topological order."""
        sub = DependencyGraph()
        for a in self.atoms:
            sub.add_atom(a)
        for h, deps in self.pos.items():
            for b in deps:
                sub.add_edge(h, b, False)
        return sub.sccs()


def is_tight(p: Program) -> bool:
    """No cyclic positive dependencies among atoms."""
    g = DependencyGraph.of(p)
    for comp in g.pos_sccs():
        if len(comp) > 1:
            return False
        a = comp[0]
        if a in g.pos[a]:
            return False
    return True


def is_stratified(p: Program) -> bool:
    """No negative edge inside any dependency cycle."""
    g = DependencyGraph.of(p)
    for comp in g.sccs():
        cs = set(comp)
        for a in comp:
            if g.neg[a] & cs:
                return False
    return True


def stratify(p: Program) -> list[list[Atom]]:
    """Components in evaluation order; raises NotStratifiedError otherwise."""
    g = DependencyGraph.of(p)
    comps = g.sccs()
    for comp in comps:
        cs = set(comp)
        for a in comp:
            bad = g.neg[a] & cs
            if bad:
                b = sorted(bad, key=atom_key)[0]
                raise NotStratifiedError(
                    f"negation between {a} and {b} inside a dependency cycle",
                    cycle=tuple(comp),
                )
    return comps


def choice_atoms(p: Program) -> frozenset[Atom]:
    """Atoms that occur in a choice head or cardinality head."""
    out: set[Atom] = set()
    for r in p.rules:
        if r.choice and isinstance(r.head, Atom):
            out.add(r.head)
        elif isinstance(r.head, CardAtom):
            out.update(el.atom for el in r.head.elements)
    return frozenset(out)


def is_gdt(p: Program) -> bool:
    """Guess-then-deterministic: every choice rule is a bodyless `{p}.`
    whose atom does not head any other rule, there are no cardinality
    heads, and the remaining rules form a stratified program.

    The head-sharing condition matters: a guessed atom that another rule
    can also derive is not a free guess, and treating it as one breaks
    any construction that quantifies over the guessed set.
    """
    chosen: set[Atom] = set()
    rest: list[Rule] = []
    for r in p.rules:
        if isinstance(r.head, CardAtom):
            return False
        if r.choice:
            if r.body:
                return False
            chosen.add(r.head)
        else:
            rest.append(r)
    if chosen & {r.head for r in rest if isinstance(r.head, Atom)}:
        return False
    return is_stratified(Program.of(rest, p.universe | p.occurring_atoms()))


def to_gdt(p: Program) -> tuple[Program, dict[Atom, Atom]]:
    """Rewrite choice rules into independent bodyless guesses.

    Each `{q} :- B` becomes `{q'} :-` plus `q :- q', B` for a fresh atom
    q'; a bodyless `{q}.` whose atom also heads a plain rule, or a bodied
    choice about to be rewritten, becomes `{q'} :-` plus `q :- q'`.
    Returns the rewritten program and the map q -> q'.  Raises
    NotStratifiedError when the result is still not
    guess-then-deterministic.
    """
    if p.rules and any(isinstance(r.head, CardAtom) for r in p.rules):
        raise NotStratifiedError("cardinality heads must be compiled away first")
    used = {a.pred for a in p.universe} | {a.pred for a in p.occurring_atoms()}
    # heads that keep or gain a plain rule in the output
    redefined = {
        r.head
        for r in p.rules
        if isinstance(r.head, Atom) and (not r.choice or r.body)
    }
    fresh: dict[Atom, Atom] = {}

    def freshen(a: Atom) -> Atom:
        if a in fresh:
            return fresh[a]
        base = f"{a.pred}_g"
        name = base
        k = 0
        while name in used:
            k += 1
            name = f"{base}{k}"
        used.add(name)
        fa = Atom(name, a.args)
        fresh[a] = fa
        return fa

    out: list[Rule] = []
    for r in p.rules:
        if r.choice and (r.body or r.head in redefined):
            assert isinstance(r.head, Atom)
            q = freshen(r.head)
            out.append(Rule(q, (), choice=True))
            out.append(Rule(r.head, (Literal(q),) + r.body))
        else:
            out.append(r)
    result = Program.of(out, p.universe)
    rest = [r for r in result.rules if not r.choice]
    try:
        stratify(Program.of(rest, result.universe | result.occurring_atoms()))
    except NotStratifiedError as e:
        raise NotStratifiedError(
            f"program is not guess-then-deterministic even after rewriting: {e}",
            cycle=e.cycle,
        )
    return result, fresh

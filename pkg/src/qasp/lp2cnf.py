"""Translate ground programs to CNF so that stable models correspond
exactly to the CNF models restricted to the program atoms.

Tight programs get the Clark completion with one auxiliary (Tseitin) variable
per nonempty rule body.  Non-tight programs additionally receive weak level
rankings: every atom in a nontrivial positive dependency component carries a
binary rank, and a true atom must be supported by a rule whose positive body
atoms from the same component have strictly smaller rank.  Rankings use
one-sided comparator circuits, which is sound because the comparison outputs
occur only positively.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .lp import (
    Atom,
    DependencyGraph,
    Literal,
    ModelError,
    Program,
    Rule,
    compile_cardinality,
    format_atom,
    is_tight,
    sorted_atoms,
)

Clause = frozenset  # of signed variable ints


class NotTightError(Exception):
    pass


@dataclass(frozen=True)
class CnfFormula:
    clauses: frozenset[Clause]
    num_vars: int

    def __post_init__(self):
        for c in self.clauses:
            for l in c:
                if l == 0 or abs(l) > self.num_vars:
                    raise ValueError(f"literal {l} out of range")
                if -l in c:
                    raise ValueError(f"tautological clause {sorted(c)}")

    def __iter__(self) -> Iterator[Clause]:
        return iter(self.clauses)

    def __len__(self) -> int:
        return len(self.clauses)


class AtomMap:
    """Injective map from source atoms to CNF variables.

    Variables outside the image are auxiliary: they carry rule bodies,
    support selectors, and rank bits, and are never reported back.
    """

    def __init__(self, mapping: dict[Atom, int]):
        self._a2v = dict(mapping)
        self._v2a = {v: a for a, v in self._a2v.items()}
        if len(self._v2a) != len(self._a2v):
            raise ValueError("atom map must be injective")

    def var(self, a: Atom) -> int:
        try:
            return self._a2v[a]
        except KeyError:
            raise KeyError(f"atom {format_atom(a)} is not mapped")

    def atom(self, v: int) -> Optional[Atom]:
        return self._v2a.get(v)

    def __contains__(self, a: Atom) -> bool:
        return a in self._a2v

    def __len__(self) -> int:
        return len(self._a2v)

    def __eq__(self, other) -> bool:
        return isinstance(other, AtomMap) and self._a2v == other._a2v

    def items(self):
        return self._a2v.items()

    def atoms(self) -> list[Atom]:
        return sorted_atoms(self._a2v)

    def dump(self) -> str:
        lines = [f"{format_atom(a)}\t{v}" for v, a in sorted(self._v2a.items())]
        return "\n".join(lines) + ("\n" if lines else "")


class _Builder:
    def __init__(self):
        self.n = 0
        self.clauses: set[Clause] = set()

    def new_var(self) -> int:
        self.n += 1
        return self.n

    def add(self, *lits: int) -> None:
        c = frozenset(lits)
        if any(-l in c for l in c):
            return  # tautology
        self.clauses.add(c)

    def finish(self) -> CnfFormula:
        return CnfFormula(frozenset(self.clauses), self.n)


def _translate_plain(p: Program, *, ranked: bool) -> tuple[CnfFormula, AtomMap]:
    if not p.is_plain:
        raise ModelError("cardinality atoms must be compiled away first")
    atoms = sorted_atoms(p.universe)
    b = _Builder()
    amap = {a: b.new_var() for a in atoms}

    def lit(e: Literal) -> int:
        return -amap[e.atom] if e.neg else amap[e.atom]

    facts: set[Atom] = set()
    bodyless_choice: set[Atom] = set()
    by_head: dict[Atom, list[Rule]] = {}
    for r in p.rules:
        if r.head is None:
            b.add(*(-lit(e) for e in r.body))
        else:
            assert isinstance(r.head, Atom)
            if not r.body:
                (bodyless_choice if r.choice else facts).add(r.head)
            by_head.setdefault(r.head, []).append(r)

    # rank bits for atoms in nontrivial positive dependency components
    scc_of: dict[Atom, frozenset[Atom]] = {}
    bits: dict[Atom, list[int]] = {}
    if ranked:
        g = DependencyGraph.of(p)
        for comp in g.pos_sccs():
            nontrivial = len(comp) > 1 or comp[0] in g.pos[comp[0]]
            if not nontrivial:
                continue
            k = max(1, math.ceil(math.log2(len(comp))))
            cs = frozenset(comp)
            for a in comp:
                scc_of[a] = cs
                bits[a] = [b.new_var() for _ in range(k)]

    lt_cache: dict[tuple[Atom, Atom], int] = {}

    def lt_var(q: Atom, a: Atom) -> int:
        # one-sided circuit: true only if rank(q) < rank(a), bitwise from LSB
        if (q, a) in lt_cache:
            return lt_cache[(q, a)]
        prev: Optional[int] = None
        for qi, ai in zip(bits[q], bits[a]):
            s = b.new_var()
            b.add(-s, -qi)
            b.add(-s, ai)
            if prev is None:
                cur = s
            else:
                eq = b.new_var()
                b.add(-eq, -qi, ai)
                b.add(-eq, qi, -ai)
                t = b.new_var()
                b.add(-t, eq)
                b.add(-t, prev)
                cur = b.new_var()
                b.add(-cur, s, t)
            prev = cur
        assert prev is not None
        lt_cache[(q, a)] = prev
        return prev

    for a in atoms:
        v = amap[a]
        if a in facts:
            b.add(v)
            continue
        rules = by_head.get(a, [])
        if not rules:
            b.add(-v)
            continue
        supports: list[int] = []
        trivially_supported = a in bodyless_choice
        for r in rules:
            if not r.body:
                continue  # bodyless choice: free support, no clauses
            beta = b.new_var()
            for e in r.body:
                b.add(-beta, lit(e))
            b.add(beta, *(-lit(e) for e in r.body))
            if not r.choice:
                b.add(-beta, v)
            if a in scc_of:
                internal = sorted_atoms(
                    e.atom for e in r.body if not e.neg and e.atom in scc_of[a]
                )
                if internal:
                    ext = b.new_var()
                    b.add(-ext, beta)
                    for q in internal:
                        b.add(-ext, lt_var(q, a))
                    supports.append(ext)
                    continue
            supports.append(beta)
        if not trivially_supported:
            b.add(-v, *supports)
    return b.finish(), AtomMap(amap)


def completion(p: Program) -> tuple[CnfFormula, AtomMap]:
    """Clark completion; requires a tight program."""
    if not is_tight(p):
        raise NotTightError("program has a positive dependency cycle")
    return _translate_plain(p, ranked=False)


def level_ranking(p: Program) -> tuple[CnfFormula, AtomMap]:
    """Completion plus weak level rankings; no tightness requirement."""
    return _translate_plain(p, ranked=True)


def translate(p: Program) -> tuple[CnfFormula, AtomMap]:
    """CNF whose models, restricted to p's universe, are exactly SM(p).

    Cardinality atoms are compiled away; tight programs dispatch to the
    plain completion, others to level rankings.  Only atoms of the original
    universe are mapped; everything else is auxiliary.
    """
    q = p if p.is_plain else compile_cardinality(p)
    cnf, m = completion(q) if is_tight(q) else level_ranking(q)
    if q is not p:
        m = AtomMap({a: v for a, v in m.items() if a in p.universe})
    return cnf, m


def fixbf(x: Iterable[Atom], y: Iterable[Atom], m: AtomMap) -> set[Clause]:
    """Unit clauses selecting models M with M ∩ y = x, through the map."""
    xs, ys = set(x), set(y)
    if not xs <= ys:
        raise ValueError("fixbf requires x to be a subset of y")
    out = {frozenset({m.var(a)}) for a in xs}
    out |= {frozenset({-m.var(a)}) for a in ys - xs}
    return out


def cnf_models(cnf: CnfFormula) -> Iterator[frozenset[int]]:
    """All models as sets of true variables, by enumeration; test-sized only."""
    n = cnf.num_vars
    if n > 22:
        raise ValueError(f"refusing enumeration over {n} variables")
    for i in range(1 << n):
        true = {v for v in range(1, n + 1) if i >> (v - 1) & 1}
        if all(any((l > 0) == (abs(l) in true) for l in c) for c in cnf.clauses):
            yield frozenset(true)


def projected_models(cnf: CnfFormula, m: AtomMap) -> set[frozenset[Atom]]:
    """{M ∩ mapped-atoms : M model of cnf}; test helper for the projection law."""
    out: set[frozenset[Atom]] = set()
    for model in cnf_models(cnf):
        out.add(frozenset(a for a, v in m.items() if v in model))
    return out

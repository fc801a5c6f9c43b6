"""Exact stable-model search tuned for guess-then-deterministic programs.

Branches over the atoms occurring in choice heads, then evaluates the rest
by stratified fixpoint, one dependency component at a time.  Each candidate
is kept only when the chosen atoms coincide with the chosen-and-derivable
ones, so every stable model is produced exactly once.  Programs that are not
stratified when choice rules are read as normal rules fall back to the
exhaustive reference search.
"""
from __future__ import annotations

from typing import Mapping, Optional

from .analysis import NotStratifiedError, choice_atoms, stratify
from .models import ModelError, stable_models
from .syntax import Atom, Literal, Program, Rule, sorted_atoms


class Solver:
    def __init__(self, program: Program, *, fallback_cap: int = 22):
        if not program.is_plain:
            raise ModelError("cardinality atoms must be compiled away first")
        self.program = program
        self.fallback_cap = fallback_cap
        self.choices = sorted_atoms(choice_atoms(program))
        self._constraints = [r for r in program.rules if r.head is None]
        try:
            self._comps = stratify(program)
            self.stratified = True
        except NotStratifiedError:
            self._comps = []
            self.stratified = False
        if self.stratified:
            comp_of = {a: i for i, comp in enumerate(self._comps) for a in comp}
            self._rules_by_comp: list[list[Rule]] = [[] for _ in self._comps]
            for r in program.rules:
                if r.head is None:
                    continue
                self._rules_by_comp[comp_of[r.head]].append(r)

    def models(
        self,
        pinned: Optional[Mapping[Atom, bool]] = None,
        limit: Optional[int] = None,
    ) -> list[frozenset[Atom]]:
        """Stable models agreeing with `pinned`, in a deterministic order."""
        pins = dict(pinned or {})
        if not self.stratified:
            return stable_models(
                self.program, cap=self.fallback_cap, pinned=pins, limit=limit
            )
        for a, v in pins.items():
            if v and a not in self.program.universe:
                return []
        free = [a for a in self.choices if a not in pins]
        base = frozenset(a for a in self.choices if pins.get(a))
        out: list[frozenset[Atom]] = []
        for i in range(1 << len(free)):
            chosen = base | {free[b] for b in range(len(free)) if i >> b & 1}
            m = self._evaluate(chosen, pins)
            if m is None:
                continue
            out.append(m)
            if limit is not None and len(out) >= limit:
                break
        return out

    def has_model(self, pinned: Optional[Mapping[Atom, bool]] = None) -> bool:
        return bool(self.models(pinned, limit=1))

    def _evaluate(
        self, chosen: frozenset[Atom], pins: Mapping[Atom, bool]
    ) -> Optional[frozenset[Atom]]:
        derived: set[Atom] = set()

        def holds(body: tuple) -> bool:
            for e in body:
                assert isinstance(e, Literal)
                if e.neg == (e.atom in derived):
                    return False
            return True

        for ci, comp in enumerate(self._comps):
            rules = self._rules_by_comp[ci]
            changed = True
            while changed:
                changed = False
                for r in rules:
                    head = r.head
                    assert isinstance(head, Atom)
                    if head in derived:
                        continue
                    if r.choice and head not in chosen:
                        continue
                    if holds(r.body):
                        derived.add(head)
                        changed = True
            for a in comp:
                if a in pins and pins[a] != (a in derived):
                    return None
        for c in self.choices:
            if (c in derived) != (c in chosen):
                return None
        for r in self._constraints:
            if holds(r.body):
                return None
        return frozenset(derived)

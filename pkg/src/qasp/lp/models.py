"""Reference stable-model semantics by exhaustive enumeration.

Deliberately naive: every candidate interpretation is checked against the
definition (classical satisfaction plus least-model-of-reduct).  This is the
trusted oracle the optimized solver is tested against; keep it obvious.
"""
from __future__ import annotations

from typing import Iterable, Iterator, Mapping, Optional

from .syntax import Atom, Literal, Program, sorted_atoms


class ModelError(Exception):
    pass


def _require_plain(p: Program) -> None:
    if not p.is_plain:
        raise ModelError("cardinality atoms must be compiled away first")


def body_satisfied(body: tuple, interp: frozenset[Atom]) -> bool:
    for e in body:
        if not isinstance(e, Literal):
            raise ModelError(f"non-literal body element in ground program: {e}")
        if e.neg == (e.atom in interp):
            return False
    return True


def is_classical_model(p: Program, interp: frozenset[Atom]) -> bool:
    """Constraints must have unsatisfied bodies; normal rules body -> head.

    Choice rules impose nothing classically.
    """
    for r in p.rules:
        if r.choice:
            continue
        if not body_satisfied(r.body, interp):
            continue
        if r.head is None:
            return False
        if r.head not in interp:
            return False
    return True


def reduct(p: Program, interp: frozenset[Atom]) -> list[tuple[Atom, tuple[Atom, ...]]]:
    """Definite rules remaining after fixing negation (and choices) by interp."""
    out: list[tuple[Atom, tuple[Atom, ...]]] = []
    for r in p.rules:
        if r.head is None:
            continue
        assert isinstance(r.head, Atom)
        if any(e.neg and e.atom in interp for e in r.body):
            continue
        if r.choice and r.head not in interp:
            continue
        pos = tuple(e.atom for e in r.body if not e.neg)
        out.append((r.head, pos))
    return out


def least_model(definite: Iterable[tuple[Atom, tuple[Atom, ...]]]) -> frozenset[Atom]:
    rules = list(definite)
    derived: set[Atom] = set()
    changed = True
    while changed:
        changed = False
        for h, pos in rules:
            if h not in derived and all(a in derived for a in pos):
                derived.add(h)
                changed = True
    return frozenset(derived)


def is_stable_model(p: Program, interp: frozenset[Atom] | set[Atom]) -> bool:
    _require_plain(p)
    interp = frozenset(interp)
    if not is_classical_model(p, interp):
        return False
    return least_model(reduct(p, interp)) == interp


def _matches(interp: frozenset[Atom], pinned: Mapping[Atom, bool]) -> bool:
    return all((a in interp) == v for a, v in pinned.items())


def enumerate_interpretations(atoms: list[Atom]) -> Iterator[frozenset[Atom]]:
    """All subsets in binary counting order, bit 0 = first atom."""
    n = len(atoms)
    for i in range(1 << n):
        yield frozenset(atoms[b] for b in range(n) if i >> b & 1)


def stable_models(
    p: Program,
    *,
    cap: int = 22,
    pinned: Optional[Mapping[Atom, bool]] = None,
    limit: Optional[int] = None,
) -> list[frozenset[Atom]]:
    """All stable models, in counting order over the canonical atom order.

    `pinned` filters models by required truth values, `limit` stops early,
    and `cap` refuses enumeration over too many atoms outright.
    """
    _require_plain(p)
    atoms = sorted_atoms(p.universe)
    if len(atoms) > cap:
        raise ModelError(
            f"refusing exhaustive enumeration over {len(atoms)} atoms (cap {cap})"
        )
    out: list[frozenset[Atom]] = []
    for interp in enumerate_interpretations(atoms):
        if pinned is not None and not _matches(interp, pinned):
            continue
        if is_stable_model(p, interp):
            out.append(interp)
            if limit is not None and len(out) >= limit:
                break
    return out


def has_stable_model(p: Program, **kw) -> bool:
    return bool(stable_models(p, limit=1, **kw))

"""Quantified logic programs: prefix types, fixcons, brute-force evaluation.

A quantified program is a quantifier prefix over disjoint atom sets plus a
ground program.  Satisfiability is defined recursively: an existential block
asks for some subset of its atoms, a universal block for every subset, such
that the program with those atoms fixed remains satisfiable; the base case
is existence of a stable model.  `eval_qlp` implements that definition
directly and serves as the semantic oracle for the CNF/QBF pipeline.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .lp import (
    Atom,
    Literal,
    Program,
    Rule,
    Solver,
    compile_cardinality,
    format_atom,
    ground,
    parse_program,
    sorted_atoms,
    term_to_atom,
)

EXISTS = "exists"
FORALL = "forall"

DEFAULT_BUDGET = 1 << 20


class QlpError(Exception):
    pass


class BudgetExceededError(QlpError):
    pass


@dataclass(frozen=True)
class QuantifierBlock:
    kind: str
    atoms: tuple[Atom, ...]

    def __post_init__(self):
        if self.kind not in (EXISTS, FORALL):
            raise QlpError(f"unknown quantifier kind {self.kind!r}")
        if not self.atoms:
            raise QlpError("quantifier block must not be empty")
        object.__setattr__(self, "atoms", tuple(sorted_atoms(set(self.atoms))))

    def __str__(self) -> str:
        sym = "E" if self.kind == EXISTS else "A"
        return sym + "{" + ", ".join(format_atom(a) for a in self.atoms) + "}"


def exists(atoms: Iterable[Atom]) -> QuantifierBlock:
    return QuantifierBlock(EXISTS, tuple(atoms))


def forall(atoms: Iterable[Atom]) -> QuantifierBlock:
    return QuantifierBlock(FORALL, tuple(atoms))


@dataclass(frozen=True)
class QuantifiedProgram:
    prefix: tuple[QuantifierBlock, ...]
    program: Program

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        seen: set[Atom] = set()
        for b in self.prefix:
            overlap = seen & set(b.atoms)
            if overlap:
                raise QlpError(
                    f"prefix blocks must be disjoint; repeated: "
                    + ", ".join(format_atom(a) for a in sorted_atoms(overlap))
                )
            seen.update(b.atoms)
        missing = seen - self.program.universe
        if missing:
            raise QlpError(
                "prefix atoms missing from the program universe: "
                + ", ".join(format_atom(a) for a in sorted_atoms(missing))
            )

    def quantified_atoms(self) -> frozenset[Atom]:
        out: set[Atom] = set()
        for b in self.prefix:
            out.update(b.atoms)
        return frozenset(out)


@dataclass(frozen=True)
class SatResult:
    satisfiable: bool
    witness: Optional[frozenset[Atom]] = None

    def __post_init__(self):
        if self.witness is not None and not self.satisfiable:
            raise QlpError("witness only allowed on satisfiable results")


def fixcons(x: Iterable[Atom], y: Iterable[Atom]) -> list[Rule]:
    """Constraints selecting stable models M with M ∩ y = x."""
    xs, ys = set(x), set(y)
    if not xs <= ys:
        raise ValueError("fixcons requires x to be a subset of y")
    out = [Rule(None, (Literal(a, neg=True),)) for a in sorted_atoms(xs)]
    out += [Rule(None, (Literal(a),)) for a in sorted_atoms(ys - xs)]
    return out


def eval_qlp(
    qp: QuantifiedProgram,
    *,
    budget: int = DEFAULT_BUDGET,
    solver: Optional[Solver] = None,
) -> SatResult:
    """Evaluate satisfiability by exhaustive recursion over the prefix.

    The budget counts base-case stable-model checks; the search raises
    BudgetExceededError rather than answer from a truncated search.  The
    witness, present when the outermost block is existential and the result
    satisfiable, is the first successful subset in binary counting order
    over the block's canonical atom order.
    """
    if solver is None:
        solver = Solver(compile_cardinality(qp.program))
    remaining = [budget]
    prefix = qp.prefix
    witness: list[Optional[frozenset[Atom]]] = [None]

    def leaf(pins: dict[Atom, bool]) -> bool:
        if remaining[0] <= 0:
            raise BudgetExceededError(
                f"exceeded the budget of {budget} base-case checks"
            )
        remaining[0] -= 1
        return solver.has_model(pins)

    def recurse(level: int, pins: dict[Atom, bool]) -> bool:
        if level == len(prefix):
            return leaf(pins)
        block = prefix[level]
        atoms = block.atoms
        n = len(atoms)
        want = block.kind == EXISTS
        for y in range(1 << n):
            pins2 = dict(pins)
            for b in range(n):
                pins2[atoms[b]] = bool(y >> b & 1)
            if recurse(level + 1, pins2) == want:
                if want and level == 0:
                    witness[0] = frozenset(atoms[b] for b in range(n) if y >> b & 1)
                return want
        return not want

    sat = recurse(0, {})
    if sat and prefix and prefix[0].kind == EXISTS:
        return SatResult(True, witness[0])
    return SatResult(sat)


# --- text format -------------------------------------------------------------

_PREFIX_PREDS = {"_exists": EXISTS, "_forall": FORALL}


def parse_qlp(text: str) -> QuantifiedProgram:
    """Parse rules with `_exists(i,a)` / `_forall(i,a)` prefix declarations.

    Levels are assembled ascending; each level must use a single quantifier
    kind.  Declared atoms missing from the remaining rules produce a warning
    and are added to the universe.
    """
    rules = parse_program(text)
    decls: list[Rule] = []
    rest: list[Rule] = []
    for r in rules:
        head = r.head
        if isinstance(head, Atom) and head.pred in _PREFIX_PREDS:
            if r.body or r.choice or len(head.args) != 2:
                raise QlpError(f"malformed prefix declaration: {r}")
            decls.append(r)
        else:
            rest.append(r)
    declared = ground(decls) if decls else None
    levels: dict[int, tuple[str, set[Atom]]] = {}
    if declared is not None:
        for r in declared.rules:
            assert isinstance(r.head, Atom)
            kind = _PREFIX_PREDS[r.head.pred]
            lvl, arg = r.head.args
            if not isinstance(lvl, int):
                raise QlpError(f"prefix level must be an integer: {r}")
            try:
                atom = term_to_atom(arg)
            except ValueError:
                raise QlpError(f"prefix declaration argument is not an atom: {r}")
            if lvl in levels and levels[lvl][0] != kind:
                raise QlpError(
                    f"level {lvl} declared both existential and universal"
                )
            levels.setdefault(lvl, (kind, set()))[1].add(atom)
    prefix_atoms = {a for _, s in levels.values() for a in s}
    program = ground(rest, prefix_atoms)
    absent = prefix_atoms - program.occurring_atoms()
    if absent:
        warnings.warn(
            "quantified atoms do not occur in the program: "
            + ", ".join(format_atom(a) for a in sorted_atoms(absent)),
            stacklevel=2,
        )
    prefix = tuple(
        QuantifierBlock(kind, tuple(sorted_atoms(atoms)))
        for _, (kind, atoms) in sorted(levels.items())
    )
    return QuantifiedProgram(prefix, program)


def format_qlp(qp: QuantifiedProgram) -> str:
    lines = []
    for i, b in enumerate(qp.prefix, start=1):
        pred = "_exists" if b.kind == EXISTS else "_forall"
        for a in b.atoms:
            lines.append(f"{pred}({i},{format_atom(a)}).")
    lines.append(str(qp.program))
    return "\n".join(lines)


def format_result(res: SatResult) -> str:
    if not res.satisfiable:
        return "UNSAT\n"
    out = "SAT\n"
    if res.witness is not None:
        for a in sorted_atoms(res.witness):
            out += format_atom(a) + "\n"
    return out

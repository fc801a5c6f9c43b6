"""Programs with stable-model quantifiers over subprograms.

A quantified subprogram sequence is an expression `Q0 P0 ... Qn Pn : C`
where every Qi is an existential or universal stable-model quantifier, the
Pi are ground programs, and C is a final normal stratified check program.
Coherence is recursive: an existential level needs some stable model of its
program, a universal level needs every stable model, such that the rest of
the sequence stays coherent once the model is pinned into the next level as
facts and constraints; the base case asks the check program, extended with
those pins, for a stable model.

The two translations connect this formalism with quantified programs over
atoms.  `to_qlp` flattens a sequence in normal form (empty check, no level
redefining atoms of an earlier one, universal levels guess-then-
deterministic) into one program under an atom prefix; `normalize`
establishes that form while preserving coherence.  `from_qlp` lifts an atom
prefix into levels of bodyless choices over primed copies of the quantified
atoms.  Both translations preserve satisfiability exactly, which the test
suite checks by brute force in both directions.

Throughout the module the atom set of a level is its program's universe, so
declared extras behave like atoms occurring in rules.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .lp import (
    Atom,
    CardAtom,
    Literal,
    NotStratifiedError,
    Program,
    Rule,
    Solver,
    compile_cardinality,
    format_atom,
    format_program,
    ground,
    is_gdt,
    is_stratified,
    parse_program,
    sorted_atoms,
    to_gdt,
)
from .qlp import (
    DEFAULT_BUDGET,
    EXISTS,
    FORALL,
    BudgetExceededError,
    QuantifiedProgram,
    exists,
    forall,
)

EXISTS_ST = EXISTS
FORALL_ST = FORALL

PRIME_SUFFIX = "_pr"


class AspqError(Exception):
    pass


class NormalizationError(AspqError):
    pass


# --- programs ------------------------------------------------------------------


@dataclass(frozen=True)
class AspqBlock:
    """One quantified level: a stable-model quantifier and its program."""

    kind: str
    program: Program

    def __post_init__(self):
        if self.kind not in (EXISTS_ST, FORALL_ST):
            raise AspqError(f"unknown quantifier kind {self.kind!r}")


def exists_st(program: Program) -> AspqBlock:
    return AspqBlock(EXISTS_ST, program)


def forall_st(program: Program) -> AspqBlock:
    return AspqBlock(FORALL_ST, program)


def _check_is_normal(check: Program) -> None:
    for r in check.rules:
        if r.choice:
            raise AspqError("the check program must not contain choice rules")
        if isinstance(r.head, CardAtom) or any(
            isinstance(e, CardAtom) for e in r.body
        ):
            raise AspqError("the check program must not contain cardinality atoms")
    if not is_stratified(check):
        raise AspqError("the check program must be stratified")


@dataclass(frozen=True)
class AspqProgram:
    """Quantified levels plus the final check program."""

    blocks: tuple[AspqBlock, ...]
    check: Program = field(default_factory=lambda: Program.of([]))

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.blocks:
            raise AspqError("at least one quantified level is required")
        _check_is_normal(self.check)

    def universe(self) -> frozenset[Atom]:
        out: set[Atom] = set(self.check.universe)
        for b in self.blocks:
            out |= b.program.universe
        return frozenset(out)


# --- pinning and coherence -------------------------------------------------------


def fixfact(x: Iterable[Atom], y: Iterable[Atom]) -> list[Rule]:
    """Facts asserting x plus constraints banning the rest of y."""
    xs, ys = set(x), set(y)
    if not xs <= ys:
        raise ValueError("fixfact requires x to be a subset of y")
    out = [Rule(a) for a in sorted_atoms(xs)]
    out += [Rule(None, (Literal(a),)) for a in sorted_atoms(ys - xs)]
    return out


def _solver(p: Program) -> Solver:
    return Solver(p if p.is_plain else compile_cardinality(p))


def coherent(pi: AspqProgram, *, budget: int = DEFAULT_BUDGET) -> bool:
    """Evaluate coherence by exhaustive recursion over the levels.

    Each level enumerates the stable models of its program extended with
    the pins inherited from the previous level; existential levels need
    one model to succeed, universal levels need all of them.  The budget
    caps the total number of stable models visited and base-case checks,
    and the search raises BudgetExceededError rather than answer from a
    truncated enumeration.
    """
    remaining = [budget]

    def spend(k: int) -> None:
        if remaining[0] < k:
            raise BudgetExceededError(
                f"exceeded the budget of {budget} stable-model visits"
            )
        remaining[0] -= k

    def level(i: int, carry: list[Rule]) -> bool:
        block = pi.blocks[i]
        cur = block.program.extend(carry)
        limit = remaining[0] + 1
        models = _solver(cur).models(limit=limit)
        if len(models) >= limit:
            raise BudgetExceededError(
                f"exceeded the budget of {budget} stable-model visits"
            )
        spend(max(len(models), 1))
        want = block.kind == EXISTS_ST
        last = i + 1 == len(pi.blocks)
        for m in models:
            pins = fixfact(m & cur.universe, cur.universe)
            if last:
                spend(1)
                ok = _solver(pi.check.extend(pins)).has_model()
            else:
                ok = level(i + 1, pins)
            if ok == want:
                return want
        return not want

    return level(0, [])


# --- normalization ----------------------------------------------------------------


def _padded(prog: Program, vocabulary: set[Atom]) -> Program:
    # widen the universe so fresh auxiliary names avoid every other level
    return Program.of(prog.rules, prog.universe | vocabulary)


def _redefining_card_head(prog: Program, seen: set[Atom]) -> bool:
    for r in prog.rules:
        if isinstance(r.head, CardAtom) and any(
            el.atom in seen for el in r.head.elements
        ):
            return True
    return False


def normalize(pi: AspqProgram) -> AspqProgram:
    """Establish normal form with guess-then-deterministic universal levels.

    The check program moves into a trailing existential level.  A rule
    whose head an earlier level already mentions turns into a constraint
    requiring the head (its choice counterpart is dropped: the earlier
    level owns the atom's value).  Universal levels are rewritten so every
    guess is a fresh bodyless choice, compiling cardinality away first.
    Coherence is preserved; raises NormalizationError when a universal
    level cannot be rewritten.
    """
    blocks = list(pi.blocks)
    if pi.check.rules:
        blocks.append(AspqBlock(EXISTS_ST, pi.check))
    vocabulary: set[Atom] = set()
    for b in blocks:
        vocabulary |= b.program.universe
    out: list[AspqBlock] = []
    seen: set[Atom] = set()
    for i, block in enumerate(blocks):
        prog = block.program
        if not prog.is_plain and (
            block.kind == FORALL_ST or _redefining_card_head(prog, seen)
        ):
            compiled = compile_cardinality(_padded(prog, vocabulary))
            prog = Program.of(compiled.rules, prog.universe)
            vocabulary |= prog.universe
        rules = []
        for r in prog.rules:
            if isinstance(r.head, Atom) and r.head in seen:
                if r.choice:
                    continue
                rules.append(Rule(None, r.body + (Literal(r.head, neg=True),)))
            else:
                rules.append(r)
        prog = Program.of(rules, prog.universe)
        if block.kind == FORALL_ST and not is_gdt(prog):
            try:
                rewritten, _ = to_gdt(_padded(prog, vocabulary))
            except NotStratifiedError as e:
                raise NormalizationError(
                    f"universal level {i} cannot be rewritten to bodyless guesses: {e}"
                ) from e
            prog = Program.of(rewritten.rules, prog.universe)
            vocabulary |= prog.universe
        out.append(AspqBlock(block.kind, prog))
        seen |= prog.universe
    return AspqProgram(tuple(out), Program.of([]))


# --- translation to a quantified program -------------------------------------------


def _require_normal(pi: AspqProgram) -> None:
    if pi.check.rules:
        raise AspqError("the check program must be empty; run normalize first")
    seen: set[Atom] = set()
    for i, block in enumerate(pi.blocks):
        for r in block.program.rules:
            if isinstance(r.head, Atom):
                heads: tuple[Atom, ...] = (r.head,)
            elif isinstance(r.head, CardAtom):
                heads = tuple(el.atom for el in r.head.elements)
            else:
                heads = ()
            for h in heads:
                if h in seen:
                    raise AspqError(
                        f"level {i} redefines {format_atom(h)}; run normalize first"
                    )
        if block.kind == FORALL_ST and not is_gdt(block.program):
            raise AspqError(
                f"universal level {i} is not guess-then-deterministic; "
                "run normalize first"
            )
        seen |= block.program.universe


def _fresh_pred(pi: AspqProgram, base: str) -> str:
    used = {a.pred for a in pi.universe()}
    name, k = base, 0
    while name in used:
        k += 1
        name = f"{base}{k}"
    return name


def to_qlp(pi: AspqProgram) -> QuantifiedProgram:
    """Flatten a normal-form sequence into one quantified program.

    Existential levels quantify the atoms they introduce and have their
    rules switched off once an earlier universal level is flagged;
    universal levels quantify their guesses and derive their level's flag
    instead of failing on a constraint; a chain propagates flags inward.
    Satisfiability of the result equals coherence of the input.
    """
    _require_normal(pi)
    n = len(pi.blocks) - 1
    flag_pred = _fresh_pred(pi, "flag")
    prefix = []
    rules: list[Rule] = []
    extras: set[Atom] = set()
    seen: set[Atom] = set()
    for i, block in enumerate(pi.blocks):
        prog = block.program
        extras |= prog.universe
        if block.kind == EXISTS_ST:
            new = prog.universe - seen
            if new:
                prefix.append(exists(sorted_atoms(new)))
            if n == 0:
                rules += prog.rules
            else:
                off = Literal(Atom(flag_pred, (i,)), neg=True)
                rules += [Rule(r.head, r.body + (off,), r.choice) for r in prog.rules]
        else:
            guesses = {r.head for r in prog.rules if r.choice}
            if guesses:
                prefix.append(forall(sorted_atoms(guesses)))
            flag = Atom(flag_pred, (i,))
            rules += [
                Rule(flag, r.body) if r.head is None else r for r in prog.rules
            ]
        seen |= prog.universe
    beta = 1 if pi.blocks[0].kind == FORALL_ST else 2
    rules += [
        Rule(Atom(flag_pred, (i,)), (Literal(Atom(flag_pred, (i - 1,))),))
        for i in range(beta, n + 1)
    ]
    return QuantifiedProgram(tuple(prefix), Program.of(rules, extras))


# --- translation from a quantified program -----------------------------------------


def _primed(a: Atom) -> Atom:
    return Atom(a.pred + PRIME_SUFFIX, a.args)


def from_qlp(qp: QuantifiedProgram) -> AspqProgram:
    """Lift a quantified program into quantified guessing levels.

    Every prefix block becomes a level of bodyless choices over primed
    copies of its atoms, and a trailing existential level carries the
    program plus constraints equating each primed copy with its original.
    The result is coherent exactly when the input is satisfiable; raises
    AspqError when a primed name already occurs in the program.
    """
    if not qp.prefix:
        return AspqProgram((AspqBlock(EXISTS_ST, qp.program),))
    quantified = sorted_atoms(qp.quantified_atoms())
    for a in quantified:
        if _primed(a) in qp.program.universe:
            raise AspqError(
                f"primed copy of {format_atom(a)} already occurs in the program"
            )
    blocks = [
        AspqBlock(
            b.kind,
            Program.of([Rule(_primed(a), (), choice=True) for a in b.atoms]),
        )
        for b in qp.prefix
    ]
    matching: list[Rule] = []
    for a in quantified:
        matching.append(Rule(None, (Literal(a), Literal(_primed(a), neg=True))))
        matching.append(Rule(None, (Literal(a, neg=True), Literal(_primed(a)))))
    blocks.append(AspqBlock(EXISTS_ST, qp.program.extend(matching)))
    return AspqProgram(tuple(blocks))


# --- text format -------------------------------------------------------------------

_MARKERS = {"%@exists": EXISTS_ST, "%@forall": FORALL_ST, "%@check": None}


def parse_aspq(text: str) -> AspqProgram:
    """Parse the sectioned text format.

    A `%@exists` or `%@forall` line opens a quantified level and a final
    `%@check` line opens the check program; the lines in between use the
    ordinary rule syntax.  Other `%` lines are comments.

    Sections are grounded jointly: an atom derivable at any level counts as
    possible everywhere, so rules referring across sections survive, while
    each section's atom set stays its own rules' atoms.  Rules whose
    positive bodies are underivable at every level are discarded.
    """
    sections: list[tuple[Optional[str], list[str]]] = []
    in_check = False
    for line in text.splitlines():
        token = line.strip()
        if token in _MARKERS:
            if in_check:
                raise AspqError("the check section must come last")
            kind = _MARKERS[token]
            if kind is None:
                in_check = True
            sections.append((kind, []))
            continue
        if not sections:
            if token and not token.startswith("%"):
                raise AspqError("rules before the first section marker")
            continue
        sections[-1][1].append(line)
    parsed = [(kind, parse_program("\n".join(lines))) for kind, lines in sections]
    # choice-wrapping heads keeps every possibly true atom in the seed while
    # no section's facts can simplify another section's rules away
    seed_rules = [
        Rule(r.head, r.body, True) if isinstance(r.head, Atom) else r
        for _, rules in parsed
        for r in rules
    ]
    seed = ground(seed_rules).universe
    blocks: list[AspqBlock] = []
    check = Program.of([])
    for kind, rules in parsed:
        prog = Program.of(ground(rules, seed).rules)
        if kind is None:
            check = prog
        else:
            blocks.append(AspqBlock(kind, prog))
    return AspqProgram(tuple(blocks), check)


def format_aspq(pi: AspqProgram) -> str:
    """Canonical text: one marker line per section, then its rules."""
    out = []
    for b in pi.blocks:
        out.append("%@exists" if b.kind == EXISTS_ST else "%@forall")
        if b.program.rules:
            out.append(format_program(b.program).rstrip("\n"))
    if pi.check.rules:
        out.append("%@check")
        out.append(format_program(pi.check).rstrip("\n"))
    return "\n".join(out) + "\n"

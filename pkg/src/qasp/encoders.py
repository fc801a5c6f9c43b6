"""Quantified encodings of planning problems over a bounded horizon.

Every planning mode becomes a quantified logic program over time-stamped
copies of the description: fluent f at step t turns into `h(f,t)`, action
occurrences into `occ(a,t)`, and one choice per step picks which action
runs.  Modes differ in the quantifier prefix and in the relaxation
machinery that neutralizes universally chosen but impossible initial
states (`flag` atoms).  Decoding reads plans back out of satisfying
witnesses; for conditional plans the decoder re-solves with pinned
observation prefixes to materialize the whole tree.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Union

from .backends import solve_qlp
from .lp import (
    Atom,
    CardAtom,
    CardElement,
    Literal,
    NotStratifiedError,
    Program,
    Rule,
    atom_to_term,
    compile_cardinality,
    format_atom,
    is_gdt,
    sorted_atoms,
    term_to_atom,
    to_gdt,
)
from .planning import (
    EMPTY,
    PREV,
    AssumptionSolution,
    Branch,
    Plan,
    PlanningDescription,
    Seq,
    initial_states,
    seq_plan,
    unprev_atom,
)
from .qbf import DEFAULT_TIMEOUT
from .qlp import QuantifiedProgram, QuantifierBlock, exists, fixcons, forall

CLASSICAL = "classical"
CONFORMANT = "conformant"
ASSUMPTION = "assumption"
CONDITIONAL = "conditional"
MODES = (CLASSICAL, CONFORMANT, ASSUMPTION, CONDITIONAL)


class EncodingError(Exception):
    pass


# --- time-stamped atoms ------------------------------------------------------


def time_atom(t: int) -> Atom:
    return Atom("t", (t,))


def holds_atom(f: Atom, t: int) -> Atom:
    return Atom("h", (atom_to_term(f), t))


def occ_atom(a: Atom, t: int) -> Atom:
    return Atom("occ", (atom_to_term(a), t))


def flag_atom(t: int) -> Atom:
    return Atom("flag", (t,))


def obs_atom(t: int) -> Atom:
    return Atom("obs", ("true", t))


def assume_atom(f: Atom, value: bool) -> Atom:
    return Atom("assume", (atom_to_term(f), "true" if value else "false"))


def init_atom(f: Atom) -> Atom:
    return Atom("init", (atom_to_term(f),))


def _occ_parts(a: Atom) -> tuple[Atom, int]:
    if a.pred != "occ" or len(a.args) != 2 or not isinstance(a.args[1], int):
        raise EncodingError(f"{format_atom(a)} is not an occurrence atom")
    return term_to_atom(a.args[0]), a.args[1]


def _check_horizon(n: int) -> None:
    if not isinstance(n, int) or n < 1:
        raise EncodingError("the horizon must be a positive integer")


# --- rule transformation -----------------------------------------------------


def _map_rule(r: Rule, sub: Callable[[Atom], Atom], extra: tuple = ()) -> Rule:
    """Apply an atom substitution everywhere, appending extra body literals."""

    def card(c: CardAtom) -> CardAtom:
        els = tuple(
            CardElement(sub(el.atom), tuple(sub(a) for a in el.condition))
            for el in c.elements
        )
        return CardAtom(els, c.rel, c.bound)

    head = r.head
    if isinstance(head, Atom):
        head = sub(head)
    elif isinstance(head, CardAtom):
        head = card(head)
    body: list = list(extra)
    for e in r.body:
        if isinstance(e, Literal):
            body.append(Literal(sub(e.atom), e.neg))
        elif isinstance(e, CardAtom):
            body.append(card(e))
        else:
            raise EncodingError(f"unresolved construct in rule: {r}")
    return Rule(head, tuple(body), choice=r.choice)


def _sub_state(dd: PlanningDescription, t: int) -> Callable[[Atom], Atom]:
    fluents = dd.signature.fluents

    def sub(a: Atom) -> Atom:
        if a in fluents:
            return holds_atom(a, t)
        raise EncodingError(f"{format_atom(a)} is not a fluent")

    return sub


def _sub_dynamic(dd: PlanningDescription, t: int) -> Callable[[Atom], Atom]:
    sig = dd.signature
    actions = sig.actions

    def sub(a: Atom) -> Atom:
        if a in sig.fluents:
            return holds_atom(a, t)
        if a.pred == PREV:
            return holds_atom(unprev_atom(a), t - 1)
        if a in actions:
            return occ_atom(a, t)
        raise EncodingError(f"{format_atom(a)} is outside the dynamic vocabulary")

    return sub


def _holds_grid(dd: PlanningDescription, n: int) -> set[Atom]:
    return {
        holds_atom(f, t) for f in dd.signature.fluents for t in range(n + 1)
    }


# --- the building blocks of every encoding -----------------------------------


def build_domain_facts(sig, n: int) -> Program:
    """Step, action and sensing facts shared by all encodings."""
    _check_horizon(n)
    rules = [Rule(time_atom(t)) for t in range(1, n + 1)]
    rules += [Rule(Atom("action", (atom_to_term(a),))) for a in sig.actions]
    rules += [
        Rule(Atom("senses", (atom_to_term(a), atom_to_term(f))))
        for a, f in sig.senses
    ]
    return Program.of(rules)


def generate_rules(sig, n: int, *, at_most: bool = False) -> list[Rule]:
    """One action occurrence per step; `at_most` relaxes `=` to `<=`."""
    acts = sorted_atoms(sig.actions)
    out = []
    for t in range(1, n + 1):
        els = tuple(CardElement(occ_atom(a, t)) for a in acts)
        head = CardAtom(els, "<=" if at_most else "=", 1)
        out.append(Rule(head, (Literal(time_atom(t)),)))
    return out


def alpha_chain(n: int) -> list[Rule]:
    """Once an initial-state guess is flagged impossible, it stays flagged."""
    return [
        Rule(flag_atom(t), (Literal(time_atom(t)), Literal(flag_atom(t - 1))))
        for t in range(1, n + 1)
    ]


def tt(dd: PlanningDescription, n: int) -> Program:
    """Time-stamped copy of the description: plain substitution, no relaxation."""
    _check_horizon(n)
    rules = [_map_rule(r, _sub_state(dd, 0)) for r in dd.initial]
    for t in range(1, n + 1):
        step = (Literal(time_atom(t)),)
        rules += [_map_rule(r, _sub_dynamic(dd, t), step) for r in dd.dynamic]
    rules += [_map_rule(r, _sub_state(dd, n)) for r in dd.goal]
    return Program.of(rules, _holds_grid(dd, n))


def _init_gdt(dd: PlanningDescription) -> tuple[tuple[Rule, ...], frozenset[Atom]]:
    """Initial rules at step 0 in guess-then-deterministic form.

    Returns the rewritten rules, with integrity constraints relaxed to
    derive flag(0) instead of failing, and the set of guessed atoms that
    the universal quantifier ranges over.
    """
    sub = _sub_state(dd, 0)
    mapped = [_map_rule(r, sub) for r in dd.initial]
    prog = Program.of(mapped, {holds_atom(f, 0) for f in dd.signature.fluents})
    if not prog.is_plain:
        prog = compile_cardinality(prog)
    if not is_gdt(prog):
        try:
            prog, _ = to_gdt(prog)
        except NotStratifiedError as e:
            raise EncodingError(f"initial rules cannot be normalized: {e}")
        warnings.warn(
            "initial rules were rewritten to guess-then-deterministic form",
            stacklevel=3,
        )
    opens = frozenset(r.head for r in prog.rules if r.choice)
    rules = tuple(
        Rule(flag_atom(0), r.body) if r.is_constraint else r for r in prog.rules
    )
    return rules, opens


def _ttt_parts(
    dd: PlanningDescription, n: int
) -> tuple[list[Rule], frozenset[Atom]]:
    rules, opens = _init_gdt(dd)
    out = list(rules)
    for t in range(1, n + 1):
        step = (Literal(time_atom(t)), Literal(flag_atom(t), neg=True))
        out += [_map_rule(r, _sub_dynamic(dd, t), step) for r in dd.dynamic]
    off = (Literal(flag_atom(n), neg=True),)
    out += [_map_rule(r, _sub_state(dd, n), off) for r in dd.goal]
    return out, opens


def ttt(dd: PlanningDescription, n: int) -> Program:
    """Relaxed copy: impossible initial guesses raise flags instead of failing."""
    _check_horizon(n)
    rules, _ = _ttt_parts(dd, n)
    extras = _holds_grid(dd, n) | {flag_atom(t) for t in range(n + 1)}
    return Program.of(rules, extras)


def open_atoms(dd: PlanningDescription) -> frozenset[Atom]:
    """The step-0 guesses: atoms of bodyless choice rules in the initial copy."""
    return _init_gdt(dd)[1]


# --- encoded problems ----------------------------------------------------------


@dataclass(frozen=True)
class EncodedProblem:
    """A quantified program plus the designated atom sets needed to decode it."""

    qlp: QuantifiedProgram
    mode: str
    horizon: int
    occ_t: tuple[frozenset[Atom], ...]
    obs_t: tuple[frozenset[Atom], ...]
    open: frozenset[Atom]
    assume: frozenset[Atom]
    alpha: frozenset[Atom]

    def __post_init__(self):
        if self.mode not in MODES:
            raise EncodingError(f"unknown mode {self.mode!r}")
        _check_horizon(self.horizon)
        if len(self.occ_t) != self.horizon or len(self.obs_t) != self.horizon:
            raise EncodingError("per-step atom sets must cover every step")
        groups = [self.occ, self.obs, self.open, self.assume, self.alpha]
        if len(set().union(*groups)) != sum(len(g) for g in groups):
            raise EncodingError("designated atom sets must be disjoint")
        self._check_prefix()

    @property
    def occ(self) -> frozenset[Atom]:
        return frozenset().union(*self.occ_t)

    @property
    def obs(self) -> frozenset[Atom]:
        return frozenset().union(*self.obs_t)

    def _check_prefix(self):
        got = [(b.kind, frozenset(b.atoms)) for b in self.qlp.prefix]
        if self.mode == CONDITIONAL:
            want = []
            for t in range(1, self.horizon + 1):
                want.append(("exists", self.occ_t[t - 1]))
                if self.obs_t[t - 1]:
                    want.append(("forall", self.obs_t[t - 1]))
        else:
            want = [("exists", self.occ | self.assume)]
        if self.open:
            want.append(("forall", self.open))
        if got != want:
            raise EncodingError(f"prefix does not match {self.mode} shape")


def _occ_sets(sig, n: int) -> tuple[frozenset[Atom], ...]:
    return tuple(
        frozenset(occ_atom(a, t) for a in sig.actions) for t in range(1, n + 1)
    )


def _no_obs(n: int) -> tuple[frozenset[Atom], ...]:
    return tuple(frozenset() for _ in range(n))


def encode_classical(dd: PlanningDescription, n: int) -> EncodedProblem:
    """Sequential planning from one known initial state: a single ∃ block."""
    _check_horizon(n)
    if len(initial_states(dd)) != 1:
        raise EncodingError("classical planning needs a unique initial state")
    sig = dd.signature
    occ_t = _occ_sets(sig, n)
    occ = frozenset().union(*occ_t)
    rules = list(build_domain_facts(sig, n).rules)
    rules += generate_rules(sig, n)
    rules += tt(dd, n).rules
    prog = Program.of(rules, _holds_grid(dd, n) | occ)
    qlp = QuantifiedProgram((exists(occ),), prog)
    return EncodedProblem(
        qlp, CLASSICAL, n, occ_t, _no_obs(n), frozenset(), frozenset(), frozenset()
    )


def _sequential(
    dd: PlanningDescription, n: int, mode: str, assumables: frozenset[Atom]
) -> EncodedProblem:
    sig = dd.signature
    occ_t = _occ_sets(sig, n)
    occ = frozenset().union(*occ_t)
    body, opens = _ttt_parts(dd, n)
    flags = frozenset(flag_atom(t) for t in range(n + 1))
    rules = list(build_domain_facts(sig, n).rules)
    rules += generate_rules(sig, n)
    rules += alpha_chain(n)
    rules += body
    assume = frozenset()
    if mode == ASSUMPTION:
        assume = frozenset(
            assume_atom(f, v) for f in assumables for v in (True, False)
        )
        rules += _assumption_rules(dd, assumables)
    extras = _holds_grid(dd, n) | occ | flags | opens | assume
    prog = Program.of(rules, extras)
    prefix: list[QuantifierBlock] = [exists(occ | assume)]
    if opens:
        prefix.append(forall(opens))
    qlp = QuantifiedProgram(tuple(prefix), prog)
    return EncodedProblem(
        qlp, mode, n, occ_t, _no_obs(n), opens, assume, flags
    )


def encode_conformant(dd: PlanningDescription, n: int) -> EncodedProblem:
    """One plan that works from every initial state: ∃ occurrences, ∀ guesses."""
    _check_horizon(n)
    return _sequential(dd, n, CONFORMANT, frozenset())


def _assumption_rules(
    dd: PlanningDescription, assumables: frozenset[Atom]
) -> list[Rule]:
    rules: list[Rule] = []
    sub_init = _sub_copy(dd)
    for f in sorted_atoms(assumables):
        fact = Atom("assumable", (atom_to_term(f),))
        rules.append(Rule(fact))
        pick = CardAtom(
            (CardElement(assume_atom(f, True)), CardElement(assume_atom(f, False))),
            "<=",
            1,
        )
        rules.append(Rule(pick, (Literal(fact),)))
        at, af = assume_atom(f, True), assume_atom(f, False)
        h0 = holds_atom(f, 0)
        ini = init_atom(f)
        # the assumed values must hold in some real initial state ...
        rules.append(Rule(None, (Literal(ini, neg=True), Literal(at))))
        rules.append(Rule(None, (Literal(ini), Literal(af))))
        # ... and guesses that contradict them are not the plan's problem
        rules.append(Rule(flag_atom(0), (Literal(h0, neg=True), Literal(at))))
        rules.append(Rule(flag_atom(0), (Literal(h0), Literal(af))))
    rules += [_map_rule(r, sub_init) for r in dd.initial]
    return rules


def _sub_copy(dd: PlanningDescription) -> Callable[[Atom], Atom]:
    fluents = dd.signature.fluents

    def sub(a: Atom) -> Atom:
        if a in fluents:
            return init_atom(a)
        raise EncodingError(f"{format_atom(a)} is not a fluent")

    return sub


def encode_assumption(
    dd: PlanningDescription, assumables: Iterable[Atom], n: int
) -> EncodedProblem:
    """Conformant planning where some initial fluents may be assumed."""
    _check_horizon(n)
    asm = frozenset(assumables)
    if not asm <= dd.signature.fluents:
        raise EncodingError("assumable atoms must be fluents")
    return _sequential(dd, n, ASSUMPTION, asm)


def encode_conditional(dd: PlanningDescription, n: int) -> EncodedProblem:
    """Tree plans over sensing results: occurrences and observations alternate."""
    _check_horizon(n)
    sig = dd.signature
    occ_t = _occ_sets(sig, n)
    obs_t = tuple(
        frozenset([obs_atom(t)]) if t < n else frozenset()
        for t in range(1, n + 1)
    )
    body, opens = _ttt_parts(dd, n)
    flags = frozenset(flag_atom(t) for t in range(n + 1))
    rules = list(build_domain_facts(sig, n).rules)
    rules += generate_rules(sig, n, at_most=True)
    rules += alpha_chain(n)
    rules += body
    for t in range(1, n):
        rules.append(Rule(obs_atom(t), (Literal(time_atom(t)),), choice=True))
    # a recorded observation that contradicts the sensed fluent is impossible
    for a, f in sig.senses:
        sfact = Atom("senses", (atom_to_term(a), atom_to_term(f)))
        for t in range(2, n + 1):
            differ = CardAtom(
                (CardElement(holds_atom(f, t - 1)), CardElement(obs_atom(t - 1))),
                "=",
                1,
            )
            rules.append(
                Rule(
                    flag_atom(t),
                    (
                        Literal(time_atom(t)),
                        Literal(occ_atom(a, t - 1)),
                        Literal(sfact),
                        differ,
                    ),
                )
            )
    # steps without a sensing action only continue on the no-observation side
    for a in sorted_atoms(sig.normal_actions):
        for t in range(1, n):
            rules.append(
                Rule(
                    flag_atom(t),
                    (
                        Literal(time_atom(t)),
                        Literal(occ_atom(a, t)),
                        Literal(obs_atom(t)),
                    ),
                )
            )
    obs_all = frozenset().union(*obs_t)
    extras = _holds_grid(dd, n) | frozenset().union(*occ_t) | flags | opens | obs_all
    prog = Program.of(rules, extras)
    prefix: list[QuantifierBlock] = []
    for t in range(1, n + 1):
        prefix.append(exists(occ_t[t - 1]))
        if obs_t[t - 1]:
            prefix.append(forall(obs_t[t - 1]))
    if opens:
        prefix.append(forall(opens))
    qlp = QuantifiedProgram(tuple(prefix), prog)
    return EncodedProblem(
        qlp, CONDITIONAL, n, occ_t, obs_t, opens, frozenset(), flags
    )


def encode(
    dd: PlanningDescription,
    mode: str,
    n: int,
    *,
    assumables: Optional[Iterable[Atom]] = None,
) -> EncodedProblem:
    if mode == CLASSICAL:
        return encode_classical(dd, n)
    if mode == CONFORMANT:
        return encode_conformant(dd, n)
    if mode == ASSUMPTION:
        asm = dd.signature.assumables if assumables is None else assumables
        return encode_assumption(dd, asm, n)
    if mode == CONDITIONAL:
        return encode_conditional(dd, n)
    raise EncodingError(f"unknown mode {mode!r}")


# --- decoding ------------------------------------------------------------------

DecodedSolution = Union[Plan, AssumptionSolution]


def _senses_map(prog: Program) -> dict[Atom, Atom]:
    out: dict[Atom, Atom] = {}
    for r in prog.rules:
        h = r.head
        if r.is_fact and isinstance(h, Atom) and h.pred == "senses" and len(h.args) == 2:
            out[term_to_atom(h.args[0])] = term_to_atom(h.args[1])
    return out


def decode(
    ep: EncodedProblem,
    witness: Iterable[Atom],
    *,
    backend: str = "internal",
    budget: Optional[int] = None,
    command: Union[str, Sequence[str], None] = None,
    timeout: float = DEFAULT_TIMEOUT,
) -> DecodedSolution:
    """Read a solution out of a satisfying witness of the outermost block.

    Sequential modes only inspect the witness.  The conditional mode
    re-solves the encoding once per observation history, pinning the
    choices already made, to recover the subtree below every branch.
    """
    w = frozenset(witness)
    if ep.mode == CONDITIONAL:
        return _decode_conditional(
            ep, w, backend=backend, budget=budget, command=command, timeout=timeout
        )
    steps: dict[int, Atom] = {}
    for a in sorted_atoms(w & ep.occ):
        act, t = _occ_parts(a)
        if t in steps:
            raise EncodingError(f"witness places two actions at step {t}")
        steps[t] = act
    if set(steps) != set(range(1, ep.horizon + 1)):
        raise EncodingError("witness does not cover every step")
    plan = seq_plan(steps[t] for t in range(1, ep.horizon + 1))
    if ep.mode != ASSUMPTION:
        return plan
    true_set, false_set = set(), set()
    for a in w & ep.assume:
        f = term_to_atom(a.args[0])
        (true_set if a.args[1] == "true" else false_set).add(f)
    return AssumptionSolution(plan, frozenset(true_set), frozenset(false_set))


def _decode_conditional(
    ep: EncodedProblem,
    w: frozenset[Atom],
    *,
    backend: str,
    budget: Optional[int],
    command,
    timeout: float,
) -> Plan:
    n = ep.horizon
    prefix = ep.qlp.prefix
    base = ep.qlp.program
    sensing = _senses_map(base)

    def chosen_action(atoms: frozenset[Atom]) -> Optional[Atom]:
        if not atoms:
            return None
        if len(atoms) > 1:
            raise EncodingError("witness places two actions at one step")
        return _occ_parts(next(iter(atoms)))[0]

    def subtree(t: int, pins: list[Rule], picked: Optional[frozenset[Atom]]) -> Plan:
        if t > n:
            return EMPTY
        if picked is None:
            qp = QuantifiedProgram(prefix[2 * (t - 1) :], base.extend(pins))
            res = solve_qlp(
                qp, backend, budget=budget, command=command, timeout=timeout
            )
            if not res.satisfiable or res.witness is None:
                raise EncodingError("re-solving under a pinned prefix failed")
            picked = res.witness & ep.occ_t[t - 1]
        a = chosen_action(picked)
        pins = pins + fixcons(picked, ep.occ_t[t - 1])
        obs = ep.obs_t[t - 1]
        if a is not None and a in sensing and obs:
            yes = subtree(t + 1, pins + fixcons(obs, obs), None)
            no = subtree(t + 1, pins + fixcons((), obs), None)
            return Branch(a, yes, no)
        rest = subtree(t + 1, pins + fixcons((), obs), None)
        if a is None:
            return rest
        if a in sensing:
            # a final sensing action learns nothing anyone can act on
            return Branch(a, rest, rest)
        return Seq(a, rest)

    return subtree(1, [], w & ep.occ_t[0])


# --- horizon search --------------------------------------------------------------


def solve_incremental(
    dd: PlanningDescription,
    mode: str,
    n_max: int,
    *,
    assumables: Optional[Iterable[Atom]] = None,
    backend: str = "internal",
    budget: Optional[int] = None,
    command: Union[str, Sequence[str], None] = None,
    timeout: float = DEFAULT_TIMEOUT,
) -> Optional[tuple[DecodedSolution, int]]:
    """Find the smallest horizon up to n_max whose encoding is satisfiable."""
    _check_horizon(n_max)
    for n in range(1, n_max + 1):
        ep = encode(dd, mode, n, assumables=assumables)
        res = solve_qlp(
            ep.qlp, backend, budget=budget, command=command, timeout=timeout
        )
        if res.satisfiable:
            if res.witness is None:
                raise EncodingError(
                    "the backend reported satisfiable without a certificate"
                )
            sol = decode(
                ep,
                res.witness,
                backend=backend,
                budget=budget,
                command=command,
                timeout=timeout,
            )
            return sol, n
    return None

"""Shared generators and comparison helpers for the test suite."""
from __future__ import annotations

from hypothesis import strategies as st

from qasp.lp import (
    Atom,
    CardAtom,
    CardElement,
    Literal,
    Program,
    Rule,
    sorted_atoms,
)
from qasp.qlp import QuantifiedProgram, QuantifierBlock

ATOM_NAMES = "abcdefghij"


def atoms_upto(n: int) -> list[Atom]:
    return [Atom(name, ()) for name in ATOM_NAMES[:n]]


@st.composite
def plain_rules(draw, atoms: list[Atom], max_body: int = 3):
    kind = draw(st.sampled_from(["normal", "normal", "normal", "choice", "choice", "constraint"]))
    body_atoms = draw(st.lists(st.sampled_from(atoms), max_size=max_body, unique=True))
    body = tuple(Literal(a, neg=draw(st.booleans())) for a in body_atoms)
    if kind == "constraint":
        return Rule(None, body)
    head = draw(st.sampled_from(atoms))
    return Rule(head, body, choice=(kind == "choice"))


@st.composite
def plain_programs(draw, max_atoms: int = 6, max_rules: int = 8):
    n = draw(st.integers(min_value=1, max_value=max_atoms))
    atoms = atoms_upto(n)
    rules = draw(st.lists(plain_rules(atoms), max_size=max_rules))
    return Program.of(rules, atoms)


@st.composite
def card_atoms(draw, atoms: list[Atom]):
    elems = draw(st.lists(st.sampled_from(atoms), min_size=1, max_size=4, unique=True))
    rel = draw(st.sampled_from(["=", "!=", "<", "<=", ">", ">="]))
    bound = draw(st.integers(min_value=-1, max_value=len(elems) + 1))
    return CardAtom(tuple(CardElement(a) for a in elems), rel, bound)


@st.composite
def card_programs(draw, max_guess: int = 4, max_rules: int = 5):
    """Guess-then-count programs: cards only over guessed atoms.

    This is the shape the compile contract covers; cards on dependency
    cycles are out of scope.
    """
    n = draw(st.integers(min_value=2, max_value=max_guess))
    guess = atoms_upto(n)
    derived = [Atom(f"d{i}", ()) for i in range(1, 4)]
    rules = [Rule(a, (), choice=True) for a in guess]
    for _ in range(draw(st.integers(min_value=1, max_value=max_rules))):
        style = draw(st.sampled_from(["plain", "card_body", "card_head"]))
        if style == "plain":
            rules.append(draw(plain_rules(guess + derived)))
            continue
        body_atoms = draw(st.lists(st.sampled_from(guess + derived), max_size=2, unique=True))
        body = tuple(Literal(a, neg=draw(st.booleans())) for a in body_atoms)
        card = draw(card_atoms(guess))
        if style == "card_body":
            head = draw(st.sampled_from(derived + [None]))
            rules.append(Rule(head, body + (card,)))
        else:
            rules.append(Rule(card, body))
    return Program.of(rules, guess + derived)


@st.composite
def quantified_programs(draw, max_atoms: int = 5, max_blocks: int = 3):
    p = draw(plain_programs(max_atoms=max_atoms, max_rules=6))
    universe = sorted_atoms(p.universe)
    chunks: list[list] = []
    rest = universe
    for _ in range(draw(st.integers(min_value=0, max_value=max_blocks))):
        if not rest:
            break
        k = draw(st.integers(min_value=1, max_value=len(rest)))
        chunks.append(rest[:k])
        rest = rest[k:]
    prefix = tuple(
        QuantifierBlock(draw(st.sampled_from(["exists", "forall"])), tuple(c))
        for c in chunks
    )
    return QuantifiedProgram(prefix, p)


def model_set(models) -> set[frozenset]:
    return {frozenset(m) for m in models}


def project(models, universe) -> set[frozenset]:
    return {frozenset(m & universe) for m in models}


@st.composite
def planning_domains(draw, max_fluents: int = 3, max_actions: int = 2,
                     sensing: bool = False, assumable: bool = False):
    """Deterministic, inertial planning descriptions built rule by rule.

    Each action either sets a fluent, clears it, or leaves it alone; clears
    block the carry-over rule, so exactly-one-action steps stay functional
    and the no-action probe reduces to pure inertia.  Initial fluents are
    facts, free choices, or absent; constraints only ever range over chosen
    fluents, keeping at least one initial state alive.
    """
    from qasp.planning import DomainSignature, PlanningDescription, prev_atom

    nf = draw(st.integers(1, max_fluents))
    fluents = [Atom(f"f{i}") for i in range(1, nf + 1)]
    na = draw(st.integers(1, max_actions))
    actions = [Atom(f"a{i}") for i in range(1, na + 1)]
    rules: list[Rule] = []
    for f in fluents:
        clearers = []
        for a in actions:
            effect = draw(st.sampled_from(("set", "clear", "none")))
            if effect == "set":
                rules.append(Rule(f, (Literal(a),)))
            elif effect == "clear":
                clearers.append(a)
        carry = (Literal(prev_atom(f)),) + tuple(
            Literal(a, neg=True) for a in clearers
        )
        rules.append(Rule(f, carry))
    if draw(st.booleans()):
        # an executability limit: some action is impossible in some states
        a = draw(st.sampled_from(actions))
        f = draw(st.sampled_from(fluents))
        rules.append(Rule(None, (Literal(a), Literal(prev_atom(f)))))

    chosen: list[Atom] = []
    initial: list[Rule] = []
    for f in fluents:
        mode = draw(st.sampled_from(("fact", "choice", "absent")))
        if mode == "fact":
            initial.append(Rule(f))
        elif mode == "choice":
            initial.append(Rule(f, (), choice=True))
            chosen.append(f)
    if len(chosen) >= 2 and draw(st.booleans()):
        # irrelevant-guess coverage: forbid one pair of chosen fluents
        initial.append(Rule(None, (Literal(chosen[0]), Literal(chosen[1]))))

    goal = tuple(
        Rule(None, (Literal(f, neg=True),))
        for f in fluents
        if draw(st.booleans())
    )

    senses = ()
    sensors: list[Atom] = []
    if sensing:
        target = draw(st.sampled_from(fluents))
        sensor = Atom("s1")
        sensors = [sensor]
        senses = ((sensor, target),)
    sig = DomainSignature(
        frozenset(fluents),
        frozenset(actions),
        frozenset(sensors),
        senses,
        frozenset(draw(st.sets(st.sampled_from(fluents)))) if assumable else frozenset(),
    )
    return PlanningDescription(sig, tuple(rules), tuple(initial), goal)

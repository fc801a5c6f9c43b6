"""Planning over rule-defined transition functions.

A domain is split into a signature (fluents, normal and sensing actions,
assumable fluents) and three rule sets: dynamic rules defining the
transition function, initial rules whose stable models are the initial
states, and goal constraints.  Previous-state fluents appear in dynamic
rule bodies wrapped as prev(f).

The transition function executes an action by pinning the previous state
and the action as choices of a single cached solver, so repeated steps
never rebuild the program.  One step yields the unique stable model's
fluent part, no model at all is the failure value None, and two or more
models are a determinism violation and always an error.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterator, Optional, Union

from .lp import (
    Atom,
    CardAtom,
    Fn,
    Interval,
    Literal,
    Program,
    Rule,
    Solver,
    atom_to_term,
    compile_cardinality,
    format_atom,
    ground,
    sorted_atoms,
    term_to_atom,
)
from .lp.parse import ParseError, _Parser, parse_program, tokenize

PREV = "prev"
ENUM_CAP = 12
PLAN_GUARD = 200_000

State = frozenset


class DescriptionError(Exception):
    pass


class NondeterministicError(DescriptionError):
    def __init__(self, state, action):
        super().__init__(
            f"action {format_atom(action)} has multiple outcomes in state "
            f"{{{', '.join(sorted(map(format_atom, state)))}}}"
        )
        self.state = frozenset(state)
        self.action = action


class PlanError(Exception):
    pass


def prev_atom(f: Atom) -> Atom:
    return Atom(PREV, (atom_to_term(f),))


def unprev_atom(a: Atom) -> Atom:
    if a.pred != PREV or len(a.args) != 1:
        raise ValueError(f"{format_atom(a)} is not a previous-state atom")
    return term_to_atom(a.args[0])


# --- domain types ------------------------------------------------------------


@dataclass(frozen=True)
class DomainSignature:
    fluents: frozenset[Atom]
    normal_actions: frozenset[Atom]
    sensing_actions: frozenset[Atom]
    senses: tuple[tuple[Atom, Atom], ...]
    assumables: frozenset[Atom]

    def __post_init__(self):
        object.__setattr__(self, "fluents", frozenset(self.fluents))
        object.__setattr__(self, "normal_actions", frozenset(self.normal_actions))
        object.__setattr__(self, "sensing_actions", frozenset(self.sensing_actions))
        object.__setattr__(self, "assumables", frozenset(self.assumables))
        object.__setattr__(
            self, "senses", tuple(sorted(self.senses, key=lambda kv: str(kv)))
        )
        f, an, asens = self.fluents, self.normal_actions, self.sensing_actions
        if not f:
            raise DescriptionError("a domain needs at least one fluent")
        if not (an | asens):
            raise DescriptionError("a domain needs at least one action")
        if f & an or f & asens or an & asens:
            raise DescriptionError("fluents and action kinds must be disjoint")
        m = dict(self.senses)
        if len(m) != len(self.senses) or set(m) != asens:
            raise DescriptionError("each sensing action observes exactly one fluent")
        if not set(m.values()) <= f:
            raise DescriptionError("sensed atoms must be fluents")
        if not self.assumables <= f:
            raise DescriptionError("assumable atoms must be fluents")
        for a in f | an | asens:
            if a.pred == PREV:
                raise DescriptionError(f"{PREV} is reserved for previous-state atoms")

    @property
    def actions(self) -> frozenset[Atom]:
        return self.normal_actions | self.sensing_actions

    def sensed_fluent(self, a: Atom) -> Atom:
        return dict(self.senses)[a]


def _check_vocab(rules, allowed_heads, allowed_body, what: str):
    for r in rules:
        heads = []
        if isinstance(r.head, Atom):
            heads = [r.head]
        elif isinstance(r.head, CardAtom):
            heads = [e.atom for e in r.head.elements]
        for h in heads:
            if h not in allowed_heads:
                raise DescriptionError(
                    f"{what} rule head {format_atom(h)} is not a fluent"
                )
        for e in r.body:
            if isinstance(e, Literal):
                atoms = [e.atom]
            elif isinstance(e, CardAtom):
                atoms = [el.atom for el in e.elements]
                atoms += [l.atom for el in e.elements for l in el.condition]
            else:
                raise DescriptionError(f"unresolved body element in {what} rule: {e}")
            for a in atoms:
                if a not in allowed_body:
                    raise DescriptionError(
                        f"atom {format_atom(a)} is outside the {what} vocabulary"
                    )


@dataclass(frozen=True)
class PlanningDescription:
    signature: DomainSignature
    dynamic: tuple[Rule, ...]
    initial: tuple[Rule, ...]
    goal: tuple[Rule, ...]

    def __post_init__(self):
        object.__setattr__(self, "dynamic", tuple(self.dynamic))
        object.__setattr__(self, "initial", tuple(self.initial))
        object.__setattr__(self, "goal", tuple(self.goal))
        sig = self.signature
        prevs = {prev_atom(f) for f in sig.fluents}
        _check_vocab(
            self.dynamic, sig.fluents, sig.actions | sig.fluents | prevs, "dynamic"
        )
        _check_vocab(self.initial, sig.fluents, sig.fluents, "initial")
        for r in self.goal:
            if not r.is_constraint:
                raise DescriptionError("goal rules must be constraints")
        _check_vocab(self.goal, frozenset(), sig.fluents, "goal")


# --- plans ---------------------------------------------------------------------


@dataclass(frozen=True)
class Empty:
    pass


@dataclass(frozen=True)
class Seq:
    action: Atom
    rest: "Plan"


@dataclass(frozen=True)
class Branch:
    sensor: Atom
    if_true: "Plan"
    if_false: "Plan"


Plan = Union[Empty, Seq, Branch]
EMPTY = Empty()


def seq_plan(actions) -> Plan:
    p: Plan = EMPTY
    for a in reversed(list(actions)):
        p = Seq(a, p)
    return p


def plan_length(p: Plan) -> int:
    if isinstance(p, Empty):
        return 0
    if isinstance(p, Seq):
        return 1 + plan_length(p.rest)
    return 1 + max(plan_length(p.if_true), plan_length(p.if_false))


def format_plan(p: Plan) -> str:
    if isinstance(p, Empty):
        return "[]"
    parts = []
    while isinstance(p, Seq):
        parts.append(format_atom(p.action))
        p = p.rest
    if isinstance(p, Branch):
        parts.append(
            f"{format_atom(p.sensor)} ? ( {format_plan(p.if_true)} )"
            f" : ( {format_plan(p.if_false)} )"
        )
    return "; ".join(parts)


def parse_plan(text: str) -> Plan:
    toks = _Parser(tokenize(text))

    def parse_seq() -> Plan:
        if toks.peek().text == "[":
            toks.next()
            toks.expect("]")
            return EMPTY
        a = toks.parse_atom()
        if toks.peek().text == "?":
            toks.next()
            toks.expect("(")
            pt = parse_seq()
            toks.expect(")")
            toks.expect(":")
            toks.expect("(")
            pf = parse_seq()
            toks.expect(")")
            return Branch(a, pt, pf)
        if toks.peek().text == ";":
            toks.next()
            return Seq(a, parse_seq())
        return Seq(a, EMPTY)

    p = parse_seq()
    if toks.peek().kind != "eof":
        toks.error("trailing input after plan")
    return p


# --- the transition engine ---------------------------------------------------------


class _Engine:
    """One solver per description; steps are choice pins, results memoized."""

    def __init__(self, dd: PlanningDescription):
        sig = dd.signature
        self.sig = sig
        self.prevs = {f: prev_atom(f) for f in sig.fluents}
        pins = [Rule(p, (), choice=True) for p in self.prevs.values()]
        pins += [Rule(a, (), choice=True) for a in sorted_atoms(sig.actions)]
        base = Program.of(
            dd.dynamic + tuple(pins),
            sig.fluents | sig.actions | set(self.prevs.values()),
        )
        self.solver = Solver(compile_cardinality(base))
        self._memo: dict[tuple[State, Optional[Atom]], object] = {}

    def step(self, s: State, a: Optional[Atom]):
        """None action = inertia probe; returns full models list or a state."""
        key = (s, a)
        if key in self._memo:
            return self._memo[key]
        pins = {p: (f in s) for f, p in self.prevs.items()}
        for act in self.sig.actions:
            pins[act] = act == a
        models = self.solver.models(pinned=pins, limit=2)
        if a is None:
            out = models
        elif not models:
            out = None
        elif len(models) > 1:
            raise NondeterministicError(s, a)
        else:
            out = frozenset(models[0] & self.sig.fluents)
        self._memo[key] = out
        return out


@lru_cache(maxsize=32)
def _engine(dd: PlanningDescription) -> _Engine:
    return _Engine(dd)


def transition(dd: PlanningDescription, s, a: Atom) -> Optional[State]:
    """Execute one action: the fluent part of the unique stable model of
    previous-state facts + the action + the dynamic rules, or None."""
    if a not in dd.signature.actions:
        raise PlanError(f"{format_atom(a)} is not an action of this domain")
    return _engine(dd).step(frozenset(s), a)


def check_deterministic(
    dd: PlanningDescription, *, cap: int = ENUM_CAP
) -> tuple[bool, Optional[tuple[State, Atom]]]:
    """Exhaustively look for a state and action with two outcomes."""
    sig = dd.signature
    fluents = sorted_atoms(sig.fluents)
    if len(fluents) > cap:
        raise DescriptionError(f"determinism check over {len(fluents)} fluents exceeds cap {cap}")
    eng = _engine(dd)
    for bits in itertools.product([False, True], repeat=len(fluents)):
        s = frozenset(f for f, b in zip(fluents, bits) if b)
        for a in sorted_atoms(sig.actions):
            try:
                eng.step(s, a)
            except NondeterministicError:
                return False, (s, a)
    return True, None


def check_inertial(
    dd: PlanningDescription, *, cap: int = ENUM_CAP
) -> tuple[bool, Optional[State]]:
    """Without any action the previous state must persist exactly."""
    sig = dd.signature
    fluents = sorted_atoms(sig.fluents)
    if len(fluents) > cap:
        raise DescriptionError(f"inertia check over {len(fluents)} fluents exceeds cap {cap}")
    eng = _engine(dd)
    visible = sig.fluents | set(eng.prevs.values())
    for bits in itertools.product([False, True], repeat=len(fluents)):
        s = frozenset(f for f, b in zip(fluents, bits) if b)
        expected = s | {eng.prevs[f] for f in s}
        models = eng.step(s, None)
        if {frozenset(m & visible) for m in models} != {expected}:
            return False, s
    return True, None


def validate_description(dd: PlanningDescription, *, cap: int = ENUM_CAP) -> None:
    ok, ce = check_deterministic(dd, cap=cap)
    if not ok:
        s, a = ce
        raise NondeterministicError(s, a)
    ok, ce = check_inertial(dd, cap=cap)
    if not ok:
        raise DescriptionError(
            "dynamic rules are not inertial; state "
            f"{{{', '.join(sorted(map(format_atom, ce)))}}} does not persist"
        )


# --- states, goals, plans over state sets ----------------------------------------


def initial_states(dd: PlanningDescription) -> set[State]:
    prog = compile_cardinality(Program.of(dd.initial, dd.signature.fluents))
    models = Solver(prog).models()
    states = {frozenset(m & dd.signature.fluents) for m in models}
    if not states:
        raise DescriptionError("the initial rules admit no state")
    return states


def _card_count(card: CardAtom, s: State) -> int:
    n = 0
    for e in card.elements:
        if e.atom in s and all(l.neg != (l.atom in s) for l in e.condition):
            n += 1
    return n


def _body_holds(body, s: State) -> bool:
    for e in body:
        if isinstance(e, Literal):
            if e.neg == (e.atom in s):
                return False
        elif isinstance(e, CardAtom):
            n = _card_count(e, s)
            ok = {
                "=": n == e.bound,
                "!=": n != e.bound,
                "<": n < e.bound,
                "<=": n <= e.bound,
                ">": n > e.bound,
                ">=": n >= e.bound,
            }[e.rel]
            if not ok:
                return False
        else:
            raise DescriptionError(f"unresolved goal body element: {e}")
    return True


def is_goal(dd: PlanningDescription, s) -> bool:
    s = frozenset(s)
    return all(not _body_holds(r.body, s) for r in dd.goal)


def apply_action(dd: PlanningDescription, states, a: Atom) -> Optional[set[State]]:
    """Lift one step to a state set; None as soon as any member fails."""
    out = set()
    for s in states:
        t = transition(dd, s, a)
        if t is None:
            return None
        out.add(t)
    return out


def apply_plan(dd: PlanningDescription, states, p: Plan) -> Optional[set[State]]:
    states = {frozenset(s) for s in states}
    if isinstance(p, Empty):
        return states
    if isinstance(p, Seq):
        if p.action not in dd.signature.normal_actions:
            raise PlanError(f"{format_atom(p.action)} cannot appear in a sequence")
        nxt = apply_action(dd, states, p.action)
        return None if nxt is None else apply_plan(dd, nxt, p.rest)
    if p.sensor not in dd.signature.sensing_actions:
        raise PlanError(f"{format_atom(p.sensor)} is not a sensing action")
    nxt = apply_action(dd, states, p.sensor)
    if nxt is None:
        return None
    f = dd.signature.sensed_fluent(p.sensor)
    on_true = apply_plan(dd, {s for s in nxt if f in s}, p.if_true)
    on_false = apply_plan(dd, {s for s in nxt if f not in s}, p.if_false)
    if on_true is None or on_false is None:
        return None
    return on_true | on_false


def is_solution(dd: PlanningDescription, p: Plan, states=None) -> bool:
    """The plan must succeed from every initial state and land in goal states."""
    start = initial_states(dd) if states is None else states
    res = apply_plan(dd, start, p)
    return res is not None and all(is_goal(dd, s) for s in res)


@dataclass(frozen=True)
class AssumptionSolution:
    plan: Plan
    true_set: frozenset[Atom]
    false_set: frozenset[Atom]

    def __post_init__(self):
        object.__setattr__(self, "true_set", frozenset(self.true_set))
        object.__setattr__(self, "false_set", frozenset(self.false_set))
        if self.true_set & self.false_set:
            # jointly unsatisfiable assumptions can never select a state
            raise PlanError("a fluent cannot be assumed both true and false")


def is_assumption_solution(dd: PlanningDescription, sol: AssumptionSolution) -> bool:
    """Assumptions narrow the initial states; the plan must solve the rest."""
    asm = dd.signature.assumables
    if not (sol.true_set <= asm and sol.false_set <= asm):
        raise PlanError("assumptions must be assumable fluents")
    narrowed = {
        s
        for s in initial_states(dd)
        if sol.true_set <= s and not (s & sol.false_set)
    }
    if not narrowed:
        return False
    return is_solution(dd, sol.plan, states=narrowed)


def enumerate_plans(
    sig: DomainSignature,
    n: int,
    with_sensing: bool = False,
    *,
    guard: int = PLAN_GUARD,
) -> Iterator[Plan]:
    """Sequential plans of length exactly n, or every plan of length up to n
    when sensing is allowed; canonical order, guarded against blowup."""
    acts = sorted_atoms(sig.normal_actions)
    sensors = sorted_atoms(sig.sensing_actions) if with_sensing else []
    if with_sensing:
        count = 1
        for _ in range(n):
            count = 1 + len(acts) * count + len(sensors) * count * count
    else:
        count = len(acts) ** n
    if count > guard:
        raise PlanError(f"{count} candidate plans exceed the guard of {guard}")

    if not with_sensing:
        for combo in itertools.product(acts, repeat=n):
            yield seq_plan(combo)
        return

    def gen(k: int) -> Iterator[Plan]:
        yield EMPTY
        if k == 0:
            return
        for a in acts:
            for rest in gen(k - 1):
                yield Seq(a, rest)
        for b in sensors:
            for pt in gen(k - 1):
                for pf in gen(k - 1):
                    yield Branch(b, pt, pf)

    yield from gen(n)


# --- description files ----------------------------------------------------------

_SECTIONS = (
    "fluents",
    "actions",
    "sensing",
    "assumable",
    "dynamic",
    "initial",
    "goal",
)


def _strip_comment(line: str) -> str:
    return line.split("%", 1)[0]


def _parse_atom_list(text: str) -> list[Atom]:
    out: list[Atom] = []
    chunk = text.replace(",", " ").strip()
    if not chunk:
        return out
    toks = _Parser(tokenize(chunk))
    while toks.peek().kind != "eof":
        a = toks.parse_atom()
        out.extend(_expand_atom(a))
    return out


def _expand_term(t) -> list:
    if isinstance(t, Interval):
        if not (isinstance(t.lo, int) and isinstance(t.hi, int)):
            raise DescriptionError("unresolved interval bound in declaration")
        return list(range(t.lo, t.hi + 1))
    if isinstance(t, Fn):
        combos = itertools.product(*(_expand_term(a) for a in t.args))
        return [Fn(t.name, tuple(c)) for c in combos]
    return [t]


def _expand_atom(a: Atom) -> list[Atom]:
    """Interval arguments such as at(1..3) enumerate one atom per value,
    recursing through nested terms like sense(occupied(1..3))."""
    combos = itertools.product(*(_expand_term(arg) for arg in a.args))
    return [Atom(a.pred, tuple(c)) for c in combos]


def parse_description(text: str) -> PlanningDescription:
    sections: dict[str, list[str]] = {name: [] for name in _SECTIONS}
    current: Optional[str] = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("@"):
            name = line[1:].strip()
            if name not in _SECTIONS:
                raise DescriptionError(f"line {ln}: unknown section @{name}")
            current = name
            continue
        if current is None:
            raise DescriptionError(f"line {ln}: content before any @section")
        sections[current].append(line)

    fluents = _parse_atom_list(" ".join(sections["fluents"]))
    normal = _parse_atom_list(" ".join(sections["actions"]))
    assumable = _parse_atom_list(" ".join(sections["assumable"]))
    senses: list[tuple[Atom, Atom]] = []
    for line in sections["sensing"]:
        parts = line.split()
        if len(parts) != 3 or parts[1] != "senses":
            raise DescriptionError(f"expected `action senses fluent`, got: {line}")
        acts = _expand_atom(_parse_one_atom(parts[0]))
        obs = _expand_atom(_parse_one_atom(parts[2]))
        if len(acts) != len(obs):
            raise DescriptionError(f"mismatched interval expansion in: {line}")
        senses.extend(zip(acts, obs))
    sig = DomainSignature(
        frozenset(fluents),
        frozenset(normal),
        frozenset(a for a, _ in senses),
        tuple(senses),
        frozenset(assumable),
    )

    prevs = [prev_atom(f) for f in sig.fluents]
    seed = sig.fluents | sig.actions | set(prevs)
    dynamic = ground(parse_program("\n".join(sections["dynamic"])), seed).rules
    initial = ground(parse_program("\n".join(sections["initial"])), sig.fluents).rules
    goal = ground(parse_program("\n".join(sections["goal"])), sig.fluents).rules
    return PlanningDescription(sig, dynamic, initial, goal)


def _parse_one_atom(text: str) -> Atom:
    toks = _Parser(tokenize(text))
    a = toks.parse_atom()
    if toks.peek().kind != "eof":
        toks.error("trailing input after atom")
    return a


def load_description(
    path, *, validate: bool = True, cap: int = ENUM_CAP
) -> PlanningDescription:
    dd = parse_description(Path(path).read_text())
    if validate:
        validate_description(dd, cap=cap)
    return dd

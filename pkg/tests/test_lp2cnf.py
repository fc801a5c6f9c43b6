"""Clausification: completion, level rankings, and the model projection law."""
import math

import pytest
from hypothesis import given, settings

from qasp.lp import (
    Program,
    ground,
    parse_atom,
    parse_program,
    stable_models,
)
from qasp.lp.analysis import is_tight
from qasp.lp2cnf import (
    AtomMap,
    CnfFormula,
    NotTightError,
    cnf_models,
    completion,
    fixbf,
    level_ranking,
    projected_models,
    translate,
)

from qasp.qbf import QbfProblem, solve as solve_qbf

from helpers import card_programs, model_set, plain_programs, project


def prog(text: str) -> Program:
    return ground(parse_program(text))


def sm_set(p: Program) -> set[frozenset]:
    return model_set(stable_models(p))


def pinned_projection(cnf, m, universe) -> set[frozenset]:
    """Projected models via one pinned satisfiability call per subset.

    Avoids enumerating over auxiliary variables, whose count outgrows
    the direct enumeration cap quickly on ranked translations.
    """
    universe = sorted(universe, key=str)
    out = set()
    for i in range(1 << len(universe)):
        x = frozenset(a for j, a in enumerate(universe) if i >> j & 1)
        extra = fixbf(x, universe, m)
        narrowed = CnfFormula(cnf.clauses | frozenset(extra), cnf.num_vars)
        if solve_qbf(QbfProblem((), narrowed, m), want_witness=False).satisfiable:
            out.add(x)
    return out


# --- frozen examples ---------------------------------------------------------


def test_translate_choice_disjunction_projection():
    p = prog("{a}. {b}. c :- a. c :- b. :- not c.")
    cnf, m = translate(p)
    assert projected_models(cnf, m) == sm_set(p)
    assert sm_set(p) == {
        frozenset({parse_atom("a"), parse_atom("c")}),
        frozenset({parse_atom("b"), parse_atom("c")}),
        frozenset({parse_atom("a"), parse_atom("b"), parse_atom("c")}),
    }


def test_translate_unsupported_constraint_is_unsat():
    # c has no rules, so the constraint can never be met
    p = prog(":- not c.")
    cnf, m = translate(p)
    assert projected_models(cnf, m) == set()


def test_translate_unsupported_loop_only_empty():
    # bypass grounding: it would discard the underivable loop outright
    p = Program.of(parse_program("a :- b. b :- a."))
    cnf, m = translate(p)
    assert not is_tight(p)
    assert projected_models(cnf, m) == {frozenset()}


def test_translate_supported_loop():
    p = prog("a :- b. b :- a. {c}. a :- c.")
    cnf, m = translate(p)
    assert projected_models(cnf, m) == sm_set(p)
    assert frozenset(map(parse_atom, "abc")) in projected_models(cnf, m)


def test_completion_requires_tight():
    p = Program.of(parse_program("{c}. a :- b, c. b :- a."))
    with pytest.raises(NotTightError):
        completion(p)
    cnf, m = level_ranking(p)
    assert projected_models(cnf, m) == sm_set(p)


def test_completion_and_ranking_agree_on_tight_input():
    p = prog("{a}. {b}. c :- a, not b. d :- c. :- d, b.")
    assert is_tight(p)
    c1, m1 = completion(p)
    c2, m2 = level_ranking(p)
    assert projected_models(c1, m1) == projected_models(c2, m2) == sm_set(p)


def test_translate_facts_and_negative_edges():
    p = prog("a. b :- not c. c :- not b. d :- a, b.")
    cnf, m = translate(p)
    assert projected_models(cnf, m) == sm_set(p)
    assert len(sm_set(p)) == 2


def test_translate_empty_program():
    p = prog("")
    cnf, m = translate(p)
    assert projected_models(cnf, m) == {frozenset()}
    assert len(m) == 0


# --- fixbf -------------------------------------------------------------------


def test_fixbf_filters_projection():
    p = prog("{a}. {b}. c :- a. c :- b. :- not c.")
    cnf, m = translate(p)
    a, b, c = map(parse_atom, "abc")
    extra = fixbf({a}, {a, b}, m)
    narrowed = CnfFormula(cnf.clauses | frozenset(extra), cnf.num_vars)
    assert projected_models(narrowed, m) == {frozenset({a, c})}


def test_fixbf_shape_and_errors():
    p = prog("{a}. {b}.")
    _, m = translate(p)
    a, b = parse_atom("a"), parse_atom("b")
    assert fixbf({a}, {a, b}, m) == {
        frozenset({m.var(a)}),
        frozenset({-m.var(b)}),
    }
    assert fixbf(set(), set(), m) == set()
    with pytest.raises(ValueError):
        fixbf({a}, {b}, m)
    with pytest.raises(KeyError):
        fixbf({parse_atom("zzz")}, {parse_atom("zzz")}, m)


# --- atom map ----------------------------------------------------------------


def test_atom_map_basics():
    a, b = parse_atom("a"), parse_atom("b")
    m = AtomMap({a: 1, b: 2})
    assert m.var(a) == 1 and m.atom(2) == b and m.atom(3) is None
    assert a in m and len(m) == 2
    assert m.dump() == "a\t1\nb\t2\n"
    with pytest.raises(ValueError):
        AtomMap({a: 1, b: 1})


def test_translate_maps_source_atoms_first():
    p = prog("{a}. {b}. c :- a, b.")
    cnf, m = translate(p)
    assert sorted(v for _, v in m.items()) == [1, 2, 3]
    assert set(m.atoms()) == set(p.universe)
    assert cnf.num_vars > 3  # body auxiliaries exist but are unmapped


# --- properties --------------------------------------------------------------


@settings(max_examples=120, deadline=None)
@given(plain_programs())
def test_translate_projection_matches_stable_models(p):
    cnf, m = translate(p)
    assert pinned_projection(cnf, m, p.universe) == sm_set(p)


@settings(max_examples=40, deadline=None)
@given(card_programs(max_guess=3, max_rules=3))
def test_translate_projection_with_cardinalities(p):
    if len(p.universe) > 7:
        return
    cnf, m = translate(p)
    from qasp.lp import compile_cardinality

    assert pinned_projection(cnf, m, p.universe) == project(
        stable_models(compile_cardinality(p)), p.universe
    )


@settings(max_examples=150, deadline=None)
@given(plain_programs())
def test_translate_size_stays_quasilinear(p):
    cnf, _ = translate(p)
    n = max(2, len(p.universe))
    r = len(p.rules)
    assert len(cnf.clauses) <= 40 * (r + 1) * math.ceil(math.log2(n)) + 12 * n


def test_cnf_models_enumerates_in_counting_order():
    cnf = CnfFormula(frozenset({frozenset({1, 2})}), 2)
    assert list(cnf_models(cnf)) == [
        frozenset({1}),
        frozenset({2}),
        frozenset({1, 2}),
    ]


def test_cnf_formula_rejects_bad_literals():
    with pytest.raises(ValueError):
        CnfFormula(frozenset({frozenset({0})}), 1)
    with pytest.raises(ValueError):
        CnfFormula(frozenset({frozenset({3})}), 2)
    with pytest.raises(ValueError):
        CnfFormula(frozenset({frozenset({1, -1})}), 1)

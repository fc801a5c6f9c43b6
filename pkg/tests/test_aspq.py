"""Quantified subprogram sequences: pinning, coherence, and the two lifts."""
import dataclasses
from pathlib import Path

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from helpers import model_set, plain_programs, quantified_programs
from qasp.aspq import (
    EXISTS_ST,
    FORALL_ST,
    PRIME_SUFFIX,
    AspqBlock,
    AspqError,
    AspqProgram,
    NormalizationError,
    coherent,
    exists_st,
    fixfact,
    forall_st,
    format_aspq,
    from_qlp,
    normalize,
    parse_aspq,
    to_qlp,
)
from qasp.backends import solve_qlp
from qasp.encoders import build_domain_facts, encode_conformant, generate_rules, tt
from qasp.lp import (
    Atom,
    CardAtom,
    CardElement,
    Fn,
    Literal,
    ParseError,
    Program,
    Rule,
    is_gdt,
    parse_program,
    sorted_atoms,
    stable_models,
)
from qasp.planning import load_description
from qasp.qlp import (
    EXISTS,
    BudgetExceededError,
    QuantifiedProgram,
    eval_qlp,
    exists,
    forall,
)

BENCH = Path(__file__).resolve().parents[1] / "bench"

A, B, C = Atom("a"), Atom("b"), Atom("c")
P1_TEXT = "{a}. {b}. c :- a. c :- b. :- not c."


def prog(text: str) -> Program:
    return Program.of(parse_program(text))


# --- pinning -----------------------------------------------------------------


def test_fixfact_shapes():
    assert [str(r) for r in fixfact({A}, {A, B})] == ["a.", ":- b."]
    assert [str(r) for r in fixfact(set(), {A})] == [":- a."]
    assert fixfact({A}, {A}) == [Rule(A)]
    with pytest.raises(ValueError):
        fixfact({A}, {B})


@settings(max_examples=80, deadline=None)
@given(plain_programs(max_atoms=4, max_rules=6))
def test_fixfact_pins_exactly_one_model(p):
    for m in stable_models(p):
        pinned = p.extend(fixfact(m, p.universe))
        assert model_set(stable_models(pinned)) == {frozenset(m)}


# --- validation --------------------------------------------------------------


def test_block_and_program_validation():
    with pytest.raises(AspqError):
        AspqBlock("both", prog("a."))
    with pytest.raises(AspqError):
        AspqProgram(())
    # the check program must be normal and stratified
    with pytest.raises(AspqError):
        AspqProgram((exists_st(prog("a.")),), prog("{b}."))
    with pytest.raises(AspqError):
        AspqProgram((exists_st(prog("a.")),), prog(":- {a; b} != 1."))
    with pytest.raises(AspqError):
        AspqProgram((exists_st(prog("a.")),), prog("p :- not q. q :- not p."))


# --- coherence ---------------------------------------------------------------


def test_coherent_single_level():
    assert coherent(AspqProgram((exists_st(prog("a.")),)))
    assert coherent(AspqProgram((forall_st(prog("{a}.")),)))
    assert not coherent(AspqProgram((forall_st(prog("{a}.")),), prog(":- a.")))
    assert coherent(AspqProgram((exists_st(prog("{a}.")),), prog(":- a.")))
    # a level without stable models: fatal existentially, vacuous universally
    assert not coherent(AspqProgram((exists_st(prog("a. :- a.")),)))
    assert coherent(AspqProgram((forall_st(prog("a. :- a.")),)))


def test_coherent_two_levels():
    bad = exists_st(prog(":- a."))
    assert not coherent(AspqProgram((forall_st(prog("{a}.")), bad)))
    assert coherent(AspqProgram((exists_st(prog("{a}.")), bad)))


def test_coherent_threads_lower_level_atoms():
    levels = (
        exists_st(prog("{a}.")),
        forall_st(prog("{b}.")),
        exists_st(prog("c :- a. :- not c.")),
    )
    assert coherent(AspqProgram(levels))
    worse = levels[:2] + (exists_st(prog("c :- a. :- not c. :- b, c.")),)
    assert not coherent(AspqProgram(worse))


def test_coherent_budget():
    pi = AspqProgram((exists_st(prog("{a}.")),))
    with pytest.raises(BudgetExceededError):
        coherent(pi, budget=2)
    assert coherent(pi, budget=3)


# --- normalization -----------------------------------------------------------


def test_normalize_moves_check_into_a_level():
    pi = AspqProgram((exists_st(prog("{a}.")),), prog(":- not a."))
    npi = normalize(pi)
    assert len(npi.blocks) == 2 and npi.check.rules == ()
    assert npi.blocks[1].kind == EXISTS_ST
    assert [str(r) for r in npi.blocks[1].program.rules] == [":- not a."]
    assert coherent(pi) and coherent(npi)


def test_normalize_rewrites_redefined_heads():
    pi = AspqProgram((exists_st(prog("a.")), exists_st(prog("a :- b. b. {a}."))))
    npi = normalize(pi)
    assert [str(r) for r in npi.blocks[1].program.rules] == [":- not a, b.", "b."]
    # the erased atom still belongs to the level's atom set
    assert A in npi.blocks[1].program.universe
    assert coherent(pi) and coherent(npi)


def test_normalize_is_identity_on_normal_programs():
    pi = AspqProgram((forall_st(prog("{a}.")), exists_st(prog("c :- a. :- not c."))))
    assert normalize(pi) == pi


def test_normalize_rewrites_universal_guesses():
    pi = AspqProgram((forall_st(prog("{c} :- b. b.")),), prog(":- c."))
    npi = normalize(pi)
    level = npi.blocks[0].program
    assert [str(r) for r in level.rules] == ["b.", "c :- b, c_g.", "{c_g}."]
    assert is_gdt(level)
    assert not coherent(pi)
    assert not coherent(npi)
    assert not eval_qlp(to_qlp(npi)).satisfiable


def test_normalize_compiles_universal_cardinality():
    card = Rule(CardAtom((CardElement(A), CardElement(B)), "=", 1), ())
    pi = AspqProgram((forall_st(Program.of([card])),), prog(":- a."))
    npi = normalize(pi)
    assert npi.blocks[0].program.is_plain
    assert not coherent(pi)
    assert not coherent(npi)
    assert not eval_qlp(to_qlp(npi)).satisfiable


def test_normalize_auxiliaries_avoid_other_levels():
    # the fresh guess name must dodge c_g even though it lives one level down
    pi = AspqProgram((
        forall_st(prog("{c} :- b. b.")),
        exists_st(prog("{c_g}. :- c_g, c.")),
    ))
    npi = normalize(pi)
    guesses = {r.head for r in npi.blocks[0].program.rules if r.choice}
    assert Atom("c_g") not in guesses
    assert coherent(pi) == coherent(npi)


def test_normalize_rejects_unstratifiable_universal_levels():
    pi = AspqProgram((forall_st(prog("p :- not q. q :- not p.")),))
    with pytest.raises(NormalizationError):
        normalize(pi)


# --- flattening into one quantified program ------------------------------------


def test_to_qlp_universal_then_existential():
    pi = AspqProgram((forall_st(prog("{a}.")), exists_st(prog(":- a."))))
    qp = to_qlp(pi)
    assert qp.prefix == (forall([A]),)
    assert [str(r) for r in qp.program.rules] == [
        ":- a, not flag(1).",
        "flag(1) :- flag(0).",
        "{a}.",
    ]
    assert not eval_qlp(qp).satisfiable
    assert not coherent(pi)


def test_to_qlp_universal_constraints_become_flags():
    pi = AspqProgram((forall_st(prog("{a}. :- a.")),))
    qp = to_qlp(pi)
    assert qp.prefix == (forall([A]),)
    assert [str(r) for r in qp.program.rules] == ["flag(0) :- a.", "{a}."]
    assert eval_qlp(qp).satisfiable
    assert coherent(pi)


def test_to_qlp_single_existential_is_unchanged():
    p = prog(P1_TEXT)
    qp = to_qlp(AspqProgram((exists_st(p),)))
    assert qp.prefix == (exists([A, B, C]),)
    assert qp.program.rules == p.rules
    assert eval_qlp(qp).satisfiable


def test_to_qlp_flag_names_avoid_the_program():
    pi = AspqProgram((
        forall_st(prog("{flag(1)}.")),
        exists_st(prog(":- flag(1).")),
    ))
    qp = to_qlp(pi)
    strs = [str(r) for r in qp.program.rules]
    assert ":- flag(1), not flag1(1)." in strs
    assert "flag1(1) :- flag1(0)." in strs


def test_to_qlp_drops_levels_without_new_atoms():
    levels = (exists_st(prog("{a}.")), forall_st(prog("{b}.")))
    pi = AspqProgram(levels + (exists_st(prog(":- a, b.")),))
    qp = to_qlp(pi)
    assert qp.prefix == (exists([A]), forall([B]))
    assert ":- a, b, not flag(2)." in [str(r) for r in qp.program.rules]
    assert eval_qlp(qp).satisfiable
    assert coherent(pi)
    worse = AspqProgram(levels + (exists_st(prog(":- a, b. :- not a, not b.")),))
    assert not eval_qlp(to_qlp(worse)).satisfiable
    assert not coherent(worse)


def test_to_qlp_requires_normal_form():
    with pytest.raises(AspqError):
        to_qlp(AspqProgram((exists_st(prog("{a}.")),), prog(":- a.")))
    with pytest.raises(AspqError):
        to_qlp(AspqProgram((exists_st(prog("a.")), exists_st(prog("a :- b. b.")))))
    with pytest.raises(AspqError):
        to_qlp(AspqProgram((forall_st(prog("{c} :- b. b.")),)))


# --- lifting a quantified program --------------------------------------------


def test_from_qlp_builds_primed_guess_levels():
    p1 = prog(P1_TEXT)
    qp = QuantifiedProgram((exists([A]), forall([B])), p1)
    pi = from_qlp(qp)
    assert [b.kind for b in pi.blocks] == [EXISTS_ST, FORALL_ST, EXISTS_ST]
    assert [str(r) for r in pi.blocks[0].program.rules] == ["{a_pr}."]
    assert [str(r) for r in pi.blocks[1].program.rules] == ["{b_pr}."]
    last = pi.blocks[2].program
    assert set(p1.rules) <= set(last.rules)
    assert {str(r) for r in set(last.rules) - set(p1.rules)} == {
        ":- a, not a_pr.",
        ":- not a, a_pr.",
        ":- b, not b_pr.",
        ":- not b, b_pr.",
    }
    assert coherent(pi)
    assert eval_qlp(qp).satisfiable


def test_from_qlp_agrees_on_an_unsatisfiable_prefix():
    qp = QuantifiedProgram((exists([A]), forall([B, C])), prog(P1_TEXT))
    assert not coherent(from_qlp(qp))
    assert not eval_qlp(qp).satisfiable


def test_from_qlp_empty_prefix_is_one_existential_level():
    qp = QuantifiedProgram((), prog(P1_TEXT))
    pi = from_qlp(qp)
    assert [b.kind for b in pi.blocks] == [EXISTS_ST]
    assert pi.blocks[0].program == qp.program
    assert pi.check.rules == ()


def test_from_qlp_rejects_prime_collisions():
    qp = QuantifiedProgram((exists([A]),), prog("a_pr :- a."))
    with pytest.raises(AspqError):
        from_qlp(qp)


# --- agreement properties ------------------------------------------------------


@st.composite
def aspq_programs(draw, max_levels: int = 3):
    nb = draw(st.integers(min_value=1, max_value=max_levels))
    blocks = tuple(
        AspqBlock(
            draw(st.sampled_from([EXISTS_ST, FORALL_ST])),
            draw(plain_programs(max_atoms=4, max_rules=5)),
        )
        for _ in range(nb)
    )
    pool = sorted_atoms(set().union(*[b.program.universe for b in blocks]))
    checks = []
    for _ in range(draw(st.integers(min_value=0, max_value=2))):
        body = draw(st.lists(st.sampled_from(pool), min_size=1, max_size=2, unique=True))
        checks.append(Rule(None, tuple(Literal(a, neg=draw(st.booleans())) for a in body)))
    return AspqProgram(blocks, Program.of(checks))


@settings(max_examples=100, deadline=None)
@given(aspq_programs())
def test_translation_preserves_coherence(pi):
    want = coherent(pi)
    try:
        npi = normalize(pi)
    except NormalizationError:
        return
    assert coherent(npi) == want
    assert eval_qlp(to_qlp(npi)).satisfiable == want


@settings(max_examples=100, deadline=None)
@given(quantified_programs(max_atoms=4))
def test_lifted_prefixes_agree_with_direct_evaluation(qp):
    assert coherent(from_qlp(qp)) == eval_qlp(qp).satisfiable


@settings(max_examples=60, deadline=None)
@given(quantified_programs(max_atoms=4))
def test_witnesses_lift_to_the_primed_guess_level(qp):
    assume(qp.prefix and qp.prefix[0].kind == EXISTS)
    res = eval_qlp(qp)
    if not res.satisfiable:
        return
    pi = from_qlp(qp)
    primed = lambda a: Atom(a.pred + PRIME_SUFFIX, a.args)
    x0 = {primed(a) for a in qp.prefix[0].atoms}
    pinned = pi.blocks[0].program.extend(fixfact({primed(a) for a in res.witness}, x0))
    assert coherent(AspqProgram((AspqBlock(EXISTS_ST, pinned),) + pi.blocks[1:]))


# --- the conformant endpoint ----------------------------------------------------


def conformant_levels(dd, n: int) -> AspqProgram:
    """Facts and plan guesses, then initial-state guesses, then the rest."""
    sig = dd.signature
    facts = build_domain_facts(sig, n).extend(generate_rules(sig, n))
    init = Program.of(tt(dataclasses.replace(dd, dynamic=(), goal=()), n).rules)
    rest = Program.of(tt(dataclasses.replace(dd, initial=()), n).rules)
    return AspqProgram((exists_st(facts), forall_st(init), exists_st(rest)))


def test_conformant_robot_levels_agree_with_the_flat_encoding():
    dd = load_description(BENCH / "robot2-conformant.pd")
    pi = conformant_levels(dd, 3)
    assert coherent(pi)
    npi = normalize(pi)
    assert npi == pi
    qp = to_qlp(npi)
    assert [b.kind for b in qp.prefix] == [EXISTS_ST, FORALL_ST, EXISTS_ST]
    assert [len(b.atoms) for b in qp.prefix] == [21, 2, 21]
    assert list(qp.prefix[1].atoms) == [
        Atom("h", (Fn("clean", (1,)), 0)),
        Atom("h", (Fn("clean", (2,)), 0)),
    ]
    assert solve_qlp(qp).satisfiable
    assert solve_qlp(encode_conformant(dd, 3).qlp).satisfiable

    short = conformant_levels(dd, 2)
    assert not coherent(short)
    assert not solve_qlp(to_qlp(normalize(short))).satisfiable
    assert not solve_qlp(encode_conformant(dd, 2).qlp).satisfiable


# --- text format -----------------------------------------------------------------


def test_parse_and_format_sections():
    text = """% leading comment
%@exists
{a}.
%@forall
{b}.
%@check
:- a, not b.
"""
    pi = parse_aspq(text)
    assert [b.kind for b in pi.blocks] == [EXISTS_ST, FORALL_ST]
    assert [str(r) for r in pi.blocks[0].program.rules] == ["{a}."]
    assert [str(r) for r in pi.blocks[1].program.rules] == ["{b}."]
    assert [str(r) for r in pi.check.rules] == [":- a, not b."]
    assert format_aspq(pi) == "%@exists\n{a}.\n%@forall\n{b}.\n%@check\n:- a, not b.\n"
    assert parse_aspq(format_aspq(pi)) == pi


def test_parse_sections_share_a_vocabulary():
    # the check mentions atoms that only earlier levels can derive
    text = "%@exists\na.\n%@forall\n{b}.\n%@check\nc :- a, b. :- not c.\n"
    pi = parse_aspq(text)
    assert {str(r) for r in pi.check.rules} == {"c :- a, b.", ":- not c."}
    assert not coherent(pi)


def test_parse_rejects_malformed_layouts():
    with pytest.raises(AspqError):
        parse_aspq("a.\n%@exists\nb.\n")
    with pytest.raises(AspqError):
        parse_aspq("%@check\n:- a.\n%@exists\nb.\n")
    with pytest.raises(AspqError):
        parse_aspq("% only comments\n")
    with pytest.raises(AspqError):
        parse_aspq("%@exists\na.\n%@check\n{b}.\n")
    with pytest.raises(ParseError):
        parse_aspq("%@exists\na | b :- c.\n")


@settings(max_examples=80, deadline=None)
@given(aspq_programs())
def test_text_round_trip_stabilizes(pi):
    once = parse_aspq(format_aspq(pi))
    assert parse_aspq(format_aspq(once)) == once

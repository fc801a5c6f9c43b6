"""Solving quantified programs through the CNF/QBF pipeline.

The translation maps each quantifier block of atoms onto the corresponding
block of CNF variables; auxiliary variables introduced by the clausification
stay unlisted and therefore land in the innermost existential scope, which
is exactly where they belong: they are functionally determined by the atom
variables of the model they describe.
"""
from __future__ import annotations

from typing import Optional, Sequence

from .lp2cnf import translate
from .qbf import (
    DEFAULT_NODE_BUDGET,
    DEFAULT_TIMEOUT,
    QbfProblem,
    VarBlock,
    solve as solve_qbf,
    solve_external,
)
from .qlp import DEFAULT_BUDGET, QlpError, QuantifiedProgram, SatResult, eval_qlp

BACKENDS = ("oracle", "internal", "external")


def qbf_problem_from_qlp(qp: QuantifiedProgram) -> QbfProblem:
    """Clausify the program and lift the quantifier prefix onto variables."""
    cnf, amap = translate(qp.program)
    blocks = tuple(
        VarBlock(b.kind, tuple(amap.var(a) for a in b.atoms)) for b in qp.prefix
    )
    return QbfProblem(blocks, cnf, amap)


def solve_qlp(
    qp: QuantifiedProgram,
    backend: str = "internal",
    *,
    budget: Optional[int] = None,
    command: str | Sequence[str] | None = None,
    timeout: float = DEFAULT_TIMEOUT,
    want_witness: bool = True,
) -> SatResult:
    """Decide a quantified program with the chosen backend.

    "oracle" evaluates quantifiers by enumerating stable models directly,
    "internal" searches the QBF translation, "external" hands the QDIMACS
    rendering to `command`.
    """
    if backend == "oracle":
        return eval_qlp(qp, budget=budget if budget is not None else DEFAULT_BUDGET)
    q = qbf_problem_from_qlp(qp)
    if backend == "internal":
        return solve_qbf(
            q,
            budget=budget if budget is not None else DEFAULT_NODE_BUDGET,
            want_witness=want_witness,
        )
    if backend == "external":
        if not command:
            raise QlpError("the external backend needs a solver command")
        return solve_external(q, command, timeout=timeout)
    raise QlpError(f"unknown backend {backend!r}; expected one of {BACKENDS}")

"""QBF satisfiability over prenex CNF: internal search, QDIMACS, external solvers.

The internal solver is a recursive QDPLL-style search: unit propagation
(forcing an existential literal once every other unassigned literal in its
clause is universal), universal-only conflict detection, pure-literal
assignments, and branching strictly in prefix order.  Clause learning is
deliberately absent; problems here are desk scale and auditability wins.

Witnesses for an outermost existential block follow binary counting order
over the block (lowest variable flips fastest), matching the quantified
program evaluator so differential tests can compare witnesses exactly.
Pure-literal pruning is disabled on that block when a witness is requested,
since it may skip earlier assignments than the first satisfying one.
"""
from __future__ import annotations

import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .lp import Atom, format_atom, parse_atom
from .lp2cnf import AtomMap, Clause, CnfFormula
from .qlp import EXISTS, FORALL, BudgetExceededError, SatResult

DEFAULT_NODE_BUDGET = 1 << 22
DEFAULT_TIMEOUT = 60.0


class QbfError(Exception):
    pass


class ExternalSolverError(QbfError):
    pass


@dataclass(frozen=True)
class VarBlock:
    kind: str
    vars: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in (EXISTS, FORALL):
            raise QbfError(f"unknown quantifier kind {self.kind!r}")
        if not self.vars:
            raise QbfError("variable block must not be empty")
        vs = tuple(sorted(set(self.vars)))
        if vs[0] <= 0:
            raise QbfError("variables must be positive integers")
        object.__setattr__(self, "vars", vs)


@dataclass(frozen=True)
class QbfProblem:
    prefix: tuple[VarBlock, ...]
    matrix: CnfFormula
    amap: AtomMap

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        seen: set[int] = set()
        for b in self.prefix:
            if seen & set(b.vars):
                raise QbfError("prefix blocks must be disjoint")
            seen.update(b.vars)
            if max(b.vars) > self.matrix.num_vars:
                raise QbfError("prefix variable outside the matrix")

    def quantified_vars(self) -> set[int]:
        out: set[int] = set()
        for b in self.prefix:
            out.update(b.vars)
        return out


def solve(
    q: QbfProblem,
    *,
    budget: int = DEFAULT_NODE_BUDGET,
    want_witness: bool = True,
) -> SatResult:
    """Exact satisfiability; witness through the atom map when the outermost
    block is existential."""
    nvars = q.matrix.num_vars
    nlevels = len(q.prefix)
    level = [nlevels] * (nvars + 1)  # unlisted variables: innermost, existential
    is_forall = [False] * (nvars + 1)
    for i, b in enumerate(q.prefix):
        for v in b.vars:
            level[v] = i
            is_forall[v] = b.kind == FORALL

    # universal reduction: a universal literal needs an existential literal
    # deeper in the prefix to matter
    clauses: list[tuple[int, ...]] = []
    seen_clauses: set[frozenset] = set()
    for c in q.matrix.clauses:
        inner_e = max(
            (level[abs(l)] for l in c if not is_forall[abs(l)]), default=-1
        )
        reduced = frozenset(
            l for l in c if not is_forall[abs(l)] or level[abs(l)] < inner_e
        )
        if not reduced:
            return SatResult(False)
        if reduced not in seen_clauses:
            seen_clauses.add(reduced)
            clauses.append(tuple(reduced))

    witness_mode = bool(
        want_witness and q.prefix and q.prefix[0].kind == EXISTS
    )
    outer_vars: tuple[int, ...] = q.prefix[0].vars if witness_mode else ()
    no_pure = set(outer_vars)

    # branch order: prefix blocks outside-in; the witness block counts
    # binary with its lowest variable flipping fastest, so it is explored
    # highest-variable-first with false before true
    order: list[int] = []
    for i, b in enumerate(q.prefix):
        order.extend(reversed(b.vars) if i == 0 and witness_mode else b.vars)
    order.extend(v for v in range(1, nvars + 1) if level[v] == nlevels)

    remaining = [budget]

    def search(assign: dict[int, bool], active: list[int]) -> Optional[dict[int, bool]]:
        if remaining[0] <= 0:
            raise BudgetExceededError(f"exceeded the budget of {budget} search nodes")
        remaining[0] -= 1

        while True:
            forced: dict[int, bool] = {}
            next_active: list[int] = []
            for ci in active:
                unassigned: list[int] = []
                sat = False
                for l in clauses[ci]:
                    val = assign.get(abs(l))
                    if val is None:
                        unassigned.append(l)
                    elif val == (l > 0):
                        sat = True
                        break
                if sat:
                    continue
                exist = [l for l in unassigned if not is_forall[abs(l)]]
                if not exist:
                    return None  # only universal choices left: falsifiable
                if len(exist) == 1:
                    # unit only if every universal sibling is deeper: an outer
                    # universal could still satisfy the clause on its own
                    e = exist[0]
                    el = level[abs(e)]
                    if all(
                        level[abs(l)] > el
                        for l in unassigned
                        if is_forall[abs(l)]
                    ):
                        v, val = abs(e), e > 0
                        if forced.get(v, val) != val:
                            return None
                        forced[v] = val
                next_active.append(ci)
            if forced:
                assign.update(forced)
                active = next_active
                continue
            active = next_active

            # pure literals over the remaining clauses
            pos: set[int] = set()
            neg: set[int] = set()
            for ci in active:
                for l in clauses[ci]:
                    if abs(l) not in assign:
                        (pos if l > 0 else neg).add(abs(l))
            pure: dict[int, bool] = {}
            for v in pos ^ neg:
                if v in no_pure:
                    continue
                appears_pos = v in pos
                pure[v] = appears_pos if not is_forall[v] else not appears_pos
            if pure:
                assign.update(pure)
                continue
            break

        if not active:
            return {v: assign.get(v, False) for v in outer_vars}

        for v in order:
            if v not in assign:
                branch = v
                break
        else:
            return None  # unsatisfied clauses but nothing to assign
        if is_forall[branch]:
            first = search({**assign, branch: False}, active)
            if first is None:
                return None
            if search({**assign, branch: True}, active) is None:
                return None
            return first
        res = search({**assign, branch: False}, active)
        if res is not None:
            return res
        return search({**assign, branch: True}, active)

    snapshot = search({}, list(range(len(clauses))))
    if snapshot is None:
        return SatResult(False)
    if not witness_mode:
        return SatResult(True)
    witness = frozenset(
        a for v, a in ((v, q.amap.atom(v)) for v in outer_vars)
        if a is not None and snapshot.get(v, False)
    )
    return SatResult(True, witness)


# --- QDIMACS -------------------------------------------------------------------


def _merged_prefix(q: QbfProblem) -> list[tuple[str, list[int]]]:
    out: list[tuple[str, list[int]]] = []
    for b in q.prefix:
        if out and out[-1][0] == b.kind:
            out[-1][1].extend(b.vars)
        else:
            out.append((b.kind, list(b.vars)))
    qv = q.quantified_vars()
    free = [v for v in range(1, q.matrix.num_vars + 1) if v not in qv]
    if free:
        if out and out[-1][0] == EXISTS:
            out[-1][1].extend(free)
        else:
            out.append((EXISTS, free))
    return [(k, sorted(vs)) for k, vs in out]


def _clause_key(c: Clause):
    return tuple(sorted(((abs(l), l < 0) for l in c)))


def emit_qdimacs(q: QbfProblem) -> str:
    """Bit-exact QDIMACS with `c <var> <atom>` comments carrying the map."""
    lines: list[str] = []
    for v, a in sorted((v, a) for a, v in q.amap.items()):
        lines.append(f"c {v} {format_atom(a)}")
    lines.append(f"p cnf {q.matrix.num_vars} {len(q.matrix.clauses)}")
    for kind, vs in _merged_prefix(q):
        tag = "e" if kind == EXISTS else "a"
        lines.append(f"{tag} {' '.join(map(str, vs))} 0")
    for c in sorted(q.matrix.clauses, key=_clause_key):
        lits = sorted(c, key=lambda l: (abs(l), l < 0))
        lines.append(f"{' '.join(map(str, lits))} 0")
    return "\n".join(lines) + "\n"


def parse_qdimacs(text: str) -> QbfProblem:
    """Read QDIMACS back into a problem; inverse of emit on normalized input."""
    mapping: dict[Atom, int] = {}
    num_vars: Optional[int] = None
    blocks: list[tuple[str, list[int]]] = []
    clause_tokens: list[int] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("c"):
            m = re.match(r"c\s+(\d+)\s+(\S+)\s*$", line)
            if m:
                try:
                    mapping[parse_atom(m.group(2))] = int(m.group(1))
                except Exception:
                    pass
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise QbfError(f"malformed problem line: {line}")
            num_vars = int(parts[2])
            continue
        if line[0] in "ea":
            kind = EXISTS if line[0] == "e" else FORALL
            vs = [int(t) for t in line[1:].split()]
            if not vs or vs[-1] != 0:
                raise QbfError(f"malformed quantifier line: {line}")
            vs = vs[:-1]
            if blocks and blocks[-1][0] == kind:
                blocks[-1][1].extend(vs)
            else:
                blocks.append((kind, vs))
            continue
        clause_tokens.extend(int(t) for t in line.split())
    if num_vars is None:
        raise QbfError("missing problem line")
    clauses: set[Clause] = set()
    cur: list[int] = []
    for t in clause_tokens:
        if t == 0:
            if cur:
                clauses.add(frozenset(cur))
                cur = []
        else:
            cur.append(t)
    if cur:
        raise QbfError("unterminated clause")
    matrix = CnfFormula(frozenset(clauses), num_vars)
    prefix = tuple(VarBlock(k, tuple(vs)) for k, vs in blocks if vs)
    return QbfProblem(prefix, matrix, AtomMap(mapping))


# --- external solvers ------------------------------------------------------------


_RESULT_RE = re.compile(r"^s\s+(?:cnf\s+)?(-?\d+)", re.MULTILINE)


def solve_external(
    q: QbfProblem,
    command: str | Sequence[str],
    *,
    timeout: float = DEFAULT_TIMEOUT,
) -> SatResult:
    """Run an external QDIMACS solver and lift its answer (and certificate).

    The command receives the QDIMACS file path as its final argument.  The
    answer is taken from an `s cnf 1|0` line, falling back to exit codes
    10 (satisfiable) and 20 (unsatisfiable); anything else is an error,
    never a guessed result.
    """
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    with tempfile.TemporaryDirectory(prefix="qbf") as d:
        path = Path(d) / "problem.qdimacs"
        path.write_text(emit_qdimacs(q))
        try:
            proc = subprocess.run(
                argv + [str(path)],
                capture_output=True,
                text=True,
                timeout=timeout,
            )
        except FileNotFoundError as e:
            raise ExternalSolverError(f"cannot run {argv[0]!r}: {e}")
        except subprocess.TimeoutExpired:
            raise ExternalSolverError(
                f"external solver timed out after {timeout:g}s"
            )
    m = _RESULT_RE.search(proc.stdout)
    if m and m.group(1) in ("0", "1"):
        sat = m.group(1) == "1"
    elif proc.returncode == 10:
        sat = True
    elif proc.returncode == 20:
        sat = False
    else:
        raise ExternalSolverError(
            f"unrecognized solver output (exit {proc.returncode}): "
            + (proc.stdout or proc.stderr)[:200]
        )
    if not sat:
        return SatResult(False)
    if not (q.prefix and q.prefix[0].kind == EXISTS):
        return SatResult(True)
    cert: dict[int, bool] = {}
    for line in proc.stdout.splitlines():
        if line[:1] in ("V", "v"):
            for t in line[1:].split():
                l = int(t)
                if l != 0:
                    cert[abs(l)] = l > 0
    if not cert:
        return SatResult(True)
    witness = frozenset(
        a
        for v in q.prefix[0].vars
        for a in (q.amap.atom(v),)
        if a is not None and cert.get(v, False)
    )
    return SatResult(True, witness)

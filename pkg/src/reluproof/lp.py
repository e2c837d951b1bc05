"""Feasibility solver for conjunctions of linear constraints.

The solver is a textbook two-phase simplex on floating point; for pure
feasibility questions phase 2 has an empty objective, so only phase 1
(artificial-variable minimization) runs. Free variables are split into
positive and negative parts. Cycling is prevented by falling back to
Bland's rule once the objective stalls.

Strict inequalities are rewritten as non-strict ones with a configurable
slack; every feasible answer is re-validated against the asserted
constraints at the feasibility tolerance before being returned.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Mapping, Optional

import numpy as np

from .errors import InputError, SolverFailure

REL_LE = "le"
REL_LT = "lt"
REL_EQ = "eq"
REL_GE = "ge"
REL_GT = "gt"
_RELATIONS = (REL_LE, REL_LT, REL_EQ, REL_GE, REL_GT)

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"

DEFAULT_TOL = 1e-6
EPS_STRICT = 1e-7

_PIVOT_TOL = 1e-9
_PHASE1_TOL = 1e-8
_MAX_ITER = 50_000
_STALL_LIMIT = 40


@dataclass(frozen=True)
class LinearConstraint:
    """sum(coeffs[v] * v) <rel> rhs, with an opaque tag naming its origin."""

    coeffs: Mapping
    rel: str
    rhs: float
    tag: Hashable

    def __post_init__(self):
        if self.rel not in _RELATIONS:
            raise InputError(f"unknown relation {self.rel!r}")
        coeffs = {v: float(c) for v, c in dict(self.coeffs).items() if c != 0.0}
        if not all(np.isfinite(c) for c in coeffs.values()) or not np.isfinite(self.rhs):
            raise InputError("constraint coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "rhs", float(self.rhs))

    def violation(self, assignment: Mapping, eps_strict: float = EPS_STRICT) -> float:
        """How far the assignment is from satisfying the (rewritten) constraint."""
        lhs = sum(c * assignment[v] for v, c in self.coeffs.items())
        if self.rel == REL_LE:
            return lhs - self.rhs
        if self.rel == REL_LT:
            return lhs - (self.rhs - eps_strict)
        if self.rel == REL_GE:
            return self.rhs - lhs
        if self.rel == REL_GT:
            return (self.rhs + eps_strict) - lhs
        return abs(lhs - self.rhs)


class ConstraintSystem:
    """A stack of constraint scopes; popping removes exactly one push."""

    def __init__(self):
        self._scopes = [[]]
        self._live_tags = set()

    def push_scope(self) -> None:
        self._scopes.append([])

    def pop_scope(self) -> None:
        if len(self._scopes) == 1:
            raise InputError("pop_scope on an empty scope stack")
        for c in self._scopes.pop():
            self._live_tags.discard(c.tag)

    def add(self, constraint: LinearConstraint) -> None:
        if constraint.tag in self._live_tags:
            raise InputError(f"duplicate constraint tag {constraint.tag!r}")
        self._live_tags.add(constraint.tag)
        self._scopes[-1].append(constraint)

    def extend(self, constraints) -> None:
        for c in constraints:
            self.add(c)

    def constraints(self) -> list:
        return [c for scope in self._scopes for c in scope]

    def variables(self) -> set:
        return {v for scope in self._scopes for c in scope for v in c.coeffs}

    def __len__(self) -> int:
        return sum(len(s) for s in self._scopes)


@dataclass(frozen=True)
class FeasibilityResult:
    verdict: str
    witness: Optional[dict] = None
    conflict_tags: Optional[frozenset] = None

    @property
    def feasible(self) -> bool:
        return self.verdict == FEASIBLE


def _rewrite(constraint: LinearConstraint, eps_strict: float):
    """Normalize to 'le' / 'eq' rows with strict slack applied."""
    rel, rhs = constraint.rel, constraint.rhs
    if rel == REL_LT:
        rel, rhs = REL_LE, rhs - eps_strict
    elif rel == REL_GT:
        rel, rhs = REL_GE, rhs + eps_strict
    if rel == REL_GE:
        return {v: -c for v, c in constraint.coeffs.items()}, REL_LE, -rhs
    return dict(constraint.coeffs), rel, rhs


def _phase1(rows, num_cols_x: int):
    """Minimize the sum of artificial variables.

    rows: list of (dense coeff vector over split variables, rhs, is_eq).
    Returns (feasible, values over split variables).
    """
    m = len(rows)
    slack_cols = []
    art_cols = []
    data = []
    for a, b, is_eq in rows:
        a = np.asarray(a, dtype=float)
        if is_eq:
            if b < 0:
                a, b = -a, -b
            data.append((a, b, 0.0, True))
        else:
            if b >= 0:
                data.append((a, b, 1.0, False))  # slack enters the basis
            else:
                data.append((-a, -b, -1.0, True))  # surplus, needs artificial

    n_slack = sum(1 for _, _, s, _ in data if s != 0.0)
    n_art = sum(1 for _, _, _, need in data if need)
    ncols = num_cols_x + n_slack + n_art
    T = np.zeros((m, ncols + 1))
    basis = np.empty(m, dtype=int)
    si = num_cols_x
    ai = num_cols_x + n_slack
    art_rows = []
    for i, (a, b, s, need_art) in enumerate(data):
        T[i, :num_cols_x] = a
        T[i, ncols] = b
        if s != 0.0:
            T[i, si] = s
            if not need_art:
                basis[i] = si
            si += 1
        if need_art:
            T[i, ai] = 1.0
            basis[i] = ai
            art_rows.append(i)
            ai += 1
    first_art = num_cols_x + n_slack

    # reduced-cost row for min(sum of artificials): r = sum of artificial rows
    r = np.zeros(ncols + 1)
    for i in art_rows:
        r += T[i]
    r[first_art:ncols] = 0.0

    stall = 0
    bland = False
    last_obj = r[ncols]
    for _ in range(_MAX_ITER):
        # artificial columns never re-enter the basis
        cand = np.where(r[:first_art] > _PIVOT_TOL)[0]
        if cand.size == 0:
            break
        if bland:
            enter = int(cand[0])
        else:
            enter = int(cand[np.argmax(r[cand])])
        col = T[:, enter]
        pos = np.where(col > _PIVOT_TOL)[0]
        if pos.size == 0:
            # phase-1 objective is bounded below; a missing leaving row is
            # numerical noise, mask the column and carry on
            r[enter] = 0.0
            continue
        ratios = T[pos, ncols] / col[pos]
        best = np.min(ratios)
        tied = pos[ratios <= best + 1e-12]
        leave = int(tied[np.argmin(basis[tied])])

        piv = T[leave, enter]
        T[leave] /= piv
        coef = T[:, enter].copy()
        coef[leave] = 0.0
        T -= np.outer(coef, T[leave])
        r -= r[enter] * T[leave]
        basis[leave] = enter

        obj = r[ncols]
        if last_obj - obj < 1e-12:
            stall += 1
            if stall >= _STALL_LIMIT:
                bland = True
        else:
            stall = 0
        last_obj = obj
    else:
        raise SolverFailure("simplex iteration limit reached")

    art_value = 0.0
    for i in range(m):
        if basis[i] >= first_art:
            art_value += T[i, ncols]
    if art_value > _PHASE1_TOL:
        return False, None

    values = np.zeros(num_cols_x)
    for i in range(m):
        if basis[i] < num_cols_x:
            values[basis[i]] = T[i, ncols]
    return True, values


def check_feasible(
    system: ConstraintSystem,
    tol: float = DEFAULT_TOL,
    eps_strict: float = EPS_STRICT,
) -> FeasibilityResult:
    """Decide feasibility of every constraint currently asserted.

    Feasible results carry a witness that satisfies every constraint
    within `tol` (strict ones with the epsilon margin). Infeasible
    results carry a conflict tag set that is itself infeasible; it may
    be non-minimal, minimization is the caller's job.
    """
    constraints = system.constraints()
    variables = sorted(system.variables(), key=str)
    vidx = {v: i for i, v in enumerate(variables)}
    nx = len(variables)

    rows = []
    for c in constraints:
        coeffs, rel, rhs = _rewrite(c, eps_strict)
        if not coeffs:
            # the left side is literally zero, so compare exactly
            sat = (0.0 <= rhs) if rel == REL_LE else (rhs == 0.0)
            if not sat:
                return FeasibilityResult(INFEASIBLE, conflict_tags=frozenset([c.tag]))
            continue
        dense = np.zeros(2 * nx)
        for v, coef in coeffs.items():
            dense[2 * vidx[v]] = coef
            dense[2 * vidx[v] + 1] = -coef
        rows.append((dense, rhs, rel == REL_EQ))

    if not rows:
        return FeasibilityResult(FEASIBLE, witness={v: 0.0 for v in variables})

    feasible, values = _phase1(rows, 2 * nx)
    if not feasible:
        return FeasibilityResult(
            INFEASIBLE, conflict_tags=frozenset(c.tag for c in constraints)
        )

    witness = {v: float(values[2 * i] - values[2 * i + 1]) for v, i in vidx.items()}
    worst = max((c.violation(witness, eps_strict) for c in constraints), default=0.0)
    if worst > tol:
        raise SolverFailure(f"witness violates a constraint by {worst:.3g}")
    return FeasibilityResult(FEASIBLE, witness=witness)


def solve_constraints(constraints, **kwargs) -> FeasibilityResult:
    """One-shot feasibility check of a constraint list."""
    sys_ = ConstraintSystem()
    sys_.extend(constraints)
    return check_feasible(sys_, **kwargs)

"""Unsat cores over activation literals and their minimization.

A core is a set of activation literals whose constraints, together with
the base encoding and the triangle relaxations of the remaining unstable
neurons, are infeasible. Because exact ReLU behavior lies inside the
triangles, a core of the relaxed system transfers to the exact one.

Cores contain literals only; input, affine, bound, and property rows are
always-on context. That keeps the vocabulary independent of the concrete
weights, which is what lets a core be re-checked against a compressed
variant of the same architecture.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

from .errors import ContractViolation
from .lp import FeasibilityResult
from .network import ActivationLiteral

STILL_UNSAT = "still_unsat"
NOW_FEASIBLE = "now_feasible"

CheckFn = Callable[[Iterable[ActivationLiteral]], FeasibilityResult]


@dataclass(frozen=True)
class Core:
    """A set of activation literals that is jointly infeasible in context."""

    literals: frozenset
    minimal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "literals", frozenset(self.literals))

    def sorted_literals(self) -> tuple:
        return tuple(sorted(self.literals))

    def __len__(self) -> int:
        return len(self.literals)

    def issubset(self, other: Iterable[ActivationLiteral]) -> bool:
        return self.literals.issubset(other)


def _literal_tag_hit(lit: ActivationLiteral, conflict_tags) -> bool:
    key = ("lit", lit.neuron.layer, lit.neuron.pos, lit.phase)
    return (key + ("sign",)) in conflict_tags or (key + ("link",)) in conflict_tags


def extract_core(
    path: Sequence[ActivationLiteral],
    check: CheckFn,
    leaf_result: Optional[FeasibilityResult] = None,
) -> Core:
    """Non-minimal core from an infeasible path.

    Filters the path's literals to those named in the solver's conflict
    tags when available; if the filtered set does not re-check
    infeasible, falls back to the full path. The path itself must have
    been infeasible (verified here if no leaf result is supplied).
    """
    if leaf_result is None:
        leaf_result = check(path)
    if leaf_result.feasible:
        raise ContractViolation("extract_core called on a feasible path")

    full = frozenset(path)
    tags = leaf_result.conflict_tags or frozenset()
    filtered = frozenset(lit for lit in path if _literal_tag_hit(lit, tags))
    if filtered != full:
        if check(filtered).feasible:
            filtered = full
    else:
        filtered = full
    return Core(filtered, minimal=(len(filtered) == 0))


def minimize(
    core: Core,
    check: CheckFn,
    order: Sequence[ActivationLiteral] = (),
    known_feasible=(),
) -> Core:
    """Deletion-based minimization.

    Tries literals one at a time in reverse decision order (latest
    first); a removal is kept when the remainder is still infeasible.
    Every single-literal deletion of the result is feasible.
    `known_feasible` lists literal sets already proven feasible, whose
    trials can be skipped (e.g. the parent node of an infeasible leaf).
    """
    if core.minimal:
        return core
    known = {frozenset(s) for s in known_feasible}
    ordered = [lit for lit in order if lit in core.literals]
    ordered += sorted(core.literals - set(ordered))
    keep = set(core.literals)
    for lit in reversed(ordered):
        if len(keep) == 0:
            break
        trial = keep - {lit}
        if frozenset(trial) in known:
            continue
        if not check(trial).feasible:
            keep = trial
    return Core(frozenset(keep), minimal=True)


@dataclass(frozen=True)
class CoreCheck:
    status: str
    witness: Optional[dict] = None
    note: str = ""

    @property
    def still_unsat(self) -> bool:
        return self.status == STILL_UNSAT


def check_core(core: Core, check_prime: CheckFn) -> CoreCheck:
    """Re-check a core against a (compressed) problem's encoding.

    still_unsat means every search path containing this core may be
    pruned for that problem; the relaxed context makes the answer sound
    for the exact semantics as well. A feasible answer carries the LP
    witness.
    """
    res = check_prime(core.literals)
    if res.feasible:
        return CoreCheck(NOW_FEASIBLE, witness=res.witness)
    return CoreCheck(STILL_UNSAT)


def core_applicable(core: Core, network) -> bool:
    """False only for dimension-changing incompatibilities."""
    sizes = network.hidden_sizes()
    for lit in core.literals:
        k, p = lit.neuron.layer, lit.neuron.pos
        if not (1 <= k <= len(sizes)) or not (1 <= p <= sizes[k - 1]):
            return False
    return True


def dedupe_cores(cores: Iterable[Core]) -> tuple:
    """Drop any core that is a superset of another; deterministic order."""
    unique = []
    seen = set()
    for c in sorted(cores, key=lambda c: (len(c.literals), c.sorted_literals())):
        if c.literals in seen:
            continue
        if any(kept.literals < c.literals or kept.literals == c.literals for kept in unique):
            continue
        unique.append(c)
        seen.add(c.literals)
    return tuple(unique)

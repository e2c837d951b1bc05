"""Case-split search over unstable-neuron phases.

All unstable neurons start under the triangle relaxation. A feasible
node whose LP witness is a real counterexample ends the search; a
feasible node with a spurious witness (an artifact of the relaxation)
restores exactness for one neuron by branching on its two phases,
chosen by largest relaxation violation. Infeasible nodes are closed and
their paths shrunk to minimal unsat cores on the fly; any branch whose
literal set contains a known core is pruned without touching the LP.

Each disjunct of the negated property is searched as a top-level
alternative; a real counterexample for any disjunct ends everything.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .bounds import UNSTABLE, BoundsMap, NeuronBounds, refresh_under_assumptions
from .encoder import ProblemEncoding, var_x, var_xh, witness_input
from .errors import ContractViolation, InputError, SolverFailure
from .muc import Core, core_applicable, extract_core, minimize
from .network import ACTIVE, INACTIVE, ActivationLiteral, NeuronId, forward_eval
from .proof import SAT, UNK, UNSAT, ProofArtifact, ProofStats, SatCore, make_artifact
from .props import VerificationProblem

RELU_VIOLATION_TOL = 1e-6


@dataclass(frozen=True)
class Budget:
    """Resource limits for one solve call."""

    wall_clock_limit: float = 60.0
    max_lp_calls: int = 100_000

    def __post_init__(self):
        if not (self.wall_clock_limit > 0 and self.max_lp_calls > 0):
            raise InputError("budget limits must be positive")


class BudgetExceeded(Exception):
    """Internal control flow: the tracker refused another LP call."""


class Tracker:
    """Shared LP-call counter and wall-clock deadline."""

    def __init__(self, budget: Budget):
        self.budget = budget
        self.deadline = time.monotonic() + budget.wall_clock_limit
        self.lp_calls = 0

    def done(self) -> bool:
        return self.lp_calls >= self.budget.max_lp_calls or time.monotonic() >= self.deadline

    def tick(self) -> None:
        if self.done():
            raise BudgetExceeded
        self.lp_calls += 1


def score_neuron(nb: NeuronBounds) -> float:
    """Balance score |u+l| / (u+|l|); 0 means perfectly balanced bounds."""
    if not (nb.lower < 0.0 < nb.upper):
        raise ContractViolation(f"score needs l < 0 < u, got [{nb.lower}, {nb.upper}]")
    return abs(nb.upper + nb.lower) / (nb.upper + abs(nb.lower))


def select_branch_neuron(candidates: Sequence[NeuronId], bmap: BoundsMap) -> NeuronId:
    """Most balanced candidate first; ties by (layer, pos)."""
    if not candidates:
        raise InputError("no branch candidates")
    return min(candidates, key=lambda nid: (score_neuron(bmap.neuron(nid)), nid.layer, nid.pos))


@dataclass(frozen=True)
class LeafVerdict:
    path: tuple
    result: str  # "sat" / "unsat" / "unk"
    witness: Optional[tuple] = None
    core: Optional[Core] = None


@dataclass
class DisjunctOutcome:
    status: str  # SAT / UNSAT / UNK
    witness: Optional[tuple] = None
    sat_path: Optional[tuple] = None
    cores: list = field(default_factory=list)
    unchecked: list = field(default_factory=list)
    leaves: list = field(default_factory=list)


def add_core(pool: list, core: Core) -> bool:
    """Keep the pool pairwise non-superset; returns True if added."""
    if any(kept.literals <= core.literals for kept in pool):
        return False
    pool[:] = [kept for kept in pool if not core.literals < kept.literals]
    pool.append(core)
    return True


def _branch_score(nid: NeuronId, refreshed: BoundsMap, original: BoundsMap) -> float:
    nb = refreshed.hidden[nid]
    if nb.stability == UNSTABLE:
        return score_neuron(nb)
    return score_neuron(original.hidden[nid])


def search_subtree(
    enc: ProblemEncoding,
    disjunct: int,
    prefix: Sequence[ActivationLiteral],
    tracker: Tracker,
    pool: list,
    use_pruning: bool = True,
) -> DisjunctOutcome:
    """Complete search of the subtree rooted at `prefix` for one disjunct.

    `pool` holds cores already known infeasible for this problem and
    disjunct; cores found along the way are appended to it.
    """
    out = DisjunctOutcome(status=UNSAT)
    net = enc.problem.network
    box = enc.problem.input_box
    clause = enc.negated.clauses[disjunct]
    root = tuple(prefix)
    stack = [root]
    saw_unknown_leaf = False

    while stack:
        path = stack.pop()
        literal_set = frozenset(path)

        if use_pruning and any(core.issubset(literal_set) for core in pool):
            continue

        try:
            res = enc.check(disjunct, path, tracker)
        except BudgetExceeded:
            out.unchecked.append(path)
            out.unchecked.extend(stack)
            out.status = UNK
            return out
        except SolverFailure:
            out.unchecked.append(path)
            out.leaves.append(LeafVerdict(path, "unk"))
            saw_unknown_leaf = True
            continue

        if not res.feasible:
            checker = enc.checker(disjunct, tracker)
            # any non-root node was pushed by a parent that checked feasible
            parent_known = [frozenset(path[:-1])] if len(path) > len(root) else []
            try:
                core = extract_core(path, checker, res)
                core = minimize(core, checker, order=path, known_feasible=parent_known)
            except BudgetExceeded:
                out.unchecked.append(path)
                out.unchecked.extend(stack)
                out.status = UNK
                return out
            add_core(pool, core)
            out.cores.append(core)
            out.leaves.append(LeafVerdict(path, "unsat", core=core))
            continue

        candidate_input = box.clamp(witness_input(res.witness, net))
        output = forward_eval(net, candidate_input)
        if all(ineq.holds(output) for ineq in clause):
            out.status = SAT
            out.witness = tuple(float(v) for v in candidate_input)
            out.sat_path = path
            out.leaves.append(LeafVerdict(path, "sat", witness=out.witness))
            out.unchecked.extend(stack)
            return out

        # spurious witness: branch on the most over-estimated neuron
        pinned = {lit.neuron for lit in path}
        remaining = [nid for nid in enc.unstable if nid not in pinned]
        if not remaining:
            # fully split yet the witness fails exact validation; a
            # knife-edge of the float tolerances, never report SAT
            out.unchecked.append(path)
            out.leaves.append(LeafVerdict(path, "unk"))
            saw_unknown_leaf = True
            continue

        violation = {}
        for nid in remaining:
            xv = res.witness[var_x(nid.layer, nid.pos)]
            xhv = res.witness[var_xh(nid.layer, nid.pos)]
            violation[nid] = abs(xhv - max(0.0, xv))
        violated = [nid for nid in remaining if violation[nid] > RELU_VIOLATION_TOL]
        candidates = violated if violated else remaining
        refreshed = refresh_under_assumptions(enc.bounds, path)
        target = min(
            candidates,
            key=lambda nid: (
                -violation[nid],
                _branch_score(nid, refreshed, enc.bounds),
                nid.layer,
                nid.pos,
            ),
        )
        first = ACTIVE if res.witness[var_x(target.layer, target.pos)] >= 0.0 else INACTIVE
        second = INACTIVE if first == ACTIVE else ACTIVE
        stack.append(path + (ActivationLiteral(target, second),))
        stack.append(path + (ActivationLiteral(target, first),))

    if saw_unknown_leaf:
        out.status = UNK
    return out


def _validated_hint_pool(enc, disjunct, hints, tracker) -> list:
    """Re-check hint cores against this problem before letting them prune."""
    pool = []
    for hint in hints:
        core = hint if isinstance(hint, Core) else Core(frozenset(hint))
        if not core_applicable(core, enc.problem.network):
            continue
        checker = enc.checker(disjunct, tracker)
        if not checker(core.literals).feasible:
            add_core(pool, minimize(Core(core.literals), checker, order=core.sorted_literals()))
    return pool


def solve_encoded(
    enc: ProblemEncoding,
    budget: Optional[Budget] = None,
    muc_hints: Optional[Iterable] = None,
    use_core_pruning: bool = True,
):
    """Run the full search on a prepared encoding."""
    tracker = Tracker(budget or Budget())
    start = time.perf_counter()
    hints = list(muc_hints) if muc_hints else []

    cores = []
    unchecked = []
    sat_core = None
    any_unknown = False

    for d in range(enc.num_disjuncts):
        if tracker.done():
            unchecked.append(())
            any_unknown = True
            continue
        try:
            pool = _validated_hint_pool(enc, d, hints, tracker) if hints else []
        except BudgetExceeded:
            unchecked.append(())
            any_unknown = True
            continue
        cores.extend(pool)
        outcome = search_subtree(enc, d, (), tracker, pool, use_pruning=use_core_pruning)
        cores.extend(outcome.cores)
        unchecked.extend(outcome.unchecked)
        if outcome.status == SAT:
            sat_core = SatCore(outcome.witness, outcome.sat_path)
            for _ in range(d + 1, enc.num_disjuncts):
                unchecked.append(())
            break
        if outcome.status == UNK:
            any_unknown = True

    if sat_core is not None:
        verdict = SAT
    elif any_unknown:
        verdict = UNK
    else:
        verdict = UNSAT
        unchecked = []

    artifact = make_artifact(
        verdict=verdict,
        mucs=cores,
        sat_core=sat_core,
        unchecked=unchecked,
        fingerprint=enc.problem.fingerprint,
        stats=ProofStats(lp_calls=tracker.lp_calls, wall_time=time.perf_counter() - start),
    )
    return verdict, artifact


def solve(
    problem: VerificationProblem,
    budget: Optional[Budget] = None,
    muc_hints: Optional[Iterable] = None,
    use_core_pruning: bool = True,
):
    """Verify one problem; returns (verdict, proof artifact).

    SAT verdicts always carry a counterexample validated by exact
    forward evaluation; spurious LP witnesses are repaired by splitting,
    never reported.
    """
    enc = ProblemEncoding(problem)
    return solve_encoded(enc, budget, muc_hints, use_core_pruning)

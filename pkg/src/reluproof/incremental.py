"""Re-verify a compressed network guided by the original proof.

The stored artifact partitions the search space into three kinds of
pieces: minimal unsat cores (regions proven empty), unchecked prefixes
(regions never searched), and the SAT path. Re-verification validates
each core against the compressed network with the LP; surviving cores
keep pruning, failed ones re-open their region as a restricted search.
Unchecked prefixes and the SAT path are re-searched as restricted
subproblems. If the artifact's pieces do not cover the whole space
(foreign or truncated proofs), the engine falls back to a from-scratch
solve, still seeded with the surviving cores.

SAT answers are validated by exact forward evaluation exactly as in the
from-scratch search; an exhausted piece list yields UNSAT.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .encoder import ProblemEncoding
from .errors import FingerprintMismatch, IncompatibleNetworks
from .muc import Core, minimize
from .network import INCOMPATIBLE, Network, NeuronId, diff_classify, forward_eval
from .proof import (
    SAT,
    UNK,
    UNSAT,
    ProofArtifact,
    ProofStats,
    SatCore,
    make_artifact,
)
from .props import VerificationProblem, eval_property, fingerprint_parts
from .search import (
    Budget,
    BudgetExceeded,
    Tracker,
    add_core,
    search_subtree,
    solve_encoded,
)

_COVER_NODE_BUDGET = 50_000


@dataclass(frozen=True)
class ReuseReport:
    verdict: str
    cores_reused: int
    cores_failed: int
    branches_reopened: int
    validity: Optional[float]
    time: float


def _consistent(piece: frozenset, fixed: frozenset) -> bool:
    return not any(lit.negated() in fixed for lit in piece)


def _covered(pieces, fixed: frozenset, budget: list) -> bool:
    """True if every phase assignment extending `fixed` contains a piece."""
    budget[0] -= 1
    if budget[0] <= 0:
        return False  # undecided counts as uncovered (conservative)
    remains = []
    for p in pieces:
        if not _consistent(p, fixed):
            continue
        rest = p - fixed
        if not rest:
            return True
        remains.append(rest)
    if not remains:
        return False
    lit = min(min(remains, key=lambda r: (len(r), sorted(r))))
    return _covered(pieces, fixed | {lit}, budget) and _covered(
        pieces, fixed | {lit.negated()}, budget
    )


def coverage_complete(proof: ProofArtifact) -> bool:
    """Do the artifact's pieces jointly cover the whole activation space?"""
    pieces = [core.literals for core in proof.mucs]
    pieces += [frozenset(p) for p in proof.unchecked]
    if proof.sat_core is not None:
        pieces.append(frozenset(proof.sat_core.path))
    return _covered(pieces, frozenset(), [_COVER_NODE_BUDGET])


def _constant_neurons(net: Network) -> set:
    """Hidden neurons whose incoming edges are all masked (pre-activation is the bias)."""
    out = set()
    for k, layer in enumerate(net.layers[:-1], start=1):
        for j in range(layer.out_dim):
            if layer.in_dim > 0 and np.all(layer.prune_mask[j] == 1):
                out.add(NeuronId(k, j + 1))
    return out


def reverify(
    f_prime: Network,
    problem_of_f: VerificationProblem,
    proof: ProofArtifact,
    budget: Optional[Budget] = None,
):
    """Verify (f', P, Q) using the proof of (f, P, Q)."""
    if proof.problem_fingerprint != problem_of_f.fingerprint:
        raise FingerprintMismatch("proof does not match the original problem")
    if diff_classify(problem_of_f.network, f_prime) == INCOMPATIBLE:
        raise IncompatibleNetworks("compressed network does not correspond to the original")
    problem_prime = VerificationProblem(f_prime, problem_of_f.input_box, problem_of_f.prop)
    return _reverify(problem_prime, proof, budget)


def reverify_from_proof(
    problem_prime: VerificationProblem,
    proof: ProofArtifact,
    budget: Optional[Budget] = None,
):
    """Reverify when only the compressed network is at hand.

    The fingerprint's architecture and box+property components must
    match; the parameter component is allowed to differ (that is the
    compression).
    """
    arch_p, spec_p, _ = fingerprint_parts(proof.problem_fingerprint)
    arch_n, spec_n, _ = fingerprint_parts(problem_prime.fingerprint)
    if arch_p != arch_n or spec_p != spec_n:
        raise FingerprintMismatch("proof belongs to a different architecture or property")
    return _reverify(problem_prime, proof, budget)


def _remaining_budget(tracker: Tracker) -> Optional[Budget]:
    wall = tracker.deadline - time.monotonic()
    lp = tracker.budget.max_lp_calls - tracker.lp_calls
    if wall <= 0 or lp <= 0:
        return None
    return Budget(wall_clock_limit=wall, max_lp_calls=lp)


def _reverify(problem_prime: VerificationProblem, proof: ProofArtifact, budget: Optional[Budget]):
    start = time.perf_counter()
    tracker = Tracker(budget or Budget())
    net = problem_prime.network

    # fast path: does the stored counterexample still break the property?
    if proof.verdict == SAT and proof.sat_core is not None:
        witness = problem_prime.input_box.clamp(proof.sat_core.witness)
        if problem_prime.input_box.contains(witness) and not eval_property(
            problem_prime.prop, forward_eval(net, witness)
        ):
            sat = SatCore(tuple(float(v) for v in witness), ())
            artifact = make_artifact(
                SAT, (), sat, (), problem_prime.fingerprint,
                ProofStats(lp_calls=0, wall_time=time.perf_counter() - start),
            )
            report = ReuseReport(SAT, 0, 0, 0, None, time.perf_counter() - start)
            return SAT, artifact, report

    enc = ProblemEncoding(problem_prime)
    total = len(proof.mucs)
    const_neurons = _constant_neurons(net)
    sizes = net.hidden_sizes()

    def in_range(nid: NeuronId) -> bool:
        return 1 <= nid.layer <= len(sizes) and 1 <= nid.pos <= sizes[nid.layer - 1]

    pools = {d: [] for d in range(enc.num_disjuncts)}
    artifact_cores = []
    reused = 0
    failed_pieces = []  # (ordered literals, from a failed core)

    def finish(verdict, sat_core, unchecked, reopened):
        elapsed = time.perf_counter() - start
        artifact = make_artifact(
            verdict,
            artifact_cores,
            sat_core,
            unchecked if verdict != UNSAT else (),
            problem_prime.fingerprint,
            ProofStats(lp_calls=tracker.lp_calls, wall_time=elapsed),
        )
        validity = (reused / total) if total else None
        report = ReuseReport(verdict, reused, total - reused, reopened, validity, elapsed)
        return verdict, artifact, report

    # step 1: re-check every stored core against the compressed encoding.
    # A disjunct whose fully relaxed root is already infeasible validates
    # every core at once: pinning more neurons only shrinks the region.
    try:
        root_closed = {
            d: not enc.check(d, (), tracker).feasible for d in range(enc.num_disjuncts)
        }
        for d, closed in root_closed.items():
            if closed:
                add_core(pools[d], Core(frozenset(), minimal=True))
        if any(root_closed.values()):
            artifact_cores.append(Core(frozenset(), minimal=True))
        for core in proof.mucs:
            dropped = {
                lit for lit in core.literals if lit.neuron in const_neurons or not in_range(lit.neuron)
            }
            if dropped:
                # the neuron collapsed to a constant: conservatively count the
                # core as failed and re-open its region without those literals
                failed_pieces.append(tuple(sorted(core.literals - dropped)))
                continue
            first_valid = None
            for d in range(enc.num_disjuncts):
                if root_closed[d]:
                    if first_valid is None:
                        first_valid = d
                    continue
                if not enc.check(d, core.literals, tracker).feasible:
                    add_core(pools[d], core)
                    if first_valid is None:
                        first_valid = d
            if first_valid is not None:
                reused += 1
                if not root_closed[first_valid]:
                    if len(core.literals) == 1:
                        # only deletion is the root, already known feasible
                        artifact_cores.append(Core(core.literals, minimal=True))
                    else:
                        artifact_cores.append(
                            minimize(
                                Core(core.literals), enc.checker(first_valid, tracker), core.sorted_literals()
                            )
                        )
            else:
                failed_pieces.append(tuple(sorted(core.literals)))
    except BudgetExceeded:
        return finish(UNK, None, [()], 0)

    # step 2: assemble the restricted subproblems in reuse order
    pieces = []
    if proof.verdict == SAT and proof.sat_core is not None:
        sat_set = frozenset(proof.sat_core.path)
        pieces.append(tuple(proof.sat_core.path))
        ranked = sorted(
            enumerate(proof.unchecked),
            key=lambda iv: (len(frozenset(iv[1]) ^ sat_set), iv[0]),
        )
        pieces.extend(tuple(p) for _, p in ranked)
    else:
        pieces.extend(tuple(p) for p in proof.unchecked)
    pieces.extend(failed_pieces)
    core_piece_start = len(pieces) - len(failed_pieces)

    if not coverage_complete(proof):
        # foreign or truncated proof: fall back to a full solve, still
        # seeded with every surviving core
        remaining = _remaining_budget(tracker)
        if remaining is None:
            return finish(UNK, None, [()], 0)
        verdict, artifact2 = solve_encoded(
            enc, remaining, muc_hints=[Core(c.literals) for c in artifact_cores]
        )
        tracker.lp_calls += artifact2.stats.lp_calls
        artifact_cores.extend(artifact2.mucs)
        return finish(verdict, artifact2.sat_core, artifact2.unchecked, 1)

    reopened = 0
    any_unknown = False
    unchecked_out = []
    completed = []  # literal sets of fully searched pieces
    for idx, piece in enumerate(pieces):
        piece_set = frozenset(piece)
        if any(done <= piece_set for done in completed):
            continue
        piece_unknown = False
        for d in range(enc.num_disjuncts):
            pool = pools[d]
            if any(core.issubset(piece_set) for core in pool):
                continue
            if _covered([c.literals for c in pool], piece_set, [_COVER_NODE_BUDGET]):
                continue
            if idx >= core_piece_start:
                reopened += 1
            if tracker.done():
                unchecked_out.extend(pieces[idx:])
                return finish(UNK, None, unchecked_out, reopened)
            outcome = search_subtree(enc, d, piece, tracker, pool)
            artifact_cores.extend(outcome.cores)
            unchecked_out.extend(outcome.unchecked)
            if outcome.status == SAT:
                sat = SatCore(outcome.witness, outcome.sat_path)
                unchecked_out.extend(pieces[idx + 1:])
                return finish(SAT, sat, unchecked_out, reopened)
            if outcome.status == UNK:
                piece_unknown = True
                any_unknown = True
        if not piece_unknown:
            completed.append(piece_set)

    if any_unknown:
        return finish(UNK, None, unchecked_out, reopened)
    return finish(UNSAT, None, (), reopened)

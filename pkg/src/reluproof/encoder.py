"""Translate verification problems into linear constraint systems.

Variable naming is purely structural (layer and position), so the
encoding of a compressed network exposes exactly the same variable set
as the original and activation literals transfer between the two.

The base system holds the input box, the affine rows (with prune masks
applied), interval bound rows for every pre-activation, phase fixes for
stable neurons, and the inequalities of one disjunct of the negated
property. ReLU behavior of unstable neurons is *not* in the base: each
unstable neuron is either covered by its triangle relaxation or pinned
by an activation literal. Keeping the interval bound rows in the base
makes a literal's constraints imply the neuron's triangle, so shrinking
a literal set never shrinks the feasible region.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Collection, Iterable, Optional

import numpy as np

from .bounds import BoundsMap, NeuronBounds, STABLE_ACTIVE, UNSTABLE, interval_propagate
from .errors import ContractViolation, IncompatibleNetworks, InputError
from .lp import (
    REL_EQ,
    REL_GE,
    REL_GT,
    REL_LE,
    REL_LT,
    ConstraintSystem,
    FeasibilityResult,
    LinearConstraint,
    check_feasible,
)
from .network import (
    ACTIVE,
    INACTIVE,
    INCOMPATIBLE,
    ActivationLiteral,
    Network,
    NeuronId,
    diff_classify,
)
from .props import VerificationProblem, negate

SPLIT_PENDING = "split_pending"
RELAXED = "relaxed"
UNRELAXED = "unrelaxed"
FIXED = "fixed"

_PROP_REL = {"le": REL_LE, "lt": REL_LT, "ge": REL_GE, "gt": REL_GT}


def var_x(layer: int, pos: int) -> str:
    """Pre-activation variable of neuron (layer, pos)."""
    return f"x_{layer}_{pos}"


def var_xh(layer: int, pos: int) -> str:
    """Post-activation variable; layer 0 gives the input features."""
    return f"xh_{layer}_{pos}"


def input_vars(net: Network) -> list:
    return [var_xh(0, j) for j in range(1, net.input_dim + 1)]


def witness_input(witness: dict, net: Network) -> np.ndarray:
    return np.array([witness.get(v, 0.0) for v in input_vars(net)])


def literal_constraints(lit: ActivationLiteral) -> list:
    """Linear form of one activation literal (strictness per lp policy)."""
    x = var_x(lit.neuron.layer, lit.neuron.pos)
    xh = var_xh(lit.neuron.layer, lit.neuron.pos)
    key = (lit.neuron.layer, lit.neuron.pos, lit.phase)
    if lit.phase == ACTIVE:
        return [
            LinearConstraint({x: 1.0}, REL_GE, 0.0, tag=("lit", *key, "sign")),
            LinearConstraint({xh: 1.0, x: -1.0}, REL_EQ, 0.0, tag=("lit", *key, "link")),
        ]
    return [
        LinearConstraint({x: 1.0}, REL_LT, 0.0, tag=("lit", *key, "sign")),
        LinearConstraint({xh: 1.0}, REL_EQ, 0.0, tag=("lit", *key, "link")),
    ]


def relax_neuron_constraints(neuron: NeuronId, nb: NeuronBounds) -> list:
    """Triangle over-approximation of ReLU for an unstable neuron.

    post >= 0, post >= pre, post <= u/(u-l) * (pre - l).
    """
    if not (nb.lower < 0.0 < nb.upper):
        raise ContractViolation(
            f"triangle relaxation needs l < 0 < u, got [{nb.lower}, {nb.upper}] for {neuron}"
        )
    x = var_x(neuron.layer, neuron.pos)
    xh = var_xh(neuron.layer, neuron.pos)
    slope = nb.upper / (nb.upper - nb.lower)
    key = (neuron.layer, neuron.pos)
    return [
        LinearConstraint({xh: 1.0}, REL_GE, 0.0, tag=("relax", *key, "nonneg")),
        LinearConstraint({xh: 1.0, x: -1.0}, REL_GE, 0.0, tag=("relax", *key, "above")),
        LinearConstraint(
            {xh: 1.0, x: -slope}, REL_LE, -slope * nb.lower, tag=("relax", *key, "upper")
        ),
    ]


@dataclass(frozen=True)
class UnrelaxDirective:
    """Restore exactness for one neuron by branching on its two phases."""

    neuron: NeuronId
    branches: tuple  # (active literal, inactive literal)


@dataclass
class EncodingMode:
    """Per-neuron view of how ReLU is currently represented."""

    modes: dict = field(default_factory=dict)
    fixed_phase: dict = field(default_factory=dict)

    @classmethod
    def initial(cls, bmap: BoundsMap) -> "EncodingMode":
        mode = cls()
        for nid, nb in bmap.hidden.items():
            if nb.stability == UNSTABLE:
                mode.modes[nid] = RELAXED
            else:
                mode.modes[nid] = FIXED
                mode.fixed_phase[nid] = ACTIVE if nb.stability == STABLE_ACTIVE else INACTIVE
        return mode

    def mark_split(self, neuron: NeuronId, phase: str) -> None:
        if self.modes.get(neuron) == FIXED:
            raise ContractViolation(f"{neuron} is stable and cannot be split")
        self.modes[neuron] = UNRELAXED
        self.fixed_phase[neuron] = phase


def unrelax_constraints(neuron: NeuronId, mode: Optional[EncodingMode] = None):
    """Directive to split one relaxed neuron into its two exact branches.

    The exact restoration is a pair of implications, not a linear
    constraint, so it is realized by case-splitting: each branch asserts
    one activation literal. Returns None when the neuron is already
    split or pinned (no-op).
    """
    if mode is not None:
        current = mode.modes.get(neuron, RELAXED)
        if current in (UNRELAXED, FIXED):
            return None
        mode.modes[neuron] = SPLIT_PENDING
    return UnrelaxDirective(
        neuron,
        (ActivationLiteral(neuron, ACTIVE), ActivationLiteral(neuron, INACTIVE)),
    )


class ProblemEncoding:
    """All constraint machinery for one verification problem.

    check(d, literals) solves the system of the search-tree node whose
    path asserts exactly `literals` under negated-property disjunct d:
    base + triangles for unstable neurons not in the set + the literal
    constraints. The result depends only on the literal *set*, not on
    decision order.
    """

    def __init__(self, problem: VerificationProblem, bmap: Optional[BoundsMap] = None):
        self.problem = problem
        self.bounds = bmap if bmap is not None else interval_propagate(problem.network, problem.input_box)
        self.negated = negate(problem.prop)
        self.num_disjuncts = len(self.negated.clauses)
        self.unstable = tuple(sorted(self.bounds.unstable_neurons()))
        self._triangles = {
            nid: relax_neuron_constraints(nid, self.bounds.hidden[nid]) for nid in self.unstable
        }
        self._shared = self._build_shared()
        self._disjunct_rows = [self._build_disjunct(d) for d in range(self.num_disjuncts)]
        self._base_systems = {}

    # -- construction -------------------------------------------------

    def _build_shared(self) -> list:
        net = self.problem.network
        box = self.problem.input_box
        rows = []
        for j in range(1, net.input_dim + 1):
            v = var_xh(0, j)
            rows.append(LinearConstraint({v: 1.0}, REL_GE, box.lower[j - 1], tag=("input", j, "lo")))
            rows.append(LinearConstraint({v: 1.0}, REL_LE, box.upper[j - 1], tag=("input", j, "hi")))
        num_layers = len(net.layers)
        for k, layer in enumerate(net.layers, start=1):
            w = layer.effective_weights()
            for j in range(1, layer.out_dim + 1):
                coeffs = {var_x(k, j): 1.0}
                for i in range(1, layer.in_dim + 1):
                    coef = w[j - 1, i - 1]
                    if coef != 0.0:
                        coeffs[var_xh(k - 1, i)] = -coef
                rows.append(LinearConstraint(coeffs, REL_EQ, layer.bias[j - 1], tag=("affine", k, j)))
                if k < num_layers:
                    nb = self.bounds.hidden[NeuronId(k, j)]
                    lo, hi = nb.lower, nb.upper
                else:
                    lo, hi = self.bounds.output[j - 1]
                v = var_x(k, j)
                rows.append(LinearConstraint({v: 1.0}, REL_GE, lo, tag=("bound", k, j, "lo")))
                rows.append(LinearConstraint({v: 1.0}, REL_LE, hi, tag=("bound", k, j, "hi")))
        for nid, nb in self.bounds.hidden.items():
            if nb.stability == UNSTABLE:
                continue
            x = var_x(nid.layer, nid.pos)
            xh = var_xh(nid.layer, nid.pos)
            if nb.stability == STABLE_ACTIVE:
                rows.append(
                    LinearConstraint({xh: 1.0, x: -1.0}, REL_EQ, 0.0, tag=("stable", nid.layer, nid.pos))
                )
            else:
                rows.append(LinearConstraint({xh: 1.0}, REL_EQ, 0.0, tag=("stable", nid.layer, nid.pos)))
        return rows

    def _build_disjunct(self, d: int) -> list:
        net = self.problem.network
        L = len(net.layers)
        rows = []
        for idx, ineq in enumerate(self.negated.clauses[d]):
            coeffs = {
                var_x(L, j + 1): c for j, c in enumerate(ineq.coeffs) if c != 0.0
            }
            rows.append(
                LinearConstraint(coeffs, _PROP_REL[ineq.rel], ineq.rhs, tag=("prop", d, idx))
            )
        return rows

    # -- queries -------------------------------------------------------

    def base_constraints(self, disjunct: int = 0) -> list:
        return list(self._shared) + list(self._disjunct_rows[disjunct])

    def variables(self) -> set:
        return {v for c in self._shared for v in c.coeffs}

    def _base_system(self, disjunct: int) -> ConstraintSystem:
        if disjunct not in self._base_systems:
            sys_ = ConstraintSystem()
            sys_.extend(self.base_constraints(disjunct))
            self._base_systems[disjunct] = sys_
        return self._base_systems[disjunct]

    def system_for(self, disjunct: int, literals: Collection[ActivationLiteral]) -> ConstraintSystem:
        """Fresh system for a node: base + triangles off the path + literals."""
        sys_ = ConstraintSystem()
        sys_.extend(self.base_constraints(disjunct))
        self._push_node(sys_, literals)
        return sys_

    def _push_node(self, sys_: ConstraintSystem, literals) -> None:
        pinned = {lit.neuron for lit in literals}
        for nid in self.unstable:
            if nid not in pinned:
                sys_.extend(self._triangles[nid])
        for lit in literals:
            sys_.extend(literal_constraints(lit))

    def check(self, disjunct: int, literals: Collection[ActivationLiteral], counter=None) -> FeasibilityResult:
        """Feasibility of the node defined by a literal set."""
        if counter is not None:
            counter.tick()
        base = self._base_system(disjunct)
        base.push_scope()
        try:
            self._push_node(base, literals)
            return check_feasible(base)
        finally:
            base.pop_scope()

    def checker(self, disjunct: int, counter=None):
        """Bound check function: literals -> FeasibilityResult."""
        return lambda literals: self.check(disjunct, literals, counter)


def encode_base(
    problem: VerificationProblem, bmap: Optional[BoundsMap] = None, disjunct: int = 0
) -> ConstraintSystem:
    """Base system only: box, affine, bounds, stable fixes, one disjunct."""
    enc = ProblemEncoding(problem, bmap)
    sys_ = ConstraintSystem()
    sys_.extend(enc.base_constraints(disjunct))
    return sys_


def compressed_problem(problem: VerificationProblem, f_prime: Network) -> VerificationProblem:
    if diff_classify(problem.network, f_prime) == INCOMPATIBLE:
        raise IncompatibleNetworks("networks do not correspond neuron-by-neuron")
    return VerificationProblem(f_prime, problem.input_box, problem.prop)


def encode_for_compressed(
    problem: VerificationProblem, f_prime: Network, disjunct: int = 0
) -> ConstraintSystem:
    """Base system for a compressed variant, same variable names, fresh bounds."""
    return encode_base(compressed_problem(problem, f_prime), disjunct=disjunct)

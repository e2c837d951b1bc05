"""Incremental verification of ReLU networks under compression.

Proves input-output properties by case-split search over activation
phases with an LP theory solver, extracts minimal unsat cores as a
reusable proof, and replays that proof to accelerate verification of
quantized or pruned variants of the same network.
"""

from .bounds import BoundsMap, NeuronBounds, interval_propagate, refresh_under_assumptions
from .encoder import (
    ProblemEncoding,
    encode_base,
    encode_for_compressed,
    literal_constraints,
    relax_neuron_constraints,
    unrelax_constraints,
)
from .errors import (
    FingerprintMismatch,
    IncompatibleNetworks,
    InconsistentAssumption,
    InputError,
    ProofFormatError,
    ProofVersionError,
    SolverFailure,
    VerifierError,
)
from .incremental import ReuseReport, reverify, reverify_from_proof
from .lp import ConstraintSystem, FeasibilityResult, LinearConstraint, check_feasible
from .muc import Core, check_core, extract_core, minimize
from .network import (
    ActivationLiteral,
    CompressionSpec,
    Layer,
    Network,
    NeuronId,
    diff_classify,
    forward_eval,
    load_network,
    prune,
    quantize,
    save_network,
)
from .proof import (
    ProofArtifact,
    SatCore,
    deserialize,
    load_proof,
    proof_validity,
    save_proof,
    serialize,
    speedup,
)
from .props import (
    InputBox,
    LinearIneq,
    OutputProperty,
    VerificationProblem,
    eval_property,
    load_property,
    negate,
)
from .search import Budget, score_neuron, select_branch_neuron, solve

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"

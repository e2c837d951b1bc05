"""Exception hierarchy shared across the package."""


class VerifierError(Exception):
    """Base class for all errors raised by this package."""


class InputError(VerifierError):
    """Malformed input: bad shapes, non-finite values, unparsable files."""


class InconsistentAssumption(VerifierError):
    """Both phases of one neuron were assumed at the same time."""


class ContractViolation(VerifierError):
    """An operation was called outside its stated precondition."""


class SolverFailure(VerifierError):
    """The LP solver could not produce a trustworthy answer.

    Callers must treat this as *unknown*, never as infeasibility.
    """


class ProofFormatError(VerifierError):
    """Proof file is not parsable as the expected document."""


class ProofVersionError(ProofFormatError):
    """Proof file declares an unsupported format version."""


class FingerprintMismatch(VerifierError):
    """Stored proof does not belong to the problem being re-verified."""


class IncompatibleNetworks(VerifierError):
    """The compressed network cannot be matched neuron-by-neuron."""

"""Input boxes, output properties, and verification problems.

An output property Q is a disjunction of clauses, each clause a
conjunction of linear inequalities over the output vector. The solver
works on the negation of Q, also in disjunction-of-conjunctions form;
each disjunct of the negation is explored as a separate branch.
"""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError
from .network import Network

REL_LE = "le"
REL_LT = "lt"
REL_GE = "ge"
REL_GT = "gt"
_RELATIONS = (REL_LE, REL_LT, REL_GE, REL_GT)
_NEGATED = {REL_LE: REL_GT, REL_GT: REL_LE, REL_LT: REL_GE, REL_GE: REL_LT}


@dataclass(frozen=True)
class LinearIneq:
    """coeffs . y  <rel>  rhs, over the output vector y."""

    coeffs: tuple
    rel: str
    rhs: float

    def __post_init__(self):
        if self.rel not in _RELATIONS:
            raise InputError(f"unknown relation {self.rel!r}")
        coeffs = tuple(float(c) for c in self.coeffs)
        if not all(np.isfinite(c) for c in coeffs) or not np.isfinite(self.rhs):
            raise InputError("inequality coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "rhs", float(self.rhs))

    def holds(self, y: Sequence[float]) -> bool:
        lhs = float(np.dot(self.coeffs, y))
        if self.rel == REL_LE:
            return lhs <= self.rhs
        if self.rel == REL_LT:
            return lhs < self.rhs
        if self.rel == REL_GE:
            return lhs >= self.rhs
        return lhs > self.rhs

    def negated(self) -> "LinearIneq":
        return LinearIneq(self.coeffs, _NEGATED[self.rel], self.rhs)


@dataclass(frozen=True)
class OutputProperty:
    """Disjunction of conjunctive clauses of linear inequalities."""

    clauses: tuple  # tuple of tuples of LinearIneq

    def __post_init__(self):
        clauses = tuple(tuple(c) for c in self.clauses)
        if not clauses or any(not c for c in clauses):
            raise InputError("property needs at least one non-empty clause")
        dims = {len(i.coeffs) for c in clauses for i in c}
        if len(dims) != 1:
            raise InputError("all inequalities must range over the same output dimension")
        object.__setattr__(self, "clauses", clauses)

    @property
    def dim(self) -> int:
        return len(self.clauses[0][0].coeffs)


def negate(q: OutputProperty) -> OutputProperty:
    """Negation in disjunction-of-conjunctions form (De Morgan + distribution)."""
    selections = itertools.product(*[[ineq.negated() for ineq in clause] for clause in q.clauses])
    clauses = tuple(tuple(sel) for sel in selections)
    if len(clauses) > 100_000:
        raise InputError("negated property is too large to expand")
    return OutputProperty(clauses)


def eval_property(q: OutputProperty, y: Sequence[float]) -> bool:
    """True iff some clause has every inequality satisfied by y (strict exact)."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != q.dim:
        raise InputError(f"output has length {y.shape[0]}, property expects {q.dim}")
    return any(all(ineq.holds(y) for ineq in clause) for clause in q.clauses)


@dataclass(frozen=True, eq=False)
class InputBox:
    """Axis-aligned input region: lower <= x <= upper componentwise."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise InputError("lower and upper bounds must have the same length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InputError("box bounds must be finite")
        if np.any(lo > hi):
            raise InputError("box has lower > upper in some dimension")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, x: Sequence[float], tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def clamp(self, x: Sequence[float]) -> np.ndarray:
        return np.minimum(np.maximum(np.asarray(x, dtype=float), self.lower), self.upper)

    def __eq__(self, other):
        if not isinstance(other, InputBox):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def _digest(obj) -> str:
    return hashlib.sha256(_canonical(obj)).hexdigest()[:16]


def _r(value) -> str:
    return repr(float(value))


def _property_payload(box: InputBox, prop: OutputProperty):
    return {
        "lower": [_r(v) for v in box.lower],
        "upper": [_r(v) for v in box.upper],
        "clauses": [
            [[list(map(_r, i.coeffs)), i.rel, _r(i.rhs)] for i in clause] for clause in prop.clauses
        ],
    }


def fingerprint_of(net: Network, box: InputBox, prop: OutputProperty) -> str:
    """Content hash with three parts: architecture, box+property, full parameters.

    Compression preserves the first two parts, so a stored proof can be
    matched to a compressed variant without the original weights.
    """
    arch = _digest({"input_dim": net.input_dim, "sizes": [l.out_dim for l in net.layers]})
    spec = _digest(_property_payload(box, prop))
    full = _digest(
        {
            "weights": [[list(map(_r, row)) for row in l.weights] for l in net.layers],
            "bias": [list(map(_r, l.bias)) for l in net.layers],
            "mask": [[list(map(int, row)) for row in l.prune_mask] for l in net.layers],
        }
    )
    return f"{arch}.{spec}.{full}"


def fingerprint_parts(fp: str):
    parts = fp.split(".")
    if len(parts) != 3:
        raise InputError(f"malformed fingerprint {fp!r}")
    return tuple(parts)


@dataclass(frozen=True, eq=False)
class VerificationProblem:
    """A network together with its input box P and output property Q."""

    network: Network
    input_box: InputBox
    prop: OutputProperty
    fingerprint: str = None

    def __post_init__(self):
        if self.input_box.dim != self.network.input_dim:
            raise InputError(
                f"box dimension {self.input_box.dim} != network input dim {self.network.input_dim}"
            )
        if self.prop.dim != self.network.output_dim:
            raise InputError(
                f"property dimension {self.prop.dim} != network output dim {self.network.output_dim}"
            )
        object.__setattr__(
            self, "fingerprint", fingerprint_of(self.network, self.input_box, self.prop)
        )

    def __eq__(self, other):
        if not isinstance(other, VerificationProblem):
            return NotImplemented
        return self.fingerprint == other.fingerprint


# ---------------------------------------------------------------------------
# file format


def property_to_dict(box: InputBox, prop: OutputProperty) -> dict:
    return {
        "input_lower": [float(v) for v in box.lower],
        "input_upper": [float(v) for v in box.upper],
        "output_property": [
            [{"coeffs": list(i.coeffs), "rel": i.rel, "rhs": i.rhs} for i in clause]
            for clause in prop.clauses
        ],
    }


def property_from_dict(data: dict, source: str = "<property>"):
    if not isinstance(data, dict):
        raise InputError(f"{source}: expected a top-level object")
    for key in ("input_lower", "input_upper", "output_property"):
        if key not in data:
            raise InputError(f"{source}: missing field {key!r}")
    try:
        box = InputBox(np.array(data["input_lower"], dtype=float), np.array(data["input_upper"], dtype=float))
    except (TypeError, ValueError, InputError) as exc:
        raise InputError(f"{source}: bad input bounds ({exc})") from exc
    clauses = []
    raw = data["output_property"]
    if not isinstance(raw, list) or not raw:
        raise InputError(f"{source}: 'output_property' must be a non-empty array of clauses")
    for ci, rclause in enumerate(raw):
        if not isinstance(rclause, list) or not rclause:
            raise InputError(f"{source}: output_property[{ci}] must be a non-empty array")
        clause = []
        for ii, rineq in enumerate(rclause):
            where = f"{source}: output_property[{ci}][{ii}]"
            if not isinstance(rineq, dict):
                raise InputError(f"{where}: expected an object")
            try:
                clause.append(LinearIneq(tuple(rineq["coeffs"]), rineq["rel"], float(rineq["rhs"])))
            except (KeyError, TypeError, ValueError, InputError) as exc:
                raise InputError(f"{where}: {exc}") from exc
        clauses.append(tuple(clause))
    return box, OutputProperty(tuple(clauses))


def load_property(path: str):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return property_from_dict(data, source=path)


def save_property(box: InputBox, prop: OutputProperty, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(property_to_dict(box, prop), fh, indent=1, sort_keys=True)
        fh.write("\n")

"""Persistent proof artifacts: cores, SAT core, unchecked paths, metrics.

The artifact is a versioned JSON document with fixed field names so
proofs can be exchanged across implementations. Serialization is
canonical (sorted keys, fixed separators), so re-serializing a
deserialized artifact reproduces the bytes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .errors import ContractViolation, InputError, ProofFormatError, ProofVersionError
from .muc import Core, check_core, dedupe_cores
from .network import ACTIVE, INACTIVE, ActivationLiteral, NeuronId

FORMAT_VERSION = 1

SAT = "SAT"
UNSAT = "UNSAT"
UNK = "UNK"
_VERDICTS = (SAT, UNSAT, UNK)


@dataclass(frozen=True)
class ProofStats:
    lp_calls: int
    wall_time: float


@dataclass(frozen=True)
class SatCore:
    """A counterexample together with the path on which it was found."""

    witness: tuple
    path: tuple

    def __post_init__(self):
        object.__setattr__(self, "witness", tuple(float(v) for v in self.witness))
        object.__setattr__(self, "path", tuple(self.path))


@dataclass(frozen=True)
class ProofArtifact:
    verdict: str
    mucs: tuple
    sat_core: Optional[SatCore]
    unchecked: tuple
    problem_fingerprint: str
    stats: ProofStats

    def __post_init__(self):
        if self.verdict not in _VERDICTS:
            raise InputError(f"unknown verdict {self.verdict!r}")
        object.__setattr__(self, "mucs", tuple(self.mucs))
        object.__setattr__(self, "unchecked", tuple(tuple(p) for p in self.unchecked))
        if self.verdict == SAT and self.sat_core is None:
            raise InputError("SAT artifact requires a sat_core")
        if self.verdict == UNSAT and self.unchecked:
            raise InputError("UNSAT artifact must have no unchecked paths")
        if self.verdict == UNK and not self.unchecked:
            raise InputError("UNK artifact must record unchecked paths")
        lits = [c.literals for c in self.mucs]
        for i, a in enumerate(lits):
            for j, b in enumerate(lits):
                if i != j and a < b:
                    raise InputError("mucs must be pairwise non-superset")


def make_artifact(verdict, mucs, sat_core, unchecked, fingerprint, stats) -> ProofArtifact:
    """Assemble an artifact, deduplicating superset cores first."""
    return ProofArtifact(
        verdict=verdict,
        mucs=dedupe_cores(mucs),
        sat_core=sat_core,
        unchecked=tuple(unchecked),
        problem_fingerprint=fingerprint,
        stats=stats,
    )


# ---------------------------------------------------------------------------
# serialization


def _literal_to_dict(lit: ActivationLiteral) -> dict:
    return {"layer": lit.neuron.layer, "pos": lit.neuron.pos, "phase": lit.phase}


def _literal_from_dict(data, where: str) -> ActivationLiteral:
    if not isinstance(data, dict) or set(data) != {"layer", "pos", "phase"}:
        raise ProofFormatError(f"{where}: literal must have exactly layer/pos/phase")
    if data["phase"] not in (ACTIVE, INACTIVE):
        raise ProofFormatError(f"{where}: unknown phase {data['phase']!r}")
    try:
        return ActivationLiteral(NeuronId(int(data["layer"]), int(data["pos"])), data["phase"])
    except (TypeError, ValueError, InputError) as exc:
        raise ProofFormatError(f"{where}: {exc}") from exc


def serialize(p: ProofArtifact) -> bytes:
    doc = {
        "version": FORMAT_VERSION,
        "verdict": p.verdict,
        "fingerprint": p.problem_fingerprint,
        "mucs": [[_literal_to_dict(l) for l in core.sorted_literals()] for core in p.mucs],
        "sat_core": (
            None
            if p.sat_core is None
            else {
                "witness": list(p.sat_core.witness),
                "path": [_literal_to_dict(l) for l in p.sat_core.path],
            }
        ),
        "unchecked": [[_literal_to_dict(l) for l in path] for path in p.unchecked],
        "stats": {"lp_calls": p.stats.lp_calls, "wall_time": p.stats.wall_time},
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


_TOP_KEYS = {"version", "verdict", "fingerprint", "mucs", "sat_core", "unchecked", "stats"}


def deserialize(data: bytes) -> ProofArtifact:
    try:
        doc = json.loads(data.decode() if isinstance(data, (bytes, bytearray)) else data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ProofFormatError(f"not a proof document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProofFormatError("proof document must be an object")
    if doc.get("version") != FORMAT_VERSION:
        raise ProofVersionError(f"unsupported proof version {doc.get('version')!r}")
    if set(doc) != _TOP_KEYS:
        extra = set(doc) ^ _TOP_KEYS
        raise ProofFormatError(f"unexpected or missing fields: {sorted(extra)}")
    if doc["verdict"] not in _VERDICTS:
        raise ProofFormatError(f"unknown verdict {doc['verdict']!r}")

    mucs = []
    for i, raw in enumerate(doc["mucs"]):
        lits = [_literal_from_dict(x, f"mucs[{i}]") for x in raw]
        mucs.append(Core(frozenset(lits), minimal=True))
    sat_core = None
    if doc["sat_core"] is not None:
        raw = doc["sat_core"]
        if not isinstance(raw, dict) or set(raw) != {"witness", "path"}:
            raise ProofFormatError("sat_core must have exactly witness/path")
        sat_core = SatCore(
            tuple(float(v) for v in raw["witness"]),
            tuple(_literal_from_dict(x, "sat_core.path") for x in raw["path"]),
        )
    unchecked = tuple(
        tuple(_literal_from_dict(x, f"unchecked[{i}]") for x in raw)
        for i, raw in enumerate(doc["unchecked"])
    )
    stats_raw = doc["stats"]
    if not isinstance(stats_raw, dict) or set(stats_raw) != {"lp_calls", "wall_time"}:
        raise ProofFormatError("stats must have exactly lp_calls/wall_time")
    try:
        return ProofArtifact(
            verdict=doc["verdict"],
            mucs=tuple(mucs),
            sat_core=sat_core,
            unchecked=unchecked,
            problem_fingerprint=str(doc["fingerprint"]),
            stats=ProofStats(int(stats_raw["lp_calls"]), float(stats_raw["wall_time"])),
        )
    except InputError as exc:
        raise ProofFormatError(str(exc)) from exc


def load_proof(path: str) -> ProofArtifact:
    try:
        with open(path, "rb") as fh:
            return deserialize(fh.read())
    except OSError as exc:
        raise ProofFormatError(f"{path}: cannot read ({exc})") from exc


def save_proof(p: ProofArtifact, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(p))
        fh.write(b"\n")


# ---------------------------------------------------------------------------
# metrics


def proof_validity(p: ProofArtifact, enc_prime, counter=None):
    """Fraction of stored cores that still re-check infeasible on f'.

    A core survives when it is infeasible for at least one disjunct of
    the negated property (the disjunct that produced it is not recorded
    in the artifact, so any-disjunct survival is the faithful reading;
    with a single disjunct the two coincide). Returns None when the
    artifact holds no cores: the ratio is undefined, never 0 or 1.
    """
    if not p.mucs:
        return None
    survived = 0
    for core in p.mucs:
        for d in range(enc_prime.num_disjuncts):
            if check_core(core, enc_prime.checker(d, counter)).still_unsat:
                survived += 1
                break
    return survived / len(p.mucs)


def speedup(t_scratch: float, t_incremental: float) -> float:
    """Ratio of from-scratch time to incremental time."""
    if not (t_scratch > 0 and t_incremental > 0):
        raise ContractViolation("speedup requires positive durations")
    return t_scratch / t_incremental

"""Benchmark harness: seeded instance generation, scratch vs incremental runs.

Each generated network is compressed two ways (quantization and
magnitude pruning); every variant is verified from scratch and again
incrementally from the original proof. Records go to a CSV with a fixed
schema, aggregates (validity histograms, mean speedup, resolved-unknown
fraction) to a summary table. With timing disabled the output is
byte-deterministic under a fixed seed; wall-clock columns are left
empty in that mode because measured time can never be reproducible.
"""
from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .network import CompressionSpec, Layer, Network, prune, quantize, save_network
from .proof import UNK, UNSAT, save_proof
from .props import InputBox, LinearIneq, OutputProperty, VerificationProblem, save_property
from .incremental import reverify
from .search import Budget, solve

QUANT_STEP = 0.1
PRUNE_RATIO = 0.2

CSV_HEADER = ["instance", "mode", "verdict", "wall_ms", "lp_calls", "validity", "speedup"]

# histogram boundaries for the validity distribution, in percent
QUANT_BUCKETS = (("0-95", 0.0, 95.0), ("95-100", 95.0, 100.0), ("100", 100.0, 100.0))
PRUNE_BUCKETS = (
    ("0-20", 0.0, 20.0),
    ("20-40", 20.0, 40.0),
    ("40-60", 40.0, 60.0),
    ("60-80", 60.0, 80.0),
    ("80-100", 80.0, 100.0),
)


@dataclass(frozen=True)
class RunRecord:
    instance: str
    mode: str  # "scratch" or "incremental"
    verdict: str
    wall_ms: Optional[float]
    lp_calls: int
    validity: Optional[float]
    speedup: Optional[float]


def random_network(rng: np.random.Generator, sizes=None) -> Network:
    """Random fully connected ReLU net; sizes drawn per the bench protocol."""
    if sizes is None:
        n_in = int(rng.integers(2, 17))
        n_hidden_layers = int(rng.integers(1, 4))
        hidden = [int(rng.integers(3, 13)) for _ in range(n_hidden_layers)]
        n_out = int(rng.integers(2, 6))
        sizes = [n_in] + hidden + [n_out]
    layers = []
    for prev, cur in zip(sizes, sizes[1:]):
        w = rng.normal(0.0, 1.0, size=(cur, prev)) * (1.5 / np.sqrt(prev))
        b = rng.normal(0.0, 0.3, size=cur)
        layers.append(Layer(np.round(w, 4), np.round(b, 4)))
    return Network(tuple(layers))


def random_box(rng: np.random.Generator, dim: int) -> InputBox:
    center = rng.uniform(-1.0, 1.0, size=dim)
    half = rng.uniform(0.1, 0.8, size=dim)
    return InputBox(np.round(center - half, 4), np.round(center + half, 4))


def random_property(rng: np.random.Generator, net: Network, box: InputBox) -> OutputProperty:
    """Sample a property around the observed output range.

    Thresholds sit strictly inside or strictly outside the sampled range
    so that knife-edge instances are unlikely; roughly half the draws
    aim at unsatisfiable negations.
    """
    from .network import forward_eval

    samples = np.array(
        [
            forward_eval(net, rng.uniform(box.lower, box.upper))
            for _ in range(60)
        ]
    )
    n_out = net.output_dim
    o = int(rng.integers(0, n_out))
    lo, hi = samples[:, o].min(), samples[:, o].max()
    span = max(hi - lo, 0.5)
    aim_unsat = rng.random() < 0.55
    unit = [0.0] * n_out
    unit[o] = 1.0

    if aim_unsat:
        # Q: output o stays below a level it never comes close to
        t = round(hi + rng.uniform(0.3, 1.0) * span, 3)
        ineq = LinearIneq(tuple(unit), "le", t)
    else:
        # Q: output o stays below a level it clearly crosses
        t = round(lo + rng.uniform(0.2, 0.6) * (hi - lo + 1e-3), 3)
        ineq = LinearIneq(tuple(unit), "le", t)

    form = rng.random()
    if form < 0.6 or n_out < 2:
        return OutputProperty(((ineq,),))
    p = int(rng.integers(0, n_out - 1))
    p = p if p < o else p + 1
    lo2, hi2 = samples[:, p].min(), samples[:, p].max()
    unit2 = [0.0] * n_out
    unit2[p] = 1.0
    t2 = round(hi2 + rng.uniform(0.3, 1.0) * max(hi2 - lo2, 0.5), 3) if aim_unsat else round(
        (lo2 + hi2) / 2.0, 3
    )
    other = LinearIneq(tuple(unit2), "le", t2)
    if form < 0.8:
        # one clause, two inequalities: the negation has two disjuncts
        return OutputProperty(((ineq, other),))
    # two one-inequality clauses: the negation is a single conjunction
    return OutputProperty(((ineq,), (other,)))


def generate_instance(rng: np.random.Generator, sizes=None) -> VerificationProblem:
    net = random_network(rng, sizes)
    box = random_box(rng, net.input_dim)
    prop = random_property(rng, net, box)
    return VerificationProblem(net, box, prop)


def prune_by_magnitude(net: Network, ratio: float) -> Network:
    """Mask the `ratio` fraction of edges with smallest |weight| globally.

    Ties break by (layer, row, col) ascending. Already-masked edges rank
    first (effective weight zero).
    """
    from .errors import InputError

    if not (0.0 <= ratio < 1.0):
        raise InputError("prune ratio must be in [0, 1)")
    edges = []
    for k, layer in enumerate(net.layers):
        eff = layer.effective_weights()
        for r in range(layer.out_dim):
            for c in range(layer.in_dim):
                edges.append((abs(eff[r, c]), k, r, c))
    edges.sort()
    count = int(ratio * len(edges) + 1e-9)
    masks = [np.zeros_like(layer.prune_mask) for layer in net.layers]
    for _, k, r, c in edges[:count]:
        masks[k][r, c] = 1
    return prune(net, CompressionSpec(kind="prune", prune_mask_per_layer=tuple(masks)))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def _bucket_table(values, buckets):
    rows = []
    for name, lo, hi in buckets:
        if lo == hi:
            n = sum(1 for v in values if abs(v * 100.0 - lo) < 1e-9)
        else:
            n = sum(1 for v in values if lo <= v * 100.0 < hi and abs(v * 100.0 - hi) >= 1e-9)
        frac = n / len(values) if values else 0.0
        rows.append((name, n, frac))
    return rows


def run_bench(
    suite_size: int,
    seed: int,
    out_dir: str,
    budget: Optional[Budget] = None,
    timing: bool = True,
) -> dict:
    """Generate, verify, compress, re-verify; write records and summary."""
    from .errors import InputError, VerifierError

    if suite_size < 1:
        raise InputError("suite size must be >= 1")
    budget = budget or Budget()
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)

    records = []
    validity_by_kind = {"quant": [], "prune": []}
    speedups = []
    unk_total = 0
    unk_resolved = 0
    lp_wins = 0
    unsat_pairs = 0

    for i in range(suite_size):
        problem = generate_instance(rng)
        inst_dir = os.path.join(out_dir, "instances", f"i{i:03d}")
        os.makedirs(inst_dir, exist_ok=True)
        save_network(problem.network, os.path.join(inst_dir, "net.json"))
        save_property(problem.input_box, problem.prop, os.path.join(inst_dir, "prop.json"))

        _, proof = solve(problem, budget)
        save_proof(proof, os.path.join(inst_dir, "proof.json"))

        variants = {
            "quant": quantize(problem.network, QUANT_STEP),
            "prune": prune_by_magnitude(problem.network, PRUNE_RATIO),
        }
        for kind, f_prime in variants.items():
            name = f"i{i:03d}-{kind}"
            save_network(f_prime, os.path.join(inst_dir, f"net_{kind}.json"))
            problem_prime = VerificationProblem(f_prime, problem.input_box, problem.prop)

            t0 = time.perf_counter()
            scratch_verdict, scratch_proof = solve(problem_prime, budget)
            scratch_wall = (time.perf_counter() - t0) * 1000.0 if timing else None

            t0 = time.perf_counter()
            inc_verdict, inc_proof, report = reverify(f_prime, problem, proof, budget)
            inc_wall = (time.perf_counter() - t0) * 1000.0 if timing else None
            inc_lp = inc_proof.stats.lp_calls

            if (
                scratch_verdict != inc_verdict
                and scratch_verdict != UNK
                and inc_verdict != UNK
            ):
                raise VerifierError(
                    f"{name}: scratch verdict {scratch_verdict} != incremental {inc_verdict}"
                )

            sp = None
            if timing and scratch_wall and inc_wall and scratch_wall > 0 and inc_wall > 0:
                sp = scratch_wall / inc_wall
            records.append(
                RunRecord(name, "scratch", scratch_verdict, scratch_wall, scratch_proof.stats.lp_calls, None, None)
            )
            records.append(
                RunRecord(name, "incremental", inc_verdict, inc_wall, inc_lp, report.validity, sp)
            )

            if report.validity is not None:
                validity_by_kind[kind].append(report.validity)
            both_timeout = scratch_verdict == UNK and inc_verdict == UNK
            if sp is not None and not both_timeout:
                speedups.append(sp)
            if scratch_verdict == UNK:
                unk_total += 1
                if inc_verdict != UNK:
                    unk_resolved += 1
            if scratch_verdict == UNSAT and inc_verdict == UNSAT:
                unsat_pairs += 1
                if inc_lp <= scratch_proof.stats.lp_calls:
                    lp_wins += 1

    _write_csv(os.path.join(out_dir, "records.csv"), records)
    summary = {
        "suite_size": suite_size,
        "seed": seed,
        "validity_hist_quant": _bucket_table(validity_by_kind["quant"], QUANT_BUCKETS),
        "validity_hist_prune": _bucket_table(validity_by_kind["prune"], PRUNE_BUCKETS),
        "mean_speedup": (sum(speedups) / len(speedups)) if speedups else None,
        "unk_resolved_fraction": (unk_resolved / unk_total) if unk_total else None,
        "lp_calls_not_worse_fraction": (lp_wins / unsat_pairs) if unsat_pairs else None,
        "unsat_pairs": unsat_pairs,
    }
    _write_summary(os.path.join(out_dir, "summary.csv"), summary)
    return summary


def _write_csv(path: str, records) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(
                [r.instance, r.mode, r.verdict, _fmt(r.wall_ms), r.lp_calls, _fmt(r.validity), _fmt(r.speedup)]
            )


def _write_summary(path: str, summary: dict) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["section", "key", "value", "fraction"])
        for kind in ("quant", "prune"):
            for name, n, frac in summary[f"validity_hist_{kind}"]:
                writer.writerow([f"validity_{kind}", name, n, _fmt(frac)])
        writer.writerow(["aggregate", "mean_speedup", _fmt(summary["mean_speedup"]), ""])
        writer.writerow(["aggregate", "unk_resolved_fraction", _fmt(summary["unk_resolved_fraction"]), ""])
        writer.writerow(
            ["aggregate", "lp_calls_not_worse_fraction", _fmt(summary["lp_calls_not_worse_fraction"]), ""]
        )
        writer.writerow(["aggregate", "unsat_pairs", summary["unsat_pairs"], ""])

"""Command-line surface.

Exit codes: 0 = UNSAT (property holds), 1 = SAT (counterexample found),
2 = unknown within budget, 3 = unparsable input, 4 = proof does not
match the problem, 5 = other errors.
"""
from __future__ import annotations

import argparse
import os
import sys

from .bench import run_bench
from .errors import (
    FingerprintMismatch,
    IncompatibleNetworks,
    InputError,
    ProofFormatError,
    VerifierError,
)
from .incremental import reverify_from_proof
from .network import load_network, quantize, save_network
from .proof import SAT, UNK, UNSAT, load_proof, save_proof, speedup
from .props import VerificationProblem, load_property
from .search import Budget, solve

EXIT_UNSAT = 0
EXIT_SAT = 1
EXIT_UNK = 2
EXIT_PARSE = 3
EXIT_FINGERPRINT = 4
EXIT_ERROR = 5

_VERDICT_EXIT = {UNSAT: EXIT_UNSAT, SAT: EXIT_SAT, UNK: EXIT_UNK}

ENV_BUDGET_MS = "MUCG4_BUDGET_MS"


def _default_budget_ms() -> float:
    raw = os.environ.get(ENV_BUDGET_MS)
    if raw:
        try:
            return float(raw)
        except ValueError:
            raise InputError(f"{ENV_BUDGET_MS} must be a number, got {raw!r}")
    return 60_000.0


def _budget(args) -> Budget:
    ms = args.budget_ms if args.budget_ms is not None else _default_budget_ms()
    return Budget(wall_clock_limit=ms / 1000.0, max_lp_calls=args.budget_lp_calls)


def _add_budget_flags(p) -> None:
    p.add_argument("--budget-ms", type=float, default=None, help="wall-clock budget in milliseconds")
    p.add_argument("--budget-lp-calls", type=int, default=100_000, help="LP call budget")


def _print_verdict(verdict, artifact) -> None:
    print(f"verdict: {verdict}")
    if verdict == SAT and artifact.sat_core is not None:
        print("counterexample:", " ".join(format(v, ".9g") for v in artifact.sat_core.witness))
    print(f"lp_calls: {artifact.stats.lp_calls}")
    print(f"wall_time_s: {artifact.stats.wall_time:.4f}")
    print(f"cores: {len(artifact.mucs)}  unchecked: {len(artifact.unchecked)}")


def cmd_verify(args) -> int:
    net = load_network(args.network)
    box, prop = load_property(args.property)
    problem = VerificationProblem(net, box, prop)
    verdict, artifact = solve(problem, _budget(args))
    _print_verdict(verdict, artifact)
    if args.proof_out:
        save_proof(artifact, args.proof_out)
        print(f"proof written to {args.proof_out}")
    return _VERDICT_EXIT[verdict]


def cmd_compress(args) -> int:
    if (args.quantize_step is None) == (args.prune_ratio is None):
        raise InputError("give exactly one of --quantize-step or --prune-ratio")
    net = load_network(args.network)
    if args.quantize_step is not None:
        out = quantize(net, args.quantize_step)
    else:
        from .bench import prune_by_magnitude

        out = prune_by_magnitude(net, args.prune_ratio)
    save_network(out, args.output)
    print(f"compressed network written to {args.output}")
    return 0


def cmd_reverify(args) -> int:
    net = load_network(args.network)
    box, prop = load_property(args.property)
    proof = load_proof(args.proof)
    problem = VerificationProblem(net, box, prop)
    verdict, artifact, report = reverify_from_proof(problem, proof, _budget(args))
    _print_verdict(verdict, artifact)
    validity = "N/A" if report.validity is None else format(report.validity, ".4f")
    print(
        f"cores reused: {report.cores_reused}  failed: {report.cores_failed}  "
        f"reopened branches: {report.branches_reopened}  validity: {validity}"
    )
    if proof.stats.wall_time > 0 and report.time > 0:
        print(f"speedup vs stored run: {speedup(proof.stats.wall_time, report.time):.2f}x")
    if args.proof_out:
        save_proof(artifact, args.proof_out)
        print(f"proof written to {args.proof_out}")
    return _VERDICT_EXIT[verdict]


def cmd_bench(args) -> int:
    budget = Budget(
        wall_clock_limit=(args.budget_ms if args.budget_ms is not None else _default_budget_ms()) / 1000.0,
        max_lp_calls=args.budget_lp_calls,
    )
    summary = run_bench(
        suite_size=args.suite_size,
        seed=args.seed,
        out_dir=args.out,
        budget=budget,
        timing=not args.no_timing,
    )
    print(f"records written to {os.path.join(args.out, 'records.csv')}")
    print(f"summary written to {os.path.join(args.out, 'summary.csv')}")
    for kind in ("quant", "prune"):
        print(f"validity histogram ({kind}):")
        for name, n, frac in summary[f"validity_hist_{kind}"]:
            print(f"  {name:>7}%: {n:4d}  ({frac:.1%})")
    if summary["mean_speedup"] is not None:
        print(f"mean speedup: {summary['mean_speedup']:.2f}x")
    if summary["unk_resolved_fraction"] is not None:
        print(f"resolved-unknown fraction: {summary['unk_resolved_fraction']:.1%}")
    if summary["lp_calls_not_worse_fraction"] is not None:
        print(
            f"incremental lp-calls <= scratch on {summary['lp_calls_not_worse_fraction']:.1%} "
            f"of {summary['unsat_pairs']} UNSAT instances"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reluproof", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="verify a network against a property")
    p.add_argument("network")
    p.add_argument("property")
    _add_budget_flags(p)
    p.add_argument("--proof-out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compress", help="quantize or prune a network file")
    p.add_argument("network")
    p.add_argument("output")
    p.add_argument("--quantize-step", type=float, default=None)
    p.add_argument("--prune-ratio", type=float, default=None)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("reverify", help="verify a compressed network using a stored proof")
    p.add_argument("network")
    p.add_argument("property")
    p.add_argument("proof")
    _add_budget_flags(p)
    p.add_argument("--proof-out", default=None)
    p.set_defaults(func=cmd_reverify)

    p = sub.add_parser("bench", help="run the seeded benchmark suite")
    p.add_argument("--suite-size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_budget_flags(p)
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock columns for reproducible output")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ProofFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (FingerprintMismatch, IncompatibleNetworks) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FINGERPRINT
    except VerifierError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

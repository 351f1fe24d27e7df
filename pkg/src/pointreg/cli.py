"""Command-line entry point: ``pointreg {align,register,score,synth}``.

Exit codes: 0 on success (a registration that did not converge still
exits 0, with a warning), 1 for I/O, parse and configuration errors,
2 for ill-posed inputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .align import solve
from .errors import IllPosed, PointRegError
from .registration import RegistrationConfig, register, residuals, similarity_score
from .stats import normalize_weights
from .symmat import RANK_TOL
from .synth import DEFAULT_KERNEL_SIGMA, SynthSpec, generate, proximity_weights

log = logging.getLogger("pointreg")


class _Timer:
    def __init__(self):
        self.stages = {}
        self._t0 = time.perf_counter()

    def mark(self, stage: str):
        now = time.perf_counter()
        self.stages[stage] = (now - self._t0) * 1e3
        self._t0 = now


def _add_input_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("source", help="point set U (the set being moved)")
    p.add_argument("target", help="point set V (the template)")
    p.add_argument("--mode", choices=["rigid", "similarity"], default="rigid")
    p.add_argument("--allow-reflection", action="store_true", help="keep det(L) = -1 solutions")
    p.add_argument("--weights", metavar="PATH", help="dense or sparse weight file")
    p.add_argument("--weights-init", choices=["proximity"], default="proximity",
                   help="initial weights when --weights is not given")
    p.add_argument("--sigma", type=float, default=DEFAULT_KERNEL_SIGMA, help="proximity kernel width")
    p.add_argument("--rank-tol", type=float, default=RANK_TOL)
    p.add_argument("--out", metavar="PATH", help="write the JSON report here instead of stdout")


def _add_loop_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", type=float, help="initial residual threshold T")
    p.add_argument("--epsilon", type=float, help="threshold decrement")
    p.add_argument("--max-iters", type=int, help="iteration cap")
    p.add_argument("--trace-out", metavar="PATH", help="CSV of the per-iteration trace")
    p.add_argument("--pairs-out", metavar="PATH", help="CSV of final pairs with residuals and coordinates")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pointreg", description="Weighted registration of unlabeled point sets.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("align", help="one closed-form alignment on the given weights")
    _add_input_args(p)

    p = sub.add_parser("register", help="iterative prune-and-realign registration")
    _add_input_args(p)
    _add_loop_args(p)

    p = sub.add_parser("score", help="register and print the similarity score")
    _add_input_args(p)
    _add_loop_args(p)

    p = sub.add_parser("synth", help="write a synthetic instance with ground truth")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--points", type=int, default=10)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--outliers", type=int, default=0)
    p.add_argument("--spurious", type=int, default=0, help="wrong candidate pairs in the weight file")
    p.add_argument("--mode", choices=["rigid", "similarity"], default="rigid")
    p.add_argument("--box", type=float, nargs=2, default=(0.0, 1.0), metavar=("LO", "HI"))
    p.add_argument("--seed", type=int, default=0)
    return parser


def _load(args, timer: _Timer):
    U = io.read_points(args.source)
    V = io.read_points(args.target)
    if U.shape[1] != V.shape[1]:
        raise io.ParseError(f"source has dim {U.shape[1]} but target has dim {V.shape[1]}")
    inputs = {
        "source": {"path": str(args.source), "sha256": io.file_digest(args.source)},
        "target": {"path": str(args.target), "sha256": io.file_digest(args.target)},
    }
    if args.weights:
        table = io.read_weights(args.weights, len(U), len(V))
        inputs["weights"] = {"path": str(args.weights), "sha256": io.file_digest(args.weights)}
    else:
        table = proximity_weights(U, V, args.sigma)
    timer.mark("read")
    return U, V, normalize_weights(table), inputs


def _input_config(args) -> dict:
    return {
        "mode": args.mode,
        "allow_reflection": args.allow_reflection,
        "rank_tol": args.rank_tol,
        "weights": "file" if args.weights else args.weights_init,
        "sigma": None if args.weights else args.sigma,
    }


def _emit(report: dict, out) -> None:
    if out:
        io.write_json(out, report)
    else:
        json.dump(report, sys.stdout, indent=2)
        sys.stdout.write("\n")


def _pairs(table) -> list:
    return [[i, k, w] for i, k, w in zip(table.i.tolist(), table.k.tolist(), table.weights.tolist())]


def cmd_align(args) -> int:
    timer = _Timer()
    U, V, table, inputs = _load(args, timer)
    sol = solve(U, V, table, args.mode, args.allow_reflection, args.rank_tol)
    timer.mark("solve")
    report = {
        "command": "align",
        "config": _input_config(args),
        "inputs": inputs,
        "timings_ms": timer.stages,
        "transform": sol.transform.to_dict(),
        "e_min": sol.e_min,
        "converged": None,
        "termination": None,
        "det_sign": sol.det_sign,
        "reflection_corrected": sol.reflection_corrected,
        "eigenvalues_zzt": sol.eigenvalues_zzt.tolist(),
        "iterations": [],
        "pairs": _pairs(table),
    }
    _emit(report, args.out)
    log.info("aligned %d pairs: e_min=%.6g scale=%.6g", len(table), sol.e_min, sol.transform.scale)
    return 0


def _run_register(args, command: str):
    timer = _Timer()
    U, V, table, inputs = _load(args, timer)
    cfg = RegistrationConfig(
        threshold=args.threshold,
        epsilon=args.epsilon,
        mode=args.mode,
        allow_reflection=args.allow_reflection,
        max_iterations=args.max_iters,
        rank_tol=args.rank_tol,
    )
    result = register(U, V, table, cfg)
    timer.mark("register")

    config = _input_config(args)
    config.update(result.config.to_dict())
    report = {
        "command": command,
        "config": config,
        "inputs": inputs,
        "timings_ms": timer.stages,
        "transform": result.transform.to_dict(),
        "e_min": result.score,
        "score": result.score,
        "converged": result.converged,
        "termination": result.termination,
        "iterations": [r.to_dict() for r in result.iterations],
        "pairs": _pairs(result.pairs),
    }
    if args.trace_out:
        io.write_columns(
            args.trace_out,
            ["iteration", "threshold", "pairs_before", "pairs_after", "e_min", "scale"],
            [(r.iteration, r.threshold_used, r.pairs_before, r.pairs_after, r.e_min, r.transform.scale)
             for r in result.iterations],
        )
    if args.pairs_out:
        moved = result.transform.apply(U[result.pairs.i])
        delta = residuals(U, V, result.pairs, result.transform)
        dim = U.shape[1]
        header = ["i", "k", "weight", "residual"] + [f"moved_{j}" for j in range(dim)] + [f"target_{j}" for j in range(dim)]
        rows = [
            [int(i), int(k), float(w), float(d), *map(float, m), *map(float, V[k])]
            for i, k, w, d, m in zip(result.pairs.i, result.pairs.k, result.pairs.weights, delta, moved)
        ]
        io.write_columns(args.pairs_out, header, rows)
    if not result.converged:
        print(f"warning: registration did not converge ({result.termination}); converged=false",
              file=sys.stderr)
    return result, report


def cmd_register(args) -> int:
    result, report = _run_register(args, "register")
    _emit(report, args.out)
    log.info("%s after %d iterations, %d pairs, score=%.6g",
             result.termination, len(result.iterations), len(result.pairs), result.score)
    return 0


def cmd_score(args) -> int:
    result, report = _run_register(args, "score")
    if args.out:
        io.write_json(args.out, report)
    print(f"{similarity_score(result):.12f}")
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(
        dim=args.dim,
        n_points=args.points,
        noise_sigma=args.noise,
        outlier_count=args.outliers,
        mode=args.mode,
        seed=args.seed,
        bounding_box=tuple(args.box),
        spurious_pairs=args.spurious,
    )
    inst = generate(spec)
    out = Path(args.out)
    io.write_points(out / "source.txt", inst.U)
    io.write_points(out / "target.txt", inst.V)
    io.write_weights(out / "weights.txt", inst.initial_table)
    truth_res = [float(np.linalg.norm(inst.ground_truth.apply(inst.U[i:i + 1])[0] - inst.V[k]))
                 for i, k in inst.true_pairs]
    io.write_json(out / "truth.json", {
        "transform": inst.ground_truth.to_dict(),
        "true_pairs": [list(p) for p in inst.true_pairs],
        "residuals": truth_res,
        "spec": {
            "dim": spec.dim, "n_points": spec.n_points, "noise_sigma": spec.noise_sigma,
            "outlier_count": spec.outlier_count, "spurious_pairs": spec.spurious_pairs,
            "mode": spec.mode, "seed": spec.seed, "bounding_box": list(spec.bounding_box),
            "rng": "numpy PCG64",
        },
    })
    log.info("wrote instance to %s", out)
    return 0


COMMANDS = {"align": cmd_align, "register": cmd_register, "score": cmd_score, "synth": cmd_synth}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except IllPosed as exc:
        print(f"error: ill-posed input: {exc}", file=sys.stderr)
        return 2
    except (PointRegError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

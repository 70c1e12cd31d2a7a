"""Command-line front end.

Three subcommands, all deterministic given their full flag set:

* ``boundary``   -- sample a phase boundary alpha_c(rho) to CSV
* ``solve``      -- one saddle-point solve, JSON on stdout
* ``experiment`` -- Monte Carlo threshold runs: per-trial CSV + summary JSON

Exit codes: 0 success, 1 usage error, 2 computational failure.  JSON goes to
stdout, diagnostics to stderr; infinities are serialized as the string
"inf" since JSON has no native representation for them.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional, Sequence

from . import replica
from .experiment import EnsembleKind, default_workers, estimate_alpha_c
from .replica import ModelParams, NonconvergenceError
from .scalar_maps import Norm

USAGE_ERROR = 1
COMPUTE_ERROR = 2


class _Parser(argparse.ArgumentParser):
    """argparse with the exit-code contract: bad flags exit 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _fmt(value: float) -> str:
    """Shortest round-trip decimal form, nan spelled lowercase."""
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return repr(float(value))


def _jsonify(obj):
    """Recursively replace non-finite floats with JSON-safe strings."""
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
        return obj
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    return obj


def _parse_rho_grid(spec: str) -> list[float]:
    """min:max:count, endpoints included."""
    try:
        lo_s, hi_s, count_s = spec.split(":")
        lo, hi, count = float(lo_s), float(hi_s), int(count_s)
    except ValueError:
        raise ValueError(f"bad grid {spec!r}; expected MIN:MAX:COUNT") from None
    if count < 2 or not 0.0 < lo < hi <= 1.0:
        raise ValueError(f"bad grid {spec!r}; need 0 < min < max <= 1 and count >= 2")
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def _parse_n_list(spec: str) -> list[int]:
    """start:step:stop, stop included when hit exactly."""
    try:
        start_s, step_s, stop_s = spec.split(":")
        start, step, stop = int(start_s), int(step_s), int(stop_s)
    except ValueError:
        raise ValueError(f"bad size list {spec!r}; expected START:STEP:STOP") from None
    if start < 2 or step < 1 or stop < start:
        raise ValueError(f"bad size list {spec!r}")
    return list(range(start, stop + 1, step))


def _write_text(path: Optional[str], text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# --------------------------
# boundary
# --------------------------

def cmd_boundary(args) -> int:
    try:
        norm = Norm.from_string(args.norm)
        rhos = _parse_rho_grid(args.rho)
    except ValueError as exc:
        print(f"csphase boundary: {exc}", file=sys.stderr)
        return USAGE_ERROR
    method = "worst_case" if args.method == "worst-case" else "typical_rs"
    try:
        boundary = replica.trace_boundary(norm, method, rhos, tol=args.tol)
    except ValueError as exc:  # bad argument combinations (e.g. worst-case + l2)
        print(f"csphase boundary: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:
        print(f"csphase boundary: {exc}", file=sys.stderr)
        return COMPUTE_ERROR
    lines = ["rho,alpha_c,at_valid"]
    for (rho, a), valid in zip(boundary.points, boundary.at_valid):
        lines.append(f"{_fmt(rho)},{_fmt(a)},{'true' if valid else 'false'}")
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


# --------------------------
# solve
# --------------------------

def _solution_payload(sol: replica.SaddleSolution) -> dict:
    t = sol.theta
    return {
        "alpha": sol.params.alpha,
        "rho": sol.params.rho,
        "norm": str(sol.params.norm),
        "Q": t.Q, "chi": t.chi, "m": t.m,
        "Qhat": t.Qhat, "chihat": t.chihat, "mhat": t.mhat,
        "free_energy": sol.free_energy,
        "mse": sol.mse,
        "is_success": sol.is_success,
        "at_stable": sol.at_stable,
        "at_value": sol.at_value,
        "residual": sol.residual,
    }


def cmd_solve(args) -> int:
    try:
        params = ModelParams(alpha=args.alpha, rho=args.rho,
                             norm=Norm.from_string(args.norm))
    except ValueError as exc:
        print(f"csphase solve: {exc}", file=sys.stderr)
        return USAGE_ERROR
    try:
        sol = replica.solve_saddle(params, tol=args.tol)
    except NonconvergenceError as exc:
        t = exc.theta
        payload = {
            "error": str(exc),
            "last_theta": {"Q": t.Q, "chi": t.chi, "m": t.m,
                           "Qhat": t.Qhat, "chihat": t.chihat, "mhat": t.mhat},
            "residual": exc.residual,
        }
        print(json.dumps(_jsonify(payload), indent=2, sort_keys=True))
        return COMPUTE_ERROR
    print(json.dumps(_jsonify(_solution_payload(sol)), indent=2, sort_keys=True))
    return 0


# --------------------------
# experiment
# --------------------------

def cmd_experiment(args) -> int:
    try:
        kind = EnsembleKind.from_string(args.ensemble)
        ns = _parse_n_list(args.n)
        if not 0.0 < args.rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {args.rho}")
        if args.trials < 1:
            raise ValueError("trials must be >= 1")
    except ValueError as exc:
        print(f"csphase experiment: {exc}", file=sys.stderr)
        return USAGE_ERROR

    workers = args.workers if args.workers is not None else default_workers()
    try:
        est = estimate_alpha_c(args.rho, ns, args.trials, kind, args.seed,
                               recovery_tol=args.recovery_tol, workers=workers,
                               redraw=args.redraw)
    except Exception as exc:
        print(f"csphase experiment: {exc}", file=sys.stderr)
        return COMPUTE_ERROR

    if args.out is not None:
        rows = ["N,rho,P_c,seed"]
        rows += [f"{o.N},{_fmt(o.rho)},{o.p_critical},{o.seed}" for o in est.outcomes]
        _write_text(args.out, "\n".join(rows) + "\n")

    theory = replica.l1_alpha_c(args.rho) if args.rho < 1.0 else 1.0
    summary = {
        "rho": est.rho,
        "ensemble": kind.label(),
        "per_n": [{"N": n, "alpha_hat": a, "stderr": s, "trials": t}
                  for (n, a, s, t) in est.per_n],
        "fit_coeffs": list(est.fit_coeffs),
        "fit_residual": est.fit_residual,
        "extrapolated_alpha_c": est.extrapolated_alpha_c,
        "theoretical_alpha_c": theory,
        "failures": list(est.failures),
        "seed": args.seed,
        "trials_per_n": args.trials,
    }
    print(json.dumps(_jsonify(summary), indent=2, sort_keys=True))

    total = len(est.per_n) * args.trials
    if len(est.failures) > 0.001 * total:
        print(f"csphase experiment: {len(est.failures)} of {total} trials aborted",
              file=sys.stderr)
        return COMPUTE_ERROR
    return 0


# --------------------------
# entry point
# --------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csphase",
                     description="L_p reconstruction phase boundaries and experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("boundary", help="sample alpha_c(rho) to CSV")
    b.add_argument("--norm", required=True, choices=["l0", "l1", "l2"])
    b.add_argument("--method", default="typical", choices=["typical", "worst-case"])
    b.add_argument("--rho", required=True,
                   help="grid MIN:MAX:COUNT over (0, 1], endpoints included")
    b.add_argument("--tol", type=float, default=1e-6, help="bisection tolerance on alpha")
    b.add_argument("--out", default=None, help="output CSV path (default stdout)")
    b.set_defaults(func=cmd_boundary)

    s = sub.add_parser("solve", help="solve one saddle point, JSON to stdout")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--rho", type=float, required=True)
    s.add_argument("--norm", required=True, choices=["l0", "l1", "l2"])
    s.add_argument("--tol", type=float, default=1e-10, help="stationarity tolerance")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("experiment", help="Monte Carlo threshold estimation")
    e.add_argument("--rho", type=float, required=True)
    e.add_argument("--n", required=True, help="sizes START:STEP:STOP (inclusive)")
    e.add_argument("--trials", type=int, required=True, help="trials per size")
    e.add_argument("--ensemble", default="gaussian",
                   help="gaussian | rotinv:unit | rotinv:uniform:LO:HI")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--workers", type=int, default=None,
                   help="parallel workers (default $CSPHASE_WORKERS or CPU count)")
    e.add_argument("--recovery-tol", type=float, default=1e-4,
                   help="L1 mismatch above which reconstruction counts as failed")
    e.add_argument("--redraw", action="store_true",
                   help="draw a fresh matrix at every P instead of removing rows")
    e.add_argument("--out", default=None, help="per-trial CSV path")
    e.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

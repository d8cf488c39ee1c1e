"""Command-line entry point.

Exit codes: 0 success, 1 validation / usage / I/O error, 2 numerical failure
(CFL violation, divergence, stalled descent, failed gradient check).

Override precedence: built-in reference spec < ``--spec`` file < ``--set``
key=value pairs < ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .adjoint import fd_gradient, gradient
from .errors import InvalidArgumentError, NumericalError
from .forward import ObservationSet, solve_forward
from .pipeline import (
    combined_invert,
    export_report,
    generate_synthetic,
    load_spec,
    random_baseline,
)
from .plotting import plot_directory
from .ttopt import ParameterBox, tt_minimize

log = logging.getLogger("ttlogistic")

GRAD_COSINE_MIN = 0.999
GRAD_REL_MAX = 1e-2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", type=Path, help="experiment spec JSON (default: reference)")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a spec field, e.g. ttopt.n=64")
    common.add_argument("--seed", type=int, help="seed for noise and TT initialisation")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="ttlogistic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="forward solve at the exact parameters")
    sub.add_parser("make-data", parents=[common], help="write synthetic observations")
    inv = sub.add_parser("invert", parents=[common], help="solve the inverse problem")
    inv.add_argument("--method", choices=("tt", "grad", "combined"), default="combined")
    inv.add_argument("--data", type=Path, help="observations CSV (default: synthesize)")
    gc = sub.add_parser("grad-check", parents=[common], help="adjoint vs finite differences")
    gc.add_argument("--perturb", type=float, default=0.1,
                    help="relative perturbation of the exact point")
    sub.add_parser("benchmark-ttopt", parents=[common], help="TT optimizer benchmarks")
    sub.add_parser("plot", parents=[common], help="render SVG charts from CSVs in --out")
    return parser


def _spec(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides += [f"seed={args.seed}", f"ttopt.seed={args.seed}"]
    return load_spec(args.spec, overrides)


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_simulate(args) -> int:
    spec = _spec(args)
    field = solve_forward(spec.exact, spec.grid)
    path = field.to_csv(args.out / "field.csv")
    print(f"wrote {path} ({spec.grid.nx_grid * (spec.grid.nt + 1)} rows)")
    return 0


def cmd_make_data(args) -> int:
    spec = _spec(args)
    data = generate_synthetic(spec)
    data.to_csv(args.out / "observations.csv")
    _dump(args.out / "spec.json", spec.to_dict())
    print(f"wrote {args.out / 'observations.csv'} ({data.values.size} values)")
    return 0


def cmd_invert(args) -> int:
    spec = _spec(args)
    if args.data is not None:
        data = ObservationSet.from_csv(args.data, spec.sigma)
    else:
        data = generate_synthetic(spec)
    data.to_csv(args.out / "observations.csv")
    _dump(args.out / "spec.json", spec.to_dict())
    try:
        result = combined_invert(data, spec, args.method)
    except NumericalError as exc:
        trace = getattr(exc, "trace", None)
        if trace is not None:
            trace.to_csv(args.out / "trace_grad.csv")
        raise
    export_report(result, args.out)
    summary = result.summary()
    for stage in ("tt", "final"):
        if stage in summary:
            errs = summary[stage]["relative_errors"]
            line = " ".join(f"{k}={v:.3g}" for k, v in errs.items())
            print(f"[{stage}] {line} E_psi={summary[stage]['E_psi']:.3g} "
                  f"E_r={summary[stage]['E_r']:.3g}")
    print(f"wrote {args.out / 'result.json'}")
    if result.descent is not None and result.descent.status == "stalled":
        err = {"error": "StalledError", "message": "gradient descent stalled"}
        _dump(args.out / "error.json", err)
        print(json.dumps(err), file=sys.stderr)
        return 2
    return 0


def cmd_grad_check(args) -> int:
    spec = _spec(args)
    data = generate_synthetic(spec)
    rng = np.random.default_rng(spec.seed)
    x = spec.exact.to_array() * (1 + args.perturb * rng.uniform(-1, 1, spec.exact.p))
    q = spec.exact.with_array(x)
    g_adj, J = gradient(q, data, spec.grid)
    g_fd = fd_gradient(q, data, spec.grid)
    cos = float(g_adj @ g_fd / (np.linalg.norm(g_adj) * np.linalg.norm(g_fd)))
    rel = np.abs(g_adj - g_fd) / np.abs(g_fd)
    report = {"q": x.tolist(), "J": J, "adjoint": g_adj.tolist(), "finite_difference": g_fd.tolist(),
              "max_rel_error": float(rel.max()), "cosine": cos,
              "thresholds": {"cosine_min": GRAD_COSINE_MIN, "rel_max": GRAD_REL_MAX}}
    _dump(args.out / "gradcheck.json", report)
    print(f"max componentwise rel. error {rel.max():.3e}  cosine similarity {cos:.8f}")
    ok = cos >= GRAD_COSINE_MIN and rel.max() <= GRAD_REL_MAX
    return 0 if ok else 2


def rosenbrock(q) -> float:
    return float((1 - q[0]) ** 2 + 100 * (q[1] - q[0] ** 2) ** 2)


def cmd_benchmark(args) -> int:
    spec = _spec(args)
    s = spec.tt
    out = {}
    box = ParameterBox(np.array([-2.0, -2.0]), np.array([2.0, 2.0]), 64)
    res = tt_minimize(rosenbrock, box, r_max=s.r_max, n_sweeps=32, seed=s.seed, threads=1)
    res.trace_to_csv(args.out / "trace_rosenbrock.csv")
    out["rosenbrock"] = {"J_best": res.J_best, "q_best": res.q_best.tolist(), "evals": res.evals,
                         "random_grid_baseline": random_baseline(rosenbrock, box, 10000, s.seed,
                                                                 on_grid=True),
                         "settings": res.settings}
    c = np.array([2, 5, 3]) / 7.0
    box3 = ParameterBox(np.zeros(3), np.ones(3), 8)
    res3 = tt_minimize(lambda q: float(np.sum((q - c) ** 2)), box3, r_max=s.r_max,
                       n_sweeps=s.n_sweeps, seed=s.seed, threads=1)
    out["separable"] = {"J_best": res3.J_best, "q_best": res3.q_best.tolist(),
                        "evals": res3.evals, "settings": res3.settings}
    _dump(args.out / "benchmark_ttopt.json", out)
    for name, r in out.items():
        print(f"{name}: J_best={r['J_best']:.6g} evals={r['evals']}")
    return 0


def cmd_plot(args) -> int:
    made = plot_directory(args.out)
    if not made:
        raise InvalidArgumentError(f"no curve CSVs found in {args.out}")
    for p in made:
        print(f"wrote {p}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "make-data": cmd_make_data,
    "invert": cmd_invert,
    "grad-check": cmd_grad_check,
    "benchmark-ttopt": cmd_benchmark,
    "plot": cmd_plot,
}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        err = exc.to_dict()
        try:
            _dump(args.out / "error.json", err)
        except OSError:
            pass
        print(json.dumps(err), file=sys.stderr)
        return 2
    except (InvalidArgumentError, OSError, TypeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Command-line interface.

Exit codes: 0 success, 1 I/O or parse error, 2 penalty below the
existence threshold, 3 solver hit its iteration budget.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import formats, plot
from .density import hellinger_sq, mean_log_likelihood, tv
from .errors import FdeError, LambdaTooSmall
from .network import dfs_embed, embed_function, embed_point
from .select import count_dof, cv_select, ic_select, refit_mle
from .simulate import rate_experiment, sample
from .solver import SolverSettings, fit

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_LAMBDA = 2
EXIT_MAXITER = 3


class _Parser(argparse.ArgumentParser):
    # usage errors are parse errors (exit 1), not the penalty-threshold exit 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _settings_args(sub):
    sub.add_argument("--rho", type=float, default=1.0, help="splitting penalty factor")
    sub.add_argument("--eps-abs", type=float, default=1e-8, help="absolute tolerance")
    sub.add_argument("--eps-rel", type=float, default=1e-8, help="relative tolerance")
    sub.add_argument("--max-iter", type=int, default=200_000, help="iteration budget")
    sub.add_argument("--alpha", type=float, default=1.6, help="over-relaxation in [1,2)")
    sub.add_argument(
        "--no-adaptive-rho", action="store_true", help="disable penalty rebalancing"
    )


def _settings_from(args) -> SolverSettings:
    return SolverSettings(
        rho=args.rho,
        adaptive_rho=not args.no_adaptive_rho,
        eps_abs=args.eps_abs,
        eps_rel=args.eps_rel,
        max_iterations=args.max_iter,
        alpha=args.alpha,
    )


def _parse_grid(text: str):
    grid = [float(part) for part in text.split(",") if part.strip()]
    if not grid:
        raise ValueError("empty penalty grid")
    return grid


def _load_network(path):
    return formats.network_from_json(Path(path).read_text())


def _load_obs(path):
    return formats.observations_from_csv(Path(path).read_text())


def _fit_metadata(lam, solution, fn, extra=None):
    meta = {
        "lambda": lam,
        "n": None,
        "dof": count_dof(fn),
        "objective": solution.primal_objective,
        "duality_gap": solution.duality_gap,
        "iterations": solution.iterations,
        "converged": solution.converged,
        "flags": list(solution.flags),
    }
    if extra:
        meta.update(extra)
    return meta


def _cmd_fit(args) -> int:
    network = _load_network(args.network)
    points = _load_obs(args.obs)
    solution, fn = fit(network, points, args.lam, _settings_from(args), merge_eps=args.merge_eps)
    meta = _fit_metadata(args.lam, solution, fn, {"n": len(points)})
    Path(args.out).write_text(formats.estimate_to_json(fn, meta))
    print(
        f"fit: n={len(points)} lambda={args.lam} iterations={solution.iterations} "
        f"gap={solution.duality_gap:.3e} regions={solution.fused_regions}",
        file=sys.stderr,
    )
    if not solution.converged:
        print("fit: iteration budget exhausted; estimate written with flags", file=sys.stderr)
        return EXIT_MAXITER
    return EXIT_OK


def _select_common(args, method) -> int:
    network = _load_network(args.network)
    points = _load_obs(args.obs)
    grid = _parse_grid(args.grid)
    settings = _settings_from(args)
    if method == "cv":
        report = cv_select(network, points, grid, folds=args.folds, seed=args.seed, settings=settings)
    else:
        report = ic_select(network, points, grid, criterion=args.criterion, settings=settings)
    Path(args.out).write_text(formats.selection_report_to_csv(report))
    solution, fn = fit(network, points, report.chosen, settings)
    if args.refit_mle:
        fn = refit_mle(network, points, fn)
    extra = {
        "n": len(points),
        "method": report.method,
        "refit_mle": bool(args.refit_mle),
    }
    if method == "cv":
        extra.update({"folds": args.folds, "seed": args.seed})
    meta = _fit_metadata(report.chosen, solution, fn, extra)
    out_estimate = args.out_estimate or str(Path(args.out).with_suffix(".estimate.json"))
    Path(out_estimate).write_text(formats.estimate_to_json(fn, meta))
    print(
        f"{report.method}: chose lambda={report.chosen} over {len(grid)} candidates",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_eval(args) -> int:
    fn, _ = formats.estimate_from_json(Path(args.estimate).read_text())
    if args.metric == "hellinger":
        if not args.against:
            raise ValueError("--metric hellinger needs --against")
        other, _ = formats.estimate_from_json(Path(args.against).read_text())
        value = hellinger_sq(fn, other)
    elif args.metric == "tv":
        value = tv(fn)
    elif args.metric == "loglik":
        if not args.obs:
            raise ValueError("--metric loglik needs --obs")
        value = mean_log_likelihood(fn, _load_obs(args.obs))
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown metric {args.metric!r}")
    print(format(value, ".12g"))
    return EXIT_OK


def _cmd_embed(args) -> int:
    network = _load_network(args.network)
    embedding = dfs_embed(network)
    estimate_doc = None
    if args.estimate:
        fn, meta = formats.estimate_from_json(Path(args.estimate).read_text())
        embedded = embed_function(embedding, fn)
        estimate_doc = formats.estimate_to_json(embedded, meta)
    Path(args.out).write_text(formats.embedding_to_json(embedding, estimate_doc))
    return EXIT_OK


def _cmd_sample(args) -> int:
    fn, _ = formats.estimate_from_json(Path(args.estimate).read_text())
    points = sample(fn, args.n, args.seed)
    Path(args.out).write_text(formats.observations_to_csv(points))
    return EXIT_OK


def _cmd_rate(args) -> int:
    fn, _ = formats.estimate_from_json(Path(args.truth).read_text())
    n_grid = [int(float(part)) for part in args.n_grid.split(",") if part.strip()]
    scale = args.lambda_at_100

    def rule(n: int) -> float:
        return scale * (n / 100.0) ** (-2.0 / 3.0)

    rule.__name__ = f"{scale!r}*(n/100)^(-2/3)"
    report = rate_experiment(fn, n_grid, args.reps, rule, seed=args.seed, settings=_settings_from(args))
    Path(args.out).write_text(formats.rate_report_to_csv(report))
    return EXIT_OK


def _cmd_plot(args) -> int:
    fn, _ = formats.estimate_from_json(Path(args.estimate).read_text())
    truth = None
    if args.truth:
        truth, _ = formats.estimate_from_json(Path(args.truth).read_text())
    points = _load_obs(args.obs) if args.obs else None
    if len(fn.network.edges) > 1:
        if not args.embed:
            raise ValueError("multi-edge estimate: pass --embed to linearize")
        embedding = dfs_embed(fn.network)
        if points:
            from .network import NetworkPoint

            points = [NetworkPoint("line", embed_point(embedding, p)) for p in points]
        fn = embed_function(embedding, fn)
        if truth is not None:
            truth = embed_function(embedding, truth)
    Path(args.out).write_text(plot.render_svg(fn, observations=points, truth=truth))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="fusedensity", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parser_class=_Parser, help="fit an estimate at a fixed penalty")
    p.add_argument("--network", required=True, help="network JSON file")
    p.add_argument("--obs", required=True, help="observations CSV file")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="penalty")
    p.add_argument("--out", required=True, help="estimate JSON output")
    p.add_argument(
        "--merge-eps",
        type=float,
        default=0.0,
        help="snap offsets to this pitch before deduplication",
    )
    _settings_args(p)
    p.set_defaults(func=_cmd_fit)

    for name, crit in (("cv", False), ("ic", True)):
        p = sub.add_parser(
            name,
            parser_class=_Parser,
            help="select the penalty by cross-validation"
            if name == "cv"
            else "select the penalty by an information criterion",
        )
        p.add_argument("--network", required=True)
        p.add_argument("--obs", required=True)
        p.add_argument("--grid", required=True, help="comma-separated penalties")
        p.add_argument("--out", required=True, help="report CSV output")
        p.add_argument("--out-estimate", default=None, help="chosen estimate JSON output")
        p.add_argument("--refit-mle", action="store_true", help="refit region MLE values")
        if crit:
            p.add_argument("--criterion", choices=["aic", "bic"], default="aic")
        else:
            p.add_argument("--folds", type=int, default=20)
            p.add_argument("--seed", type=int, default=0)
        _settings_args(p)
        p.set_defaults(func=lambda a, _name=name: _select_common(a, _name))

    p = sub.add_parser("eval", parser_class=_Parser, help="print a metric of an estimate")
    p.add_argument("--estimate", required=True)
    p.add_argument("--against", default=None, help="second estimate for hellinger")
    p.add_argument("--metric", choices=["hellinger", "tv", "loglik"], required=True)
    p.add_argument("--obs", default=None, help="observations CSV for loglik")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("embed", parser_class=_Parser, help="lay the network out on a line")
    p.add_argument("--network", required=True)
    p.add_argument("--estimate", default=None, help="estimate to embed alongside")
    p.add_argument("--out", required=True, help="embedding JSON output")
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("sample", parser_class=_Parser, help="draw points from a density")
    p.add_argument("--estimate", required=True, help="density estimate JSON")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="observations CSV output")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("rate", parser_class=_Parser, help="Monte-Carlo error-rate experiment")
    p.add_argument("--truth", required=True, help="true density estimate JSON")
    p.add_argument("--n-grid", required=True, help="comma-separated sample sizes")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--lambda-at-100",
        type=float,
        default=0.05,
        help="penalty at n=100; scales as (n/100)^(-2/3)",
    )
    p.add_argument("--out", required=True, help="report CSV output")
    _settings_args(p)
    p.set_defaults(func=_cmd_rate)

    p = sub.add_parser("plot", parser_class=_Parser, help="render an estimate as SVG")
    p.add_argument("--estimate", required=True)
    p.add_argument("--out", required=True, help="SVG output")
    p.add_argument("--obs", default=None, help="observation rug CSV")
    p.add_argument("--truth", default=None, help="overlay density JSON")
    p.add_argument("--embed", action="store_true", help="linearize multi-edge input")
    p.set_defaults(func=_cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LambdaTooSmall as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_LAMBDA
    except (OSError, ValueError, KeyError, json.JSONDecodeError, FdeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


def entrypoint():  # pragma: no cover - console script shim
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line front end: fit, dist, match, transfer and pairwise subcommands."""

import argparse
import json
import pathlib
import sys
import time

import numpy as np

from .discrete_ot import SolverConfig
from .distances import METRICS, mew2, mgw2, mgw2_registration, mw2, pairwise_distance_matrix
from .em import EmConfig, fit_em
from .exceptions import DimensionMismatch, DimensionOrder, GmmOtError, TooFewPoints
from .mixtures import gmm_from_dict, save_gmm
from .plans import build_plan, match_points, t_mean

EXIT_USAGE = 2
EXIT_DIMENSION = 3
EXIT_SOLVER = 4


def read_points(path):
    """Load an n x d CSV of decimal floats, skipping one non-numeric header row."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not lines:
        raise ValueError(f"{path} is empty")
    start = 0
    try:
        [float(tok) for tok in lines[0].split(",")]
    except ValueError:
        start = 1
    if start == len(lines):
        raise ValueError(f"{path} has a header but no data rows")
    rows = []
    width = None
    for i, ln in enumerate(lines[start:], start=start + 1):
        try:
            row = [float(tok) for tok in ln.split(",")]
        except ValueError:
            raise ValueError(f"{path}:{i}: not a numeric row") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ValueError(f"{path}:{i}: expected {width} columns, got {len(row)}")
        rows.append(row)
    out = np.array(rows)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{path} contains non-finite values")
    return out


def _write_rows(path, rows, header=None):
    # repr() gives the shortest round-trip decimal, so output is reproducible
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _load_gmm(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path} is not valid JSON: {exc}") from exc
    # any inconsistency inside one document is a schema problem, not a
    # dimension mismatch between operands
    try:
        return gmm_from_dict(data)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"{path}: {exc}") from exc


def _solver_config(args):
    return SolverConfig(
        max_outer_iters=args.max_iters,
        objective_rel_tol=args.tol,
        anneal_eps0=args.eps0,
        anneal_alpha=args.alpha,
        anneal_iters=args.anneal_iters,
        step_size_eta=args.eta,
        n_restarts=args.restarts,
        seed=args.seed,
    )


def _config_dict(config):
    return {
        "max_outer_iters": config.max_outer_iters,
        "objective_rel_tol": config.objective_rel_tol,
        "anneal_eps0": config.anneal_eps0,
        "anneal_alpha": config.anneal_alpha,
        "anneal_iters": config.anneal_iters,
        "step_size_eta": config.step_size_eta,
        "inner_pgd_iters": config.inner_pgd_iters,
        "n_restarts": config.n_restarts,
        "seed": config.seed,
    }


def _solve_pair(g0, g1, metric, config):
    """Run the chosen metric and recover the global map when one exists."""
    if metric == "mw2":
        return mw2(g0, g1), None, None
    if metric == "mgw2":
        res = mgw2(g0, g1, config)
        reg = mgw2_registration(g0, g1, res.coupling, config)
        return res, reg.p, reg.b
    res = mew2(g0, g1, config)
    return res, res.p, res.b


def cmd_fit(args):
    points = read_points(args.input)
    config = EmConfig(
        n_components=args.components, n_restarts=args.restarts, seed=args.seed
    )
    save_gmm(fit_em(points, config), args.output)
    return 0


def cmd_dist(args):
    g0 = _load_gmm(args.gmm_a)
    g1 = _load_gmm(args.gmm_b)
    config = _solver_config(args)
    t0 = time.perf_counter()
    res, p, b = _solve_pair(g0, g1, args.metric, config)
    runtime_ms = 1000.0 * (time.perf_counter() - t0)
    report = {
        "metric": args.metric,
        "value": res.distance,
        "value_sq": res.value_sq,
        "coupling": res.coupling.plan.tolist(),
        "iterations": res.iterations,
        "annealed": res.annealed,
        "runtime_ms": runtime_ms,
        "seed": args.seed,
        "config": _config_dict(config),
    }
    if p is not None:
        report["p_matrix"] = np.asarray(p).tolist()
        report["b_vector"] = np.asarray(b).tolist()
    with open(args.output, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def cmd_match(args):
    xs = read_points(args.points_a)
    ys = read_points(args.points_b)
    if xs.shape[1] < ys.shape[1]:
        raise DimensionOrder(
            f"source dimension {xs.shape[1]} is smaller than target "
            f"dimension {ys.shape[1]}; swap the inputs"
        )
    em = dict(n_restarts=args.restarts)
    g0 = fit_em(xs, EmConfig(n_components=args.components, seed=args.seed, **em))
    g1 = fit_em(ys, EmConfig(n_components=args.components, seed=args.seed + 1, **em))
    res, p, b = _solve_pair(g0, g1, args.metric, _solver_config(args))
    plan = build_plan(g0, g1, res.coupling, p=p, b=b)
    truth = read_points(args.truth) if args.truth else None
    result = match_points(plan, xs, ys, truth=truth)
    header = ["index", "match"] + [f"mapped_{j}" for j in range(ys.shape[1])]
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(xs.shape[0]):
            coords = ",".join(repr(float(v)) for v in result.mapped[i])
            fh.write(f"{i},{int(result.assignment[i])},{coords}\n")
    if truth is not None:
        print(f"distortion: {result.distortion!r}", file=sys.stderr)
        sidecar = {
            "distortion": result.distortion,
            "metric": args.metric,
            "value": res.distance,
            "seed": args.seed,
        }
        with open(args.output + ".json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_transfer(args):
    source = read_points(args.source)
    palette = read_points(args.palette)
    if source.shape[1] < palette.shape[1]:
        raise DimensionOrder(
            f"source dimension {source.shape[1]} is smaller than palette "
            f"dimension {palette.shape[1]}"
        )
    em = dict(n_restarts=args.restarts)
    g0 = fit_em(source, EmConfig(n_components=args.components, seed=args.seed, **em))
    g1 = fit_em(palette, EmConfig(n_components=args.components, seed=args.seed + 1, **em))
    res, p, b = _solve_pair(g0, g1, args.metric, _solver_config(args))
    plan = build_plan(g0, g1, res.coupling, p=p, b=b)
    _write_rows(args.output, t_mean(plan, source))
    return 0


def cmd_pairwise(args):
    paths = sorted(args.input_dir.glob("*.json"))
    if len(paths) < 2:
        raise ValueError(f"{args.input_dir} holds {len(paths)} mixture files; need >= 2")
    gmms = [_load_gmm(str(path)) for path in paths]
    matrix = pairwise_distance_matrix(
        gmms, args.metric, _solver_config(args), n_workers=args.workers
    )
    _write_rows(args.output, matrix, header=[path.name for path in paths])
    return 0


def _add_solver_flags(sub):
    sub.add_argument("--metric", choices=METRICS, default="mew2")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--alpha", type=float, default=0.95, help="annealing decay")
    sub.add_argument("--eps0", type=float, default=1.0, help="initial stage temperature")
    sub.add_argument("--anneal-iters", type=int, default=10, dest="anneal_iters")
    sub.add_argument("--eta", type=float, default=0.01, help="embedding descent step")
    sub.add_argument("--max-iters", type=int, default=1000, dest="max_iters")
    sub.add_argument("--tol", type=float, default=1e-9)
    sub.add_argument("--restarts", type=int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gmmot",
        description="Optimal-transport distances and maps between Gaussian mixtures",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    fit = subs.add_parser("fit", help="fit a mixture to a CSV of points")
    fit.add_argument("input")
    fit.add_argument("--components", type=int, required=True)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--restarts", type=int, default=1)
    fit.add_argument("--output", required=True)
    fit.set_defaults(func=cmd_fit)

    dist = subs.add_parser("dist", help="distance between two mixture JSON files")
    dist.add_argument("gmm_a")
    dist.add_argument("gmm_b")
    _add_solver_flags(dist)
    dist.add_argument("--output", required=True)
    dist.set_defaults(func=cmd_dist)

    match = subs.add_parser("match", help="match two point clouds through mixtures")
    match.add_argument("points_a")
    match.add_argument("points_b")
    match.add_argument("--components", type=int, required=True)
    _add_solver_flags(match)
    match.add_argument("--truth", default=None)
    match.add_argument("--output", required=True)
    match.set_defaults(func=cmd_match)

    transfer = subs.add_parser(
        "transfer", help="map source rows into the palette space"
    )
    transfer.add_argument("source")
    transfer.add_argument("palette")
    transfer.add_argument("--components", type=int, required=True)
    _add_solver_flags(transfer)
    transfer.add_argument("--output", required=True)
    transfer.set_defaults(func=cmd_transfer)

    pairwise = subs.add_parser(
        "pairwise", help="pairwise distance matrix over a directory of mixtures"
    )
    pairwise.add_argument("input_dir", type=pathlib.Path)
    _add_solver_flags(pairwise)
    pairwise.add_argument("--workers", type=int, default=1)
    pairwise.add_argument("--output", required=True)
    pairwise.set_defaults(func=cmd_pairwise)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"gmmot: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_USAGE
    except TooFewPoints as exc:
        print(f"gmmot: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DimensionMismatch, DimensionOrder) as exc:
        print(f"gmmot: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except GmmOtError as exc:
        print(f"gmmot: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"gmmot: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

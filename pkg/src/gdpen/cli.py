"""Command line entry point: ``gdpen phase|certify|fit|witness|converse|plot``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .io import dump_json, load_json, load_matrix, load_vector, save_matrix, save_vector

EXIT_PASS, EXIT_FAIL, EXIT_INDETERMINATE = 0, 2, 3


def _penalty(path):
    from .penalties import make_penalty

    path = Path(path)
    return make_penalty(load_json(path), base_dir=path.parent)


def _loss(args):
    from .losses import LogDetLoss, SquaredLoss

    theta_star = load_vector(args.theta_star) if getattr(args, "theta_star", None) else None
    if args.sigma_hat:
        return LogDetLoss(load_matrix(args.sigma_hat), args.block_size, theta_star=theta_star)
    if args.X is None or args.y is None:
        raise SystemExit("fit/witness need either --X and --y, or --sigma-hat")
    return SquaredLoss(load_matrix(args.X), load_vector(args.y), normalize=args.normalize,
                       theta_star=theta_star)


def _lambdas(args):
    if args.lambda_grid:
        return [float(x) for x in args.lambda_grid.split(",")]
    if args.lam is None:
        raise SystemExit("give --lambda or --lambda-grid")
    return [args.lam]


def _add_loss_args(p):
    p.add_argument("--X", help="design matrix CSV (squared loss)")
    p.add_argument("--y", help="response CSV (squared loss)")
    p.add_argument("--normalize", action="store_true", help="rescale columns of X to norm sqrt(n)")
    p.add_argument("--sigma-hat", help="sample covariance CSV/.mtx (log-determinant loss)")
    p.add_argument("--block-size", type=int, default=2)
    p.add_argument("--penalty", required=True, help="penalty JSON")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--tol", type=float, default=1e-8)


# ---------------------------------------------------------------------------


def cmd_phase(args):
    from .experiments import PhaseConfig, run_phase
    from .report import emit_report

    cfg = load_json(args.config)
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    result = run_phase(PhaseConfig.from_dict(cfg), workers=args.workers)
    for path in emit_report(result, args.out, formats=args.formats.split(",")):
        print(path)
    for size, c in result.crossings.items():
        print(f"size {size}: n50 = {c['n50']}  rescaled = {c['rescaled_n50']}")
    return 0


def _table(rep):
    lines = [
        f"irrep sup        [{rep.irrep_lower:.6g}, {rep.irrep_upper:.6g}]  ({rep.verdicts['irrepresentable']})",
        f"tau              {rep.tau:.6g}",
        f"tau_bar          {rep.tau_bar:.6g}",
        f"kappa_err        {rep.kappa_err:.6g}",
        f"kappa_err*       {rep.kappa_err_star:.6g}",
        f"kappa_A          {rep.kappa_A:.6g}",
        f"m_C / L_C        {rep.m_C:.6g} / {rep.L_C:.6g}",
        f"lambda window    ({rep.lambda_lo:.6g}, {rep.lambda_hi:.6g})",
        f"error bound      {rep.error_bound_coefficient:.6g} * lambda  ({rep.error_norm})",
    ]
    lines += [f"note: {n}" for n in rep.notes]
    return "\n".join(lines)


def certify_exit_code(rep):
    v = rep.verdicts
    if v["irrepresentable"] == "indeterminate":
        return EXIT_INDETERMINATE
    ok = v["irrepresentable"] == "pass" and v["rss"] == "pass" and v.get("window", "nonempty") == "nonempty"
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_certify(args):
    from .certify import certify
    from .errors import RankDeficiencyError

    rho = _penalty(args.penalty)
    Q = load_matrix(args.Q)
    theta_star = load_vector(args.theta_star) if args.theta_star else None
    grad = load_vector(args.grad) if args.grad else None
    if grad is None and theta_star is not None and args.b is not None:
        grad = Q @ theta_star - load_vector(args.b)
    try:
        rep = certify(rho, Q, theta_star=theta_star, grad=grad, error_norm=args.error_norm,
                      tau_bar_scope=args.tau_bar_scope, seed=args.seed)
    except RankDeficiencyError as exc:
        print(f"certify: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(_table(rep))
    if args.out:
        dump_json(rep, args.out)
    code = certify_exit_code(rep)
    print({EXIT_PASS: "PASS", EXIT_FAIL: "FAIL", EXIT_INDETERMINATE: "INDETERMINATE"}[code])
    return code


def cmd_fit(args):
    from .solvers import solve

    loss, rho = _loss(args), _penalty(args.penalty)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fits = [solve(loss, rho, lam, tol=args.tol) for lam in _lambdas(args)]
    if len(fits) == 1:
        dump_json(fits[0], out / "fit.json")
        save_vector(out / "theta_hat.csv", fits[0].theta_hat)
    else:
        dump_json({"path": [f.to_dict() for f in fits]}, out / "fit.json")
        save_matrix(out / "theta_hat.csv", np.column_stack([f.theta_hat for f in fits]))
    for f in fits:
        print(f"lambda {f.lam:.6g}: objective {f.objective:.10g}, support {list(f.support)}, "
              f"converged {f.converged}")
    return 0 if all(f.converged for f in fits) else 1


def cmd_witness(args):
    from .certify import witness

    loss, rho = _loss(args), _penalty(args.penalty)
    if args.lam is None:
        raise SystemExit("give --lambda")
    est, rep = witness(loss, rho, args.lam, tol=min(args.tol, 1e-10))
    d = rep.to_dict()
    d["restricted_fit"] = est.to_dict()
    if args.out:
        dump_json(d, args.out)
    print(f"gauge of u_I: {rep.gauge_I_of_u_I:.6g}  certified unique: {rep.certified_unique}")
    return 0 if rep.certified_unique else EXIT_FAIL


def cmd_converse(args):
    from .certify import converse_check

    rho = _penalty(args.penalty)
    rep = converse_check(rho, load_matrix(args.Q), load_vector(args.theta_star), trials=args.trials,
                         n=args.n, sigma=args.sigma, seed=args.seed, workers=args.workers)
    if args.out:
        dump_json(rep, args.out)
    print(f"violation {rep.violation:.6g}")
    if rep.applicable:
        lo, hi = rep.wilson
        print(f"best success {rep.best_fraction:.4f} at lambda {rep.best_lambda:.4g}, 95% [{lo:.4f}, {hi:.4f}]")
    else:
        print("irrepresentable condition holds; no converse run")
    return 0


def cmd_plot(args):
    from .report import phase_svg

    Path(args.out).write_text(phase_svg(load_json(args.inp)))
    print(args.out)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="gdpen", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phase", help="phase-transition sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="overrides master_seed in the config")
    p.add_argument("--workers", type=int, help="default: GDPEN_THREADS, else CPU count")
    p.add_argument("--formats", default="json,csv,svg")
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("certify", help="irrepresentability and lambda window")
    p.add_argument("--Q", required=True, help="Hessian / Gram matrix (CSV or .mtx)")
    p.add_argument("--penalty", required=True)
    p.add_argument("--theta-star")
    p.add_argument("--grad", help="gradient of the loss at theta_star")
    p.add_argument("--b", help="linear term: gradient is Q theta_star - b")
    p.add_argument("--error-norm", choices=["linf", "l2", "group_linf"])
    p.add_argument("--tau-bar-scope", choices=["full", "model"], default="full")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("fit", help="penalized M-estimate")
    _add_loss_args(p)
    p.add_argument("--lambda-grid", help="comma separated lambdas")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("witness", help="restricted solve and dual certificate")
    _add_loss_args(p)
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("converse", help="success rate when irrepresentability fails")
    p.add_argument("--Q", required=True)
    p.add_argument("--penalty", required=True)
    p.add_argument("--theta-star", required=True)
    p.add_argument("--trials", type=int, default=400)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_converse)

    p = sub.add_parser("plot", help="SVG from a phase result JSON")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Synthetic data, success scoring and phase-transition sweeps."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._parallel import map_ordered
from .losses import LogDetLoss, SquaredLoss, glasso_groups
from .penalties import EstimandSpec, Penalty, analysis, group_lasso, lasso, support_of
from .solvers import EPS_SUPP, solve

THETA_MIN = 1.0


@dataclass
class LinearSpec:
    p: int
    s: int
    n: int
    sigma: float = 0.5
    design: str = "gaussian_iid"
    rho_corr: float = 0.0
    piecewise: bool = False


@dataclass
class BlockPrecisionSpec:
    nodes: int
    n: int
    block_size: int = 2
    graph: str = "chain"
    edge_weight: float = 0.2
    delta: float = 1.0


class GeneratorError(ValueError):
    pass


def _design(spec: LinearSpec, rng):
    X = rng.standard_normal((spec.n, spec.p))
    if spec.design == "correlated":
        idx = np.arange(spec.p)
        C = spec.rho_corr ** np.abs(idx[:, None] - idx[None, :])
        X = X @ np.linalg.cholesky(C).T
    elif spec.design != "gaussian_iid":
        raise ValueError(f"unknown design {spec.design!r}")
    norms = np.linalg.norm(X, axis=0)
    return X * (math.sqrt(spec.n) / norms)


def difference_matrix(p):
    """(p-1) x p first-difference operator."""
    return np.diff(np.eye(p), axis=0)


def graph_edges(nodes, graph):
    if graph == "chain":
        return [(i, i + 1) for i in range(nodes - 1)]
    if graph == "grid":
        k = math.isqrt(nodes)
        if k * k != nodes:
            raise GeneratorError(f"grid graph needs a square node count, got {nodes}")
        edges = []
        for r in range(k):
            for c in range(k):
                v = r * k + c
                if c + 1 < k:
                    edges.append((v, v + 1))
                if r + 1 < k:
                    edges.append((v, v + k))
        return sorted(edges)
    raise ValueError(f"unknown graph {graph!r}")


def block_precision(spec: BlockPrecisionSpec):
    """Theta* with delta * I diagonal blocks and w * delta * I edge blocks.

    Raises GeneratorError when the result has an eigenvalue below 0.1.
    """
    b = spec.block_size
    E = np.eye(b)
    d = spec.nodes * b
    T = spec.delta * np.eye(d)
    edges = graph_edges(spec.nodes, spec.graph)
    for i, j in edges:
        T[i * b:(i + 1) * b, j * b:(j + 1) * b] = spec.edge_weight * spec.delta * E
        T[j * b:(j + 1) * b, i * b:(i + 1) * b] = spec.edge_weight * spec.delta * E.T
    lam_min = float(np.linalg.eigvalsh(T)[0])
    if lam_min < 0.1 - 1e-9:
        raise GeneratorError(
            f"{spec.graph} graph on {spec.nodes} nodes with edge weight {spec.edge_weight}: "
            f"minimum eigenvalue {lam_min:.3g} < 0.1"
        )
    return T, edges


def glasso_penalty(nodes, block_size=2, active_pairs=()):
    """Group penalty on off-diagonal node-pair blocks; diagonal blocks unpenalized."""
    d = nodes * block_size
    groups, diag, pairs = glasso_groups(d, block_size)
    index = {pr: k for k, pr in enumerate(pairs)}
    active = [index[tuple(sorted(e))] for e in active_pairs]
    free = range(len(groups), len(groups) + len(diag))
    return group_lasso(groups + diag, active, free_groups=free)


def gen_dataset(spec, rng):
    """(loss, EstimandSpec, penalty with the true active set) for one synthetic draw."""
    if isinstance(spec, LinearSpec):
        X = _design(spec, rng)
        theta = np.zeros(spec.p)
        if spec.piecewise:
            # s jumps in a piecewise-constant signal; active units are rows of D
            cuts = np.sort(rng.choice(np.arange(1, spec.p), size=spec.s, replace=False))
            signs = rng.choice((-1.0, 1.0), size=spec.s)
            for c, sgn in zip(cuts, signs):
                theta[c:] += THETA_MIN * sgn
            D = difference_matrix(spec.p)
            rho = analysis(D, lasso(spec.p - 1, (cuts - 1).tolist()))
            active = tuple(int(c - 1) for c in cuts)
            est = EstimandSpec(spec.p, None, active)
            est.theta_star = theta
        else:
            support = np.sort(rng.choice(spec.p, size=spec.s, replace=False))
            theta[support] = THETA_MIN * rng.choice((-1.0, 1.0), size=spec.s)
            rho = lasso(spec.p, support.tolist())
            est = EstimandSpec(spec.p, theta, support.tolist())
        y = X @ theta + spec.sigma * rng.standard_normal(spec.n)
        return SquaredLoss(X, y, theta_star=theta), est, rho
    if isinstance(spec, BlockPrecisionSpec):
        T, edges = block_precision(spec)
        d = T.shape[0]
        Z = rng.standard_normal((spec.n, d)) @ np.linalg.cholesky(np.linalg.inv(T)).T
        S = Z.T @ Z / spec.n
        loss = LogDetLoss(S, spec.block_size, n=spec.n, theta_star=T)
        rho = glasso_penalty(spec.nodes, spec.block_size, edges)
        active = sorted(set(rho.active_units) | set(rho.meta["free"]))
        est = EstimandSpec(loss.p, loss.theta_star, active, units=rho.units)
        return loss, est, rho
    raise TypeError(f"unknown dataset spec {type(spec).__name__}")


def success_indicator(theta_hat, spec: EstimandSpec, rho: Penalty, eps_supp=EPS_SUPP) -> bool:
    """Recovered penalized units equal the true ones (and, for coordinates, signs agree)."""
    penalized = set(rho.meta.get("penalized", range(len(rho.units))))
    if rho.kind == "analysis":
        penalized = set(rho.meta["base"].meta["penalized"])
    found = {u for u in support_of(rho, theta_hat, eps_supp) if u in penalized}
    truth = {u for u in spec.active if u in penalized}
    if found != truth:
        return False
    if rho.unit_kind == "coord" and spec.theta_star is not None:
        if rho.kind == "analysis":
            D = rho.meta["D"]
            est, ref = D @ theta_hat, D @ spec.theta_star
        else:
            est, ref = theta_hat, spec.theta_star
        idx = sorted(truth)
        return bool(np.all(np.sign(est[idx]) == np.sign(ref[idx])))
    return True


# ---------------------------------------------------------------------------
# Phase transitions
# ---------------------------------------------------------------------------


@dataclass
class PhaseConfig:
    family: str = "lasso"
    sizes: list = field(default_factory=lambda: [64, 128])
    n_grid: list = field(default_factory=lambda: list(range(100, 1001, 100)))
    trials: int = 100
    sigma: float = 0.5
    tau_target: float = 0.5
    master_seed: int = 0
    lambda_rule: str = "theory"
    lambda_const: float | None = None
    s: int = 5
    design: str = "gaussian_iid"
    rho_corr: float = 0.0
    graph: str = "chain"
    block_size: int = 2
    edge_weight: float = 0.2
    delta: float = 1.0
    eps_supp: float = EPS_SUPP
    tol: float | None = None
    record_certificates: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if self.family not in ("lasso", "generalized_lasso", "group_glasso"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.lambda_rule not in ("theory", "proportional"):
            raise ValueError(f"unknown lambda rule {self.lambda_rule!r}")
        if self.lambda_const is None:
            self.lambda_const = 1.25 if self.family == "group_glasso" else 0.5
        if self.tol is None:
            self.tol = 1e-6 if self.family == "group_glasso" else 1e-8
        self.sizes = [int(s) for s in self.sizes]
        self.n_grid = [int(n) for n in self.n_grid]

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**known)

    def to_dict(self):
        return asdict(self)


def group_stats(cfg: PhaseConfig, size):
    """(max group size, number of groups) used for the rescaled axis and the lambda rule."""
    if cfg.family == "group_glasso":
        return cfg.block_size ** 2, size * (size - 1) // 2
    if cfg.family == "generalized_lasso":
        return 1, size - 1
    return 1, size


def rescaled_n(cfg: PhaseConfig, size, n):
    gmax, count = group_stats(cfg, size)
    return n / (gmax * math.log(count))


def lambda_for(cfg: PhaseConfig, size, n):
    """Regularization level for one (size, n) cell.

    For the graphical family the constant is in symmetric-matrix units: a
    penalized vech entry stands for two matrix entries, so the value is doubled.
    """
    gmax, count = group_stats(cfg, size)
    if cfg.lambda_rule == "theory":
        t = cfg.tau_target
        lam = 2.0 * math.sqrt(2.0) * cfg.sigma * (1.0 - t) / t * math.sqrt(math.log(count) / n)
    else:
        lam = cfg.lambda_const * math.sqrt(gmax * math.log(count) / n)
    return 2.0 * lam if cfg.family == "group_glasso" else lam


def trial_seed(master, size_idx, n_idx, trial):
    return np.random.SeedSequence([int(master), size_idx, n_idx, trial])


def _dataset_spec(cfg: PhaseConfig, size, n):
    if cfg.family == "group_glasso":
        return BlockPrecisionSpec(size, n, cfg.block_size, cfg.graph, cfg.edge_weight, cfg.delta)
    return LinearSpec(size, cfg.s, n, cfg.sigma, cfg.design, cfg.rho_corr,
                      piecewise=cfg.family == "generalized_lasso")


def run_trial(args):
    """One (size, n, trial) cell: generate, fit, score.  Returns a plain dict."""
    cfg_dict, size_idx, n_idx, trial = args
    cfg = PhaseConfig.from_dict(cfg_dict)
    size, n = cfg.sizes[size_idx], cfg.n_grid[n_idx]
    rng = np.random.default_rng(trial_seed(cfg.master_seed, size_idx, n_idx, trial))
    loss, est, rho_true = gen_dataset(_dataset_spec(cfg, size, n), rng)
    lam = lambda_for(cfg, size, n)
    rho_fit = rho_true.with_active(()) if rho_true.kind != "analysis" else rho_true
    fit = solve(loss, rho_fit, lam, tol=cfg.tol)
    ok = fit.converged and success_indicator(fit.theta_hat, est, rho_true, cfg.eps_supp)
    out = {
        "success": bool(ok),
        "converged": bool(fit.converged),
        "l2_error": float(np.linalg.norm(fit.theta_hat - est.theta_star)),
        "lambda": lam,
    }
    if cfg.record_certificates:
        out["certificate"] = _trial_certificate(loss, rho_true, est, lam)
    return out


def _trial_certificate(loss, rho, est, lam):
    from .certify import certify

    try:
        rep = certify(rho, loss=loss, theta_star=est.theta_star)
    except Exception as exc:  # recorded, not fatal: the fit result stands on its own
        return {"error": f"{type(exc).__name__}: {exc}"}
    return {
        "irrepresentable": rep.verdicts["irrepresentable"],
        "tau": rep.tau,
        "lambda_window": [rep.lambda_lo, rep.lambda_hi],
        "lambda_in_window": bool(rep.lambda_lo < lam < rep.lambda_hi),
    }


@dataclass
class PhaseResult:
    config: dict
    rows: list
    crossings: dict
    trials_detail: dict | None = None

    def to_dict(self):
        out = {
            "config": self.config,
            "master_seed": self.config["master_seed"],
            "rows": self.rows,
            "crossings": self.crossings,
            "defaults": {
                "theta_min": THETA_MIN,
                "edge_weight": self.config["edge_weight"],
                "lambda_const": self.config["lambda_const"],
                "eps_supp": self.config["eps_supp"],
            },
        }
        if self.trials_detail is not None:
            out["trials"] = self.trials_detail
        return out

    def curve(self, size):
        rows = [r for r in self.rows if r["size"] == size]
        return np.array([r["n"] for r in rows]), np.array([r["success_fraction"] for r in rows])


def crossing(ns, fractions, level=0.5):
    """First n where the success curve reaches ``level``, by linear interpolation."""
    ns = np.asarray(ns, dtype=float)
    fr = np.asarray(fractions, dtype=float)
    for k in range(len(ns)):
        if fr[k] >= level:
            if k == 0:
                return float(ns[0])
            f0, f1 = fr[k - 1], fr[k]
            return float(ns[k - 1] + (level - f0) * (ns[k] - ns[k - 1]) / (f1 - f0))
    return None


def run_phase(cfg: PhaseConfig, workers=None) -> PhaseResult:
    """Success fraction over the (size, n) grid; trials are seeded independently."""
    cfg_dict = cfg.to_dict()
    tasks = [
        (cfg_dict, si, ni, t)
        for si in range(len(cfg.sizes))
        for ni in range(len(cfg.n_grid))
        for t in range(cfg.trials)
    ]
    results = map_ordered(run_trial, tasks, workers)
    rows, crossings, detail = [], {}, {} if cfg.record_certificates else None
    k = 0
    for si, size in enumerate(cfg.sizes):
        fracs = []
        for ni, n in enumerate(cfg.n_grid):
            cell = results[k:k + cfg.trials]
            k += cfg.trials
            succ = sum(r["success"] for r in cell)
            frac = succ / cfg.trials
            fracs.append(frac)
            rows.append({
                "size": size,
                "n": n,
                "rescaled_n": rescaled_n(cfg, size, n),
                "trials": cfg.trials,
                "successes": succ,
                "success_fraction": frac,
                "mean_l2_error": float(np.mean([r["l2_error"] for r in cell])),
                "nonconverged": sum(not r["converged"] for r in cell),
                "lambda": cell[0]["lambda"],
            })
            if detail is not None:
                detail[f"{size}:{n}"] = [r.get("certificate") for r in cell]
        c = crossing(cfg.n_grid, fracs)
        crossings[str(size)] = {
            "n50": c,
            "rescaled_n50": None if c is None else rescaled_n(cfg, size, c),
        }
    return PhaseResult(cfg_dict, rows, crossings, detail)

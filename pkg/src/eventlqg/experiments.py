"""Monte Carlo studies, parameter sweeps, solver timing and the MPC-dominance check."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ModelError, StatisticalViolation
from .kernels import bind_error, build_noise_kernels
from .milp import ScheduleVector, build_milp, cost_matrix_recursion
from .model import SystemModel, validate_model
from .riccati import solve_gains
from .simulate import Precomputed, make_policy, run_episode
from .solver import solve_bnb, solve_bruteforce, solve_dp

DEFAULT_POLICIES = ("mpc", "offline", "continuous", "openloop")


@dataclass
class ExperimentConfig:
    model: SystemModel
    policies: tuple = DEFAULT_POLICIES
    n_seeds: int = 1000
    seed0: int = 0
    lambda_grid: tuple = ()
    sigma_grid: tuple = ()
    periods: tuple = ()
    out_dir: str | None = None
    solver: str = "dp"
    workers: int = 1

    def validate(self):
        self.model = validate_model(self.model)
        if self.n_seeds < 1:
            raise ModelError("need at least one seed")
        if not self.policies:
            raise ModelError("policy list is empty")
        for p in self.policies:
            make_policy(p)
        for name in ("lambda_grid", "sigma_grid", "periods"):
            grid = getattr(self, name)
            if grid is not None and any(not np.isfinite(v) for v in grid):
                raise ModelError(f"{name} contains non-finite values")
        if any(v < 0 for v in self.lambda_grid) or any(v < 0 for v in self.sigma_grid):
            raise ModelError("lambda and sigma grids must be nonnegative")
        if any(int(p) < 1 for p in self.periods):
            raise ModelError("periods must be >= 1")
        return self

    @property
    def seeds(self):
        return range(self.seed0, self.seed0 + self.n_seeds)


@dataclass
class SummaryRow:
    policy: str
    mean_cost: float
    mean_comms: float
    se_cost: float
    N: int


@dataclass
class MonteCarloResult:
    rows: list
    costs: dict            # policy -> array of per-seed costs (seed order)
    comms: dict            # policy -> array of per-seed comm counts
    seeds: list
    mpc_solves: int = 0
    mpc_steps: int = 0

    def row(self, policy):
        for r in self.rows:
            if r.policy == policy:
                return r
        raise KeyError(policy)

    @property
    def certified_fraction(self):
        """Share of MPC steps settled by a certificate without a solve."""
        if not self.mpc_steps:
            return float("nan")
        return 1.0 - self.mpc_solves / self.mpc_steps


def _summarize(policy, costs, comms):
    N = len(costs)
    se = float(np.std(costs, ddof=1) / math.sqrt(N)) if N > 1 else 0.0
    return SummaryRow(policy, float(np.mean(costs)), float(np.mean(comms)), se, N)


def _run_chunk(args):
    model, policies, seeds, solver = args
    pre = Precomputed.build(model)
    out = []
    for seed in seeds:
        rec = {}
        for name in policies:
            pol = make_policy(name, solver=solver)
            tr = run_episode(model, pre.gains, pol, seed, pre=pre)
            rec[name] = (tr.realized_cost, tr.comm_count, getattr(pol, "solves", 0),
                         len(tr.verdicts))
        out.append((seed, rec))
    return out


def monte_carlo(config: ExperimentConfig) -> MonteCarloResult:
    """Run every policy on the same seeds (common random numbers) and aggregate.

    With ``workers > 1`` seeds are split across processes; results are sorted
    by seed before reduction so the output does not depend on scheduling.
    """
    model = config.model
    policies = tuple(config.policies)
    seeds = list(config.seeds)
    if config.workers > 1 and len(seeds) > 1:
        chunks = [seeds[i::config.workers] for i in range(config.workers)]
        with ProcessPoolExecutor(config.workers) as ex:
            parts = ex.map(_run_chunk, [(model, policies, c, config.solver) for c in chunks if c])
            records = [r for part in parts for r in part]
    else:
        records = _run_chunk((model, policies, seeds, config.solver))
    records.sort(key=lambda r: r[0])
    costs = {p: np.array([r[1][p][0] for r in records]) for p in policies}
    comms = {p: np.array([r[1][p][1] for r in records]) for p in policies}
    rows = [_summarize(p, costs[p], comms[p]) for p in policies]
    solves = sum(r[1][p][2] for r in records for p in policies if p == "mpc")
    steps = sum(r[1][p][3] for r in records for p in policies if p == "mpc")
    return MonteCarloResult(rows, costs, comms, [r[0] for r in records], solves, steps)


def write_summary_csv(rows, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["policy", "mean_cost", "mean_comms", "se_cost", "N"])
        for r in rows:
            wr.writerow([r.policy, repr(r.mean_cost), repr(r.mean_comms), repr(r.se_cost), r.N])


def write_per_seed_csv(result: MonteCarloResult, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["policy", "seed", "cost", "comms"])
        for p in result.costs:
            for i, seed in enumerate(result.seeds):
                wr.writerow([p, seed, repr(float(result.costs[p][i])), int(result.comms[p][i])])


def summary_from_per_seed_csv(path):
    """Recompute summary rows from a per-seed CSV (order of first appearance)."""
    data = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            data.setdefault(row["policy"], []).append(
                (int(row["seed"]), float(row["cost"]), int(row["comms"])))
    rows = []
    for p, recs in data.items():
        recs.sort()
        rows.append(_summarize(p, np.array([r[1] for r in recs]), np.array([r[2] for r in recs])))
    return rows


def write_manifest(out_dir, command, config: ExperimentConfig, extra=None):
    doc = {
        "artifact": "eventlqg",
        "version": __version__,
        "command": command,
        "model": config.model.to_dict(),
        "policies": list(config.policies),
        "seed_range": [config.seed0, config.seed0 + config.n_seeds - 1],
        "n_seeds": config.n_seeds,
        "solver": config.solver,
        "lambda_grid": list(config.lambda_grid),
        "sigma_grid": list(config.sigma_grid),
        "periods": list(config.periods),
        "rng": "numpy Philox(seed) -> standard_normal; x0 draws first, then w_0..w_{T-1}",
    }
    if extra:
        doc.update(extra)
    with open(Path(out_dir) / "manifest.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_monte_carlo(config: ExperimentConfig) -> MonteCarloResult:
    """monte_carlo plus persisted outputs when ``out_dir`` is set."""
    config.validate()
    result = monte_carlo(config)
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_summary_csv(result.rows, out / "summary.csv")
        write_per_seed_csv(result, out / "per_seed.csv")
        write_manifest(out, "montecarlo", config)
    return result


def sweep(config: ExperimentConfig) -> list:
    """Monte Carlo at every (lambda, sigma) grid point with Sigma_w = sigma * I.

    Returns long-format rows ``(lambda, sigma, policy, mean_cost, mean_comms, N)``
    and writes ``sweep.csv`` when ``out_dir`` is set.
    """
    config.validate()
    if not config.lambda_grid or not config.sigma_grid:
        raise ModelError("sweep needs nonempty lambda and sigma grids")
    base = config.model
    n = base.n
    out = []
    for lam in config.lambda_grid:
        for sigma in config.sigma_grid:
            model = validate_model(base.replace(lam=float(lam), Sigma_w=float(sigma) * np.eye(n)))
            sub = ExperimentConfig(model, config.policies, config.n_seeds, config.seed0,
                                   solver=config.solver, workers=config.workers)
            res = monte_carlo(sub)
            for r in res.rows:
                out.append((float(lam), float(sigma), r.policy, r.mean_cost, r.mean_comms, r.N))
    if config.out_dir:
        path = Path(config.out_dir)
        path.mkdir(parents=True, exist_ok=True)
        with open(path / "sweep.csv", "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["lambda", "sigma", "policy", "mean_cost", "mean_comms", "N"])
            for lam, sigma, p, c, m, N in out:
                wr.writerow([repr(lam), repr(sigma), p, repr(c), repr(m), N])
        write_manifest(path, "sweep", config)
    return out


@dataclass
class DominanceReport:
    rows: list = field(default_factory=list)  # dicts per deterministic policy
    passed: bool = True
    mc: MonteCarloResult | None = None


def validate_dominance(config: ExperimentConfig, raise_on_fail=True) -> DominanceReport:
    """Paired-seed check that MPC is no worse than each deterministic schedule.

    Compares MPC against Offline and Periodic(p) for every p in
    ``config.periods`` (1..T when empty). A policy passes when
    mean(MPC) <= mean(det) + 2 * SE(paired difference).

    Raises:
        StatisticalViolation: with the report attached, if any comparison fails
            and ``raise_on_fail`` is set.
    """
    config.validate()
    periods = config.periods or tuple(range(1, config.model.T + 1))
    det = ["offline"] + [f"periodic{int(p)}" for p in periods]
    policies = ["mpc"] + [p for p in det]
    sub = ExperimentConfig(config.model, tuple(policies), config.n_seeds, config.seed0,
                           solver=config.solver, workers=config.workers)
    mc = monte_carlo(sub)
    report = DominanceReport(mc=mc)
    N = len(mc.seeds)
    mpc = mc.costs["mpc"]
    for p in det:
        d = mpc - mc.costs[p]
        se = float(np.std(d, ddof=1) / math.sqrt(N)) if N > 1 else 0.0
        ok = bool(float(np.mean(mpc)) <= float(np.mean(mc.costs[p])) + 2.0 * se)
        report.rows.append({
            "policy": p, "mean_mpc": float(np.mean(mpc)), "mean_det": float(np.mean(mc.costs[p])),
            "mean_diff": float(np.mean(d)), "se_diff": se,
            "diff_q05": float(np.quantile(d, 0.05)), "diff_q50": float(np.median(d)),
            "diff_q95": float(np.quantile(d, 0.95)), "passed": ok,
        })
        report.passed &= ok
    if not report.passed and raise_on_fail:
        bad = [r["policy"] for r in report.rows if not r["passed"]]
        raise StatisticalViolation(f"MPC worse than {', '.join(bad)} beyond 2 SE", data=report)
    return report


# --- solver timing ---------------------------------------------------------

def random_instance(n, T, rng, m=1):
    """Random plant with spectral radius in [0.8, 1.1] and unit-scale weights."""
    A = rng.standard_normal((n, n))
    rho = max(abs(np.linalg.eigvals(A)))
    A *= rng.uniform(0.8, 1.1) / rho
    B = rng.standard_normal((n, m))
    G = rng.standard_normal((n, n))
    model = validate_model(SystemModel(
        A=A, B=B, Q=np.eye(n), QT=np.eye(n), R=np.eye(m), Sigma_w=0.5 * np.eye(n) + 0.05 * G @ G.T,
        lam=1.0, T=T, x0_mean=np.zeros(n), x0_cov=np.eye(n)))
    return model


def _scaled_lambda(table, rng):
    # Penalty drawn relative to the instance's own coefficient scale, so the
    # search difficulty is comparable across state dimensions.
    c = table.coefficients()
    scale = float(np.sum(c)) / c.shape[0]
    return scale * 10 ** rng.uniform(-1.0, 0.5)


def bench_solvers(n_grid=(2, 8, 16, 32), T=9, trials=50, seed=0, brute=True, naive=True):
    """Wall-time statistics per state dimension for every solver path.

    Stages: ``precompute`` (gains, kernels, binding), ``milp_build``, ``bnb``,
    ``dp``, ``brute`` and ``naive`` (enumeration of all schedules with the
    covariance recursion; ``naive_per_eval`` divides by 2^T).

    Trials are interleaved across the n grid so slow drift in machine speed
    does not masquerade as a dependence on n. Each n has its own instance
    stream, so instances do not depend on the grid.
    """
    rngs = {n: np.random.default_rng([seed, n]) for n in n_grid}
    stages = ("precompute", "milp_build", "bnb", "dp", "brute", "naive", "naive_per_eval",
              "bnb_nodes")
    samples = {n: {st: [] for st in stages} for n in n_grid}
    for _ in range(trials):
        for n in n_grid:
            _bench_trial(n, T, rngs[n], samples[n], brute, naive)
    rows = []
    for n in n_grid:
        for stage in stages:
            ts = samples[n][stage]
            if ts:
                rows.append({"n": n, "T": T, "trials": trials, "stage": stage,
                             "mean_s": float(np.mean(ts)), "median_s": float(np.median(ts)),
                             "min_s": float(np.min(ts)), "max_s": float(np.max(ts))})
    return rows


def _bench_trial(n, T, rng, times, brute, naive):
    model = random_instance(n, T, rng)
    e = rng.standard_normal(n)
    t0 = time.perf_counter()
    gains = solve_gains(model)
    table = bind_error(build_noise_kernels(gains, model, 0), e)
    times["precompute"].append(time.perf_counter() - t0)
    lam = _scaled_lambda(table, rng)
    model = model.replace(lam=lam)
    t0 = time.perf_counter()
    prob = build_milp(table, lam)
    times["milp_build"].append(time.perf_counter() - t0)
    r = solve_bnb(prob)
    times["bnb"].append(r.wall_time)
    times["bnb_nodes"].append(r.nodes_explored)
    times["dp"].append(solve_dp(table, lam).wall_time)
    if brute:
        times["brute"].append(solve_bruteforce(table, lam).wall_time)
    if naive:
        t0 = time.perf_counter()
        for code in range(1 << T):
            bits = tuple((code >> (T - 1 - i)) & 1 for i in range(T))
            cost_matrix_recursion(model, gains, 0, e, ScheduleVector(0, bits))
        dt = time.perf_counter() - t0
        times["naive"].append(dt)
        times["naive_per_eval"].append(dt / (1 << T))


def write_bench_csv(rows, path):
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=["n", "T", "trials", "stage", "mean_s", "median_s", "min_s", "max_s"],
                            lineterminator="\n")
        wr.writeheader()
        for r in rows:
            wr.writerow(r)


def bench_value(rows, n, stage, stat="mean_s"):
    for r in rows:
        if r["n"] == n and r["stage"] == stage:
            return r[stat]
    raise KeyError((n, stage))

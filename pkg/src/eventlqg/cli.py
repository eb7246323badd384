"""Command-line front-end.

Exit codes: 0 success, 1 usage error, 2 numerical/validation error,
3 property violation (oracle disagreement, unsound certificate, failed
statistical check). Errors go to stderr as ``ERROR[<code>]: <message>``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .certificates import certificate_at, certificate_soundness_check
from .errors import ModelError, PropertyViolation
from .experiments import (
    ExperimentConfig, bench_solvers, bench_value, run_monte_carlo, sweep, validate_dominance,
    write_bench_csv,
)
from .kernels import bind_error, build_noise_kernels
from .model import double_integrator, load_model
from .riccati import solve_gains
from .simulate import make_policy, run_episode
from .solver import cross_validate, solve

EXIT_USAGE, EXIT_NUMERIC, EXIT_PROPERTY = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_grid(text):
    """``a:b:step`` (inclusive of b) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid must be a:b:step, got {text!r}")
        a, b, step = (float(p) for p in parts)
        if step <= 0 or b < a:
            raise UsageError(f"bad grid {text!r}")
        count = int(np.floor((b - a) / step + 1e-9)) + 1
        return tuple(float(a + i * step) for i in range(count))
    return tuple(float(v) for v in text.split(",") if v.strip())


def parse_vector(text):
    try:
        return np.array([float(v) for v in text.replace(" ", "").split(",") if v], dtype=float)
    except ValueError:
        raise UsageError(f"cannot parse vector {text!r}") from None


def _load(path):
    if path in ("builtin:double-integrator", "builtin:di"):
        return double_integrator()
    if not Path(path).exists():
        raise UsageError(f"model file {path} not found")
    return load_model(path)


def _policies(args, T):
    names = [p.strip() for p in args.policies.split(",") if p.strip()]
    if args.periods:
        names += [f"periodic{int(p)}" for p in parse_grid(args.periods)]
    for n in names:
        try:
            make_policy(n)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return tuple(dict.fromkeys(names))


def _fmt_schedule(sched):
    return "(" + ", ".join("send" if b == 0 else "skip" for b in sched.theta_bar) + ")"


def cmd_solve(args):
    model = _load(args.model)
    if args.lam is not None:
        model = model.replace(lam=args.lam)
    k = args.k
    if not 0 <= k < model.T:
        raise UsageError(f"--k must lie in [0, {model.T - 1}]")
    e = parse_vector(args.e0)
    gains = solve_gains(model)
    if args.check:
        rep = cross_validate(model, gains, k, e)
        res = rep.results[args.solver]
        print("cross-check: " + ", ".join(f"{n}={r.objective:.12g}" for n, r in rep.results.items()))
    else:
        res = solve(bind_error(build_noise_kernels(gains, model, k), e), model.lam, args.solver)
    print(f"window: k={k}..{model.T - 1}")
    print(f"schedule: {_fmt_schedule(res.schedule)}")
    print(f"theta: {' '.join(str(t) for t in res.schedule.theta)}")
    print(f"objective: {res.objective:.12g}")
    print(f"solver: {res.solver} nodes={res.nodes_explored} time={res.wall_time:.3e}s")
    return 0


def cmd_certify(args):
    model = _load(args.model)
    if args.lam is not None:
        model = model.replace(lam=args.lam)
    if not 0 <= args.k < model.T:
        raise UsageError(f"--k must lie in [0, {model.T - 1}]")
    gains = solve_gains(model)
    dec = certificate_at(gains, args.k, parse_vector(args.e), model.lam)
    print(f"verdict: {dec.verdict}")
    print(f"lower: {dec.lower:.12g}")
    print(f"upper: {dec.upper:.12g}")
    return 0


def cmd_simulate(args):
    model = _load(args.model)
    seed = args.seed if args.seed is not None else (model.seed or 0)
    policy = make_policy(args.policy, solver=args.solver)
    tr = run_episode(model, None, policy, seed)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            tr.to_csv(fh)
    print(f"policy: {policy.name} seed: {seed}")
    print(f"cost: {tr.realized_cost:.12g}")
    print(f"comms: {tr.comm_count}")
    print("theta: " + "".join(str(t) for t in tr.theta))
    return 0


def _config(args, model, policies):
    return ExperimentConfig(
        model=model, policies=policies, n_seeds=args.seeds, seed0=args.seed0,
        out_dir=args.out, solver=args.solver, workers=args.workers,
        lambda_grid=parse_grid(args.lambda_grid) if getattr(args, "lambda_grid", None) else (),
        sigma_grid=parse_grid(args.sigma_grid) if getattr(args, "sigma_grid", None) else (),
        periods=parse_grid(args.periods) if args.periods else (),
    )


def cmd_montecarlo(args):
    model = _load(args.model)
    cfg = _config(args, model, _policies(args, model.T))
    res = run_monte_carlo(cfg)
    print(f"{'Strategy':<16}{'Cost':>14}{'Comm. Avg.':>12}{'SE':>10}")
    for r in res.rows:
        print(f"{r.policy:<16}{r.mean_cost:>14.2f}{r.mean_comms:>12.2f}{r.se_cost:>10.2f}")
    if "mpc" in cfg.policies:
        print(f"mpc certified fraction: {res.certified_fraction:.3f}")
    if args.dominance:
        rep = validate_dominance(_config(args, model, cfg.policies), raise_on_fail=False)
        for row in rep.rows:
            print(f"mpc vs {row['policy']}: diff {row['mean_diff']:.2f} +- {row['se_diff']:.2f}"
                  f" {'ok' if row['passed'] else 'VIOLATION'}")
        if not rep.passed:
            raise PropertyViolation("MPC dominance check failed")
    return 0


def cmd_sweep(args):
    model = _load(args.model)
    if not args.lambda_grid or not args.sigma_grid:
        raise UsageError("sweep needs --lambda-grid and --sigma-grid")
    cfg = _config(args, model, _policies(args, model.T))
    rows = sweep(cfg)
    print("lambda,sigma,policy,mean_cost,mean_comms,N")
    for lam, sigma, p, c, m, N in rows:
        print(f"{lam:g},{sigma:g},{p},{c:.6g},{m:.4g},{N}")
    return 0


def cmd_bench(args):
    n_grid = tuple(int(v) for v in parse_grid(args.n_grid))
    rows = bench_solvers(n_grid, T=args.T, trials=args.trials, seed=args.seed0,
                         brute=not args.no_brute)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_bench_csv(rows, out / "bench.csv")
    print(f"{'n':>4} {'bnb[s]':>10} {'dp[s]':>10} {'naive/eval[s]':>14} {'nodes':>7}")
    for n in n_grid:
        print(f"{n:>4} {bench_value(rows, n, 'bnb'):>10.3e} {bench_value(rows, n, 'dp'):>10.3e}"
              f" {bench_value(rows, n, 'naive_per_eval'):>14.3e}"
              f" {bench_value(rows, n, 'bnb_nodes'):>7.1f}")
    return 0


def _random_model(rng, n, T):
    from .experiments import random_instance
    model = random_instance(n, T, rng)
    return model.replace(lam=float(10 ** rng.uniform(-2, 2)))


def cmd_selftest(args):
    rng = np.random.default_rng(args.seed0)
    n_ok = 0
    for i in range(args.instances):
        n = int(rng.integers(1, 4))
        T = int(rng.integers(1, 11))
        model = _random_model(rng, n, T)
        gains = solve_gains(model)
        k = int(rng.integers(0, T))
        e = rng.standard_normal(n) * 10 ** rng.uniform(-1, 1)
        cross_validate(model, gains, k, e)
        certificate_soundness_check(model, gains, k, e)
        n_ok += 1
    print(f"selftest: {n_ok} instances, oracle agreement and certificate soundness ok")
    return 0


def build_parser():
    p = _Parser(prog="eventlqg", description="Optimal event-triggered LQG scheduling")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, model_required=True):
        sp.add_argument("--model", required=model_required,
                        help="model JSON path or builtin:double-integrator")
        sp.add_argument("--solver", choices=("dp", "bnb", "brute"), default="dp")

    s = sub.add_parser("solve", help="solve one scheduling window")
    common(s)
    s.add_argument("--e0", required=True, help="scheduler error at k, comma-separated")
    s.add_argument("--k", type=int, default=0)
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--check", action="store_true", help="cross-validate all three solvers")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("certify", help="one-step send/skip certificate")
    common(s)
    s.add_argument("--e", required=True)
    s.add_argument("--k", type=int, default=0)
    s.add_argument("--lambda", dest="lam", type=float)
    s.set_defaults(func=cmd_certify)

    s = sub.add_parser("simulate", help="run one closed-loop episode")
    common(s)
    s.add_argument("--policy", default="mpc")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="trace CSV path")
    s.set_defaults(func=cmd_simulate)

    for name, fn, default_pol, seeds in (("montecarlo", cmd_montecarlo, ",".join(
            ("mpc", "offline", "continuous", "openloop")), 1000), ("sweep", cmd_sweep, "mpc,offline", 100)):
        s = sub.add_parser(name)
        common(s)
        s.add_argument("--seeds", type=int, default=seeds)
        s.add_argument("--seed0", type=int, default=0)
        s.add_argument("--policies", default=default_pol)
        s.add_argument("--periods", help="periodic baselines, e.g. 1:25:1 or 2,5,10")
        s.add_argument("--out")
        s.add_argument("--workers", type=int, default=1)
        s.add_argument("--lambda-grid")
        s.add_argument("--sigma-grid")
        if name == "montecarlo":
            s.add_argument("--dominance", action="store_true",
                           help="also run the paired MPC-dominance check")
        s.set_defaults(func=fn)

    s = sub.add_parser("bench", help="solver timing versus state dimension")
    s.add_argument("--n-grid", default="2,8,16,32")
    s.add_argument("--T", type=int, default=9)
    s.add_argument("--trials", type=int, default=50)
    s.add_argument("--seed0", type=int, default=0)
    s.add_argument("--no-brute", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("selftest", help="cross-validate solvers and certificates")
    s.add_argument("--instances", type=int, default=100)
    s.add_argument("--seed0", type=int, default=0)
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "seeds", 1) < 1:
            raise UsageError("--seeds must be >= 1")
        if getattr(args, "workers", 1) < 1:
            raise UsageError("--workers must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(f"ERROR[{EXIT_USAGE}]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PropertyViolation as exc:
        print(f"ERROR[{EXIT_PROPERTY}]: {exc}", file=sys.stderr)
        return EXIT_PROPERTY
    except (ModelError, ValueError, np.linalg.LinAlgError, json.JSONDecodeError) as exc:
        print(f"ERROR[{EXIT_NUMERIC}]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

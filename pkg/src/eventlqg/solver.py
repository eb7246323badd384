"""Exact solvers for the window scheduling problem.

Three independent routes to the same optimum:

* :func:`solve_bnb` - depth-first branch-and-bound on the MILP, branching on
  skip indicators only (monomials follow from them).
* :func:`solve_dp` - dynamic programming over the last send time. A send
  zeroes the error, so the cost after it does not depend on anything earlier.
* :func:`solve_bruteforce` - vectorized enumeration of every schedule.

Ties are broken toward fewer transmissions, then toward the lexicographically
smallest skip vector (i.e. earlier sends); B&B keeps the first optimum it
meets in its search order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedProblem, OracleDisagreement, WindowMismatch, WindowTooLarge
from .kernels import KernelTable, bind_error, build_noise_kernels
from .milp import MilpProblem, ScheduleVector, build_milp, cost_matrix_recursion, cost_unfolded

BRUTE_MAX_WINDOW = 22
PRUNE_TOL = 1e-12
REL_TOL = 1e-9


@dataclass
class SolveResult:
    schedule: ScheduleVector
    objective: float
    nodes_explored: int = 0
    wall_time: float = 0.0
    solver: str = ""


def objectives_close(a, b, rel=REL_TOL):
    return abs(a - b) <= rel * max(abs(a), abs(b)) + 1e-12


def _tie_tol(x):
    return 1e-12 * max(1.0, abs(x))


def _prefer(a, b):
    """True if candidate a = (cost, sends, bits) beats b."""
    if b is None:
        return True
    tol = _tie_tol(min(a[0], b[0]))
    if a[0] < b[0] - tol:
        return True
    if a[0] > b[0] + tol:
        return False
    return (a[1], a[2]) < (b[1], b[2])


def _window_coefficients(table):
    if not isinstance(table, KernelTable):
        raise TypeError("expected a KernelTable")
    if not table.bound:
        raise WindowMismatch("kernel table has no bound error")
    return table.coefficients()


def solve_bruteforce(table: KernelTable, lam: float, chunk_bits: int = 16) -> SolveResult:
    """Enumerate all 2^(T-k) skip vectors.

    Raises:
        WindowTooLarge: window longer than 22 steps.
    """
    t0 = time.perf_counter()
    c = _window_coefficients(table)
    L = c.shape[0]
    if L > BRUTE_MAX_WINDOW:
        raise WindowTooLarge(f"brute force limited to windows of {BRUTE_MAX_WINDOW}, got {L}")
    shifts = np.arange(L - 1, -1, -1, dtype=np.int64)
    total = 1 << L
    step = 1 << min(chunk_bits, L)
    best = None
    for start in range(0, total, step):
        codes = np.arange(start, min(start + step, total), dtype=np.int64)
        bits = ((codes[:, None] >> shifts[None, :]) & 1).astype(float)
        skips = bits.sum(axis=1)
        cost = lam * (L - skips)
        for i in range(L):
            prod = np.ones(codes.shape[0])
            for j in range(i, -1, -1):
                prod *= bits[:, j]
                cost += prod * c[i, j]
        cmin = cost.min()
        cand = np.flatnonzero(cost <= cmin + _tie_tol(cmin))
        sends = (L - skips[cand]).astype(int)
        order = np.lexsort((codes[cand], sends))
        idx = cand[order[0]]
        key = (float(cost[idx]), int(L - skips[idx]), tuple(int(b) for b in bits[idx]))
        if _prefer(key, best):
            best = key
    sched = ScheduleVector(table.k, best[2])
    return SolveResult(sched, best[0], 0, time.perf_counter() - t0, "brute")


def solve_dp(table: KernelTable, lam: float) -> SolveResult:
    """Exact optimum in O((T-k)^2) via the renewal structure.

    ``F[a]`` is the best cost of positions a..L-1 when the error carried into
    position a started at a (a send at a-1, or a = 0 with the bound error).
    From ``a`` the next send happens at some s >= a, or never.
    """
    t0 = time.perf_counter()
    c = _window_coefficients(table)
    L = c.shape[0]
    # rowcum[i, a] = sum_{j=a}^{i} c[i, j]: skip cost at i when the error started at a
    rowcum = np.cumsum(c[:, ::-1], axis=1)[:, ::-1]
    F = [None] * (L + 1)
    F[L] = (0.0, 0, ())
    for a in range(L - 1, -1, -1):
        best = None
        seg = 0.0
        for s in range(a, L):
            tail = F[s + 1]
            cand = (seg + lam + tail[0], tail[1] + 1, (1,) * (s - a) + (0,) + tail[2])
            if _prefer(cand, best):
                best = cand
            seg += rowcum[s, a]
        cand = (seg, 0, (1,) * (L - a))
        if _prefer(cand, best):
            best = cand
        F[a] = best
    cost, _, bits = F[0]
    return SolveResult(ScheduleVector(table.k, bits), float(cost), 0,
                       time.perf_counter() - t0, "dp")


def _branching_bounds(c, lam):
    """Per-node certificate quantities, generalized to a carried error start.

    lower[a, i] = skip cost at i with error started at a, minus lambda;
    upper[a, i] = that error's contribution at i and every later step, minus lambda.
    """
    L = c.shape[0]
    P = np.zeros((L, L + 1))
    P[:, 1:] = np.cumsum(c, axis=1)
    SP = np.cumsum(P[::-1], axis=0)[::-1]  # SP[i, a] = sum_{t>=i} P[t, a]
    lower = np.full((L + 1, L), np.nan)
    upper = np.full((L + 1, L), np.nan)
    for i in range(L):
        for a in range(i + 1):
            lower[a, i] = P[i, i + 1] - P[i, a] - lam
            upper[a, i] = SP[i, i + 1] - SP[i, a] - lam
    return lower, upper


def solve_bnb(problem: MilpProblem, incumbent_hint: SolveResult | None = None,
              on_node=None) -> SolveResult:
    """Depth-first branch-and-bound over skip indicators in time order.

    Node bound = cost of the decided prefix + sum over undecided steps of
    min(lambda, c[t, t]); valid because every remaining coefficient is
    nonnegative and skipping step t costs at least its own noise term.

    Args:
        problem: Output of :func:`build_milp`.
        incumbent_hint: Known feasible solution; seeds the incumbent.
        on_node: Optional callback ``(prefix_bits, bound)`` for every node
            that survives pruning (instrumentation).

    Raises:
        MalformedProblem: inconsistent variable maps or coefficients.
    """
    t0 = time.perf_counter()
    L = problem.window
    if L < 1 or len(problem.theta_index) != L or len(problem.mu_index) != L * (L + 1) // 2:
        raise MalformedProblem("variable maps do not match the window length")
    c = problem.coefficient_matrix()
    if not np.all(np.isfinite(c)) or c.min(initial=0.0) < -1e-9:
        raise MalformedProblem("monomial coefficients must be finite and nonnegative")
    lam = problem.lam
    rowcum = np.cumsum(c[:, ::-1], axis=1)[:, ::-1]
    floor = np.minimum(lam, np.diag(c))
    tail_lb = np.concatenate([np.cumsum(floor[::-1])[::-1], [0.0]])
    lower, upper = _branching_bounds(c, lam)

    if incumbent_hint is not None:
        if len(incumbent_hint.schedule) != L:
            raise MalformedProblem("incumbent hint does not match the window")
        inc_cost = float(incumbent_hint.objective)
        inc_bits = incumbent_hint.schedule.theta_bar
    else:
        inc_cost, inc_bits = np.inf, None

    nodes = 0
    # node: (depth, error start, prefix cost, bits)
    stack = [(0, 0, 0.0, ())]
    while stack:
        i, a, cost, bits = stack.pop()
        bound = cost + tail_lb[i]
        if bound >= inc_cost - PRUNE_TOL:
            continue
        nodes += 1
        if on_node is not None:
            on_node(bits, bound)
        if i == L:
            inc_cost, inc_bits = cost, bits
            continue
        skip = (i + 1, a, cost + rowcum[i, a], bits + (1,))
        send = (i + 1, i + 1, cost + lam, bits + (0,))
        if upper[a, i] > 0 and lower[a, i] >= 0:
            stack += [skip, send]  # send explored first
        else:
            stack += [send, skip]
    if inc_bits is None:
        raise MalformedProblem("branch-and-bound found no feasible schedule")
    return SolveResult(ScheduleVector(problem.k, inc_bits), float(inc_cost), nodes,
                       time.perf_counter() - t0, "bnb")


def solve(table: KernelTable, lam: float, method: str = "dp") -> SolveResult:
    if method == "dp":
        return solve_dp(table, lam)
    if method == "bnb":
        return solve_bnb(build_milp(table, lam))
    if method == "brute":
        return solve_bruteforce(table, lam)
    raise ValueError(f"unknown solver {method!r}")


@dataclass
class CrossValidation:
    results: dict
    recursion_costs: dict = field(default_factory=dict)

    @property
    def objective(self):
        return self.results["dp"].objective


def cross_validate(model, gains, k, e_s, lam=None, table=None) -> CrossValidation:
    """Run all three solvers and check them against each other.

    Each returned schedule is re-costed with the covariance recursion, which
    shares no code with the kernel path.

    Raises:
        OracleDisagreement: carries the three results in ``.data``.
    """
    lam = model.lam if lam is None else float(lam)
    if lam != model.lam:
        model = model.replace(lam=lam)
    if table is None:
        table = build_noise_kernels(gains, model, k)
    table = bind_error(table, e_s)
    results = {
        "bnb": solve_bnb(build_milp(table, lam)),
        "dp": solve_dp(table, lam),
        "brute": solve_bruteforce(table, lam),
    }
    rec = {name: cost_matrix_recursion(model, gains, k, e_s, r.schedule)
           for name, r in results.items()}
    report = CrossValidation(results, rec)
    ref = results["brute"].objective
    problems = []
    for name, r in results.items():
        if not objectives_close(r.objective, ref):
            problems.append(f"{name} objective {r.objective!r} != brute {ref!r}")
        if not objectives_close(rec[name], r.objective):
            problems.append(f"{name} schedule re-costs to {rec[name]!r}, claimed {r.objective!r}")
        if not objectives_close(cost_unfolded(table, r.schedule, lam), r.objective):
            problems.append(f"{name} schedule does not achieve its objective")
    if problems:
        raise OracleDisagreement("; ".join(problems), data=report)
    return report

"""Scheduling MILP over skip indicators and its two cost evaluators.

Decision variables are skip indicators ``theta_bar[t]`` (1 = skip, 0 = send)
on the window [k, T-1] plus one binary monomial ``mu[t, tau]`` per pair
k <= tau <= t <= T-1, linked to the skips by McCormick rows that are exact on
binaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, LengthMismatch, WindowMismatch
from .kernels import KernelTable
from .model import MatrixWorkspace, symmetrize


@dataclass(frozen=True)
class ScheduleVector:
    k: int
    theta_bar: tuple

    def __post_init__(self):
        bits = tuple(int(b) for b in self.theta_bar)
        if any(b not in (0, 1) for b in bits):
            raise ValueError(f"schedule entries must be binary, got {self.theta_bar}")
        object.__setattr__(self, "theta_bar", bits)

    def __len__(self):
        return len(self.theta_bar)

    @property
    def theta(self):
        """Transmission indicators, 1 = send."""
        return tuple(1 - b for b in self.theta_bar)

    @property
    def sends(self):
        return len(self.theta_bar) - sum(self.theta_bar)

    def first(self):
        return self.theta_bar[0]

    def __str__(self):
        return "".join("S" if b == 0 else "." for b in self.theta_bar)


def _check_window(sched, k, T):
    if sched.k != k or len(sched) != T - k:
        raise WindowMismatch(
            f"schedule covers k={sched.k}, length {len(sched)}; expected k={k}, length {T - k}")


def cost_matrix_recursion(model, gains, k, e_s, sched: ScheduleVector, workspace=None) -> float:
    """Expected remaining cost by propagating the error covariance directly.

    Sigma_k = skip_k e e', Sigma_{t+1} = skip_{t+1} (A Sigma_t A' + Sigma_w),
    cost = sum_t tr(Gamma_t Sigma_t) + lambda (1 - skip_t).
    """
    T = model.T
    _check_window(sched, k, T)
    e = np.atleast_1d(np.asarray(e_s, dtype=float))
    n = model.n
    if e.shape != (n,):
        raise DimensionMismatch(f"error vector must have length {n}, got {e.shape}")
    ws = workspace if workspace is not None else MatrixWorkspace(n, model.m)
    A, Sw, lam = model.A, model.Sigma_w, model.lam
    bits = sched.theta_bar
    Sigma = np.outer(e, e) * bits[0]
    total = 0.0
    for i, t in enumerate(range(k, T)):
        if i > 0:
            if bits[i]:
                np.matmul(A, Sigma, out=ws.nn)
                np.matmul(ws.nn, A.T, out=ws.nn2)
                Sigma = symmetrize(ws.nn2 + Sw)
            else:
                Sigma = np.zeros((n, n))
        total += float(np.sum(gains.Gamma[t] * Sigma)) + lam * (1 - bits[i])
    return total


def cost_unfolded(table: KernelTable, sched: ScheduleVector, lam: float) -> float:
    """Same cost from the kernel coefficients, using running products of skips."""
    if not table.bound:
        raise WindowMismatch("kernel table has no bound error")
    _check_window(sched, table.k, table.T)
    c = table.coefficients()
    bits = sched.theta_bar
    L = len(bits)
    total = lam * (L - sum(bits))
    for i in range(L):
        row = c[i]
        j = i
        while j >= 0 and bits[j]:
            total += row[j]
            j -= 1
    return float(total)


@dataclass(frozen=True, eq=False)
class MilpProblem:
    """Linear program in (theta_bar, mu) with a separate constant term.

    Variables are numbered theta first (window order), then mu in t-major,
    tau-ascending order. Constraints are rows ``sum(coef * var) <= rhs`` with
    ``kind`` either "ub" (mu <= theta_bar[s]) or "lb" (the aggregated lower
    bound, written as sum theta_bar - mu <= t - tau).
    """

    k: int
    T: int
    lam: float
    theta_index: dict
    mu_index: dict
    c_mu: dict
    c_theta: dict
    constant: float
    constraints: list = field(repr=False)

    @property
    def window(self):
        return self.T - self.k

    @property
    def num_vars(self):
        return len(self.theta_index) + len(self.mu_index)

    def coefficient_matrix(self) -> np.ndarray:
        """Window-relative c[i, j] = objective coefficient of mu[k+i, k+j]."""
        L = self.window
        c = np.zeros((L, L))
        for (t, tau), v in self.c_mu.items():
            c[t - self.k, tau - self.k] = v
        return c

    def to_lp(self) -> str:
        """CPLEX-LP style text for cross-checking with an external solver."""
        def name(idx):
            return self._names[idx]

        lines = ["\\ event-triggered scheduling window k=%d T=%d" % (self.k, self.T),
                 "\\ objective constant %.17g" % self.constant, "Minimize", " obj:"]
        terms = [f"{self.c_theta[t]:+.17g} {name(i)}" for t, i in self.theta_index.items()]
        terms += [f"{self.c_mu[p]:+.17g} {name(i)}" for p, i in self.mu_index.items()]
        lines += ["   " + t for t in terms]
        lines.append("Subject To")
        for r, (coefs, rhs, kind) in enumerate(self.constraints):
            body = " ".join(f"{c:+g} {name(v)}" for v, c in coefs)
            lines.append(f" {kind}{r}: {body} <= {rhs:g}")
        lines.append("Binary")
        lines += [" " + name(i) for i in range(self.num_vars)]
        lines.append("End")
        return "\n".join(lines) + "\n"

    @property
    def _names(self):
        names = [None] * self.num_vars
        for t, i in self.theta_index.items():
            names[i] = f"tb_{t}"
        for (t, tau), i in self.mu_index.items():
            names[i] = f"mu_{t}_{tau}"
        return names


def build_milp(table: KernelTable, lam: float) -> MilpProblem:
    if not table.bound:
        raise WindowMismatch("kernel table has no bound error")
    k, T = table.k, table.T
    c = table.coefficients()
    theta_index = {t: i for i, t in enumerate(range(k, T))}
    mu_index = {}
    c_mu = {}
    for t in range(k, T):
        for tau in range(k, t + 1):
            mu_index[(t, tau)] = len(theta_index) + len(mu_index)
            c_mu[(t, tau)] = float(c[t - k, tau - k])
    constraints = []
    for (t, tau), mi in mu_index.items():
        for s in range(tau, t + 1):
            constraints.append((((mi, 1.0), (theta_index[s], -1.0)), 0.0, "ub"))
        row = tuple((theta_index[s], 1.0) for s in range(tau, t + 1)) + ((mi, -1.0),)
        constraints.append((row, float(t - tau), "lb"))
    return MilpProblem(
        k=k, T=T, lam=float(lam), theta_index=theta_index, mu_index=mu_index, c_mu=c_mu,
        c_theta={t: -float(lam) for t in theta_index}, constant=float(lam) * (T - k),
        constraints=constraints,
    )


def implied_mu(problem: MilpProblem, theta_bar) -> tuple:
    """Monomial values forced by a skip assignment, in variable order."""
    k = problem.k
    out = []
    for (t, tau) in problem.mu_index:
        out.append(int(all(theta_bar[s - k] for s in range(tau, t + 1))))
    return tuple(out)


def check_assignment(problem: MilpProblem, theta_bar, mu):
    """Return ``(feasible, objective)`` for a full binary assignment.

    ``mu`` is a sequence in variable order or a mapping (t, tau) -> value.
    """
    theta_bar = tuple(int(b) for b in theta_bar)
    if len(theta_bar) != len(problem.theta_index):
        raise LengthMismatch(f"expected {len(problem.theta_index)} skip bits, got {len(theta_bar)}")
    if isinstance(mu, dict):
        try:
            mu = tuple(int(mu[p]) for p in problem.mu_index)
        except KeyError as exc:
            raise LengthMismatch(f"missing monomial {exc.args[0]}") from None
    mu = tuple(int(v) for v in mu)
    if len(mu) != len(problem.mu_index):
        raise LengthMismatch(f"expected {len(problem.mu_index)} monomials, got {len(mu)}")
    x = theta_bar + mu
    feasible = all(v in (0, 1) for v in x)
    for coefs, rhs, _ in problem.constraints:
        if sum(c * x[v] for v, c in coefs) > rhs + 1e-12:
            feasible = False
            break
    obj = problem.constant
    obj += sum(problem.c_theta[t] * x[i] for t, i in problem.theta_index.items())
    obj += sum(problem.c_mu[p] * x[i] for p, i in problem.mu_index.items())
    return feasible, float(obj)

"""Closed-loop simulation: plant, event-triggered estimator, CE controller, schedulers.

Random numbers come from numpy's Philox (4x32, 10 rounds) counter-based bit
generator keyed by the episode seed. Each episode draws, in order, n standard
normals for the initial state and then T*n for the process noise (row k is
w_k), all via ``Generator.standard_normal``; Gaussian samples are obtained by
multiplying with Cholesky factors of x0_cov and Sigma_w. Every policy run
with the same seed therefore sees the same x0 and w sequence.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .certificates import Verdict, certificate_at
from .errors import DimensionMismatch
from .kernels import bind_covariance, bind_error, build_all_kernels
from .milp import ScheduleVector
from .model import SystemModel, cholesky_factor
from .riccati import GainSchedule, solve_gains
from .solver import solve


@dataclass(eq=False)
class Precomputed:
    """Everything a scheduler needs that does not depend on the realization."""

    model: SystemModel
    gains: GainSchedule
    tables: list

    @classmethod
    def build(cls, model, gains=None):
        if gains is None or gains.W is None:
            gains = solve_gains(model)
        return cls(model, gains, build_all_kernels(gains, model))


@dataclass
class NoiseStream:
    seed: int
    chol_w: np.ndarray
    chol_x0: np.ndarray

    @classmethod
    def for_model(cls, model, seed):
        return cls(int(seed), cholesky_factor(model.Sigma_w), cholesky_factor(model.x0_cov))

    def draw(self, model):
        """Return ``(x0, w)`` with w of shape (T, n)."""
        n, T = model.n, model.T
        rng = np.random.Generator(np.random.Philox(self.seed))
        z0 = rng.standard_normal(n)
        zw = rng.standard_normal((T, n))
        return model.x0_mean + self.chol_x0 @ z0, zw @ self.chol_w.T


# --- scheduling policies -------------------------------------------------

class SchedulerPolicy:
    """Maps (k, scheduler error) to a transmission decision theta in {0, 1}."""

    name = "policy"
    deterministic = False

    def reset(self, pre: Precomputed, x0):
        pass

    def decide(self, k, e_s, pre: Precomputed) -> int:
        raise NotImplementedError


class ContinuousPolicy(SchedulerPolicy):
    name = "continuous"
    deterministic = True

    def decide(self, k, e_s, pre):
        return 1


class OpenLoopPolicy(SchedulerPolicy):
    name = "openloop"
    deterministic = True

    def decide(self, k, e_s, pre):
        return 0


class PeriodicPolicy(SchedulerPolicy):
    deterministic = True

    def __init__(self, period):
        if int(period) < 1:
            raise ValueError("period must be >= 1")
        self.period = int(period)
        self.name = f"periodic{self.period}"

    def decide(self, k, e_s, pre):
        return int(k % self.period == 0)


class FixedSchedulePolicy(SchedulerPolicy):
    deterministic = True

    def __init__(self, schedule: ScheduleVector, name="fixed"):
        self.schedule = schedule
        self.name = name

    def decide(self, k, e_s, pre):
        return 1 - self.schedule.theta_bar[k - self.schedule.k]


class OfflinePolicy(SchedulerPolicy):
    """Full-horizon plan solved once at k = 0 and then followed blindly.

    ``mode="realized"`` plans with the realized initial error (default);
    ``mode="prior"`` plans with the prior covariance x0_cov.
    """

    name = "offline"

    def __init__(self, mode="realized", solver="dp"):
        if mode not in ("realized", "prior"):
            raise ValueError(f"unknown offline mode {mode!r}")
        self.mode = mode
        self.solver = solver
        self.schedule = None

    def reset(self, pre, x0):
        self.schedule = offline_schedule(pre.model, pre.gains,
                                         x0 if self.mode == "realized" else None,
                                         pre=pre, solver=self.solver)

    def decide(self, k, e_s, pre):
        return 1 - self.schedule.theta_bar[k]


class MPCPolicy(SchedulerPolicy):
    """Receding-horizon scheduler: certificate first, window solve otherwise."""

    name = "mpc"

    def __init__(self, solver="dp", use_certificates=True):
        self.solver = solver
        self.use_certificates = use_certificates
        self.verdicts = []
        self.solves = 0

    def reset(self, pre, x0):
        self.verdicts = []
        self.solves = 0

    def decide(self, k, e_s, pre):
        lam = pre.model.lam
        if self.use_certificates:
            verdict = certificate_at(pre.gains, k, e_s, lam).verdict
        else:
            verdict = Verdict.INDETERMINATE
        self.verdicts.append(verdict)
        if verdict is Verdict.SEND:
            return 1
        if verdict is Verdict.SKIP:
            return 0
        self.solves += 1
        res = solve(bind_error(pre.tables[k], e_s), lam, self.solver)
        return 1 - res.schedule.first()


def make_policy(name, solver="dp"):
    """Policy from a CLI-style name: mpc, offline, offline-prior, continuous,
    openloop, periodicP."""
    name = name.strip().lower()
    if name == "mpc":
        return MPCPolicy(solver=solver)
    if name == "offline":
        return OfflinePolicy(solver=solver)
    if name == "offline-prior":
        p = OfflinePolicy(mode="prior", solver=solver)
        p.name = "offline-prior"
        return p
    if name == "continuous":
        return ContinuousPolicy()
    if name in ("openloop", "open-loop"):
        return OpenLoopPolicy()
    if name.startswith("periodic"):
        return PeriodicPolicy(int(name[len("periodic"):]))
    raise ValueError(f"unknown policy {name!r}")


# --- estimator, offline plan, episodes -----------------------------------

def estimator_update(xhat_prev, u_prev, x_k, theta_k, model, first=False):
    """Conditional-mean estimate after the transmission decision.

    With ``first=True`` ``xhat_prev`` is taken as the prior mean of x0 itself
    (no propagation), so the scheduler error at k = 0 is x0 - E[x0].
    """
    x_k = np.atleast_1d(np.asarray(x_k, dtype=float))
    if x_k.shape != (model.n,):
        raise DimensionMismatch(f"state must have length {model.n}")
    if theta_k:
        return x_k.copy()
    return predict(xhat_prev, u_prev, model, first)


def predict(xhat_prev, u_prev, model, first=False):
    xhat_prev = np.atleast_1d(np.asarray(xhat_prev, dtype=float))
    if first:
        return xhat_prev.copy()
    u_prev = np.atleast_1d(np.asarray(u_prev, dtype=float))
    if xhat_prev.shape != (model.n,) or u_prev.shape != (model.m,):
        raise DimensionMismatch("estimate/input dimensions do not match the model")
    return model.A @ xhat_prev + model.B @ u_prev


def offline_schedule(model, gains, x0=None, pre=None, solver="dp") -> ScheduleVector:
    """Solve the full window [0, T-1] once.

    With a realized ``x0`` the initial error is x0 - x0_mean; without one the
    initial term uses the prior covariance x0_cov.
    """
    if pre is None:
        pre = Precomputed.build(model, gains)
    table = pre.tables[0]
    if x0 is None:
        table = bind_covariance(table, model.x0_cov)
    else:
        table = bind_error(table, np.asarray(x0, dtype=float) - model.x0_mean)
    return solve(table, model.lam, solver).schedule


@dataclass
class SimTrace:
    x: np.ndarray       # (T+1, n)
    xhat: np.ndarray    # (T, n)
    es: np.ndarray      # (T, n) scheduler error
    e: np.ndarray       # (T, n) controller-side error
    theta: np.ndarray   # (T,)
    u: np.ndarray       # (T, m)
    w: np.ndarray       # (T, n)
    stage_cost: np.ndarray  # (T+1,), last entry is the terminal cost
    seed: int
    policy: str = ""
    verdicts: list = field(default_factory=list)

    @property
    def realized_cost(self):
        return float(np.sum(self.stage_cost))

    @property
    def comm_count(self):
        return int(np.sum(self.theta))

    def recompute_cost(self, model):
        x, u = self.x, self.u
        T = len(self.theta)
        c = sum(x[k] @ model.Q @ x[k] + u[k] @ model.R @ u[k] + model.lam * self.theta[k]
                for k in range(T))
        return float(c + x[T] @ model.QT @ x[T])

    def to_csv(self, fh=None):
        """CSV with one row per step k = 0..T-1 and a terminal row k = T.

        The terminal row carries x_T and the terminal cost; other columns are
        empty there.
        """
        n, m = self.x.shape[1], self.u.shape[1]
        T = len(self.theta)
        header = (["k"] + [f"x{i}" for i in range(n)] + [f"xhat{i}" for i in range(n)]
                  + [f"es{i}" for i in range(n)] + ["theta"] + [f"u{i}" for i in range(m)]
                  + ["stage_cost"])
        out = fh if fh is not None else io.StringIO()
        wr = csv.writer(out, lineterminator="\n")
        wr.writerow(header)
        f = _fmt
        for k in range(T):
            wr.writerow([k] + [f(v) for v in self.x[k]] + [f(v) for v in self.xhat[k]]
                        + [f(v) for v in self.es[k]] + [int(self.theta[k])]
                        + [f(v) for v in self.u[k]] + [f(self.stage_cost[k])])
        wr.writerow([T] + [f(v) for v in self.x[T]] + [""] * (2 * n + 1 + m)
                    + [f(self.stage_cost[T])])
        if fh is None:
            return out.getvalue()
        return None


def _fmt(v):
    return repr(float(v))


def run_episode(model, gains, policy: SchedulerPolicy, seed, pre=None) -> SimTrace:
    """Simulate one closed-loop episode of length T."""
    if pre is None:
        pre = Precomputed.build(model, gains)
    gains = pre.gains
    A, B, Q, R, lam, T = model.A, model.B, model.Q, model.R, model.lam, model.T
    n, m = model.n, model.m
    x0, w = NoiseStream.for_model(model, seed).draw(model)

    x = np.zeros((T + 1, n))
    xhat = np.zeros((T, n))
    es = np.zeros((T, n))
    e = np.zeros((T, n))
    theta = np.zeros(T, dtype=int)
    u = np.zeros((T, m))
    stage = np.zeros(T + 1)
    x[0] = x0
    policy.reset(pre, x0)
    prior = model.x0_mean
    for k in range(T):
        pred = prior if k == 0 else A @ xhat[k - 1] + B @ u[k - 1]
        es[k] = x[k] - pred
        th = int(policy.decide(k, es[k], pre))
        theta[k] = th
        xhat[k] = x[k] if th else pred
        e[k] = x[k] - xhat[k]
        u[k] = -gains.L[k] @ xhat[k]
        stage[k] = x[k] @ Q @ x[k] + u[k] @ R @ u[k] + lam * th
        x[k + 1] = A @ x[k] + B @ u[k] + w[k]
    stage[T] = x[T] @ model.QT @ x[T]
    return SimTrace(x, xhat, es, e, theta, u, w, stage, int(seed), policy.name,
                    list(getattr(policy, "verdicts", [])))

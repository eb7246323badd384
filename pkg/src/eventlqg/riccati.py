"""Finite-horizon Riccati recursion, error weights and tail Gramians."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import DimensionMismatch, SingularS
from .model import SystemModel, symmetrize


@dataclass(frozen=True, eq=False)
class GainSchedule:
    """Per-step outputs of the backward recursion.

    ``P`` has T+1 entries (P[T] = QT); ``S``, ``L``, ``Gamma`` and ``W`` have T.
    ``Gamma[k] = L[k]' S[k] L[k]`` weights the controller-side estimation error
    and ``W[k]`` is the tail Gramian sum_j (A^j)' Gamma[k+j] A^j. ``W`` is
    ``None`` until :func:`tail_gramians` fills it.
    """

    P: tuple
    S: tuple
    L: tuple
    Gamma: tuple
    W: tuple | None = None

    @property
    def T(self):
        return len(self.S)


def compute_gains(model: SystemModel) -> GainSchedule:
    A, B, R = model.A, model.B, model.R
    T = model.T
    P = [None] * (T + 1)
    S = [None] * T
    L = [None] * T
    Gamma = [None] * T
    P[T] = symmetrize(model.QT)
    for k in range(T - 1, -1, -1):
        Pn = P[k + 1]
        PB = Pn @ B
        Sk = symmetrize(R + B.T @ PB)
        try:
            c = cho_factor(Sk, lower=True)
        except LinAlgError as exc:
            raise SingularS(f"S_{k} is not positive definite") from exc
        Lk = cho_solve(c, PB.T @ A)
        Pk = A.T @ Pn @ A + model.Q - (A.T @ PB) @ Lk
        P[k] = symmetrize(Pk)
        S[k] = Sk
        L[k] = Lk
        Gamma[k] = symmetrize(Lk.T @ Sk @ Lk)
    for arr in P + S + L + Gamma:
        arr.setflags(write=False)
    return GainSchedule(tuple(P), tuple(S), tuple(L), tuple(Gamma))


def tail_gramians(gains: GainSchedule, A, T=None) -> GainSchedule:
    """Fill ``W`` via W[T-1] = Gamma[T-1], W[k] = Gamma[k] + A' W[k+1] A."""
    A = np.asarray(A, dtype=float)
    T = gains.T if T is None else int(T)
    if T != gains.T:
        raise DimensionMismatch(f"horizon {T} does not match gain schedule length {gains.T}")
    n = gains.Gamma[0].shape[0]
    if A.shape != (n, n):
        raise DimensionMismatch(f"A must be {(n, n)}, got {A.shape}")
    W = [None] * T
    W[T - 1] = gains.Gamma[T - 1].copy()
    for k in range(T - 2, -1, -1):
        W[k] = symmetrize(gains.Gamma[k] + A.T @ W[k + 1] @ A)
    for w in W:
        w.setflags(write=False)
    return dataclasses.replace(gains, W=tuple(W))


def solve_gains(model: SystemModel) -> GainSchedule:
    """Gains plus tail Gramians in one call."""
    return tail_gramians(compute_gains(model), model.A, model.T)

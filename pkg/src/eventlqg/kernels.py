"""Precomputed scalar coefficients of the unfolded error-covariance cost.

For a planning window starting at ``k`` the expected stage cost at time t is

    tr(Gamma_t Sigma_t) = sum_{tau=k}^{t} (prod_{s=tau}^{t} skip_s) * g[t, tau]

where g[t, tau] = tr(Gamma_t A^{t-tau} Sigma_w A^{t-tau}') for tau > k and
g[t, k] = e' H[t] e with H[t] = (A^{t-k})' Gamma_t A^{t-k} and e the scheduler
error at k. The noise part and H are fixed per k; only the quadratic form in
e changes online.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, WindowMismatch
from .model import SystemModel, symmetrize


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Kernel coefficients for the window [k, T-1].

    All arrays use absolute time indices. ``g_noise[t, tau]`` is meaningful
    for k+1 <= tau <= t and zero elsewhere; ``H[t]`` for t >= k; ``g_init``
    is ``None`` until an error (or covariance) is bound.
    """

    k: int
    T: int
    g_noise: np.ndarray
    H: np.ndarray
    g_init: np.ndarray | None = None

    @property
    def window(self):
        return self.T - self.k

    @property
    def bound(self):
        return self.g_init is not None

    def coefficients(self) -> np.ndarray:
        """Window-relative lower-triangular coefficient matrix c[i, j] = g[k+i, k+j].

        Column 0 holds the initial-error terms, the rest the noise terms.
        """
        if self.g_init is None:
            raise WindowMismatch("kernel table has no bound error")
        k = self.k
        c = np.array(self.g_noise[k:, k:], dtype=float)
        c[:, 0] = self.g_init[k:]
        return c


def noise_kernel_matrix(gains, model: SystemModel) -> np.ndarray:
    """g[t, tau] = tr(Gamma_t A^{t-tau} Sigma_w A^{t-tau}') for 0 <= tau <= t < T.

    Depends on (t, tau) only through Gamma_t and the lag t - tau, so one matrix
    serves every window start.
    """
    T = model.T
    A = model.A
    G = np.zeros((T, T))
    M = symmetrize(model.Sigma_w)
    for d in range(T):
        for t in range(d, T):
            G[t, t - d] = np.sum(gains.Gamma[t] * M)
        M = symmetrize(A @ M @ A.T)
    return G


def _powered_weights(gains, A, k, T):
    n = A.shape[0]
    H = np.zeros((T, n, n))
    Ap = np.eye(n)
    for t in range(k, T):
        H[t] = symmetrize(Ap.T @ gains.Gamma[t] @ Ap)
        Ap = A @ Ap
    return H


def build_noise_kernels(gains, model: SystemModel, k: int, noise=None) -> KernelTable:
    """Kernel table for window start ``k`` with no error bound yet.

    Args:
        gains: Gain schedule of ``model``.
        model: Validated system model.
        k: Window start, 0 <= k <= T-1.
        noise: Optional precomputed :func:`noise_kernel_matrix` to share
            across window starts.
    """
    T = model.T
    if not 0 <= k < T:
        raise WindowMismatch(f"window start {k} outside [0, {T - 1}]")
    G = noise_kernel_matrix(gains, model) if noise is None else noise
    g = np.zeros((T, T))
    g[k + 1:, k + 1:] = np.tril(G[k + 1:, k + 1:])
    g.setflags(write=False)
    H = _powered_weights(gains, model.A, k, T)
    H.setflags(write=False)
    return KernelTable(k=k, T=T, g_noise=g, H=H)


def build_all_kernels(gains, model: SystemModel) -> list:
    """Tables for every window start, sharing one noise matrix."""
    G = noise_kernel_matrix(gains, model)
    return [build_noise_kernels(gains, model, k, noise=G) for k in range(model.T)]


def bind_error(table: KernelTable, e_s) -> KernelTable:
    """Fill g_init[t] = e_s' H[t] e_s for t >= k."""
    e = np.atleast_1d(np.asarray(e_s, dtype=float))
    n = table.H.shape[1]
    if e.shape != (n,):
        raise DimensionMismatch(f"error vector must have length {n}, got {e.shape}")
    g = np.zeros(table.T)
    g[table.k:] = np.einsum("i,tij,j->t", e, table.H[table.k:], e)
    g.setflags(write=False)
    return dataclasses.replace(table, g_init=g)


def bind_covariance(table: KernelTable, Sigma) -> KernelTable:
    """Fill g_init[t] = tr(H[t] Sigma); used when only a prior covariance is known."""
    S = symmetrize(np.atleast_2d(Sigma))
    n = table.H.shape[1]
    if S.shape != (n, n):
        raise DimensionMismatch(f"covariance must be {(n, n)}, got {S.shape}")
    g = np.zeros(table.T)
    g[table.k:] = np.einsum("tij,ij->t", table.H[table.k:], S)
    g.setflags(write=False)
    return dataclasses.replace(table, g_init=g)

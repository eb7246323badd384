"""System model and the small dense linear-algebra kernel used everywhere else."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, NonPositiveHorizon, NotPD, NotPSD, ModelError

PSD_TOL = 1e-9
PD_TOL = 1e-12


def symmetrize(M):
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Linear plant x_{k+1} = A x_k + B u_k + w_k with quadratic cost.

    Attributes:
        A: State transition matrix (n x n).
        B: Input matrix (n x m).
        Q: Stage state weight (n x n), PSD.
        QT: Terminal state weight (n x n), PSD.
        R: Input weight (m x m), PD.
        Sigma_w: Process-noise covariance (n x n), PSD.
        lam: Penalty paid per transmission (``lambda`` in JSON).
        T: Horizon length.
        x0_mean: Mean of the initial state.
        x0_cov: Covariance of the initial state.
        seed: Optional default seed carried by a model file.
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    QT: np.ndarray
    R: np.ndarray
    Sigma_w: np.ndarray
    lam: float
    T: int
    x0_mean: np.ndarray
    x0_cov: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        for name in ("A", "B", "Q", "QT", "R", "Sigma_w", "x0_cov"):
            object.__setattr__(self, name, _frozen(np.atleast_2d(getattr(self, name))))
        object.__setattr__(self, "x0_mean", _frozen(np.atleast_1d(self.x0_mean).ravel()))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "T", int(self.T))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "Q": self.Q.tolist(),
            "QT": self.QT.tolist(),
            "R": self.R.tolist(),
            "Sigma_w": self.Sigma_w.tolist(),
            "lambda": self.lam,
            "T": self.T,
            "x0_mean": self.x0_mean.tolist(),
            "x0_cov": self.x0_cov.tolist(),
        }
        if self.seed is not None:
            d["seed"] = self.seed
        return d


@dataclass
class MatrixWorkspace:
    """Scratch buffers for recursions; contents are meaningless between calls."""

    n: int
    m: int = 1
    nn: np.ndarray = field(init=False)
    nn2: np.ndarray = field(init=False)
    nm: np.ndarray = field(init=False)

    def __post_init__(self):
        self.nn = np.empty((self.n, self.n))
        self.nn2 = np.empty((self.n, self.n))
        self.nm = np.empty((self.n, self.m))


def _check_psd(name, M):
    if M.size == 0:
        return
    w = np.linalg.eigvalsh(M)
    if w[0] < -PSD_TOL:
        raise NotPSD(name, float(w[0]))


def validate_model(model: SystemModel) -> SystemModel:
    """Check dimensions and definiteness, returning a symmetrized copy.

    Raises:
        DimensionMismatch, NotPSD, NotPD, NonPositiveHorizon, ModelError.
    """
    A, B = model.A, model.B
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionMismatch(f"A must be square, got {A.shape}")
    if B.ndim != 2 or B.shape[0] != n:
        raise DimensionMismatch(f"B must have {n} rows, got {B.shape}")
    m = B.shape[1]
    for name, shape in (("Q", (n, n)), ("QT", (n, n)), ("Sigma_w", (n, n)),
                        ("x0_cov", (n, n)), ("R", (m, m))):
        if getattr(model, name).shape != shape:
            raise DimensionMismatch(f"{name} must be {shape}, got {getattr(model, name).shape}")
    if model.x0_mean.shape != (n,):
        raise DimensionMismatch(f"x0_mean must have length {n}, got {model.x0_mean.shape}")
    if model.T < 1:
        raise NonPositiveHorizon(f"horizon T must be >= 1, got {model.T}")
    if not np.isfinite(model.lam) or model.lam < 0:
        raise ModelError(f"lambda must be a finite nonnegative number, got {model.lam}")
    for name in ("A", "B", "Q", "QT", "R", "Sigma_w", "x0_mean", "x0_cov"):
        if not np.all(np.isfinite(getattr(model, name))):
            raise ModelError(f"{name} contains non-finite entries")

    sym = {name: symmetrize(getattr(model, name)) for name in ("Q", "QT", "R", "Sigma_w", "x0_cov")}
    for name in ("Q", "QT", "Sigma_w", "x0_cov"):
        _check_psd(name, sym[name])
    r_min = np.linalg.eigvalsh(sym["R"])[0]
    if r_min <= PD_TOL:
        raise NotPD("R", float(r_min))
    return model.replace(**sym)


def _as_vector(x, n=None, name="x"):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise DimensionMismatch(f"{name} must have length {n}, got {x.shape[0]}")
    return x


def quadratic_form(x, M) -> float:
    """Return x' M x using the symmetric part of M."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    x = _as_vector(x)
    if M.shape != (x.shape[0], x.shape[0]):
        raise DimensionMismatch(f"quadratic_form: x has length {x.shape[0]}, M is {M.shape}")
    M = symmetrize(M)
    return float(np.sum(np.outer(x, x) * M))


def trace_product(M1, M2) -> float:
    """tr(M1 @ M2) without forming the product."""
    M1 = np.atleast_2d(np.asarray(M1, dtype=float))
    M2 = np.atleast_2d(np.asarray(M2, dtype=float))
    if M1.ndim != 2 or M1.shape[0] != M1.shape[1] or M1.shape != M2.shape:
        raise DimensionMismatch(f"trace_product: shapes {M1.shape} and {M2.shape}")
    return float(np.sum(M1 * M2.T))


def _pivoted_cholesky(M, tol):
    # Returns F (n x r) with F F' = M, diagonal pivoting on the Schur complement.
    n = M.shape[0]
    S = M.copy()
    F = np.zeros((n, n))
    perm = np.arange(n)
    r = 0
    for j in range(n):
        d = np.diag(S)[j:]
        p = j + int(np.argmax(d))
        piv = S[p, p]
        if piv < -PSD_TOL:
            raise NotPSD("matrix", float(piv))
        if piv <= tol:
            break
        if p != j:
            S[[j, p], :] = S[[p, j], :]
            S[:, [j, p]] = S[:, [p, j]]
            F[[j, p], :] = F[[p, j], :]
            perm[[j, p]] = perm[[p, j]]
        col = S[j:, j] / np.sqrt(piv)
        F[j:, j] = col
        S[j:, j:] -= np.outer(col, col)
        r += 1
    if np.min(np.diag(S)[r:], initial=0.0) < -PSD_TOL:
        raise NotPSD("matrix", float(np.min(np.diag(S)[r:])))
    out = np.zeros((n, r))
    out[perm, :] = F[:, :r]
    return out


def cholesky_factor(M) -> np.ndarray:
    """Lower-triangular L with L L' = M for symmetric PSD M.

    Full-rank inputs go through LAPACK. Rank-deficient inputs use a
    diagonally pivoted factorization whose n x r factor is rotated back to
    lower-triangular form by a QR step; trailing columns are zero.

    Raises:
        NotPSD: a pivot below -1e-9.
    """
    M = symmetrize(np.atleast_2d(M))
    n = M.shape[0]
    if M.shape != (n, n):
        raise DimensionMismatch(f"cholesky_factor needs a square matrix, got {M.shape}")
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        pass
    scale = max(1.0, float(np.max(np.abs(np.diag(M))))) if n else 1.0
    F = _pivoted_cholesky(M, tol=1e-14 * n * scale)
    L = np.zeros((n, n))
    r = F.shape[1]
    if r:
        # F = R' Q'  =>  F F' = R' R with R' lower trapezoidal (n x r)
        _, Rm = np.linalg.qr(F.T, mode="reduced")
        signs = np.sign(np.diag(Rm))
        signs[signs == 0] = 1.0
        L[:, :r] = (Rm * signs[:, None]).T[:, :r]
    return L


def _matrix(value, name):
    a = np.asarray(value, dtype=float)
    if a.ndim > 2:
        raise DimensionMismatch(f"{name} must be at most 2-D")
    return np.atleast_2d(a)


def model_from_dict(d: dict) -> SystemModel:
    """Build and validate a model from the JSON document layout."""
    try:
        A = _matrix(d["A"], "A")
        n = A.shape[0]
        B = np.asarray(d["B"], dtype=float)
        if B.ndim == 1 and n > 1 and B.shape[0] == n:
            B = B[:, None]
        B = np.atleast_2d(B)
        Q = _matrix(d["Q"], "Q")
        R = _matrix(d["R"], "R")
        Sigma_w = _matrix(d["Sigma_w"], "Sigma_w")
        lam = float(d["lambda"])
        T = int(d["T"])
    except KeyError as exc:
        raise ModelError(f"model document is missing key {exc.args[0]!r}") from None
    QT = _matrix(d["QT"], "QT") if "QT" in d else Q
    x0_mean = np.asarray(d.get("x0_mean", np.zeros(n)), dtype=float)
    x0_cov = _matrix(d["x0_cov"], "x0_cov") if "x0_cov" in d else np.eye(n)
    seed = d.get("seed")
    return validate_model(SystemModel(A, B, Q, QT, R, Sigma_w, lam, T, x0_mean, x0_cov,
                                      None if seed is None else int(seed)))


def load_model(path) -> SystemModel:
    with open(Path(path)) as fh:
        return model_from_dict(json.load(fh))


def double_integrator(Ts=0.1, T=25, sigma=0.5, lam=100.0, Q=None, R=None, QT=None,
                      x0_mean=None, x0_cov=None) -> SystemModel:
    """Position/velocity plant used in the case study (Q=I, R=1, QT=Q by default)."""
    A = np.array([[1.0, Ts], [0.0, 1.0]])
    B = np.array([[Ts ** 2 / 2.0], [Ts]])
    Q = np.eye(2) if Q is None else Q
    return validate_model(SystemModel(
        A=A, B=B, Q=Q, QT=Q if QT is None else QT, R=np.eye(1) if R is None else R,
        Sigma_w=sigma * np.eye(2), lam=lam, T=T,
        x0_mean=np.zeros(2) if x0_mean is None else x0_mean,
        x0_cov=np.eye(2) if x0_cov is None else x0_cov,
    ))

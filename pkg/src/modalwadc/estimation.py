"""Covariance-based identification of the dynamic state Jacobian from ambient data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import IllConditionedCovariance, InputError, InsufficientData, NoStationaryCovariance
from .simulation import PmuDataset

COND_LIMIT = 1e12
KRON_MAX_SIZE = 64


@dataclass(frozen=True)
class CovarianceBlocks:
    """Angle/speed blocks of a (sample) stationary covariance matrix."""

    C_dd: np.ndarray
    C_dw: np.ndarray
    C_wd: np.ndarray
    C_ww: np.ndarray
    sample_count: int = 0

    @classmethod
    def from_full(cls, C, sample_count=0) -> "CovarianceBlocks":
        C = np.asarray(C, dtype=float)
        m = C.shape[0] // 2
        if C.shape != (2 * m, 2 * m):
            raise InputError(f"covariance must be square with even size, got {C.shape}")
        return cls(C[:m, :m], C[:m, m:], C[m:, :m], C[m:, m:], int(sample_count))

    @property
    def m(self) -> int:
        return self.C_dd.shape[0]

    @property
    def full(self) -> np.ndarray:
        return np.block([[self.C_dd, self.C_dw], [self.C_wd, self.C_ww]])

    @property
    def cond_dd(self) -> float:
        return float(np.linalg.cond(self.C_dd))


@dataclass(frozen=True)
class EstimatedModel:
    J_est: np.ndarray
    A_P: np.ndarray
    available: tuple
    cond_dd: float = float("nan")
    sample_count: int = 0

    @property
    def m(self) -> int:
        return self.J_est.shape[0]


def sample_covariance(data) -> CovarianceBlocks:
    """Mean-removed, unbiased covariance of ``[angles, speeds]`` samples.

    ``data`` is a :class:`PmuDataset` or an array with one sample per row.
    """
    X = data.samples if isinstance(data, PmuDataset) else np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[1] % 2:
        raise InputError("samples must be a 2-D array with an even number of columns")
    N = X.shape[0]
    if N < 2:
        raise InsufficientData(f"need at least 2 samples for a covariance, got {N}")
    Xc = X - X.mean(axis=0)
    C = Xc.T @ Xc / (N - 1)
    return CovarianceBlocks.from_full(0.5 * (C + C.T), N)


def estimate_jacobian(M_P, D_P, cov: CovarianceBlocks) -> np.ndarray:
    """``M C_ww C_dd^-1 - D C_wd C_dd^-1`` for diagonal inertia and damping."""
    M_P = np.asarray(M_P, dtype=float)
    D_P = np.asarray(D_P, dtype=float)
    if M_P.shape != (cov.m,) or D_P.shape != (cov.m,):
        raise InputError(f"M_P and D_P must have shape ({cov.m},)")
    cond = cov.cond_dd
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedCovariance(f"angle covariance is ill-conditioned (cond {cond:.3e})", cond)
    rhs = M_P[:, None] * cov.C_ww - D_P[:, None] * cov.C_wd
    # X C_dd^-1 == solve(C_dd^T, X^T)^T
    return scipy.linalg.solve(cov.C_dd.T, rhs.T, assume_a="gen").T


def assemble_state_matrix(M_P, D_P, J_est, available=None, *, cond_dd=float("nan"),
                          sample_count=0) -> EstimatedModel:
    """Block state matrix ``[[0, I], [-M^-1 J, -M^-1 D]]`` of the observed generators."""
    J_est = np.asarray(J_est, dtype=float)
    m = J_est.shape[0]
    M_P = np.asarray(M_P, dtype=float)
    D_P = np.asarray(D_P, dtype=float)
    if J_est.shape != (m, m) or M_P.shape != (m,) or D_P.shape != (m,):
        raise InputError("inconsistent shapes for M_P, D_P and J_est")
    A = np.zeros((2 * m, 2 * m))
    A[:m, m:] = np.eye(m)
    A[m:, :m] = -J_est / M_P[:, None]
    A[m:, m:] = np.diag(-D_P / M_P)
    available = tuple(range(m)) if available is None else tuple(available)
    return EstimatedModel(J_est, A, available, float(cond_dd), int(sample_count))


def estimate_model(data: PmuDataset, M, D) -> EstimatedModel:
    """Covariance, Jacobian and state matrix for the generators in ``data.available``.

    ``M`` and ``D`` are full per-generator vectors; the observed entries are
    picked out here.
    """
    if data.samples.shape[0] <= 2 * data.m:
        raise InsufficientData(
            f"{data.samples.shape[0]} samples cannot identify a {2 * data.m}-state model"
        )
    idx = list(data.available)
    M_P, D_P = np.asarray(M, dtype=float)[idx], np.asarray(D, dtype=float)[idx]
    cov = sample_covariance(data)
    J = estimate_jacobian(M_P, D_P, cov)
    return assemble_state_matrix(M_P, D_P, J, data.available, cond_dd=cov.cond_dd,
                                 sample_count=cov.sample_count)


def _kron_lyapunov(A, Q):
    n = A.shape[0]
    I = np.eye(n)
    K = np.kron(I, A) + np.kron(A, I)
    vec = np.linalg.solve(K, -Q.reshape(-1, order="F"))
    return vec.reshape(n, n, order="F")


def _solve(A, Q, method):
    if method == "kron" or (method == "auto" and A.shape[0] <= KRON_MAX_SIZE):
        return _kron_lyapunov(A, Q)
    return scipy.linalg.solve_continuous_lyapunov(A, -Q)


def lyapunov_solve(A, B, method="auto") -> np.ndarray:
    """Stationary covariance ``C`` with ``A C + C A^T = -B B^T``.

    Modes with ``Re(lambda) >= 0`` are deflated when ``B`` leaves them
    unexcited; otherwise no stationary covariance exists.

    Parameters
    ----------
    method : {"auto", "kron", "schur"}
        Kronecker vectorization, Bartels-Stewart, or ``kron`` up to size 64.
    """
    A = np.asarray(A, dtype=float)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
        raise InputError(f"incompatible shapes A{A.shape}, B{B.shape}")
    if method not in ("auto", "kron", "schur"):
        raise InputError(f"unknown method {method!r}")
    Q = B @ B.T
    tol = 1e-9 * max(np.linalg.norm(A, 2), 1.0)
    if np.all(np.linalg.eigvals(A).real < -tol):
        C = _solve(A, Q, method)
    else:
        T, Z, k = scipy.linalg.schur(A, output="real", sort=lambda re, im: re < -tol)
        B2 = Z[:, k:].T @ B
        if np.linalg.norm(B2) > 1e-12 * max(np.linalg.norm(B), 1e-300):
            raise NoStationaryCovariance(
                "noise excites a mode that is not asymptotically stable "
                f"(excitation {np.linalg.norm(B2):.3e})"
            )
        Z1 = Z[:, :k]
        B1 = Z1.T @ B
        C = Z1 @ _solve(T[:k, :k], B1 @ B1.T, method) @ Z1.T if k else np.zeros_like(A)
    C = 0.5 * (C + C.T)
    resid = np.linalg.norm(A @ C + C @ A.T + Q)
    if resid > 1e-10 * max(np.linalg.norm(Q), 1e-300) and np.linalg.norm(Q) > 0:
        raise NoStationaryCovariance(f"Lyapunov residual {resid:.3e} too large")
    return C

"""Rightmost characteristic roots of ``x'(t) = A0 x(t) + A1 x(t - tau)``.

The delay equation is rewritten as an abstract Cauchy problem on the
history segment ``[-tau, 0]`` and discretized by Chebyshev collocation;
eigenvalues of the resulting block matrix approximate the characteristic
roots of ``det(-s I + A0 + A1 exp(-tau s)) = 0``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .errors import InputError
from .modal import mode_metrics

REAL_CUTOFF = -20.0        # rad/s
RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class DelaySpectrum:
    tau_d: float
    rightmost: np.ndarray          # sorted by descending real part
    N: int
    discarded: tuple = field(default=())    # (root, residual) pairs failing the residual check


def cheb(n):
    """Chebyshev points ``cos(pi j / n)``, ``j = 0..n``, and the differentiation matrix."""
    if n == 0:
        return np.array([1.0]), np.zeros((1, 1))
    j = np.arange(n + 1)
    x = np.cos(np.pi * j / n)
    c = np.where((j == 0) | (j == n), 2.0, 1.0) * (-1.0) ** j
    dX = x[:, None] - x[None, :]
    Dm = np.outer(c, 1.0 / c) / (dX + np.eye(n + 1))
    Dm -= np.diag(Dm.sum(axis=1))
    return x, Dm


def characteristic_residual(s, v, A0, A1, tau) -> float:
    """``||(-s I + A0 + A1 exp(-tau s)) v||`` for unit ``v``."""
    v = v / np.linalg.norm(v)
    T = -s * np.eye(A0.shape[0]) + A0 + A1 * np.exp(-tau * s)
    return float(np.linalg.norm(T @ v))


def delayed_spectrum(A_P, Bc, K, tau_d: float, N: int = 16, *, cutoff=REAL_CUTOFF) -> DelaySpectrum:
    """Characteristic roots with ``Re(s) > cutoff`` of the loop closed through a delay.

    ``N`` is the number of collocation nodes on ``[-tau_d, 0]``; the
    discretized operator has size ``2m * N``. Roots whose residual exceeds
    ``1e-6`` are dropped into ``discarded``.
    """
    A0 = np.asarray(A_P, dtype=float)
    Bc = np.asarray(Bc, dtype=float)
    K = np.asarray(K, dtype=float)
    if not (A0.ndim == 2 and A0.shape[0] == A0.shape[1] and A0.shape == Bc.shape == K.shape):
        raise InputError("A_P, Bc and K must be square and of equal size")
    A1 = Bc @ K
    if tau_d < 0:
        raise InputError("delay must be non-negative")
    if N < 8:
        raise InputError("at least 8 collocation nodes are required")
    d = A0.shape[0]
    if tau_d == 0:
        w, V = np.linalg.eig(A0 + A1)
        heads = V
    else:
        x, Dx = cheb(N - 1)
        # node 0 is theta = 0, node N-1 is theta = -tau
        op = np.kron((2.0 / tau_d) * Dx, np.eye(d))
        op[:d, :] = 0.0
        op[:d, :d] = A0
        op[:d, (N - 1) * d:] = A1
        w, V = scipy.linalg.eig(op)
        heads = V[:d, :]
    keep, dropped = [], []
    for i in np.where(w.real > cutoff)[0]:
        v = heads[:, i]
        nv = np.linalg.norm(v)
        r = characteristic_residual(w[i], v, A0, A1, tau_d) if nv > 0 else np.inf
        (keep if r <= RESIDUAL_TOL else dropped).append((w[i], r))
    roots = np.array([s for s, _ in keep], dtype=complex)
    roots = roots[np.lexsort((-roots.imag, -roots.real))] if roots.size else roots
    return DelaySpectrum(float(tau_d), roots, int(N), tuple(dropped))


def track_modes(reference, roots) -> list:
    """Root in the upper half plane assigned to each reference eigenvalue (upper members)."""
    upper = np.array([r for r in roots if r.imag > 1e-6])
    ref = np.asarray([complex(r.real, abs(r.imag)) for r in reference])
    if len(ref) == 0:
        return []
    if len(upper) < len(ref):
        raise InputError("fewer oscillatory roots than reference modes")
    rows, cols = linear_sum_assignment(np.abs(ref[:, None] - upper[None, :]))
    out = [None] * len(ref)
    for r, c in zip(rows, cols):
        out[r] = complex(upper[c])
    return out


def delay_sweep(A_P, Bc, K, taus, N: int = 16, modes=(), reference_mode=None) -> list:
    """One row per delay: ``(tau_d, worst_mode_zeta, rightmost_real)``.

    ``modes`` are undelayed closed-loop eigenvalues to follow across the
    sweep; ``worst_mode_zeta`` is the smallest damping ratio among them
    (NaN if none). ``rightmost_real`` skips the uniform-angle mode: the root
    closest to ``reference_mode`` if given, else any root at the origin.
    """
    rows = []
    for tau in taus:
        spec = delayed_spectrum(A_P, Bc, K, float(tau), N)
        tracked = track_modes(modes, spec.rightmost) if len(modes) else []
        zetas = [mode_metrics(s)[1] for s in tracked]
        roots = list(spec.rightmost)
        if reference_mode is not None and roots:
            roots.pop(int(np.argmin([abs(s - reference_mode) for s in roots])))
        moving = [s.real for s in roots if abs(s) >= 1e-6]
        rows.append((float(tau), min(zetas) if zetas else float("nan"),
                     max(moving) if moving else float("nan")))
    return rows


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau_d", "worst_mode_zeta", "rightmost_real"])
        for tau, z, r in rows:
            w.writerow([f"{tau:.12g}", f"{z:.12g}", f"{r:.12g}"])

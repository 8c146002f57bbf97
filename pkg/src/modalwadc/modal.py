"""Eigen-analysis of a swing-equation state matrix.

Right eigenvectors are the columns of ``Phi``, left eigenvectors the rows of
``Psi``, scaled so that ``Psi @ Phi == I``. A state matrix of size ``2m``
orders its states as ``[angles (m), speeds (m)]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DefectiveMatrix, InputError

OSCILLATORY_TOL = 1e-6      # rad/s
DEFECTIVE_COND = 1e12
RESIDUAL_TOL = 1e-8
INTER_AREA_BAND = (0.1, 1.0)


@dataclass(frozen=True)
class Mode:
    """One eigenvalue, or one conjugate pair stored through its upper member."""

    lam: complex
    plus: int
    minus: int | None
    f: float
    zeta: float
    t_S: float
    band: str
    critical: bool = False

    @property
    def oscillatory(self) -> bool:
        return self.minus is not None


@dataclass(frozen=True)
class ModalSolution:
    eigvals: np.ndarray
    Phi: np.ndarray
    Psi: np.ndarray
    modes: tuple
    participation: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.Phi.shape[0] // 2

    def critical(self) -> list:
        return [i for i, md in enumerate(self.modes) if md.critical]

    def pair(self, k):
        """Right and left eigenvectors ``(phi+, phi-, psi+, psi-)`` of mode ``k``."""
        md = self.modes[k]
        if md.minus is None:
            raise InputError(f"mode {k} is not an oscillatory pair")
        return (self.Phi[:, md.plus], self.Phi[:, md.minus],
                self.Psi[md.plus, :], self.Psi[md.minus, :])


def mode_metrics(lam) -> tuple:
    """Frequency (Hz), damping ratio and 2 % settling time (s) of an eigenvalue."""
    lam = complex(lam)
    eta, omega = lam.real, abs(lam.imag)
    f = omega / (2 * math.pi)
    mag = abs(lam)
    zeta = -eta / mag if mag > 0 else 0.0
    t_S = 4.0 / abs(eta) if eta != 0 else math.inf
    return f, zeta, t_S


def classify_band(f: float, oscillatory: bool, band=INTER_AREA_BAND) -> str:
    if not oscillatory:
        return "non-oscillatory"
    if band[0] <= f <= band[1]:
        return "inter-area"
    return "local" if f > band[1] else "slow"


def _real_gauge(v):
    k = int(np.argmax(np.abs(v)))
    v = v * (abs(v[k]) / v[k])
    return v.real.astype(complex)


def modal_decomposition(A, *, band=INTER_AREA_BAND, zeta_min=0.10, tS_max=10.0) -> ModalSolution:
    """Eigen-decompose ``A`` and label every mode.

    Conjugate pairs are stored once (``Im(lam) > 0``); their lower members
    use exactly conjugated eigenvectors so that gains built from a pair are
    real. Critical flags follow :func:`classify_critical` with the given
    thresholds.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 2:
        raise InputError(f"state matrix must be square with even size, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError("state matrix contains non-finite values")
    w, V = scipy.linalg.eig(A)
    N = len(w)
    normA = np.linalg.norm(A, 2)
    used = np.zeros(N, dtype=bool)
    lam = np.empty(N, dtype=complex)
    Phi = np.empty((N, N), dtype=complex)
    entries = []
    pair_tol = max(1e-8 * normA, 1e-12)
    for i in np.argsort(-w.imag, kind="stable"):
        if used[i]:
            continue
        used[i] = True
        if w[i].imag >= OSCILLATORY_TOL:
            cand = np.where(~used)[0]
            j = cand[np.argmin(np.abs(w[cand] - np.conj(w[i])))]
            if abs(w[j] - np.conj(w[i])) > max(pair_tol, 1e-6 * abs(w[i])):
                raise InputError(f"eigenvalue {w[i]} has no conjugate partner")
            used[j] = True
            entries.append((w[i], V[:, i] / np.linalg.norm(V[:, i])))
        else:
            entries.append((complex(w[i].real, 0.0) if abs(w[i].imag) < OSCILLATORY_TOL else w[i],
                            _real_gauge(V[:, i] / np.linalg.norm(V[:, i]))))

    osc = sorted((e for e in entries if e[0].imag >= OSCILLATORY_TOL), key=lambda e: (e[0].imag, e[0].real))
    real = sorted((e for e in entries if e[0].imag < OSCILLATORY_TOL), key=lambda e: -e[0].real)
    col = 0
    layout = []
    for lam_i, v in osc:
        lam[col], lam[col + 1] = lam_i, np.conj(lam_i)
        Phi[:, col], Phi[:, col + 1] = v, np.conj(v)
        layout.append((col, col + 1))
        col += 2
    for lam_i, v in real:
        lam[col] = lam_i
        Phi[:, col] = v
        layout.append((col, None))
        col += 1

    cond = np.linalg.cond(Phi)
    if not np.isfinite(cond) or cond > DEFECTIVE_COND:
        gaps = np.abs(lam[:, None] - lam[None, :]) + np.diag(np.full(N, np.inf))
        a, b = np.unravel_index(np.argmin(gaps), gaps.shape)
        raise DefectiveMatrix(
            f"eigenvector matrix is numerically singular (cond {cond:.3e}); "
            f"closest eigenvalues {lam[a]:.6g}, {lam[b]:.6g}",
            cluster=(lam[a], lam[b]),
        )
    resid = np.linalg.norm(A @ Phi - Phi * lam, axis=0)
    if np.max(resid) > RESIDUAL_TOL * max(normA, 1.0):
        raise DefectiveMatrix(f"eigen residual {np.max(resid):.3e} exceeds tolerance")
    Psi = np.linalg.inv(Phi)

    modes = []
    for plus, minus in layout:
        f, zeta, t_S = mode_metrics(lam[plus])
        modes.append(Mode(complex(lam[plus]), plus, minus, f, zeta, t_S,
                          classify_band(f, minus is not None, band)))
    sol = ModalSolution(lam, Phi, Psi, tuple(modes), _participation(Phi, Psi, layout))
    crit = set(classify_critical(sol, zeta_min=zeta_min, tS_max=tS_max, band=band))
    modes = tuple(
        Mode(md.lam, md.plus, md.minus, md.f, md.zeta, md.t_S, md.band, i in crit)
        for i, md in enumerate(modes)
    )
    return ModalSolution(lam, Phi, Psi, modes, sol.participation)


def _participation(Phi, Psi, layout):
    return np.abs(Phi[:, [p for p, _ in layout]] * Psi[[p for p, _ in layout], :].T)


def participation_matrix(sol: ModalSolution) -> np.ndarray:
    """``P[j, i] = |phi_ji psi_ij|`` with one column per stored mode."""
    return sol.participation


def classify_critical(sol: ModalSolution, zeta_min=0.10, tS_max=10.0, band=INTER_AREA_BAND) -> list:
    """Indices of poorly damped modes inside ``band`` (inclusive), ascending in frequency."""
    out = [
        i for i, md in enumerate(sol.modes)
        if md.oscillatory and band[0] <= md.f <= band[1] and (md.zeta < zeta_min or md.t_S > tS_max)
    ]
    return sorted(out, key=lambda i: (sol.modes[i].f, i))


def generator_participation(sol: ModalSolution, k: int, how="speed") -> np.ndarray:
    """Per-generator participation in mode ``k``.

    ``how="speed"`` reads the speed-state rows, ``how="max"`` takes the
    larger of each generator's angle and speed participation.
    """
    m = sol.m
    col = sol.participation[:, k]
    if how == "speed":
        return col[m:].copy()
    if how == "max":
        return np.maximum(col[:m], col[m:])
    raise InputError(f"unknown ranking rule {how!r}")


def generator_ranking(sol: ModalSolution, k: int, how="speed") -> list:
    """Local generator positions sorted by descending participation (ties by position).

    Participations equal to 1e-9 relative count as tied, so mirror-image
    generators rank by position rather than by rounding noise.
    """
    p = generator_participation(sol, k, how)
    q = np.round(p / max(p.max(initial=0.0), np.finfo(float).tiny), 9)
    return sorted(range(len(p)), key=lambda g: (-q[g], g))

"""Mode-selective state feedback and minimal actuator selection.

The gain for a set of critical modes moves each critical pair by
``-sigma * psi Bc phi`` to first order and leaves every other eigenvalue
untouched at that order. Generators are chosen from the top participants
of the critical modes, growing the set size until every critical mode
meets the damping-ratio and settling-time targets.
"""
from __future__ import annotations

import itertools
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import GaugeError, InputError, NoFeasibleDesign
from .modal import ModalSolution, generator_ranking, modal_decomposition, mode_metrics

J_TIE = 1e-12
GAUGE_TOL = 1e-10
DEFAULT_SIGMA_D = 2.0


@dataclass(frozen=True)
class TraceEntry:
    n_m: int
    candidates: tuple      # generator ids in G_E
    best: tuple            # generator ids of the chosen combination
    J: float
    passed: bool
    zeta: tuple
    t_S: tuple
    combinations: int


@dataclass(frozen=True)
class ControlDesign:
    selected: tuple                 # generator ids
    selected_local: tuple           # positions in the estimated state
    Bc: np.ndarray
    K: np.ndarray
    sigma_d: tuple                  # one entry per critical mode
    critical: tuple                 # mode indices of the open-loop solution
    lam_cl: tuple                   # tracked closed-loop eigenvalue per critical mode
    zeta_cl: tuple
    t_S_cl: tuple
    J: float
    passed: bool
    trace: tuple = field(default=())
    available: tuple = field(default=())

    @property
    def n_m(self) -> int:
        return len(self.selected)

    @property
    def J_C(self) -> float:
        return float(sum(self.sigma_d))


def _threads():
    try:
        return max(1, int(os.environ.get("MODALWADC_THREADS", "1")))
    except ValueError:
        return 1


def control_matrix(selected, m: int) -> np.ndarray:
    """0/1 diagonal selector acting on the speed states of ``selected`` (0-based positions)."""
    Bc = np.zeros((2 * m, 2 * m))
    for g in selected:
        g = int(g)
        if not 0 <= g < m:
            raise InputError(f"generator position {g} outside 0..{m - 1}")
        Bc[m + g, m + g] = 1.0
    return Bc


def _sigma_vector(sigma_d, critical):
    if np.isscalar(sigma_d):
        sig = [float(sigma_d)] * len(critical)
    else:
        sig = [float(s) for s in sigma_d]
    if len(sig) != len(critical):
        raise InputError(f"need one sigma_d per critical mode ({len(critical)}), got {len(sig)}")
    return sig


def modal_projector_sum(sol: ModalSolution, critical, sigma_d) -> np.ndarray:
    """Real matrix ``sum_k sigma_k (phi+ psi+ + phi- psi-)`` over the critical modes."""
    sig = _sigma_vector(sigma_d, critical)
    N = sol.Phi.shape[0]
    S = np.zeros((N, N), dtype=complex)
    for k, s in zip(critical, sig):
        php, phm, psp, psm = sol.pair(k)
        S += s * (np.outer(php, psp) + np.outer(phm, psm))
    scale = max(np.abs(S.real).max(initial=0.0), 1.0)
    if np.abs(S.imag).max(initial=0.0) > GAUGE_TOL * scale:
        raise GaugeError("critical eigenvectors are not conjugate pairs in the psi*phi = 1 gauge")
    return S.real


def gain_matrix(Bc, sol: ModalSolution, critical, sigma_d=DEFAULT_SIGMA_D) -> np.ndarray:
    """``K = -Bc sum_k sigma_k (phi+ psi+ + phi- psi-)``."""
    sig = _sigma_vector(sigma_d, critical)
    if any(s < 0 for s in sig):
        raise InputError("damping coefficients must be non-negative")
    return -np.asarray(Bc) @ modal_projector_sum(sol, critical, sig)


def closed_loop(A_P, Bc, K):
    """``A_cl = A_P + Bc K`` and its modal solution."""
    A_cl = np.asarray(A_P) + np.asarray(Bc) @ np.asarray(K)
    return A_cl, modal_decomposition(A_cl)


def predicted_shift(sol: ModalSolution, mode: int, Bc, critical, sigma_d=DEFAULT_SIGMA_D) -> complex:
    """First-order closed-loop location of ``mode`` (upper member of a pair)."""
    md = sol.modes[mode]
    critical = list(critical)
    if mode not in critical:
        return md.lam
    s = _sigma_vector(sigma_d, critical)[critical.index(mode)]
    phi, psi = sol.Phi[:, md.plus], sol.Psi[md.plus, :]
    return md.lam - s * (psi @ np.asarray(Bc) @ phi)


def first_order_eigenvalues(sol: ModalSolution, dA) -> np.ndarray:
    """``lambda_i + psi_i dA phi_i`` for every eigenvalue of ``sol``."""
    return sol.eigvals + ((sol.Psi @ dA) * sol.Phi.T).sum(axis=1)


def track_eigenvalues(reference, eigvals) -> np.ndarray:
    """Reorder ``eigvals`` so entry ``i`` is the one assigned to ``reference[i]``."""
    reference = np.asarray(reference)
    eigvals = np.asarray(eigvals)
    cost = np.abs(reference[:, None] - eigvals[None, :])
    rows, cols = linear_sum_assignment(cost)
    out = np.empty_like(eigvals)
    out[rows] = eigvals[cols]
    return out


def closed_loop_modes(A, sol: ModalSolution, dA, modes) -> list:
    """Eigenvalues of ``A + dA`` tracked back to the open-loop ``modes`` of ``sol``.

    Every closed-loop eigenvalue is assigned to the first-order prediction
    of one open-loop eigenvalue (minimum total distance); the upper member
    of each requested pair is returned.
    """
    eigs = np.linalg.eigvals(np.asarray(A) + dA)
    tracked = track_eigenvalues(first_order_eigenvalues(sol, dA), eigs)
    out = []
    for k in modes:
        lam = tracked[sol.modes[k].plus]
        out.append(complex(lam.real, abs(lam.imag)))
    return out


def performance_index(zeta_cl, t_S_cl) -> float:
    """Normalized damping index: sum(zeta)/||zeta|| - sum(t_S)/||t_S||."""
    z = np.asarray(zeta_cl, dtype=float)
    t = np.asarray(t_S_cl, dtype=float)
    if z.size == 0:
        raise InputError("performance index needs at least one critical mode")
    if not np.all(np.isfinite(t)):
        return -math.inf
    nz, nt = np.linalg.norm(z), np.linalg.norm(t)
    term_z = z.sum() / nz if nz > 0 else 0.0
    term_t = t.sum() / nt if nt > 0 else 0.0
    return float(term_z - term_t)


def _meets(zeta, t_S, zeta_min, tS_max):
    return all(z >= zeta_min for z in zeta) and all(t <= tS_max for t in t_S)


@dataclass
class _Candidate:
    combo: tuple
    lam: list
    zeta: tuple
    t_S: tuple
    J: float
    passed: bool


def _better(a: _Candidate, b: _Candidate | None, single: bool) -> bool:
    if b is None:
        return True
    if single:
        if a.zeta[0] > b.zeta[0] + J_TIE:
            return True
        if a.zeta[0] < b.zeta[0] - J_TIE:
            return False
        return a.t_S[0] < b.t_S[0] - J_TIE
    return a.J > b.J + J_TIE


class _CriticalBlock:
    """Closed-loop critical eigenvalues of ``A - Bc S`` from a ``2|C_r|`` matrix.

    ``S`` annihilates every non-critical right eigenvector, so in the modal
    basis the closed loop is block triangular and the critical eigenvalues
    are those of ``Lambda_c - Psi_c Bc S Phi_c``. Non-critical eigenvalues
    stay where they are.
    """

    def __init__(self, sol, S, critical):
        self.cols = [c for k in critical for c in (sol.modes[k].plus, sol.modes[k].minus)]
        self.lam = sol.eigvals[self.cols]
        self.Psi_c = sol.Psi[self.cols, :]
        self.S_Phi = S @ sol.Phi[:, self.cols]
        self.m = sol.m

    def eigenvalues(self, combo, scale=1.0) -> list:
        rows = [self.m + g for g in combo]
        block = np.diag(self.lam) - scale * (self.Psi_c[:, rows] @ self.S_Phi[rows, :])
        tracked = track_eigenvalues(np.diag(block), np.linalg.eigvals(block))
        return [complex(z.real, abs(z.imag)) for z in tracked[::2]]


def _evaluate(block, combo, zeta_min, tS_max, scale=1.0):
    lam = block.eigenvalues(combo, scale)
    metrics = [mode_metrics(x) for x in lam]
    zeta = tuple(z for _, z, _ in metrics)
    t_S = tuple(t for _, _, t in metrics)
    return _Candidate(combo, lam, zeta, t_S, performance_index(zeta, t_S),
                      _meets(zeta, t_S, zeta_min, tS_max))


def _local_positions(available, m, ids):
    available = tuple(range(m)) if available is None else tuple(int(g) for g in available)
    ids = available if ids is None else ids
    if len(available) != m:
        raise InputError(f"available lists {len(available)} generators, state has {m}")
    pos = {g: i for i, g in enumerate(available)}
    try:
        return available, sorted(pos[int(g)] for g in ids)
    except KeyError as exc:
        raise InputError(f"generator {exc} is not among the available ones") from None


def _design(A, sol, critical, sig, combo, cand, available, trace, passed):
    m = sol.m
    Bc = control_matrix(combo, m)
    K = gain_matrix(Bc, sol, critical, sig)
    return ControlDesign(
        selected=tuple(available[g] for g in combo), selected_local=tuple(combo), Bc=Bc, K=K,
        sigma_d=tuple(sig), critical=tuple(critical),
        lam_cl=tuple(cand.lam) if cand else (), zeta_cl=cand.zeta if cand else (),
        t_S_cl=cand.t_S if cand else (), J=cand.J if cand else math.nan,
        passed=passed, trace=tuple(trace), available=available,
    )


def select_generators(A_P, sol: ModalSolution, critical, capable=None, available=None, *,
                      sigma_d=DEFAULT_SIGMA_D, zeta_min=0.10, tS_max=10.0, ranking="speed",
                      threads=None) -> ControlDesign:
    """Smallest set of actuating generators that damps every critical mode.

    For ``n_m = 1, 2, ...`` the candidate pool is the union of the top
    ``n_m`` capable participants of each critical mode. Every ``n_m``-subset
    of the pool is closed around ``A_P``; the subset returned for a level is
    the best-index one among those meeting the targets, or the best-index one
    overall when none does. The first level with a passing subset ends the
    search.

    Parameters
    ----------
    critical : sequence of int
        Mode indices into ``sol.modes``.
    capable, available : sequence of int, optional
        Generator ids able to actuate, and the generator id of every state
        position in ``A_P`` (default ``0..m-1`` for both).
    """
    A = np.asarray(A_P, dtype=float)
    m = sol.m
    available, cap = _local_positions(available, m, capable)
    critical = list(critical)
    if not cap:
        raise InputError("no generator is capable of control")
    sig = _sigma_vector(sigma_d, critical)
    if not critical:
        return _design(A, sol, critical, sig, (), None, available, [], True)
    if any(s <= 0 for s in sig):
        raise InputError("damping coefficients must be positive")

    block = _CriticalBlock(sol, modal_projector_sum(sol, critical, sig), critical)
    capset = set(cap)
    rankings = [[g for g in generator_ranking(sol, k, ranking) if g in capset] for k in critical]
    single = len(critical) == 1
    workers = threads or _threads()
    trace = []
    level_best = None
    for n_m in range(1, len(cap) + 1):
        pool = sorted(set().union(*(r[:n_m] for r in rankings)))
        combos = list(itertools.combinations(pool, n_m))
        run = lambda c: _evaluate(block, c, zeta_min, tS_max)  # noqa: E731
        if workers > 1 and len(combos) > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                results = list(ex.map(run, combos))
        else:
            results = [run(c) for c in combos]
        best_all = best_pass = None
        for cand in results:
            if _better(cand, best_all, single):
                best_all = cand
            if cand.passed and _better(cand, best_pass, single):
                best_pass = cand
        level_best = best_pass or best_all
        trace.append(TraceEntry(n_m, tuple(available[g] for g in pool),
                                tuple(available[g] for g in level_best.combo), level_best.J,
                                level_best.passed, level_best.zeta, level_best.t_S, len(combos)))
        if best_pass is not None:
            return _design(A, sol, critical, sig, best_pass.combo, best_pass, available, trace, True)
    best = _design(A, sol, critical, sig, level_best.combo, level_best, available, trace, False)
    raise NoFeasibleDesign(
        f"no combination of up to {len(cap)} generators meets the damping targets", best=best
    )


def minimize_effort(A_P, sol: ModalSolution, critical, capable=None, available=None, *,
                    sigma_step=0.1, sigma_max=10.0, zeta_min=0.10, tS_max=10.0) -> ControlDesign:
    """Uniform damping coefficient grown in ``sigma_step`` increments, all capable units acting.

    Returns the first design meeting the targets; its ``J_C`` is the summed
    coefficient over the critical modes.
    """
    if sigma_step <= 0:
        raise InputError("sigma_step must be positive")
    A = np.asarray(A_P, dtype=float)
    m = sol.m
    available, cap = _local_positions(available, m, capable)
    critical = list(critical)
    if not cap:
        raise InputError("no generator is capable of control")
    if not critical:
        return _design(A, sol, critical, [], tuple(cap), None, available, [], True)
    block = _CriticalBlock(sol, modal_projector_sum(sol, critical, 1.0), critical)
    trace = []
    cand = None
    steps = int(math.floor(sigma_max / sigma_step + 1e-9))
    for k in range(1, steps + 1):
        s = k * sigma_step
        cand = _evaluate(block, tuple(cap), zeta_min, tS_max, scale=s)
        trace.append(TraceEntry(len(cap), tuple(available[g] for g in cap),
                                tuple(available[g] for g in cap), cand.J, cand.passed,
                                cand.zeta, cand.t_S, 1))
        if cand.passed:
            return _design(A, sol, critical, [s] * len(critical), cand.combo, cand, available,
                           trace, True)
    s = steps * sigma_step
    best = None
    if cand is not None:
        best = _design(A, sol, critical, [s] * len(critical), cand.combo, cand, available, trace, False)
    raise NoFeasibleDesign(f"targets not met with sigma_d up to {sigma_max}", best=best)


def embed_feedback(design: ControlDesign, n: int) -> np.ndarray:
    """``Bc K`` of a design placed into the full ``2n`` state of the physical system."""
    m = len(design.available)
    idx = list(design.available) + [n + g for g in design.available]
    F = np.zeros((2 * n, 2 * n))
    if m:
        F[np.ix_(idx, idx)] = design.Bc @ design.K
    return F


def verify_design(A_true, design: ControlDesign, sol_true: ModalSolution, modes,
                  zeta_min=0.10, tS_max=10.0) -> dict:
    """Closed-loop metrics of ``modes`` of the true system under the designed feedback."""
    A_true = np.asarray(A_true, dtype=float)
    F = embed_feedback(design, A_true.shape[0] // 2)
    lam = closed_loop_modes(A_true, sol_true, F, list(modes))
    metrics = [mode_metrics(x) for x in lam]
    zeta = tuple(z for _, z, _ in metrics)
    t_S = tuple(t for _, _, t in metrics)
    return {"lam": tuple(lam), "zeta": zeta, "t_S": t_S,
            "passed": _meets(zeta, t_S, zeta_min, tS_max)}


def timed(fn, *args, **kwargs):
    """Call ``fn`` and return ``(result, seconds)``."""
    t = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t

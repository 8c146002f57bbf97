"""Euler-Maruyama integration of the stochastic swing equations and PMU emulation."""
from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InputError, UnstableSimulation
from .grid import GridModel, LinearModel, build_state_matrices, electrical_power

log = logging.getLogger(__name__)

GUARD_BOUND = 1e3          # rad, infinity norm
PMU_RATE_RANGE = (6.0, 60.0)


@dataclass(frozen=True)
class Trajectory:
    """States ``x = [d_delta, d_omega]`` on the grid ``t0 + k*dt``, one row per step."""

    dt: float
    t0: float
    states: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.states.shape[0])

    @property
    def n(self) -> int:
        return self.states.shape[1] // 2


@dataclass(frozen=True)
class PmuDataset:
    """Decimated, noisy angle and speed deviations of the PMU-equipped generators.

    ``samples`` has one row per report and columns ``[angles (m), speeds (m)]``
    ordered like ``available``. ``available`` and ``capable`` hold 0-based
    generator indices.
    """

    fs: float
    t0: float
    samples: np.ndarray
    available: tuple
    capable: tuple
    noise_std_angle: float = 0.0
    noise_std_speed: float = 0.0

    def __post_init__(self):
        if not set(self.capable) <= set(self.available):
            raise InputError("capable generators must be a subset of the available ones")
        if self.samples.ndim != 2 or self.samples.shape[1] != 2 * len(self.available):
            raise InputError("samples must have 2*len(available) columns")

    @property
    def m(self) -> int:
        return len(self.available)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.shape[0]) / self.fs


def _steps(duration, dt):
    if dt <= 0 or duration <= 0:
        raise InputError("duration and dt must be positive")
    n_steps = int(round(duration / dt))
    if not math.isclose(n_steps * dt, duration, rel_tol=1e-9):
        raise InputError(f"duration {duration} is not a multiple of dt {dt}")
    return n_steps


def _warn_if_unstable(A, dt):
    w = np.linalg.eigvals(A)
    osc = w[np.abs(w.imag) > 1e-6]
    if np.any(osc.real >= 0):
        warnings.warn("state matrix has non-decaying oscillatory modes", RuntimeWarning, stacklevel=3)
    # explicit Euler amplifies a decaying mode when |1 + dt*lambda| > 1
    decaying = w[w.real < 0]
    if np.any(np.abs(1 + dt * decaying) > 1):
        warnings.warn(f"dt={dt:g} s is too coarse for Euler-Maruyama on this model; "
                      "lightly damped fast modes will grow", RuntimeWarning, stacklevel=3)


def simulate_linear(lin: LinearModel, duration: float, dt: float = 1e-3, seed=None,
                    x0=None) -> Trajectory:
    """Integrate ``dx = A x dt + B dW`` from ``x0`` (default 0).

    The same ``seed`` reproduces the trajectory bit for bit.
    """
    n_steps = _steps(duration, dt)
    A, B = np.asarray(lin.A), np.asarray(lin.B)
    _warn_if_unstable(A, dt)
    rng = np.random.default_rng(seed)
    F = np.eye(A.shape[0]) + dt * A
    G = math.sqrt(dt) * B
    X = np.empty((n_steps, A.shape[0]))
    x = np.zeros(A.shape[0]) if x0 is None else np.array(x0, dtype=float)
    chunk = 20000
    for start in range(0, n_steps, chunk):
        stop = min(start + chunk, n_steps)
        noise = rng.standard_normal((stop - start, B.shape[1])) @ G.T
        for k in range(start, stop):
            X[k] = x
            x = F @ x + noise[k - start]
        if not np.all(np.abs(X[start:stop]) <= GUARD_BOUND):
            raise UnstableSimulation(f"state left the {GUARD_BOUND:g} rad guard before t={stop * dt:.3f} s")
    return Trajectory(float(dt), 0.0, X)


def simulate_nonlinear(model: GridModel, delta0, duration: float, dt: float = 1e-3, seed=None,
                       x0=None) -> Trajectory:
    """Integrate the nonlinear swing equations under random load fluctuations.

    ``delta0`` must be an equilibrium for every machine except the reference,
    whose mechanical power is balanced internally. Returned states are
    deviations from ``(delta0, 0)``.
    """
    n_steps = _steps(duration, dt)
    n = model.n
    delta0 = np.asarray(delta0, dtype=float)
    Pe0 = electrical_power(delta0, model)
    Pm = model.Pm.copy()
    Pm[model.ref_index] = Pe0[model.ref_index]
    if np.max(np.abs(Pm - Pe0)) > 1e-6:
        raise InputError("delta0 is not an equilibrium of the model")
    _warn_if_unstable(build_state_matrices(model.with_pm(Pm), delta0).A, dt)
    Minv = 1.0 / model.M
    noise_gain = -math.sqrt(dt) * Minv * model.E ** 2 * model.G * model.sigma
    rng = np.random.default_rng(seed)
    X = np.empty((n_steps, 2 * n))
    x = np.zeros(2 * n) if x0 is None else np.array(x0, dtype=float)
    chunk = 20000
    for start in range(0, n_steps, chunk):
        stop = min(start + chunk, n_steps)
        noise = rng.standard_normal((stop - start, n)) * noise_gain
        for k in range(start, stop):
            X[k] = x
            dd, dw = x[:n], x[n:]
            acc = Minv * (Pm - electrical_power(delta0 + dd, model) - model.D * dw)
            x = np.concatenate((dd + dt * dw, dw + dt * acc + noise[k - start]))
        if not np.all(np.abs(X[start:stop]) <= GUARD_BOUND):
            raise UnstableSimulation(f"state left the {GUARD_BOUND:g} rad guard before t={stop * dt:.3f} s")
    return Trajectory(float(dt), 0.0, X)


def _report_rows(traj, fs):
    """Integration steps closest to the report instants ``k / fs``."""
    ratio = 1.0 / (fs * traj.dt)
    if fs <= 0 or ratio < 1 - 1e-9:
        raise InputError(f"fs={fs} Hz exceeds the integration rate {1 / traj.dt:g} Hz")
    duration = traj.states.shape[0] * traj.dt
    count = int(math.floor(duration * fs + 1e-9))
    rows = np.rint(np.arange(count) * ratio).astype(int)
    return rows[rows < traj.states.shape[0]]


def emulate_pmu(traj: Trajectory, fs: float = 60.0, noise_std_angle: float = 1e-3,
                noise_std_speed: float = 1e-6, available=None, capable=None, seed=None) -> PmuDataset:
    """Decimate a trajectory to the PMU reporting rate and add measurement noise.

    ``available`` defaults to every generator, ``capable`` to ``available``.
    Each report takes the integration step nearest to ``t0 + k/fs`` (exact
    when ``fs`` divides ``1/dt``). Rates outside the usual 6-60 Hz window
    are accepted with a warning.
    """
    n = traj.n
    available = tuple(range(n)) if available is None else tuple(int(g) for g in available)
    if not available:
        raise InputError("at least one PMU must be available")
    if len(set(available)) != len(available) or not all(0 <= g < n for g in available):
        raise InputError(f"invalid available set {available}")
    capable = available if capable is None else tuple(int(g) for g in capable)
    rows = _report_rows(traj, fs)
    if not PMU_RATE_RANGE[0] <= fs <= PMU_RATE_RANGE[1]:
        warnings.warn(f"fs={fs} Hz lies outside the typical PMU range", RuntimeWarning, stacklevel=2)
    cols = list(available) + [n + g for g in available]
    clean = traj.states[np.ix_(rows, cols)]
    rng = np.random.default_rng(seed)
    m = len(available)
    std = np.concatenate((np.full(m, noise_std_angle), np.full(m, noise_std_speed)))
    samples = clean + rng.standard_normal(clean.shape) * std
    return PmuDataset(float(fs), traj.t0, samples, available, capable,
                      float(noise_std_angle), float(noise_std_speed))


# -- CSV export ---------------------------------------------------------------

def _write_csv(path, times, values, ids):
    header = ["t"] + [f"{g}_delta" for g in ids] + [f"{g}_omega" for g in ids]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, row in zip(times, values):
            w.writerow([f"{t:.9g}"] + [f"{v:.9g}" for v in row])


def write_trajectory_csv(traj: Trajectory, path, names=None) -> None:
    names = names or [f"G{i + 1}" for i in range(traj.n)]
    _write_csv(path, traj.times, traj.states, names)


def write_pmu_csv(data: PmuDataset, path, names=None) -> None:
    ids = [names[g] if names else f"G{g + 1}" for g in data.available]
    _write_csv(path, data.times, data.samples, ids)


def read_pmu_csv(path, names=None, fs=None, capable=None, noise_std_angle=0.0,
                 noise_std_speed=0.0) -> PmuDataset:
    """Load a PMU CSV. Generator ids map back through ``names`` (default ``G1..``)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[0] != "t" or (len(header) - 1) % 2:
        raise InputError(f"{path}: malformed PMU header")
    m = (len(header) - 1) // 2
    ids = [h[: -len("_delta")] for h in header[1:m + 1]]
    if [h[: -len("_omega")] for h in header[m + 1:]] != ids:
        raise InputError(f"{path}: angle and speed columns disagree")
    lookup = {name: i for i, name in enumerate(names)} if names else None
    try:
        available = tuple(lookup[g] if lookup else int(g.lstrip("G")) - 1 for g in ids)
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: unknown generator id {exc}") from None
    data = np.array(body, dtype=float).reshape(len(body), 2 * m + 1)
    t = data[:, 0]
    if fs is None:
        fs = 1.0 / np.median(np.diff(t)) if len(t) > 1 else 60.0
        fs = float(round(fs, 6))
    return PmuDataset(float(fs), float(t[0]) if len(t) else 0.0, data[:, 1:], available,
                      available if capable is None else tuple(capable),
                      noise_std_angle, noise_std_speed)

"""Kron-reduced classical multi-machine model and its linearization.

Generators are indexed from 0 in the Python API. Grid description files
number them from 1 (``G1`` ... ``Gn``), the way one-line diagrams do.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, NoEquilibrium, SingularJacobian

EQUILIBRIUM_TOL = 1e-10
EQUILIBRIUM_MAXITER = 50


def _frozen(a, shape=None, name="array"):
    arr = np.array(a, dtype=float)
    if shape is not None and arr.shape != shape:
        raise InputError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class InfiniteBus:
    """Optional stiff external grid at angle 0 tied to the generators.

    ``mag[i]`` and ``ang[i]`` describe the reduced admittance between
    generator ``i`` and the infinite bus (0 for no tie). With at least one
    tie the uniform-angle mode disappears and the system has a proper
    stationary distribution.
    """

    emf: float
    mag: np.ndarray
    ang: np.ndarray


@dataclass(frozen=True)
class GridModel:
    """Classical generators behind a Kron-reduced admittance matrix.

    Parameters
    ----------
    M, D, E, Pm : array_like, shape (n,)
        Inertia (s^2 pu), damping (pu), internal emf (pu), mechanical power (pu).
    Ymag, Yang : array_like, shape (n, n)
        Admittance magnitudes and angles (rad), ``Y_ij = Ymag_ij * exp(1j*Yang_ij)``.
    sigma : array_like, shape (n,)
        Relative load-fluctuation intensity on each diagonal admittance.
    ref_index : int
        Reference machine, its angle is pinned when solving the equilibrium.
    """

    M: np.ndarray
    D: np.ndarray
    E: np.ndarray
    Pm: np.ndarray
    Ymag: np.ndarray
    Yang: np.ndarray
    sigma: np.ndarray
    ref_index: int = 0
    infinite_bus: InfiniteBus | None = None
    names: tuple = field(default=())

    def __post_init__(self):
        M = np.atleast_1d(np.asarray(self.M, dtype=float))
        n = M.shape[0]
        if n < 2:
            raise InputError("a grid model needs at least two generators")
        vec = {k: _frozen(getattr(self, k), (n,), k) for k in ("M", "D", "E", "Pm", "sigma")}
        Ymag = _frozen(self.Ymag, (n, n), "Ymag")
        Yang = _frozen(self.Yang, (n, n), "Yang")
        if np.any(vec["M"] <= 0):
            raise InputError("inertia coefficients must be positive")
        if np.any(vec["D"] < 0):
            raise InputError("damping coefficients must be non-negative")
        if np.any(vec["E"] <= 0):
            raise InputError("emf magnitudes must be positive")
        if np.any(vec["sigma"] < 0):
            raise InputError("load-fluctuation intensities must be non-negative")
        if np.any(Ymag < 0):
            raise InputError("admittance magnitudes must be non-negative")
        off = ~np.eye(n, dtype=bool)
        if not np.allclose(Ymag[off], Ymag.T[off], rtol=1e-12, atol=1e-12):
            raise InputError("admittance magnitudes must be symmetric")
        if not np.allclose(Yang[off], Yang.T[off], rtol=1e-12, atol=1e-12):
            raise InputError("admittance angles must be symmetric")
        if not 0 <= int(self.ref_index) < n:
            raise InputError(f"ref_index {self.ref_index} out of range for n={n}")
        for k, v in vec.items():
            object.__setattr__(self, k, v)
        object.__setattr__(self, "Ymag", Ymag)
        object.__setattr__(self, "Yang", Yang)
        object.__setattr__(self, "ref_index", int(self.ref_index))
        if self.infinite_bus is not None:
            ib = self.infinite_bus
            if ib.emf <= 0:
                raise InputError("infinite-bus emf must be positive")
            mag = _frozen(ib.mag, (n,), "infinite_bus.mag")
            if np.any(mag < 0):
                raise InputError("infinite-bus tie magnitudes must be non-negative")
            object.__setattr__(
                self, "infinite_bus",
                InfiniteBus(float(ib.emf), mag, _frozen(ib.ang, (n,), "infinite_bus.ang")),
            )
        names = tuple(self.names) or tuple(f"G{i + 1}" for i in range(n))
        if len(names) != n:
            raise InputError("names must have one entry per generator")
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def G(self) -> np.ndarray:
        """Diagonal self-conductances ``Y_ii cos(phi_ii)``."""
        return np.diag(self.Ymag) * np.cos(np.diag(self.Yang))

    def with_pm(self, Pm) -> "GridModel":
        return GridModel(self.M, self.D, self.E, Pm, self.Ymag, self.Yang, self.sigma,
                         self.ref_index, self.infinite_bus, self.names)


@dataclass(frozen=True)
class LinearModel:
    """Linearization ``dx = A x dt + B dW`` around ``delta0`` with ``x = [d_delta, d_omega]``."""

    delta0: np.ndarray
    J_true: np.ndarray
    A: np.ndarray
    B: np.ndarray

    @property
    def n(self) -> int:
        return self.J_true.shape[0]


def _check_angles(delta, model):
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (model.n,):
        raise InputError(f"delta must have shape ({model.n},), got {delta.shape}")
    return delta


def electrical_power(delta, model: GridModel) -> np.ndarray:
    """Electrical power output of every machine, self-terms included."""
    delta = _check_angles(delta, model)
    E = model.E
    diff = delta[:, None] - delta[None, :] - model.Yang
    Pe = E * ((model.Ymag * np.cos(diff)) @ E)
    ib = model.infinite_bus
    if ib is not None:
        Pe = Pe + E * ib.emf * ib.mag * np.cos(delta - ib.ang)
    return Pe


def jacobian_pe(delta, model: GridModel) -> np.ndarray:
    """Analytic ``dPe/d(delta)``."""
    delta = _check_angles(delta, model)
    E = model.E
    diff = delta[:, None] - delta[None, :] - model.Yang
    Jm = np.outer(E, E) * model.Ymag * np.sin(diff)
    np.fill_diagonal(Jm, 0.0)
    Jm[np.diag_indices_from(Jm)] = -Jm.sum(axis=1)
    ib = model.infinite_bus
    if ib is not None:
        Jm[np.diag_indices_from(Jm)] -= E * ib.emf * ib.mag * np.sin(delta - ib.ang)
    return Jm


def solve_equilibrium(model: GridModel, guess=None, *, tol=EQUILIBRIUM_TOL,
                      maxiter=EQUILIBRIUM_MAXITER, full_output=False):
    """Newton solve of ``Pm - Pe(delta) = 0`` with the reference angle pinned.

    The reference machine is the slack: its own mismatch is not enforced and
    is reported as ``slack_adjustment`` (the change of its ``Pm`` that makes
    ``delta0`` an exact equilibrium).

    Returns
    -------
    delta0 : ndarray
    info : dict, only if ``full_output``
        ``iterations``, ``residual`` and ``slack_adjustment``.
    """
    n = model.n
    delta = np.zeros(n) if guess is None else _check_angles(guess, model).copy()
    free = np.array([i for i in range(n) if i != model.ref_index])
    for it in range(maxiter + 1):
        mismatch = model.Pm - electrical_power(delta, model)
        resid = np.max(np.abs(mismatch[free]))
        if resid <= tol:
            break
        if it == maxiter or not np.isfinite(resid):
            raise NoEquilibrium(
                f"Newton did not converge in {maxiter} iterations (residual {resid:.3e} pu)"
            )
        Jff = jacobian_pe(delta, model)[np.ix_(free, free)]
        if not np.all(np.isfinite(Jff)) or np.linalg.cond(Jff) > 1e14:
            raise SingularJacobian(f"singular power-flow Jacobian at iteration {it}")
        delta[free] += np.linalg.solve(Jff, mismatch[free])
    if not full_output:
        return delta
    slack = electrical_power(delta, model)[model.ref_index] - model.Pm[model.ref_index]
    return delta, {"iterations": it, "residual": float(resid), "slack_adjustment": float(slack)}


def balance_slack(model: GridModel, delta0) -> GridModel:
    """Copy of ``model`` whose reference ``Pm`` matches ``Pe(delta0)``."""
    Pm = model.Pm.copy()
    r = model.ref_index
    Pm[r] = electrical_power(delta0, model)[r]
    return model.with_pm(Pm)


def build_state_matrices(model: GridModel, delta0) -> LinearModel:
    """State and noise-input matrices of the linearized stochastic swing equations."""
    delta0 = _frozen(_check_angles(delta0, model), name="delta0")
    n = model.n
    J = jacobian_pe(delta0, model)
    Minv = 1.0 / model.M
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.eye(n)
    A[n:, :n] = -Minv[:, None] * J
    A[n:, n:] = np.diag(-Minv * model.D)
    B = np.zeros((2 * n, n))
    B[n:, :] = np.diag(-Minv * model.E ** 2 * model.G * model.sigma)
    return LinearModel(delta0, _frozen(J), _frozen(A), _frozen(B))


# -- grid description files ---------------------------------------------------

def grid_from_dict(data: dict) -> GridModel:
    n = int(data["n"])
    gens = data["generators"]
    if len(gens) != n:
        raise InputError(f"expected {n} generator records, got {len(gens)}")
    col = {k: np.array([float(g[k]) for g in gens]) for k in ("M", "D", "E", "Pm")}
    sigma = np.array([float(g.get("sigma", 0.0)) for g in gens])
    names = tuple(g.get("name", f"G{i + 1}") for i, g in enumerate(gens))
    Ymag = np.zeros((n, n))
    Yang = np.zeros((n, n))
    seen = set()
    for entry in data.get("admittance", []):
        i, j = int(entry["i"]) - 1, int(entry["j"]) - 1
        if not (0 <= i < n and 0 <= j < n):
            raise InputError(f"admittance entry ({i + 1}, {j + 1}) out of range")
        mag, ang = float(entry["magnitude"]), float(entry["angle_rad"])
        for a, b in {(i, j), (j, i)}:
            if (a, b) in seen and (Ymag[a, b], Yang[a, b]) != (mag, ang):
                raise InputError(f"conflicting admittance entries for ({a + 1}, {b + 1})")
            Ymag[a, b], Yang[a, b] = mag, ang
            seen.add((a, b))
    ib = None
    if data.get("infinite_bus"):
        spec = data["infinite_bus"]
        mag, ang = np.zeros(n), np.zeros(n)
        for tie in spec.get("ties", []):
            i = int(tie["i"]) - 1
            mag[i], ang[i] = float(tie["magnitude"]), float(tie["angle_rad"])
        ib = InfiniteBus(float(spec.get("E", 1.0)), mag, ang)
    return GridModel(col["M"], col["D"], col["E"], col["Pm"], Ymag, Yang, sigma,
                     int(data.get("ref_index", 1)) - 1, ib, names)


def grid_to_dict(model: GridModel) -> dict:
    n = model.n
    gens = [
        {"name": model.names[i], "M": float(model.M[i]), "D": float(model.D[i]),
         "E": float(model.E[i]), "Pm": float(model.Pm[i]), "sigma": float(model.sigma[i])}
        for i in range(n)
    ]
    adm = [
        {"i": i + 1, "j": j + 1, "magnitude": float(model.Ymag[i, j]),
         "angle_rad": float(model.Yang[i, j])}
        for i in range(n) for j in range(i, n) if model.Ymag[i, j] != 0.0
    ]
    out = {"n": n, "ref_index": model.ref_index + 1, "generators": gens, "admittance": adm}
    if model.infinite_bus is not None:
        ib = model.infinite_bus
        out["infinite_bus"] = {
            "E": ib.emf,
            "ties": [{"i": i + 1, "magnitude": float(ib.mag[i]), "angle_rad": float(ib.ang[i])}
                     for i in range(n) if ib.mag[i] != 0.0],
        }
    return out


def load_grid(path) -> GridModel:
    with open(Path(path)) as fh:
        return grid_from_dict(json.load(fh))


def save_grid(model: GridModel, path) -> None:
    with open(Path(path), "w") as fh:
        json.dump(grid_to_dict(model), fh, indent=2)
        fh.write("\n")

"""Scenario configuration and the stage functions behind the command line.

Every stage reads the artifacts of the previous one from the output
directory, so ``run`` and a chain of single-stage commands produce the same
files.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import reports
from .delay import delay_sweep, write_sweep_csv
from .errors import InputError, NoFeasibleDesign
from .estimation import estimate_model
from .grid import balance_slack, build_state_matrices, load_grid, solve_equilibrium
from .modal import INTER_AREA_BAND, modal_decomposition
from .simulation import emulate_pmu, read_pmu_csv, simulate_linear, simulate_nonlinear, write_pmu_csv
from .wadc import ControlDesign, control_matrix, minimize_effort, select_generators, timed, verify_design

log = logging.getLogger(__name__)

MIN_DURATION = 30.0


@dataclass
class Scenario:
    grid: Path
    outputs: Path = Path("out")
    equilibrium_guess: list | None = None
    duration: float = 180.0
    dt: float = 1e-3
    seed: int = 0
    model: str = "linear"
    fs: float = 60.0
    noise_std_angle: float = 1e-3
    noise_std_speed: float = 1e-6
    available: list | None = None
    capable: list | None = None
    band: tuple = INTER_AREA_BAND
    zeta_min: float = 0.10
    tS_max: float = 10.0
    ranking: str = "speed"
    sigma_d: float | list = 2.0
    effort: bool = False
    sigma_step: float = 0.1
    sigma_max: float = 10.0
    taus: list = field(default_factory=lambda: [0.0, 0.01, 0.05, 0.1])
    N: int = 16

    @classmethod
    def from_dict(cls, data: dict, base: Path = Path(".")) -> "Scenario":
        sim = data.get("simulation", {})
        pmu = data.get("pmu", {})
        modal = data.get("modal", {})
        wadc = data.get("wadc", {})
        dly = data.get("delay", {})
        if "grid" not in data:
            raise InputError("scenario must name a grid file")
        scn = cls(
            grid=(base / data["grid"]).resolve(),
            outputs=(base / data.get("outputs", "out")).resolve(),
            equilibrium_guess=data.get("equilibrium_guess"),
            duration=float(sim.get("duration", 180.0)),
            dt=float(sim.get("dt", 1e-3)),
            seed=int(sim.get("seed", 0)),
            model=sim.get("model", "linear"),
            fs=float(pmu.get("fs", 60.0)),
            noise_std_angle=float(pmu.get("noise_std_angle", 1e-3)),
            noise_std_speed=float(pmu.get("noise_std_speed", 1e-6)),
            available=pmu.get("available"),
            capable=pmu.get("capable"),
            band=tuple(modal.get("band", INTER_AREA_BAND)),
            zeta_min=float(wadc.get("zeta_min", 0.10)),
            tS_max=float(wadc.get("tS_max", 10.0)),
            ranking=modal.get("ranking", "speed"),
            sigma_d=wadc.get("sigma_d", 2.0),
            effort=bool(wadc.get("effort_mode", False)),
            sigma_step=float(wadc.get("sigma_step", 0.1)),
            sigma_max=float(wadc.get("sigma_max", 10.0)),
            taus=[float(t) for t in dly.get("taus", [0.0, 0.01, 0.05, 0.1])],
            N=int(dly.get("N", 16)),
        )
        scn.validate()
        return scn

    @classmethod
    def load(cls, path) -> "Scenario":
        path = Path(path)
        with open(path) as fh:
            return cls.from_dict(json.load(fh), path.parent)

    def validate(self):
        if not self.grid.exists():
            raise InputError(f"grid file {self.grid} does not exist")
        if self.model not in ("linear", "nonlinear"):
            raise InputError(f"simulation model must be 'linear' or 'nonlinear', got {self.model!r}")
        if self.ranking not in ("speed", "max"):
            raise InputError(f"unknown ranking rule {self.ranking!r}")
        if self.duration < MIN_DURATION:
            warnings.warn(f"{self.duration} s of data is short for covariance estimation",
                          RuntimeWarning, stacklevel=2)


def resolve_ids(spec, names) -> list | None:
    """Generator ids (0-based) from names like ``"G3"`` or 1-based integers."""
    if spec is None:
        return None
    lookup = {nm: i for i, nm in enumerate(names)}
    out = []
    for g in spec:
        if isinstance(g, str):
            if g not in lookup:
                raise InputError(f"unknown generator {g!r}")
            out.append(lookup[g])
        else:
            if not 1 <= int(g) <= len(names):
                raise InputError(f"generator number {g} out of range")
            out.append(int(g) - 1)
    return out


def _grid_and_equilibrium(scn: Scenario):
    grid = load_grid(scn.grid)
    guess = scn.equilibrium_guess
    if guess is None:
        with open(scn.grid) as fh:
            guess = json.load(fh).get("equilibrium_guess")
    delta0, info = solve_equilibrium(grid, guess, full_output=True)
    return balance_slack(grid, delta0), delta0, info


# -- stages -------------------------------------------------------------------

def stage_simulate(scn: Scenario, out: Path) -> None:
    grid, delta0, info = _grid_and_equilibrium(scn)
    lin = build_state_matrices(grid, delta0)
    reports.dump_json({
        "names": grid.names, "M": grid.M, "D": grid.D, "delta0": delta0,
        "slack_adjustment": info["slack_adjustment"], "J_true": lin.J_true, "A": lin.A, "B": lin.B,
    }, out / "linear_model.json")
    sim_seed, pmu_seed = np.random.SeedSequence(scn.seed).spawn(2)
    if scn.model == "linear":
        traj = simulate_linear(lin, scn.duration, scn.dt, sim_seed)
    else:
        traj = simulate_nonlinear(grid, delta0, scn.duration, scn.dt, sim_seed)
    available = resolve_ids(scn.available, grid.names)
    capable = resolve_ids(scn.capable, grid.names)
    data = emulate_pmu(traj, scn.fs, scn.noise_std_angle, scn.noise_std_speed, available, capable, pmu_seed)
    write_pmu_csv(data, out / "pmu.csv", grid.names)
    reports.dump_json({
        "fs": data.fs, "noise_std_angle": data.noise_std_angle, "noise_std_speed": data.noise_std_speed,
        "available": [grid.names[g] for g in data.available],
        "capable": [grid.names[g] for g in data.capable],
        "sample_count": data.samples.shape[0], "seed": scn.seed, "model": scn.model,
    }, out / "pmu.json")


def stage_estimate(scn: Scenario, out: Path, pmu_csv: Path | None = None) -> None:
    grid = load_grid(scn.grid)
    meta_path = out / "pmu.json"
    meta = reports.load_json(meta_path) if meta_path.exists() else {}
    capable = resolve_ids(meta.get("capable", scn.capable), grid.names)
    data = read_pmu_csv(pmu_csv or out / "pmu.csv", grid.names, fs=meta.get("fs", scn.fs))
    if capable is not None:
        capable = [g for g in capable if g in data.available]
    est = estimate_model(data, grid.M, grid.D)
    reports.dump_json({
        "names": [grid.names[g] for g in est.available],
        "capable": [grid.names[g] for g in (capable if capable is not None else est.available)],
        "J_est": est.J_est, "A_P": est.A_P, "cond_dd": est.cond_dd, "sample_count": est.sample_count,
    }, out / "estimated.json")


def _modal(scn, A):
    return modal_decomposition(A, band=scn.band, zeta_min=scn.zeta_min, tS_max=scn.tS_max)


def stage_analyze(scn: Scenario, matrix: Path, out: Path) -> Path:
    """Mode report of a stored linear model (``A``) or estimated model (``A_P``)."""
    data = reports.load_json(matrix)
    if "A_P" in data:
        sol = _modal(scn, np.array(data["A_P"]))
        report = {"modes": reports.mode_report(sol, data["names"], ranking=scn.ranking)}
        true_path = Path(matrix).parent / "linear_model.json"
        if true_path.exists():
            true = _modal(scn, np.array(reports.load_json(true_path)["A"]))
            report["comparison"] = reports.mode_comparison(true, sol)
        target = out / "modes_estimated.json"
    elif "A" in data:
        sol = _modal(scn, np.array(data["A"]))
        report = {"modes": reports.mode_report(sol, data["names"], ranking=scn.ranking)}
        target = out / "modes_true.json"
    else:
        raise InputError(f"{matrix} holds neither 'A' nor 'A_P'")
    reports.dump_json(report, target)
    return target


def stage_design(scn: Scenario, out: Path, effort: bool | None = None) -> ControlDesign:
    est = reports.load_json(out / "estimated.json")
    grid = load_grid(scn.grid)
    names = grid.names
    lookup = {nm: i for i, nm in enumerate(names)}
    available = [lookup[nm] for nm in est["names"]]
    capable = [lookup[nm] for nm in est["capable"]]
    A_P = np.array(est["A_P"])
    sol = _modal(scn, A_P)
    critical = sol.critical()
    effort = scn.effort if effort is None else effort
    sigma = scn.sigma_d if np.isscalar(scn.sigma_d) else list(scn.sigma_d)
    try:
        if effort:
            design, seconds = timed(minimize_effort, A_P, sol, critical, capable, available,
                                    sigma_step=scn.sigma_step, sigma_max=scn.sigma_max,
                                    zeta_min=scn.zeta_min, tS_max=scn.tS_max)
        else:
            design, seconds = timed(select_generators, A_P, sol, critical, capable, available,
                                    sigma_d=sigma, zeta_min=scn.zeta_min, tS_max=scn.tS_max,
                                    ranking=scn.ranking)
    except NoFeasibleDesign as exc:
        if exc.best is None:
            raise
        design, seconds = exc.best, math.nan
    verification = None
    true_path = out / "linear_model.json"
    if true_path.exists() and design.critical:
        A_true = np.array(reports.load_json(true_path)["A"])
        sol_true = _modal(scn, A_true)
        crit_true = sol_true.critical()
        v = verify_design(A_true, design, sol_true, crit_true, scn.zeta_min, scn.tS_max)
        verification = {"modes": [k + 1 for k in crit_true], "lambda_cl": v["lam"],
                        "zeta_cl": v["zeta"], "t_S_cl": v["t_S"], "passed": v["passed"]}
    reports.dump_json(
        reports.design_report(design, sol, names, mode="effort" if effort else "selection",
                              verification=verification),
        out / "design.json",
    )
    reports.write_table4(design, sol, names, out / "table4.csv")
    reports.dump_json({"selection_seconds": seconds}, out / "timing.json")
    return design


def stage_delay(scn: Scenario, out: Path) -> list:
    est = reports.load_json(out / "estimated.json")
    des = reports.load_json(out / "design.json")
    A_P = np.array(est["A_P"])
    m = A_P.shape[0] // 2
    pos = {nm: i for i, nm in enumerate(est["names"])}
    Bc = control_matrix([pos[nm] for nm in des["selected"]], m)
    K = np.array(des["K"])
    modes = [complex(*mm["lambda_cl"]) for mm in des["critical_modes"] if "lambda_cl" in mm]
    # the estimated uniform-angle mode sits near the origin, untouched by the feedback
    eig = np.linalg.eigvals(A_P)
    rows = delay_sweep(A_P, Bc, K, scn.taus, scn.N, modes, eig[np.argmin(np.abs(eig))])
    write_sweep_csv(rows, out / "delay_sweep.csv")
    return rows


def run_pipeline(scn: Scenario, out: Path | None = None, effort: bool | None = None) -> bool:
    """All stages in order. Returns whether the design meets the damping targets."""
    out = Path(out or scn.outputs)
    out.mkdir(parents=True, exist_ok=True)
    stage_simulate(scn, out)
    stage_estimate(scn, out)
    stage_analyze(scn, out / "linear_model.json", out)
    stage_analyze(scn, out / "estimated.json", out)
    design = stage_design(scn, out, effort)
    stage_delay(scn, out)
    return design.passed

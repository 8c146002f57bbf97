"""Ambient-data mode identification and mode-selective wide-area damping control."""
from .delay import DelaySpectrum, delay_sweep, delayed_spectrum
from .errors import (DefectiveMatrix, GaugeError, IllConditionedCovariance, InputError,
                     InsufficientData, ModalWadcError, NoEquilibrium, NoFeasibleDesign,
                     NoStationaryCovariance, SingularJacobian, UnstableSimulation)
from .estimation import (CovarianceBlocks, EstimatedModel, assemble_state_matrix, estimate_jacobian,
                         estimate_model, lyapunov_solve, sample_covariance)
from .grid import (GridModel, InfiniteBus, LinearModel, build_state_matrices, electrical_power,
                   jacobian_pe, load_grid, save_grid, solve_equilibrium)
from .modal import (ModalSolution, Mode, classify_critical, generator_participation, generator_ranking,
                    modal_decomposition, participation_matrix)
from .pipeline import Scenario, run_pipeline
from .simulation import PmuDataset, Trajectory, emulate_pmu, simulate_linear, simulate_nonlinear
from .wadc import (ControlDesign, closed_loop, control_matrix, gain_matrix, minimize_effort,
                   performance_index, predicted_shift, select_generators, verify_design)

__all__ = [
    "DelaySpectrum", "delay_sweep", "delayed_spectrum", "DefectiveMatrix", "GaugeError",
    "IllConditionedCovariance", "InputError", "InsufficientData", "ModalWadcError", "NoEquilibrium",
    "NoFeasibleDesign", "NoStationaryCovariance", "SingularJacobian", "UnstableSimulation",
    "CovarianceBlocks", "EstimatedModel", "assemble_state_matrix", "estimate_jacobian",
    "estimate_model", "lyapunov_solve", "sample_covariance", "GridModel", "InfiniteBus",
    "LinearModel", "build_state_matrices", "electrical_power", "jacobian_pe", "load_grid",
    "save_grid", "solve_equilibrium", "ModalSolution", "Mode", "classify_critical",
    "generator_participation", "generator_ranking", "modal_decomposition", "participation_matrix",
    "Scenario", "run_pipeline", "PmuDataset", "Trajectory", "emulate_pmu", "simulate_linear",
    "simulate_nonlinear", "ControlDesign", "closed_loop", "control_matrix", "gain_matrix",
    "minimize_effort", "performance_index", "predicted_shift", "select_generators", "verify_design",
]

__version__ = "0.1.0"

"""Exception hierarchy. Every error carries a short machine-readable ``code``."""


class ModalWadcError(Exception):
    code = "error"


class InputError(ModalWadcError, ValueError):
    code = "input_error"


class NoEquilibrium(ModalWadcError):
    code = "no_equilibrium"


class SingularJacobian(NoEquilibrium):
    code = "singular_jacobian"


class UnstableSimulation(ModalWadcError):
    code = "unstable_simulation"


class InsufficientData(InputError):
    code = "insufficient_data"


class IllConditionedCovariance(ModalWadcError):
    code = "ill_conditioned_covariance"

    def __init__(self, message, cond=None):
        super().__init__(message)
        self.cond = cond


class NoStationaryCovariance(ModalWadcError):
    code = "no_stationary_covariance"


class DefectiveMatrix(ModalWadcError):
    code = "defective_matrix"

    def __init__(self, message, cluster=()):
        super().__init__(message)
        self.cluster = tuple(cluster)


class GaugeError(ModalWadcError):
    code = "gauge_error"


class NoFeasibleDesign(ModalWadcError):
    code = "no_feasible_design"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best

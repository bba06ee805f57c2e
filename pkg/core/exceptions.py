"""
Custom exception classes for the low-Mach laboratory.
These separate solver and harness errors from generic Python errors so that
the sweep runner can record them per parameter point.
"""


class LabError(Exception):
    """Base class for all laboratory errors."""
    pass


class ConfigError(LabError):
    """Raised when a configuration is invalid. Carries every problem found."""
    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ParameterError(ConfigError):
    """Raised when a parameter point lies outside its admissible set."""
    pass


class MeanNotZero(LabError):
    """Raised when a torus inverse is applied to a field with nonzero mean."""
    def __init__(self, mean, scale):
        self.mean = mean
        self.scale = scale
        super().__init__(f"field mean {mean:.3e} is not zero relative to L2 scale {scale:.3e}")


class StateOutOfDomain(LabError):
    """Raised when a thermodynamic state leaves the validity box of a gas model."""
    pass


class PathOutOfDomain(StateOutOfDomain):
    """Raised when an entropy integration path exits the validity box."""
    pass


class DegenerateState(LabError):
    """Raised when a state makes a thermodynamic coefficient undefined (rho_P = 0)."""
    pass


class SingularJacobian(LabError):
    """Raised when the (rho, S) Jacobian with respect to (P, T) is singular."""
    pass


class NumericalBlowup(LabError):
    """Raised when a tendency or stage contains non-finite values."""
    pass


class InversionFailure(LabError):
    """Raised when the inverse slow-variable map does not converge."""
    def __init__(self, iterations, max_update):
        self.iterations = iterations
        self.max_update = max_update
        super().__init__(
            f"inverse slow-variable map did not converge in {iterations} Newton steps "
            f"(max update {max_update:.3e})"
        )


class DiagnosticError(LabError):
    """Raised when a diagnostic precondition (sample count, norm order) fails."""
    pass


class PersistenceError(LabError):
    """Raised when a report or trajectory cannot be written or read."""
    def __init__(self, path, original_exception):
        self.path = str(path)
        self.original_exception = original_exception
        super().__init__(f"I/O failure at '{self.path}': {original_exception}")

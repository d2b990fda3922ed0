"""Exception types raised across the package."""


class QFLError(Exception):
    """Base class; `code` is a short machine-readable tag used by the CLI."""

    code = "error"


class SolverError(QFLError):
    code = "solver_failure"


class PositivityError(QFLError):
    code = "positivity"


class ChartError(QFLError):
    code = "out_of_chart"


class DomainError(QFLError):
    code = "domain"


class NotIntegrableError(QFLError):
    code = "not_integrable"


class SingularMetricError(QFLError):
    code = "singular_metric"


class AccuracyError(QFLError):
    code = "accuracy"


class StepperError(QFLError):
    code = "stepper"


class DomainExitError(QFLError):
    code = "domain_exit"


class NoRoomError(QFLError):
    code = "no_room"


class InconclusiveError(QFLError):
    code = "inconclusive"


class ConfigError(QFLError):
    code = "config"

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key

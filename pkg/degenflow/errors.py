from typing import Any, Dict, Optional


class DegenflowError(Exception):
    """Base error; carries a machine-readable code and context for error JSON"""

    error_code = "degenflow_error"

    def __init__(self, detail: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(detail)
        self.detail = detail
        self.context = context or {}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "detail": self.detail,
            "error_code": self.error_code,
            "context": self.context,
        }


class InvalidResolutionError(DegenflowError):
    error_code = "invalid_resolution"


class OutOfDomainError(DegenflowError):
    error_code = "out_of_domain"


class NonsmoothPointError(DegenflowError):
    error_code = "nonsmooth_point"


class InvalidParameterError(DegenflowError):
    error_code = "invalid_parameter"


class NegativeDiffusionError(DegenflowError):
    error_code = "negative_diffusion"


class CoefficientConsistencyError(DegenflowError):
    error_code = "coefficient_inconsistent"


class StepRejectedError(DegenflowError):
    error_code = "step_rejected"

    def __init__(self, dt: float, admissible_dt: float):
        super().__init__(
            f"dt={dt:.6g} violates the CFL condition; admissible dt={admissible_dt:.6g}",
            {"dt": dt, "admissible_dt": admissible_dt},
        )
        self.admissible_dt = admissible_dt


class NumericalBlowupError(DegenflowError):
    error_code = "numerical_blowup"


class InvalidTestFunctionError(DegenflowError):
    error_code = "invalid_test_function"


class IncompatibleTrajectoriesError(DegenflowError):
    error_code = "incompatible_trajectories"


class NotInvertibleError(DegenflowError):
    error_code = "not_invertible"


class DegenerateTransformError(DegenflowError):
    error_code = "degenerate_transform"


class ConfigSyntaxError(DegenflowError):
    error_code = "config_syntax"

    def __init__(self, detail: str, line: int, column: int):
        super().__init__(f"{detail} (line {line}, column {column})", {"line": line, "column": column})
        self.line = line
        self.column = column


class ConfigValidationError(DegenflowError):
    error_code = "config_validation"

    def __init__(self, field: str, detail: str):
        super().__init__(f"{field}: {detail}", {"field": field})
        self.field = field


class ReportIOError(DegenflowError):
    error_code = "report_io"

    def __init__(self, path: str, detail: str):
        super().__init__(f"Cannot write {path}: {detail}", {"path": path})
        self.path = path


class InternalError(DegenflowError):
    """Wraps an unexpected exception so it still yields error JSON"""

    error_code = "internal_error"

    @classmethod
    def from_exception(cls, exc: BaseException) -> "InternalError":
        return cls(f"{type(exc).__name__}: {exc}", {"exception": type(exc).__name__})

"""
Exception classes and error handling framework for the mass-operator workbench.
"""

from typing import Optional, Dict, Any
from enum import Enum


class ErrorCode(Enum):
    """Standard error codes for the workbench."""
    # Symbolic core
    SYMBOLIC_DIMENSION_MISMATCH = "SYM_001"
    SYMBOLIC_MALFORMED_TERM = "SYM_002"
    SYMBOLIC_LABEL_NOT_FREE = "SYM_003"
    SYMBOLIC_NO_DERIVATIVE_RULE = "SYM_004"
    SYMBOLIC_UNUSED_BOUND_LABEL = "SYM_005"

    # Expression parser
    PARSE_LEXICAL = "PRS_001"
    PARSE_SPECIES_RANGE = "PRS_002"
    PARSE_UNBALANCED = "PRS_003"
    PARSE_UNKNOWN_AXIS = "PRS_004"
    PARSE_SYNTAX = "PRS_005"

    # Wick engine
    WICK_MIXED_REGIMES = "WCK_001"

    # Pseudo-differential operators
    PDO_MASS_MISMATCH = "PDO_001"
    PDO_DIMENSION_UNSUPPORTED = "PDO_002"
    PDO_NOT_IN_SPAN = "PDO_003"

    # Relation suite
    RELATION_UNKNOWN = "REL_001"
    RELATION_TEMPLATE_INVALID = "REL_002"

    # Numerics
    NUMERIC_INVALID_GRID = "NUM_001"
    NUMERIC_KIND_MISMATCH = "NUM_002"
    NUMERIC_SAME_BLOCK = "NUM_003"
    NUMERIC_DIMENSION_CAP = "NUM_004"
    NUMERIC_UNNORMALIZED = "NUM_005"
    NUMERIC_UNBOUND_MASS = "NUM_006"
    NUMERIC_UNSUPPORTED_EXPRESSION = "NUM_007"

    # Mass lab
    MASS_SINGULAR_SYSTEM = "MAS_001"
    MASS_UNPHYSICAL = "MAS_002"
    MASS_MISSING_QUANTUM_NUMBER = "MAS_003"
    MASS_INVALID_TABLE = "MAS_004"
    MASS_ZERO_EIGENVALUE = "MAS_005"
    MASS_INVALID_INPUT = "MAS_006"

    # Spectral measures
    MEASURE_OVERLAP = "MEA_001"
    MEASURE_NEGATIVE_DENSITY = "MEA_002"
    MEASURE_ZERO_TOTAL = "MEA_003"
    MEASURE_INVALID = "MEA_004"

    # Configuration Errors
    CONFIG_INVALID = "CFG_001"
    CONFIG_MISSING_REQUIRED = "CFG_002"
    CONFIG_VALIDATION_FAILED = "CFG_003"

    # System Errors
    SYSTEM_RESOURCE_EXHAUSTED = "SYS_002"
    SYSTEM_UNKNOWN_ERROR = "SYS_999"


class WorkbenchException(Exception):
    """
    Base exception class for all workbench errors.

    Provides structured error information including error codes,
    component context, and additional metadata for debugging.
    """

    def __init__(
        self,
        message: str,
        error_code: ErrorCode,
        component: str,
        details: Optional[Dict[str, Any]] = None,
        cause: Optional[Exception] = None
    ):
        """
        Initialize a workbench exception.

        Args:
            message: Human-readable error message
            error_code: Standardized error code
            component: Workbench component where the error occurred
            details: Additional error context and metadata
            cause: Original exception that caused this error
        """
        super().__init__(message)
        self.message = message
        self.error_code = error_code
        self.component = component
        self.details = details or {}
        self.cause = cause

    def to_dict(self) -> Dict[str, Any]:
        """Convert exception to dictionary for logging and serialization."""
        return {
            "message": self.message,
            "error_code": self.error_code.value,
            "component": self.component,
            "details": self.details,
            "cause": str(self.cause) if self.cause else None
        }

    def __str__(self) -> str:
        return f"[{self.error_code.value}] {self.component}: {self.message}"


class SymbolicError(WorkbenchException):
    """Raised by the expression model, canonicalization and sifting."""

    def __init__(self, message: str, error_code: ErrorCode, label: str = "", cause: Optional[Exception] = None):
        details = {"label": label} if label else {}
        super().__init__(message, error_code, "SymbolicCore", details, cause)


class ExpressionParseError(WorkbenchException):
    """Raised when expression source text is rejected; carries a 1-based position."""

    def __init__(
        self,
        message: str,
        error_code: ErrorCode,
        line: int = 1,
        column: int = 1,
        source: str = "",
        cause: Optional[Exception] = None,
    ):
        details = {"line": line, "column": column}
        if source:
            details["source"] = source[:100] + "..." if len(source) > 100 else source
        super().__init__(f"{message} (line {line}, column {column})", error_code, "ExpressionParser", details, cause)
        self.line = line
        self.column = column


class WickError(WorkbenchException):
    """Raised by normal ordering and bracket evaluation."""

    def __init__(self, message: str, error_code: ErrorCode, cause: Optional[Exception] = None):
        super().__init__(message, error_code, "WickEngine", {}, cause)


class PDOError(WorkbenchException):
    """Raised by pseudo-differential operator algebra."""

    def __init__(self, message: str, error_code: ErrorCode, operator: str = "", cause: Optional[Exception] = None):
        details = {"operator": operator} if operator else {}
        super().__init__(message, error_code, "PDOAlgebra", details, cause)


class RelationError(WorkbenchException):
    """Raised for catalog lookups and template instantiation."""

    def __init__(self, message: str, error_code: ErrorCode, relation: str = "", cause: Optional[Exception] = None):
        details = {"relation": relation} if relation else {}
        super().__init__(message, error_code, "RelationSuite", details, cause)


class NumericError(WorkbenchException):
    """Raised by grids, block operators and numerical oracles."""

    def __init__(self, message: str, error_code: ErrorCode, quantity: str = "", cause: Optional[Exception] = None):
        details = {"quantity": quantity} if quantity else {}
        super().__init__(message, error_code, "FockNumeric", details, cause)


class MassLabError(WorkbenchException):
    """Raised by mass-formula solving, evaluation and fitting."""

    def __init__(self, message: str, error_code: ErrorCode, details: Optional[Dict[str, Any]] = None,
                 cause: Optional[Exception] = None):
        super().__init__(message, error_code, "MassLab", details, cause)


class MeasureError(WorkbenchException):
    """Raised by mass-measure construction and evaluation."""

    def __init__(self, message: str, error_code: ErrorCode, cause: Optional[Exception] = None):
        super().__init__(message, error_code, "SpectralMeasure", {}, cause)


class ConfigurationError(WorkbenchException):
    """Exception raised for configuration-related errors."""

    def __init__(self, message: str, error_code: ErrorCode, config_key: str = "", cause: Optional[Exception] = None):
        details = {"config_key": config_key} if config_key else {}
        super().__init__(message, error_code, "Configuration", details, cause)


class WorkbenchSystemError(WorkbenchException):
    """Failure outside the domain modules, such as memory exhaustion or an unexpected defect."""

    def __init__(self, message: str, error_code: ErrorCode, system_component: str = "", cause: Optional[Exception] = None):
        details = {"system_component": system_component} if system_component else {}
        super().__init__(message, error_code, "System", details, cause)


class ErrorHandler:
    """
    Centralized error handling and logging for the workbench.

    Provides consistent error processing and error statistics across
    components; the CLI uses it to turn failures into diagnostics.
    """

    def __init__(self, logger=None):
        self.logger = logger
        self.error_counts = {}

    def handle_error(self, error: Exception, context: Dict[str, Any]) -> Dict[str, Any]:
        """
        Handle an error with appropriate logging and response generation.

        Args:
            error: The exception that occurred
            context: Additional context about the error

        Returns:
            Dict containing error response information
        """
        if isinstance(error, WorkbenchException):
            return self._handle_workbench_error(error, context)
        return self._handle_generic_error(error, context)

    def _handle_workbench_error(self, error: WorkbenchException, context: Dict[str, Any]) -> Dict[str, Any]:
        error_key = f"{error.component}:{error.error_code.value}"
        self.error_counts[error_key] = self.error_counts.get(error_key, 0) + 1

        if self.logger:
            self.logger.error(f"Workbench error: {error}", extra={"context": context, "error_details": error.to_dict()})

        return {
            "error": True,
            "message": error.message,
            "error_code": error.error_code.value,
            "component": error.component,
            "details": dict(error.details),
            "user_input_error": self._is_input_error(error.error_code),
        }

    def _handle_generic_error(self, error: Exception, context: Dict[str, Any]) -> Dict[str, Any]:
        error_key = f"Generic:{type(error).__name__}"
        self.error_counts[error_key] = self.error_counts.get(error_key, 0) + 1

        if self.logger:
            self.logger.error(f"Unexpected error: {error}", extra={"context": context})

        return {
            "error": True,
            "message": str(error),
            "error_code": ErrorCode.SYSTEM_UNKNOWN_ERROR.value,
            "component": "Unknown",
            "details": {},
            "user_input_error": False,
        }

    def _is_input_error(self, error_code: ErrorCode) -> bool:
        """Whether the error was caused by malformed user input rather than a defect."""
        return not error_code.value.startswith("SYS")

    def get_error_statistics(self) -> Dict[str, int]:
        """Get error occurrence statistics."""
        return self.error_counts.copy()

    def reset_error_counts(self) -> None:
        """Reset error occurrence counters."""
        self.error_counts.clear()

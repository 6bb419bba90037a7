"""Exception types shared across the package.

Each error carries a short machine-readable ``code`` used by the CLI.
"""


class OrbitCountError(Exception):
    code = "error"


class PolySyntaxError(SyntaxError, OrbitCountError):
    code = "syntax"

    def __init__(self, msg, text="", position=0):
        super().__init__(f"{msg} at position {position}")
        self.text = text
        self.position = position
        # SyntaxError has its own offset slot, keep it consistent (1-based)
        self.offset = position + 1


class VariableOutOfRange(ValueError, OrbitCountError):
    code = "variable_out_of_range"


class NegativeExponent(ValueError, OrbitCountError):
    code = "negative_exponent"


class NotQuasiHomogeneous(ValueError, OrbitCountError):
    code = "not_quasi_homogeneous"


class DimensionMismatch(ValueError, OrbitCountError):
    code = "dimension_mismatch"


class InternalInconsistency(RuntimeError, OrbitCountError):
    code = "internal_inconsistency"


class NonAbelianPolarization(RuntimeError, OrbitCountError):
    code = "non_abelian_polarization"


class UnsupportedStructure(OrbitCountError):
    code = "unsupported_structure"


class UnsupportedFamily(UnsupportedStructure):
    code = "unsupported_family"


class ValidationFailure(RuntimeError, OrbitCountError):
    code = "validation_failure"


class UnboundedSublevelSet(ValueError, OrbitCountError):
    code = "unbounded_sublevel_set"


class InconclusiveClassification(OrbitCountError):
    code = "inconclusive_classification"

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class NonConvergent(ArithmeticError, OrbitCountError):
    code = "non_convergent"


class DomainTooSmall(ValueError, OrbitCountError):
    code = "domain_too_small"


class GridTooCoarse(ValueError, OrbitCountError):
    code = "grid_too_coarse"


class GridTooLarge(MemoryError, OrbitCountError):
    """Raised when a requested discretization exceeds the configured work budget."""
    code = "grid_too_large"


class FactorizationBreakdown(ArithmeticError, OrbitCountError):
    code = "factorization_breakdown"


class InsufficientSpan(ValueError, OrbitCountError):
    code = "insufficient_span"


class TailBoundFailure(ArithmeticError, OrbitCountError):
    code = "tail_bound_failure"


class TruncationUnsound(UserWarning, OrbitCountError):
    """Issued (not raised) when states below 2*lam fit in the outer shell of a truncated domain."""
    code = "truncation_unsound"

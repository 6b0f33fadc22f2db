"""Error types raised by the construction, kernels and estimators.

Each error carries the process exit code the command line reports for it:
configuration and feasibility problems exit with 2, claim failures with 1.
"""

EXIT_OK = 0
EXIT_CLAIM_FAILED = 1
EXIT_CONFIG_ERROR = 2


class Cantor2wError(Exception):
    """Base class for all domain errors"""

    kind = "error"
    exit_code = EXIT_CONFIG_ERROR
    hint = None

    def __init__(self, message: str, hint: str = None):
        super().__init__(message)
        self.message = message
        if hint is not None:
            self.hint = hint

    def describe(self) -> str:
        """Message with the remediation hint appended"""
        if self.hint:
            return f"{self.kind}: {self.message} (hint: {self.hint})"
        return f"{self.kind}: {self.message}"


class InvalidParametersError(Cantor2wError):
    kind = "invalid-parameters"


class DepthOverflowError(Cantor2wError):
    kind = "depth-overflow"


class InvalidHeightError(Cantor2wError):
    kind = "invalid-height"


class SingularEvaluationError(Cantor2wError):
    kind = "singular-evaluation"


class ZeroOmegaMassError(Cantor2wError):
    kind = "zero-omega-mass"


class OverlappingPartitionError(Cantor2wError):
    kind = "overlapping-partition"


class NoAdmissibleCError(Cantor2wError):
    kind = "no-admissible-c"
    hint = "widen the c grid or lower --k-max"


class InfeasibleTargetError(Cantor2wError):
    kind = "infeasible-target"
    hint = "raise --depth-sigma or lower --n-targets"


class ConfigError(Cantor2wError):
    kind = "invalid-config"

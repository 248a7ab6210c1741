"""Exception hierarchy shared by the library and the command line.

Every error carries a short machine-readable ``code`` and the process exit
status the CLI should use when it escapes a subcommand.
"""


class DpotError(Exception):
    code = "error"
    exit_status = 2


class InvalidInputError(DpotError, ValueError):
    code = "invalid-input"


class EmptyGroupError(InvalidInputError):
    code = "empty-group"


class LabelsRequiredError(InvalidInputError):
    code = "labels-required"


class UnknownGroupError(InvalidInputError):
    code = "unknown-group"


class DegenerateAtomError(InvalidInputError):
    code = "degenerate-atom"


class MalformedDocumentError(InvalidInputError):
    code = "malformed-document"


class VersionMismatchError(MalformedDocumentError):
    code = "version-mismatch"


class RescalingError(InvalidInputError):
    code = "rescaling"


class UnsupportedDimensionError(DpotError):
    code = "unsupported-dimension"
    exit_status = 1


class SolverError(DpotError, RuntimeError):
    code = "solver-failure"
    exit_status = 3

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class GeometryInfeasibleError(DpotError, RuntimeError):
    code = "geometry-infeasible"
    exit_status = 3

    def __init__(self, message, group=None, margin=None):
        super().__init__(message)
        self.group = group
        self.margin = margin


class UsageError(DpotError):
    code = "usage"
    exit_status = 1

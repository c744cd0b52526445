"""Exception hierarchy shared by all curvlab modules."""


class CurvlabError(Exception):
    """Base class; ``code`` is the CLI exit status for this failure."""

    code = 2


class SymmetryViolation(CurvlabError, ValueError):
    code = 10

    def __init__(self, which: str, residual: float):
        self.which = which
        self.residual = float(residual)
        super().__init__(f"{which} symmetry violated (max residual {residual:.3e})")


class BianchiViolation(CurvlabError, ValueError):
    code = 11

    def __init__(self, residual: float):
        self.residual = float(residual)
        super().__init__(f"first Bianchi identity violated (max residual {residual:.3e})")


class DimensionMismatch(CurvlabError, ValueError):
    code = 12


class SingularTransform(CurvlabError, ValueError):
    code = 13


class NonConvergence(CurvlabError, RuntimeError):
    code = 14


class OracleMismatch(CurvlabError, RuntimeError):
    code = 15

    def __init__(self, message: str, extension=None, parametric=None):
        self.extension = extension
        self.parametric = parametric
        super().__init__(message)


class PreconditionViolation(CurvlabError, ValueError):
    code = 16


class StepRejected(CurvlabError, RuntimeError):
    code = 17


class Undefined(CurvlabError, ValueError):
    code = 18

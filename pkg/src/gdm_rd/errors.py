"""Exception hierarchy shared by all modules."""


class GdmError(Exception):
    """Base class for every error raised by this package."""


class MeshError(GdmError):
    pass


class NonClosedCell(MeshError):
    pass


class NotStarShaped(MeshError):
    pass


class OrphanFace(MeshError):
    pass


class InvalidResolution(MeshError, ValueError):
    pass


class ParseError(GdmError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonSimplicialMesh(MeshError):
    pass


class TensorError(GdmError):
    pass


class NonSymmetricTensor(TensorError):
    pass


class NonPositiveTensor(TensorError):
    pass


class ZeroTensor(TensorError, ValueError):
    pass


class InvalidParams(GdmError, ValueError):
    pass


class QuadratureFailure(GdmError):
    pass


class OutOfRangeTime(GdmError, ValueError):
    pass


class SolverError(GdmError):
    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message if step is None else f"step {step}: {message}")


class NonlinearDivergence(SolverError):
    pass


class LinearSolveFailure(SolverError):
    pass


class DiagnosticError(GdmError, ValueError):
    pass


class MeshTooLargeForDiagnostic(DiagnosticError):
    pass


class ConfigError(GdmError):
    def __init__(self, message, key=None):
        self.key = key
        super().__init__(message if key is None else f"{key}: {message}")


class IoError(GdmError, OSError):
    """Writing an output file failed."""

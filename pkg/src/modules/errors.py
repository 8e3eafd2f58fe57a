from typing import Optional, Sequence


class PhysCompatError(Exception):
    """
    Base class for every error raised by the physcompat modules.
    """


# Input / geometry errors (CLI exit code 2)
class MeshError(PhysCompatError):
    """
    Raised when a mesh is malformed or unusable for the requested operation.
    """


class ParseError(MeshError):
    """
    Raised when a mesh or field file does not follow its grammar.

    Attributes:
        line (int): 1-based line number of the offending input line.
        reason (str): Human-readable description of the problem.
    """

    def __init__(self, line: int, reason: str, path: Optional[str] = None) -> None:
        self.line: int = line
        self.reason: str = reason
        self.path: Optional[str] = path
        where = f"{path}:{line}" if path else f"line {line}"
        super().__init__(f"{where}: {reason}")


class MeshIndexError(MeshError, IndexError):
    """
    Raised when a tetrahedron references a vertex index outside [0, N).
    """


class DegenerateElement(MeshError):
    """
    Raised when a tetrahedron has |volume| below the configured minimum.
    """

    def __init__(self, tet_id: int, volume: float) -> None:
        self.tet_id: int = tet_id
        self.volume: float = volume
        super().__init__(f"Element {tet_id} is degenerate (signed volume {volume:.3e} m^3).")


class NonManifoldFace(MeshError):
    """
    Raised when a triangular face is shared by more than two tetrahedra.
    """

    def __init__(self, face: Sequence[int], count: int) -> None:
        self.face = tuple(int(i) for i in face)
        self.count: int = count
        super().__init__(f"Face {self.face} appears in {count} tetrahedra.")


class ZeroMass(MeshError):
    """
    Raised when a center of mass is requested for a body with zero total mass.
    """


class DegenerateSupport(MeshError):
    """
    Raised when the support polygon collapses to a point or a segment.
    """


class EmptySilhouette(MeshError):
    """
    Raised when a rasterized silhouette mask contains no pixels.
    """


class DimensionMismatch(MeshError, ValueError):
    """
    Raised when vector or field sizes do not agree with the mesh.
    """


class ConfigError(PhysCompatError, ValueError):
    """
    Raised when a run configuration is missing, malformed or violates its schema.
    """


# Numerical failures (CLI exit code 3)
class NumericalError(PhysCompatError):
    """
    Raised when a numerical procedure cannot produce a valid result.
    """


class SingularPlastic(NumericalError):
    """
    Raised when an element's plastic strain has a non-positive determinant.
    """

    def __init__(self, tet_id: int, det: float) -> None:
        self.tet_id: int = tet_id
        self.det: float = det
        super().__init__(f"Plastic strain of element {tet_id} has det {det:.3e} <= 0.")


class InvertedElement(NumericalError):
    """
    Raised when an elastic deformation gradient has det <= 0 and strict checking is on.
    """

    def __init__(self, tet_id: int) -> None:
        self.tet_id: int = tet_id
        super().__init__(f"Element {tet_id} is inverted (det F_e <= 0).")


class SolverDiverged(NumericalError):
    """
    Raised when Newton's line search cannot find an energy decrease.
    """


class LinearSolveFailure(NumericalError):
    """
    Raised when a sparse linear system cannot be factorized.
    """


class NoSupport(NumericalError):
    """
    Raised when a free body is loaded by gravity, so no static equilibrium exists.
    """


class NotConverged(NumericalError):
    """
    Raised when a gradient is requested at an unconverged equilibrium.
    """


class InfeasibleStart(NumericalError):
    """
    Raised when the equilibrium at the identity plastic field cannot be solved.
    """


class OptimizerStalled(NumericalError):
    """
    Raised when every backtracking retry of the first optimizer step fails.
    """


class NonFiniteGradient(NumericalError):
    """
    Raised when a gradient contains NaN or infinite entries.
    """


class StepDiverged(NumericalError):
    """
    Raised when a dynamics timestep exhausts its Newton budget.
    """


class SimulationAborted(NumericalError):
    """
    Raised when a dynamics step still fails at the smallest allowed timestep.
    """

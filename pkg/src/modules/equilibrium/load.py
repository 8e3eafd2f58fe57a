import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from src.modules.errors import DimensionMismatch, MeshIndexError

logger = logging.getLogger(__name__)

STANDARD_GRAVITY: Tuple[float, float, float] = (0.0, 0.0, -9.8)


def _vector3(values: Sequence[float], name: str) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64).reshape(-1)
    if vec.shape != (3,):
        raise DimensionMismatch(f"{name} must be a 3-vector, got shape {vec.shape}.")
    return vec


@dataclass(frozen=True, eq=False)
class ExternalLoad:
    """
    Gravity, Dirichlet-fixed vertices and attachment springs acting on a body.

    Attributes:
        gravity (np.ndarray): Acceleration in m/s^2.
        fixed_vertices (np.ndarray): (K,) distinct Dirichlet vertex indices.
        fixed_targets (Optional[np.ndarray]): (K, 3) prescribed positions; None pins the
            vertices where they are in X_init.
        attach_vertices (np.ndarray): (A,) vertices pulled by springs.
        attach_stiffness (np.ndarray): (A,) spring stiffness k_a in N/m.
        attach_targets (np.ndarray): (A, 3) spring anchor positions in m.
    """

    gravity: np.ndarray = field(default_factory=lambda: np.array(STANDARD_GRAVITY))
    fixed_vertices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    fixed_targets: Optional[np.ndarray] = None
    attach_vertices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    attach_stiffness: np.ndarray = field(default_factory=lambda: np.zeros(0))
    attach_targets: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def __post_init__(self) -> None:
        object.__setattr__(self, "gravity", _vector3(self.gravity, "gravity"))
        fixed = np.asarray(self.fixed_vertices, dtype=np.int64).reshape(-1)
        if np.unique(fixed).size != fixed.size:
            raise ValueError("Fixed vertices must be distinct.")
        object.__setattr__(self, "fixed_vertices", fixed)
        if self.fixed_targets is not None:
            targets = np.asarray(self.fixed_targets, dtype=np.float64).reshape(-1, 3)
            if targets.shape[0] != fixed.size:
                raise DimensionMismatch(f"{fixed.size} fixed vertices but {targets.shape[0]} targets.")
            object.__setattr__(self, "fixed_targets", targets)

        vertices = np.asarray(self.attach_vertices, dtype=np.int64).reshape(-1)
        stiffness = np.asarray(self.attach_stiffness, dtype=np.float64).reshape(-1)
        targets = np.asarray(self.attach_targets, dtype=np.float64).reshape(-1, 3)
        if not vertices.size == stiffness.size == targets.shape[0]:
            raise DimensionMismatch("Attachment vertices, stiffness and targets differ in length.")
        if np.any(stiffness < 0.0):
            raise ValueError("Attachment stiffness must be non-negative.")
        object.__setattr__(self, "attach_vertices", vertices)
        object.__setattr__(self, "attach_stiffness", stiffness)
        object.__setattr__(self, "attach_targets", targets)

    @classmethod
    def build(
        cls,
        gravity: Sequence[float] = STANDARD_GRAVITY,
        fixed_vertices: Iterable[int] = (),
        fixed_targets: Optional[np.ndarray] = None,
        attachments: Iterable[Tuple[int, float, Sequence[float]]] = (),
    ) -> "ExternalLoad":
        """Builds a load from an attachment list of (vertex, k_a, target) triples."""
        attachments = list(attachments)
        return cls(
            gravity=np.asarray(gravity, dtype=np.float64),
            fixed_vertices=np.asarray(list(fixed_vertices), dtype=np.int64),
            fixed_targets=fixed_targets,
            attach_vertices=np.array([a[0] for a in attachments], dtype=np.int64),
            attach_stiffness=np.array([a[1] for a in attachments], dtype=np.float64),
            attach_targets=np.array([a[2] for a in attachments], dtype=np.float64).reshape(-1, 3),
        )

    def check_vertices(self, n_vertices: int) -> None:
        for name, idx in (("fixed", self.fixed_vertices), ("attached", self.attach_vertices)):
            if idx.size and (idx.min() < 0 or idx.max() >= n_vertices):
                raise MeshIndexError(f"A {name} vertex index is outside [0, {n_vertices}).")

    @property
    def has_support(self) -> bool:
        """True when some vertex is fixed or held by a spring with k_a > 0."""
        return bool(self.fixed_vertices.size or np.any(self.attach_stiffness > 0.0))

    def resolved_fixed_targets(self, X_init: np.ndarray) -> np.ndarray:
        if self.fixed_targets is not None:
            return self.fixed_targets
        return np.asarray(X_init, dtype=np.float64).reshape(-1, 3)[self.fixed_vertices]

    def translated(self, offset: Sequence[float]) -> "ExternalLoad":
        """Same load with every fixed and attachment target shifted by offset."""
        t = _vector3(offset, "offset")
        return ExternalLoad(
            gravity=self.gravity,
            fixed_vertices=self.fixed_vertices,
            fixed_targets=None if self.fixed_targets is None else self.fixed_targets + t,
            attach_vertices=self.attach_vertices,
            attach_stiffness=self.attach_stiffness,
            attach_targets=self.attach_targets + t,
        )


def zero_load() -> ExternalLoad:
    """No gravity, no constraints."""
    return ExternalLoad(gravity=np.zeros(3))


def _masses(mass: Union[np.ndarray, sparse.spmatrix]) -> np.ndarray:
    """Per-vertex masses from either an (N,) vector or a diagonal 3N x 3N matrix."""
    if sparse.issparse(mass):
        return np.asarray(mass.diagonal()).reshape(-1, 3)[:, 0]
    return np.asarray(mass, dtype=np.float64).reshape(-1)


def attachment_forces(x: np.ndarray, load: ExternalLoad) -> np.ndarray:
    """3N spring forces -k_a (x_i - target_i) on attached vertices."""
    f = np.zeros(np.asarray(x).size)
    if load.attach_vertices.size:
        pts = np.asarray(x, dtype=np.float64).reshape(-1, 3)
        spring = -load.attach_stiffness[:, None] * (pts[load.attach_vertices] - load.attach_targets)
        np.add.at(f.reshape(-1, 3), load.attach_vertices, spring)
    return f


def external_forces(x: np.ndarray, load: ExternalLoad, mass: Union[np.ndarray, sparse.spmatrix]) -> np.ndarray:
    """
    Gravity plus attachment spring forces.

    Args:
        x (np.ndarray): 3N positions.
        load (ExternalLoad): Load description.
        mass (Union[np.ndarray, sparse.spmatrix]): (N,) vertex masses or the lumped 3N x 3N mass matrix.

    Returns:
        np.ndarray: 3N force vector f_ext in N.
    """
    m = _masses(mass)
    if 3 * m.size != np.asarray(x).size:
        raise DimensionMismatch(f"{m.size} vertex masses for {np.asarray(x).size} coordinates.")
    gravity = (m[:, None] * load.gravity).reshape(-1)
    return gravity + attachment_forces(x, load)


def gravity_energy(x: np.ndarray, load: ExternalLoad, vertex_mass: np.ndarray) -> float:
    """-sum_i m_i g . x_i in J."""
    pts = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    return float(-np.sum(vertex_mass * (pts @ load.gravity)))


def attachment_energy(x: np.ndarray, load: ExternalLoad) -> float:
    """sum 1/2 k_a |x_i - target_i|^2 in J."""
    if not load.attach_vertices.size:
        return 0.0
    pts = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    d = pts[load.attach_vertices] - load.attach_targets
    return float(0.5 * np.sum(load.attach_stiffness * np.einsum("ij,ij->i", d, d)))


def attachment_stiffness_diagonal(n_vertices: int, load: ExternalLoad) -> np.ndarray:
    """3N diagonal of d(-f_attach)/dx."""
    diag = np.zeros((n_vertices, 3))
    if load.attach_vertices.size:
        np.add.at(diag, load.attach_vertices, load.attach_stiffness[:, None])
    return diag.reshape(-1)

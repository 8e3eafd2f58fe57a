from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import sparse

from src.modules.errors import DimensionMismatch
from src.modules.mesh.tet_mesh import TetMesh, face_adjacency
from src.modules.plastic.plastic_field import PlasticField


@dataclass(frozen=True, eq=False)
class ElementLaplacian:
    """
    Graph Laplacian D - A of the face-adjacency graph between elements.

    Attributes:
        matrix (sparse.csr_matrix): Z x Z symmetric matrix with zero row sums.
    """

    matrix: sparse.csr_matrix

    @property
    def n_elements(self) -> int:
        return int(self.matrix.shape[0])


def element_laplacian(mesh: TetMesh) -> ElementLaplacian:
    pairs = face_adjacency(mesh)
    z = mesh.n_elements
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    adjacency = sparse.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(z, z)).tocsr()
    degree = np.asarray(adjacency.sum(axis=1)).reshape(-1)
    return ElementLaplacian(matrix=(sparse.diags(degree) - adjacency).tocsr())


def biharmonic_reg(field: PlasticField, L: ElementLaplacian, weight: float) -> Tuple[float, np.ndarray]:
    """
    Smoothness penalty weight * sum_c |L f_c|^2 over the 6 coefficient channels.

    Returns:
        Tuple[float, np.ndarray]: Value and its 6Z gradient (index 6e + c).

    Raises:
        DimensionMismatch: If the field and the Laplacian disagree on Z.
    """
    if field.n_elements != L.n_elements:
        raise DimensionMismatch(f"Field has {field.n_elements} elements, Laplacian has {L.n_elements}.")
    if weight == 0.0:
        return 0.0, np.zeros(6 * field.n_elements)
    Lf = L.matrix @ field.coeffs
    value = weight * float(np.sum(Lf * Lf))
    grad = 2.0 * weight * (L.matrix.T @ Lf)
    return value, np.asarray(grad).reshape(-1)

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy import sparse

from src.modules.elasticity.material import MaterialParams
from src.modules.elasticity.neo_hookean import energy_density, pk1_derivative, pk1_stress, von_mises
from src.modules.errors import DimensionMismatch, InvertedElement, SingularPlastic
from src.modules.mesh.tet_mesh import TetMesh, element_volumes
from src.modules.plastic.plastic_field import PlasticField

logger = logging.getLogger(__name__)

# Maps the 3 edge-vector rows of dm_inv onto the 4 vertices: row a of S @ dm_inv is dF/dx_a.
SHAPE_SELECT: np.ndarray = np.array([[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])

STRESS_COLUMNS = ["tet_id", "vm_pa", "s00", "s01", "s02", "s11", "s12", "s22"]


@dataclass(frozen=True, eq=False)
class ElementPrecomp:
    """
    Rest-configuration data per element, built once from X_init.

    Attributes:
        elements (np.ndarray): (Z, 4) connectivity.
        n_vertices (int): N.
        dm_inv (np.ndarray): (Z, 3, 3) inverse of the rest edge matrix [X1-X0, X2-X0, X3-X0].
        volume_init (np.ndarray): (Z,) rest volumes V_init in m^3.
    """

    elements: np.ndarray
    n_vertices: int
    dm_inv: np.ndarray
    volume_init: np.ndarray

    @property
    def n_elements(self) -> int:
        return int(self.elements.shape[0])

    @property
    def element_dofs(self) -> np.ndarray:
        """(Z, 12) global DOF indices, vertex-major: 3 * v + i."""
        return (3 * self.elements[:, :, None] + np.arange(3)).reshape(-1, 12)


def precompute(mesh: TetMesh) -> ElementPrecomp:
    """
    Builds the per-element rest data of a positively oriented mesh.
    """
    pts = mesh.positions[mesh.elements]
    dm = np.transpose(pts[:, 1:, :] - pts[:, :1, :], (0, 2, 1))
    return ElementPrecomp(
        elements=mesh.elements,
        n_vertices=mesh.n_vertices,
        dm_inv=np.linalg.inv(dm),
        volume_init=element_volumes(mesh),
    )


@dataclass(frozen=True, eq=False)
class ElasticBody:
    """
    An undeformed mesh X_init with its material and precomputed element data.
    """

    mesh: TetMesh
    material: MaterialParams
    precomp: ElementPrecomp

    @classmethod
    def from_mesh(cls, mesh: TetMesh, material: MaterialParams) -> "ElasticBody":
        return cls(mesh=mesh, material=material, precomp=precompute(mesh))

    @property
    def X_init(self) -> np.ndarray:
        return self.mesh.x

    @property
    def n_dofs(self) -> int:
        return 3 * self.mesh.n_vertices

    @property
    def force_scale(self) -> float:
        """mu * V_total^(2/3), the natural force unit of this body."""
        return self.material.mu * float(self.precomp.volume_init.sum()) ** (2.0 / 3.0)


@dataclass(frozen=True, eq=False)
class PlasticKinematics:
    """
    Per-element quantities that depend on the plastic field only.

    Attributes:
        A (np.ndarray): (Z, 3, 3) plastic strain matrices.
        A_inv (np.ndarray): Their inverses.
        det_A (np.ndarray): (Z,) determinants.
        volume (np.ndarray): (Z,) plastic volumes V_init * det(A).
        grad (np.ndarray): (Z, 4, 3) rows dF_e/dx_a, so F_e = sum_a x_a (x) grad[a].
    """

    A: np.ndarray
    A_inv: np.ndarray
    det_A: np.ndarray
    volume: np.ndarray
    grad: np.ndarray


def plastic_kinematics(F_p: Optional[PlasticField], precomp: ElementPrecomp) -> PlasticKinematics:
    """
    Raises:
        SingularPlastic: If any element has det(F_p) <= 0.
    """
    z = precomp.n_elements
    if F_p is None:
        A = np.broadcast_to(np.eye(3), (z, 3, 3)).copy()
    else:
        if F_p.n_elements != z:
            raise DimensionMismatch(f"Plastic field has {F_p.n_elements} elements, mesh has {z}.")
        A = F_p.expand()
    det_A = np.linalg.det(A)
    bad = np.nonzero(det_A <= 0.0)[0]
    if bad.size:
        tet_id = int(bad[0])
        logger.error(f"Plastic strain of element {tet_id} is singular (det {det_A[tet_id]:.3e}).")
        raise SingularPlastic(tet_id, float(det_A[tet_id]))
    A_inv = np.linalg.inv(A)
    grad = np.einsum("ak,zkj->zaj", SHAPE_SELECT, precomp.dm_inv @ A_inv)
    return PlasticKinematics(A=A, A_inv=A_inv, det_A=det_A, volume=precomp.volume_init * det_A, grad=grad)


def _element_positions(x: np.ndarray, precomp: ElementPrecomp) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != 3 * precomp.n_vertices:
        raise DimensionMismatch(f"Expected {3 * precomp.n_vertices} coordinates, got {x.size}.")
    return x.reshape(-1, 3)[precomp.elements]


def deformation_gradient(element_positions: np.ndarray, dm_inv: np.ndarray) -> np.ndarray:
    """
    F = Ds dm_inv for one element.

    Args:
        element_positions (np.ndarray): (4, 3) deformed vertex positions.
        dm_inv (np.ndarray): (3, 3) inverse rest edge matrix of the same element.
    """
    pts = np.asarray(element_positions, dtype=np.float64)
    ds = (pts[1:] - pts[0]).T
    return ds @ dm_inv


def deformation_gradients(x: np.ndarray, precomp: ElementPrecomp) -> np.ndarray:
    """(Z, 3, 3) total deformation gradients F relative to X_init."""
    pts = _element_positions(x, precomp)
    ds = np.transpose(pts[:, 1:, :] - pts[:, :1, :], (0, 2, 1))
    return ds @ precomp.dm_inv


def elastic_gradients(
    x: np.ndarray, kin: PlasticKinematics, precomp: ElementPrecomp
) -> np.ndarray:
    """(Z, 3, 3) elastic parts F_e = F F_p^{-1}."""
    return np.einsum("zai,zaj->zij", _element_positions(x, precomp), kin.grad)


def scatter_vector(element_values: np.ndarray, precomp: ElementPrecomp) -> np.ndarray:
    """Sums (Z, 4, 3) per-element vertex values into a 3N vector in element order."""
    return np.bincount(
        precomp.element_dofs.reshape(-1),
        weights=np.asarray(element_values).reshape(-1),
        minlength=3 * precomp.n_vertices,
    )


def scatter_matrix(blocks: np.ndarray, precomp: ElementPrecomp) -> sparse.csr_matrix:
    """Sums (Z, 12, 12) element blocks into a sparse 3N x 3N matrix."""
    dofs = precomp.element_dofs
    rows = np.repeat(dofs, 12, axis=1).reshape(-1)
    cols = np.tile(dofs, (1, 12)).reshape(-1)
    n = 3 * precomp.n_vertices
    return sparse.coo_matrix((blocks.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()


def elastic_energy(
    x: np.ndarray, F_p: Optional[PlasticField], precomp: ElementPrecomp, mat: MaterialParams
) -> float:
    """Total elastic energy sum_e V_init det(F_p) Psi(F_e) in J."""
    kin = plastic_kinematics(F_p, precomp)
    return float(np.sum(kin.volume * energy_density(elastic_gradients(x, kin, precomp), mat)))


def element_forces(x: np.ndarray, kin: PlasticKinematics, precomp: ElementPrecomp, mat: MaterialParams) -> np.ndarray:
    """(Z, 4, 3) per-vertex contributions of dE/dx; each element's rows sum to zero."""
    P = pk1_stress(elastic_gradients(x, kin, precomp), mat)
    return kin.volume[:, None, None] * np.einsum("zij,zaj->zai", P, kin.grad)


def internal_forces(
    x: np.ndarray, F_p: Optional[PlasticField], precomp: ElementPrecomp, mat: MaterialParams
) -> np.ndarray:
    """
    Gradient of the elastic energy with respect to the 3N positions.

    Args:
        x (np.ndarray): 3N deformed positions.
        F_p (Optional[PlasticField]): Plastic field (None means identity).
        precomp (ElementPrecomp): Rest data from X_init.
        mat (MaterialParams): Material.

    Returns:
        np.ndarray: 3N force vector f_int in N.

    Raises:
        SingularPlastic: If det(F_p) <= 0 on some element.
    """
    kin = plastic_kinematics(F_p, precomp)
    return scatter_vector(element_forces(x, kin, precomp, mat), precomp)


def element_stiffness(
    x: np.ndarray, kin: PlasticKinematics, precomp: ElementPrecomp, mat: MaterialParams, psd_project: bool
) -> np.ndarray:
    """(Z, 12, 12) element Hessians, optionally with negative eigenvalues clamped to zero."""
    dP = pk1_derivative(elastic_gradients(x, kin, precomp), mat)
    blocks = kin.volume[:, None, None, None, None] * np.einsum("zijkl,zaj,zbl->zaibk", dP, kin.grad, kin.grad)
    blocks = blocks.reshape(-1, 12, 12)
    blocks = 0.5 * (blocks + np.transpose(blocks, (0, 2, 1)))
    if psd_project:
        eigvals, eigvecs = np.linalg.eigh(blocks)
        blocks = np.einsum("zik,zk,zjk->zij", eigvecs, np.maximum(eigvals, 0.0), eigvecs)
    return blocks


def stiffness_matrix(
    x: np.ndarray,
    F_p: Optional[PlasticField],
    precomp: ElementPrecomp,
    mat: MaterialParams,
    psd_project: bool = False,
) -> sparse.csr_matrix:
    """
    Sparse symmetric d f_int / dx.

    Args:
        psd_project (bool): Clamp each element block to positive semi-definite before scattering.

    Returns:
        sparse.csr_matrix: 3N x 3N stiffness.
    """
    kin = plastic_kinematics(F_p, precomp)
    return scatter_matrix(element_stiffness(x, kin, precomp, mat, psd_project), precomp)


def vertex_masses(F_p: Optional[PlasticField], precomp: ElementPrecomp, mat: MaterialParams) -> np.ndarray:
    """(N,) lumped vertex masses: each element gives rho V_init det(F_p) / 4 to its vertices."""
    kin = plastic_kinematics(F_p, precomp)
    share = mat.density_kg_m3 * kin.volume / 4.0
    return np.bincount(precomp.elements.reshape(-1), weights=np.repeat(share, 4), minlength=precomp.n_vertices)


def mass_matrix(
    mesh: TetMesh, F_p: Optional[PlasticField], precomp: ElementPrecomp, mat: MaterialParams
) -> sparse.dia_matrix:
    """Diagonal 3N x 3N lumped mass matrix in kg."""
    if mesh.n_vertices != precomp.n_vertices:
        raise DimensionMismatch("Mesh and element data disagree on the vertex count.")
    return sparse.diags(np.repeat(vertex_masses(F_p, precomp, mat), 3))


@dataclass(frozen=True, eq=False)
class StressField:
    """
    Per-element Cauchy and von Mises stress.

    Attributes:
        cauchy (np.ndarray): (Z, 3, 3) symmetric Cauchy stress in Pa.
        von_mises (np.ndarray): (Z,) von Mises stress in Pa.
        inverted (np.ndarray): (Z,) True where det F_e <= 0.
    """

    cauchy: np.ndarray
    von_mises: np.ndarray
    inverted: np.ndarray

    @property
    def n_elements(self) -> int:
        return int(self.von_mises.shape[0])

    def to_frame(self) -> pd.DataFrame:
        s = self.cauchy
        return pd.DataFrame(
            {
                "tet_id": np.arange(self.n_elements),
                "vm_pa": self.von_mises,
                "s00": s[:, 0, 0],
                "s01": s[:, 0, 1],
                "s02": s[:, 0, 2],
                "s11": s[:, 1, 1],
                "s12": s[:, 1, 2],
                "s22": s[:, 2, 2],
            },
            columns=STRESS_COLUMNS,
        )

    def write_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def stress_field(
    x: np.ndarray,
    F_p: Optional[PlasticField],
    precomp: ElementPrecomp,
    mat: MaterialParams,
    strict: bool = False,
) -> StressField:
    """
    Cauchy stress sigma = P F_e^T / det F_e per element and its von Mises norm.

    Args:
        strict (bool): Raise on inverted elements instead of flagging them.

    Raises:
        SingularPlastic: If det(F_p) <= 0 on some element.
        InvertedElement: If strict and some det F_e <= 0.
    """
    kin = plastic_kinematics(F_p, precomp)
    F_e = elastic_gradients(x, kin, precomp)
    J = np.linalg.det(F_e)
    inverted = J <= 0.0
    if inverted.any():
        tet_id = int(np.nonzero(inverted)[0][0])
        if strict:
            logger.error(f"Element {tet_id} is inverted.")
            raise InvertedElement(tet_id)
        logger.warning(f"{int(inverted.sum())} inverted elements in the stress report (first: {tet_id}).")

    safe_J = np.where(np.abs(J) > 1e-300, J, 1e-300)
    sigma = pk1_stress(F_e, mat) @ np.transpose(F_e, (0, 2, 1)) / safe_J[:, None, None]
    sigma = 0.5 * (sigma + np.transpose(sigma, (0, 2, 1)))
    return StressField(cauchy=sigma, von_mises=von_mises(sigma), inverted=inverted)


def split_dofs(n_vertices: int, fixed_vertices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Free and fixed DOF index arrays for a set of Dirichlet vertices."""
    fixed_mask = np.zeros(3 * n_vertices, dtype=bool)
    fixed = np.asarray(fixed_vertices, dtype=np.int64)
    if fixed.size:
        fixed_mask[(3 * fixed[:, None] + np.arange(3)).reshape(-1)] = True
    return np.nonzero(~fixed_mask)[0], np.nonzero(fixed_mask)[0]

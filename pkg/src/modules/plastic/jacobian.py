from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from src.modules.elasticity.assembly import (
    ElementPrecomp,
    SHAPE_SELECT,
    deformation_gradients,
    plastic_kinematics,
)
from src.modules.elasticity.material import MaterialParams
from src.modules.elasticity.neo_hookean import pk1_derivative, pk1_stress
from src.modules.plastic.plastic_field import SYM_BASIS, PlasticField


def element_force_jacobians(
    x: np.ndarray,
    field: Optional[PlasticField],
    precomp: ElementPrecomp,
    mat: MaterialParams,
    gravity: Sequence[float] = (0.0, 0.0, 0.0),
) -> np.ndarray:
    """
    (Z, 12, 6) blocks d f_net / d a_c of every element.

    With E_c = dA/da_c and M_c = A^-1 E_c A^-1:
        dF_e = -F M_c,  dgrad = -S dm_inv M_c,  dV = V tr(A^-1 E_c).
    """
    kin = plastic_kinematics(field, precomp)
    F = deformation_gradients(x, precomp)
    F_e = F @ kin.A_inv
    P = pk1_stress(F_e, mat)
    C = pk1_derivative(F_e, mat)

    M = np.einsum("zij,cjk,zkl->zcil", kin.A_inv, SYM_BASIS, kin.A_inv)
    d_volume = kin.volume[:, None] * np.einsum("zij,cji->zc", kin.A_inv, SYM_BASIS)
    d_Fe = -np.einsum("zij,zcjk->zcik", F, M)
    d_grad = -np.einsum("ak,zkj,zcjl->zcal", SHAPE_SELECT, precomp.dm_inv, M)
    d_P = np.einsum("zijkl,zckl->zcij", C, d_Fe)

    vol = kin.volume[:, None, None, None]
    df = (
        d_volume[:, :, None, None] * np.einsum("zij,zaj->zai", P, kin.grad)[:, None]
        + vol * np.einsum("zcij,zaj->zcai", d_P, kin.grad)
        + vol * np.einsum("zij,zcaj->zcai", P, d_grad)
    )
    g = np.asarray(gravity, dtype=np.float64)
    df -= (mat.density_kg_m3 / 4.0) * d_volume[:, :, None, None] * g
    return np.transpose(df, (0, 2, 3, 1)).reshape(-1, 12, 6)


def dforce_dFp(
    x: np.ndarray,
    field: Optional[PlasticField],
    precomp: ElementPrecomp,
    mat: MaterialParams,
    gravity: Sequence[float] = (0.0, 0.0, 0.0),
) -> sparse.csr_matrix:
    """
    Exact Jacobian of f_net = f_int - f_ext with respect to the 6Z plastic coefficients.

    Covers the F_e = F F_p^-1 dependency, the V_init det(F_p) volume factor and the
    plastically scaled gravity load. Attachment springs do not depend on F_p.

    Args:
        x (np.ndarray): 3N positions.
        field (Optional[PlasticField]): Plastic field (None means identity).
        precomp (ElementPrecomp): Rest data from X_init.
        mat (MaterialParams): Material.
        gravity (Sequence[float]): Gravity of the acting load in m/s^2.

    Returns:
        sparse.csr_matrix: 3N x 6Z matrix; column 6e + c belongs to coefficient c of element e.

    Raises:
        SingularPlastic: If det(F_p) <= 0 on some element.
    """
    blocks = element_force_jacobians(x, field, precomp, mat, gravity)
    z = precomp.n_elements
    rows = np.repeat(precomp.element_dofs, 6, axis=1).reshape(-1)
    cols = np.tile(6 * np.arange(z)[:, None] + np.arange(6), (1, 12)).reshape(-1)
    shape = (3 * precomp.n_vertices, 6 * z)
    return sparse.coo_matrix((blocks.reshape(-1), (rows, cols)), shape=shape).tocsr()

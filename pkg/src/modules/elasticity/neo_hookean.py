"""
Stable Neo-Hookean energy density, first Piola-Kirchhoff stress and its derivative.

Every function accepts a single 3x3 matrix or a stack of shape (..., 3, 3).
"""
import numpy as np

from src.modules.elasticity.material import MaterialParams

# Levi-Civita symbol.
EPS: np.ndarray = np.zeros((3, 3, 3))
EPS[0, 1, 2] = EPS[1, 2, 0] = EPS[2, 0, 1] = 1.0
EPS[0, 2, 1] = EPS[2, 1, 0] = EPS[1, 0, 2] = -1.0

IDENTITY4: np.ndarray = np.einsum("ik,jl->ijkl", np.eye(3), np.eye(3))


def cofactor(F: np.ndarray) -> np.ndarray:
    """d(det F)/dF. Finite for singular and inverted F."""
    return 0.5 * np.einsum("imn,jpq,...mp,...nq->...ij", EPS, EPS, F, F)


def energy_density(F_e: np.ndarray, mat: MaterialParams) -> np.ndarray:
    """
    Psi = mu/2 (tr(F^T F) - 3) + lam/2 (det F - alpha)^2 in Pa.
    """
    F_e = np.asarray(F_e, dtype=np.float64)
    J = np.linalg.det(F_e)
    ic = np.einsum("...ij,...ij->...", F_e, F_e)
    return 0.5 * mat.mu * (ic - 3.0) + 0.5 * mat.lam_volumetric * (J - mat.alpha) ** 2


def pk1_stress(F_e: np.ndarray, mat: MaterialParams) -> np.ndarray:
    """P = mu F + lam (det F - alpha) cof(F)."""
    F_e = np.asarray(F_e, dtype=np.float64)
    J = np.linalg.det(F_e)
    return mat.mu * F_e + (mat.lam_volumetric * (J - mat.alpha))[..., None, None] * cofactor(F_e)


def pk1_derivative(F_e: np.ndarray, mat: MaterialParams) -> np.ndarray:
    """
    dP_ij / dF_kl as a (..., 3, 3, 3, 3) array.
    """
    F_e = np.asarray(F_e, dtype=np.float64)
    lam = mat.lam_volumetric
    J = np.linalg.det(F_e)
    cof = cofactor(F_e)
    dcof = np.einsum("ikn,jlq,...nq->...ijkl", EPS, EPS, F_e)
    return (
        mat.mu * IDENTITY4
        + lam * np.einsum("...ij,...kl->...ijkl", cof, cof)
        + (lam * (J - mat.alpha))[..., None, None, None, None] * dcof
    )


def von_mises(sigma: np.ndarray) -> np.ndarray:
    """sqrt(3/2 dev(s):dev(s)) of a stress tensor or a stack of them."""
    sigma = np.asarray(sigma, dtype=np.float64)
    trace = np.trace(sigma, axis1=-2, axis2=-1)
    dev = sigma - (trace / 3.0)[..., None, None] * np.eye(3)
    return np.sqrt(1.5 * np.einsum("...ij,...ij->...", dev, dev))

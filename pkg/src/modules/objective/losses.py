import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from src.modules.errors import DegenerateSupport, DimensionMismatch, ZeroMass
from src.modules.mesh.tet_mesh import TetMesh, center_of_mass, support_polygon

logger = logging.getLogger(__name__)


def matching_loss(x_static: np.ndarray, X_target: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Squared Euclidean distance between the static shape and the target.

    Returns:
        Tuple[float, np.ndarray]: sum_i |x_i - t_i|^2 and its 3N gradient 2 (x - t).

    Raises:
        DimensionMismatch: If the vectors differ in length.
    """
    x = np.asarray(x_static, dtype=np.float64).reshape(-1)
    t = np.asarray(X_target, dtype=np.float64).reshape(-1)
    if x.shape != t.shape:
        raise DimensionMismatch(f"Static shape has {x.size} coordinates, target has {t.size}.")
    diff = x - t
    return float(diff @ diff), 2.0 * diff


def stability_loss(
    x_static: np.ndarray, mesh: TetMesh, per_element_mass: np.ndarray, c_hat: Sequence[float]
) -> Tuple[float, np.ndarray]:
    """
    Squared ground-plane distance between the center of mass and c_hat.

    Args:
        x_static (np.ndarray): 3N static positions.
        mesh (TetMesh): Connectivity.
        per_element_mass (np.ndarray): (Z,) element masses in kg.
        c_hat (Sequence[float]): Target (x, y) of the center of mass.

    Returns:
        Tuple[float, np.ndarray]: Loss and its 3N gradient (zero on every z component).

    Raises:
        ZeroMass: If the total mass is zero.
    """
    masses = np.asarray(per_element_mass, dtype=np.float64)
    offset = center_of_mass(mesh, masses, x_static)[:2] - np.asarray(c_hat, dtype=np.float64)
    share = np.bincount(
        mesh.elements.reshape(-1), weights=np.repeat(masses / (4.0 * masses.sum()), 4), minlength=mesh.n_vertices
    )
    grad = np.zeros((mesh.n_vertices, 3))
    grad[:, :2] = 2.0 * share[:, None] * offset
    return float(offset @ offset), grad.reshape(-1)


def stability_mass_sensitivity(
    x_static: np.ndarray, mesh: TetMesh, per_element_mass: np.ndarray, c_hat: Sequence[float]
) -> np.ndarray:
    """
    (Z,) derivative of the stability loss with respect to each element mass at fixed positions.
    """
    masses = np.asarray(per_element_mass, dtype=np.float64)
    total = masses.sum()
    if total <= 0.0:
        raise ZeroMass("Total mass is zero; center of mass is undefined.")
    pts = np.asarray(x_static, dtype=np.float64).reshape(-1, 3)
    centroids = pts[mesh.elements].mean(axis=1)[:, :2]
    com = masses @ centroids / total
    return 2.0 * (centroids - com) @ (com - np.asarray(c_hat, dtype=np.float64)) / total


def polygon_centroid(hull: np.ndarray) -> np.ndarray:
    """Area centroid of a simple polygon given by its ordered vertices."""
    x, y = hull[:, 0], hull[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * area)


def auto_c_hat(mesh: TetMesh, x_static: np.ndarray, contact_tol: Optional[float] = None) -> np.ndarray:
    """
    Area centroid of the support polygon of the static shape.

    Raises:
        DegenerateSupport: If the support polygon is a point or a segment.
    """
    polygon = support_polygon(mesh, x_static, contact_tol)
    if polygon.degenerate or polygon.area <= 0.0:
        logger.error(f"Support polygon has {polygon.hull.shape[0]} hull points; no interior target.")
        raise DegenerateSupport("Support polygon is a point or a segment; cannot derive a center-of-mass target.")
    return polygon_centroid(polygon.hull)

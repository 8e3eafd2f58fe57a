"""Orthographic binary silhouettes of boundary surfaces and their l1 difference."""
import logging
from typing import Dict, Tuple

import numpy as np

from src.modules.errors import EmptySilhouette
from src.modules.mesh.tet_mesh import TetMesh, boundary_surface

logger = logging.getLogger(__name__)

# View axis -> (u axis, v axis, u sign). Negative views mirror u so the image is seen from the other side.
VIEW_AXES: Dict[str, Tuple[int, int, float]] = {
    "+x": (1, 2, 1.0),
    "-x": (1, 2, -1.0),
    "+y": (0, 2, -1.0),
    "-y": (0, 2, 1.0),
    "+z": (0, 1, 1.0),
    "-z": (0, 1, -1.0),
}
MIN_RESOLUTION: int = 16
PADDING: float = 0.05


def project(points: np.ndarray, axis: str) -> np.ndarray:
    """(N, 2) image-plane coordinates of (N, 3) points viewed along axis."""
    if axis not in VIEW_AXES:
        raise ValueError(f"Unknown view axis '{axis}'. Expected one of {sorted(VIEW_AXES)}.")
    u, v, sign = VIEW_AXES[axis]
    return np.stack([sign * points[:, u], points[:, v]], axis=1)


def bounding_square(*point_sets: np.ndarray, padding: float = PADDING) -> Tuple[np.ndarray, float]:
    """Lower-left corner and side of the square around all points, padded on every side."""
    pts = np.concatenate(point_sets, axis=0)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    side = float(np.max(hi - lo))
    if side <= 0.0:
        side = 1.0
    center = 0.5 * (lo + hi)
    side *= 1.0 + 2.0 * padding
    return center - 0.5 * side, side


def _owns_edge(dx: float, dy: float) -> bool:
    # Top-left rule for counter-clockwise triangles: left edges run downward, top edges run leftward.
    return dy < 0.0 or (dy == 0.0 and dx < 0.0)


def rasterize(
    points2d: np.ndarray, triangles: np.ndarray, origin: np.ndarray, side: float, resolution: int
) -> np.ndarray:
    """
    Binary mask of pixels whose centers fall inside any triangle.

    Args:
        points2d (np.ndarray): (N, 2) projected vertices.
        triangles (np.ndarray): (F, 3) vertex indices.
        origin (np.ndarray): Lower-left corner of the image square.
        side (float): Side length of the image square.
        resolution (int): Pixels per side.

    Returns:
        np.ndarray: (resolution, resolution) bool mask, row index along v.
    """
    mask = np.zeros((resolution, resolution), dtype=bool)
    pixel = side / resolution
    centers = origin[None, :] + (np.arange(resolution)[:, None] + 0.5) * pixel

    for tri in triangles:
        a, b, c = points2d[tri]
        area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if area2 == 0.0:
            continue
        if area2 < 0.0:
            b, c = c, b
        lo = np.minimum(np.minimum(a, b), c)
        hi = np.maximum(np.maximum(a, b), c)
        i0 = max(int(np.floor((lo[0] - origin[0]) / pixel - 0.5)), 0)
        i1 = min(int(np.ceil((hi[0] - origin[0]) / pixel - 0.5)), resolution - 1)
        j0 = max(int(np.floor((lo[1] - origin[1]) / pixel - 0.5)), 0)
        j1 = min(int(np.ceil((hi[1] - origin[1]) / pixel - 0.5)), resolution - 1)
        if i1 < i0 or j1 < j0:
            continue

        px = centers[i0:i1 + 1, 0][None, :]
        py = centers[j0:j1 + 1, 1][:, None]
        inside = np.ones((j1 - j0 + 1, i1 - i0 + 1), dtype=bool)
        for p, q in ((a, b), (b, c), (c, a)):
            dx, dy = q[0] - p[0], q[1] - p[1]
            edge = dx * (py - p[1]) - dy * (px - p[0])
            inside &= (edge > 0.0) | ((edge == 0.0) & _owns_edge(dx, dy))
        mask[j0:j1 + 1, i0:i1 + 1] |= inside
    return mask


def silhouette_masks(
    mesh_a: TetMesh, mesh_b: TetMesh, axis: str = "+y", resolution: int = 256
) -> Tuple[np.ndarray, np.ndarray]:
    """Masks of both meshes over their shared padded bounding square."""
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"Resolution must be at least {MIN_RESOLUTION}, got {resolution}.")
    pa, pb = project(mesh_a.positions, axis), project(mesh_b.positions, axis)
    origin, side = bounding_square(pa, pb)
    return (
        rasterize(pa, boundary_surface(mesh_a), origin, side, resolution),
        rasterize(pb, boundary_surface(mesh_b), origin, side, resolution),
    )


def silhouette_loss(
    mesh_a: TetMesh, mesh_b: TetMesh, axis: str = "+y", resolution: int = 256
) -> float:
    """
    Mean absolute difference of the two binary silhouettes, in [0, 1].

    Raises:
        EmptySilhouette: If either mask has no pixel set.
    """
    mask_a, mask_b = silhouette_masks(mesh_a, mesh_b, axis, resolution)
    for name, mask in (("first", mask_a), ("second", mask_b)):
        if not mask.any():
            logger.error(f"The {name} silhouette is empty at resolution {resolution}.")
            raise EmptySilhouette(f"The {name} silhouette covers no pixel centers at resolution {resolution}.")
    return float(np.mean(mask_a != mask_b))

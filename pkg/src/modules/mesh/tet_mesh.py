import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as csgraph_components
from scipy.spatial import ConvexHull, QhullError

from src.modules.errors import (
    DegenerateElement,
    DimensionMismatch,
    MeshError,
    MeshIndexError,
    NonManifoldFace,
    ZeroMass,
)

logger = logging.getLogger(__name__)

DEFAULT_MIN_VOLUME: float = 1e-12

# Local faces of a positively oriented tet, wound so normals point outward.
# Face k is opposite local vertex k.
OUTWARD_FACES: np.ndarray = np.array([(1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1)], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class TetMesh:
    """
    Immutable tetrahedral mesh.

    Attributes:
        positions (np.ndarray): (N, 3) vertex positions in meters.
        elements (np.ndarray): (Z, 4) vertex indices per tetrahedron.
    """

    positions: np.ndarray
    elements: np.ndarray

    def __post_init__(self) -> None:
        positions = np.array(self.positions, dtype=np.float64).reshape(-1, 3)
        elements = np.array(self.elements, dtype=np.int64).reshape(-1, 4)

        if positions.shape[0] < 4:
            raise MeshError(f"A tet mesh needs at least 4 vertices, got {positions.shape[0]}.")
        if elements.shape[0] < 1:
            raise MeshError("A tet mesh needs at least 1 element.")
        if not np.all(np.isfinite(positions)):
            raise MeshError("Vertex positions contain non-finite values.")

        bad = np.argwhere((elements < 0) | (elements >= positions.shape[0]))
        if bad.size:
            tet_id, _ = bad[0]
            raise MeshIndexError(
                f"Element {tet_id} references vertex {elements[tet_id].tolist()} outside [0, {positions.shape[0]})."
            )

        ordered = np.sort(elements, axis=1)
        repeats = np.nonzero((ordered[:, 1:] == ordered[:, :-1]).any(axis=1))[0]
        if repeats.size:
            raise MeshError(f"Element {int(repeats[0])} repeats a vertex index: {elements[repeats[0]].tolist()}.")

        positions.setflags(write=False)
        elements.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "elements", elements)

    @property
    def n_vertices(self) -> int:
        return int(self.positions.shape[0])

    @property
    def n_elements(self) -> int:
        return int(self.elements.shape[0])

    @property
    def x(self) -> np.ndarray:
        """Flattened 3N position vector."""
        return self.positions.reshape(-1).copy()

    def with_positions(self, positions: Union[np.ndarray, Sequence[float]]) -> "TetMesh":
        """
        Returns a mesh with the same connectivity and new vertex positions (3N or (N, 3)).
        """
        positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        if positions.shape[0] != self.n_vertices:
            raise DimensionMismatch(f"Expected {self.n_vertices} vertices, got {positions.shape[0]}.")
        return TetMesh(positions=positions, elements=self.elements)

    def bbox_diagonal(self, positions: Optional[np.ndarray] = None) -> float:
        pts = self.positions if positions is None else np.asarray(positions).reshape(-1, 3)
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))


@dataclass(frozen=True, eq=False)
class SupportPolygon:
    """
    Convex hull of the ground-contact vertices projected to the xy plane.

    Attributes:
        hull (np.ndarray): (H, 2) counter-clockwise hull points, starting at the
            lexicographically smallest one.
        contact_indices (np.ndarray): Vertices within tolerance of the lowest z.
        degenerate (bool): True when the hull is a single point or a segment.
    """

    hull: np.ndarray
    contact_indices: np.ndarray
    degenerate: bool

    @property
    def area(self) -> float:
        if self.degenerate:
            return 0.0
        x, y = self.hull[:, 0], self.hull[:, 1]
        return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _as_points(mesh: TetMesh, positions: Optional[np.ndarray]) -> np.ndarray:
    if positions is None:
        return mesh.positions
    pts = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] != mesh.n_vertices:
        raise DimensionMismatch(f"Expected {3 * mesh.n_vertices} coordinates, got {pts.size}.")
    return pts


def element_volumes(mesh: TetMesh, positions: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Signed volume of every tetrahedron, det[x1-x0, x2-x0, x3-x0] / 6.

    Args:
        mesh (TetMesh): Mesh providing the connectivity.
        positions (Optional[np.ndarray]): Positions to evaluate at (defaults to the mesh's own).

    Returns:
        np.ndarray: (Z,) signed volumes in m^3.
    """
    pts = _as_points(mesh, positions)[mesh.elements]
    edges = pts[:, 1:, :] - pts[:, :1, :]
    return np.linalg.det(np.transpose(edges, (0, 2, 1))) / 6.0


def validate_and_orient(mesh: TetMesh, min_volume: float = DEFAULT_MIN_VOLUME) -> TetMesh:
    """
    Returns a copy of the mesh where every tetrahedron has positive signed volume.

    Negatively oriented tets get their last two indices swapped.

    Args:
        mesh (TetMesh): Input mesh.
        min_volume (float): Smallest admissible |volume| in m^3.

    Returns:
        TetMesh: Oriented mesh.

    Raises:
        DegenerateElement: If any |volume| < min_volume.
    """
    volumes = element_volumes(mesh)
    small = np.nonzero(np.abs(volumes) < min_volume)[0]
    if small.size:
        tet_id = int(small[0])
        logger.error(f"Element {tet_id} is degenerate: volume {volumes[tet_id]:.3e} < {min_volume:.1e}.")
        raise DegenerateElement(tet_id, float(volumes[tet_id]))

    flipped = volumes < 0.0
    if not flipped.any():
        return mesh
    elements = mesh.elements.copy()
    elements[flipped, 2], elements[flipped, 3] = mesh.elements[flipped, 3], mesh.elements[flipped, 2]
    logger.info(f"Reoriented {int(flipped.sum())} of {mesh.n_elements} elements.")
    return TetMesh(positions=mesh.positions, elements=elements)


def connected_components(mesh: TetMesh) -> Tuple[int, np.ndarray]:
    """
    Vertex-sharing connected components.

    Labels are the smallest vertex index of each component, so the labeling is
    deterministic. Vertices referenced by no element form their own components.

    Returns:
        Tuple[int, np.ndarray]: Component count and (N,) label per vertex.
    """
    n = mesh.n_vertices
    el = mesh.elements
    rows = np.repeat(el[:, 0], 3)
    cols = el[:, 1:].reshape(-1)
    graph = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    count, raw = csgraph_components(graph, directed=False)

    smallest = np.full(count, n, dtype=np.int64)
    np.minimum.at(smallest, raw, np.arange(n, dtype=np.int64))
    return int(count), smallest[raw]


def boundary_surface(mesh: TetMesh) -> np.ndarray:
    """
    Faces that belong to exactly one tetrahedron, wound outward.

    Args:
        mesh (TetMesh): A positively oriented mesh.

    Returns:
        np.ndarray: (F, 3) vertex index triples, in element order.

    Raises:
        NonManifoldFace: If a face is shared by more than two tetrahedra.
    """
    faces = mesh.elements[:, OUTWARD_FACES].reshape(-1, 3)
    _, inverse, counts = np.unique(np.sort(faces, axis=1), axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)

    over = np.nonzero(counts > 2)[0]
    if over.size:
        face = faces[np.nonzero(inverse == over[0])[0][0]]
        logger.error(f"Non-manifold face {face.tolist()} shared by {counts[over[0]]} elements.")
        raise NonManifoldFace(face, int(counts[over[0]]))

    return faces[counts[inverse] == 1]


def face_adjacency(mesh: TetMesh) -> np.ndarray:
    """
    Pairs of elements sharing a triangular face.

    Returns:
        np.ndarray: (P, 2) element index pairs with first < second, sorted.
    """
    faces = np.sort(mesh.elements[:, OUTWARD_FACES].reshape(-1, 3), axis=1)
    owner = np.repeat(np.arange(mesh.n_elements), 4)
    order = np.lexsort((owner, faces[:, 2], faces[:, 1], faces[:, 0]))
    faces, owner = faces[order], owner[order]
    same = np.all(faces[1:] == faces[:-1], axis=1)
    pairs = np.stack([owner[:-1][same], owner[1:][same]], axis=1)
    pairs = np.sort(pairs, axis=1)
    if pairs.size == 0:
        return pairs.reshape(0, 2)
    return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]


def element_centroids(mesh: TetMesh, positions: Optional[np.ndarray] = None) -> np.ndarray:
    """(Z, 3) vertex-mean centroid of every element."""
    return _as_points(mesh, positions)[mesh.elements].mean(axis=1)


def center_of_mass(
    mesh: TetMesh, per_element_mass: Sequence[float], positions: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Mass-weighted average of element centroids.

    Args:
        mesh (TetMesh): Mesh providing the connectivity.
        per_element_mass (Sequence[float]): (Z,) element masses in kg.
        positions (Optional[np.ndarray]): Configuration to evaluate (defaults to the mesh's own).

    Returns:
        np.ndarray: 3-vector center of mass in meters.

    Raises:
        ZeroMass: If the total mass is zero.
    """
    masses = np.asarray(per_element_mass, dtype=np.float64)
    if masses.shape != (mesh.n_elements,):
        raise DimensionMismatch(f"Expected {mesh.n_elements} element masses, got {masses.shape}.")
    total = masses.sum()
    if total <= 0.0:
        raise ZeroMass("Total mass is zero; center of mass is undefined.")
    return masses @ element_centroids(mesh, positions) / total


def default_contact_tol(mesh: TetMesh, positions: Optional[np.ndarray] = None) -> float:
    """Contact tolerance of 1e-3 times the bounding-box diagonal."""
    return 1e-3 * mesh.bbox_diagonal(_as_points(mesh, positions))


def support_polygon(
    mesh: TetMesh, positions: Optional[np.ndarray] = None, contact_tol: Optional[float] = None
) -> SupportPolygon:
    """
    Convex hull of the vertices within contact_tol of the lowest z.

    Args:
        mesh (TetMesh): Mesh providing the vertex set.
        positions (Optional[np.ndarray]): Configuration (3N or (N, 3)); defaults to the mesh's own.
        contact_tol (Optional[float]): Contact band in meters (default 1e-3 x bbox diagonal).

    Returns:
        SupportPolygon: Counter-clockwise hull; degenerate hulls are flagged.
    """
    pts = _as_points(mesh, positions)
    tol = default_contact_tol(mesh, pts) if contact_tol is None else float(contact_tol)
    if tol <= 0.0:
        raise ValueError(f"contact_tol must be positive, got {tol}.")

    z_min = pts[:, 2].min()
    contact = np.nonzero(pts[:, 2] <= z_min + tol)[0]
    xy = np.unique(pts[contact, :2], axis=0)

    degenerate = False
    if xy.shape[0] < 3:
        hull = xy
        degenerate = True
    else:
        try:
            hull = xy[ConvexHull(xy).vertices]
        except QhullError:
            # Collinear points: keep the two extreme ends (xy is lexicographically sorted).
            hull = xy[[0, -1]]
            degenerate = True

    if not degenerate:
        start = np.lexsort((hull[:, 1], hull[:, 0]))[0]
        hull = np.roll(hull, -start, axis=0)

    return SupportPolygon(hull=hull, contact_indices=contact, degenerate=degenerate)


def point_in_convex_polygon(point: Sequence[float], hull: np.ndarray, margin: float = 0.0, slack: float = 1e-12) -> bool:
    """
    Whether a 2D point lies inside a counter-clockwise convex polygon shrunk by margin.

    Points exactly on the (shrunk) boundary count as inside.
    """
    if hull.shape[0] < 3:
        return False
    p = np.asarray(point, dtype=np.float64)
    a = hull
    b = np.roll(hull, -1, axis=0)
    edge = b - a
    length = np.linalg.norm(edge, axis=1)
    # Inward distance of p from each edge line.
    cross = edge[:, 0] * (p[1] - a[:, 1]) - edge[:, 1] * (p[0] - a[:, 0])
    dist = cross / np.where(length > 0.0, length, 1.0)
    return bool(np.all(dist >= margin - slack * max(1.0, float(np.max(length)))))


def largest_component_elements(mesh: TetMesh) -> np.ndarray:
    """(Z,) mask of the elements in the component owning the most elements (ties: smallest label)."""
    _, labels = connected_components(mesh)
    element_labels = labels[mesh.elements[:, 0]]
    unique, sizes = np.unique(element_labels, return_counts=True)
    return element_labels == unique[np.argmax(sizes)]


def largest_component(mesh: TetMesh) -> TetMesh:
    """
    Keeps the connected component owning the most elements and reindexes its vertices.
    """
    keep = largest_component_elements(mesh)
    if keep.all() and np.unique(mesh.elements).size == mesh.n_vertices:
        return mesh
    elements = mesh.elements[keep]

    used = np.unique(elements)
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    logger.info(f"Kept the largest component with {elements.shape[0]} of {mesh.n_elements} elements.")
    return TetMesh(positions=mesh.positions[used], elements=remap[elements])


def normalize_unit_cube(mesh: TetMesh) -> TetMesh:
    """
    Moves the bounding-box minimum to the origin and scales the longest side to 1 m.
    """
    lo = mesh.positions.min(axis=0)
    extent = float((mesh.positions.max(axis=0) - lo).max())
    return mesh.with_positions((mesh.positions - lo) / extent)


def select_vertices(mesh: TetMesh, selector: Union[str, Sequence[int], None]) -> np.ndarray:
    """
    Resolves a vertex selector.

    Supported selectors: `none` (or None), `bottom:<tol>` (vertices within tol meters
    of the minimum z), or an explicit list of indices.

    Returns:
        np.ndarray: Sorted unique vertex indices.
    """
    if selector is None:
        return np.zeros(0, dtype=np.int64)
    if isinstance(selector, str):
        text = selector.strip().lower()
        if text == "none":
            return np.zeros(0, dtype=np.int64)
        if text.startswith("bottom:"):
            tol = float(text.split(":", 1)[1])
            z = mesh.positions[:, 2]
            return np.nonzero(z <= z.min() + tol)[0].astype(np.int64)
        raise ValueError(f"Unknown vertex selector '{selector}'. Expected 'none', 'bottom:<tol>' or a list.")

    indices = np.unique(np.asarray(list(selector), dtype=np.int64))
    if indices.size and (indices[0] < 0 or indices[-1] >= mesh.n_vertices):
        raise MeshIndexError(f"Selector references vertices outside [0, {mesh.n_vertices}).")
    return indices


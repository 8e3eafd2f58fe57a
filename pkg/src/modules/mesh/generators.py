"""Structured tetrahedral meshes for tests, examples and the acceptance corpus."""
from typing import Sequence, Tuple

import numpy as np

from src.modules.mesh.tet_mesh import TetMesh, validate_and_orient

CORNERS: np.ndarray = np.array(
    [(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)], dtype=np.int64
)


def _cell_tets(cell: Tuple[int, int, int]) -> np.ndarray:
    """
    Five-tet split of one cube, as (5, 4) local corner ids into CORNERS.

    The central tet takes the four corners of even global parity, so the face
    diagonals of neighbouring cells always agree.
    """
    parity = (CORNERS.sum(axis=1) + sum(cell)) % 2
    even = [i for i in range(8) if parity[i] == 0]
    tets = [even]
    for odd in (i for i in range(8) if parity[i] == 1):
        neighbours = [j for j in range(8) if np.abs(CORNERS[j] - CORNERS[odd]).sum() == 1]
        tets.append([odd] + neighbours)
    return np.array(tets, dtype=np.int64)


def voxel_mesh(mask: np.ndarray, cell_m: float = 1.0, origin: Sequence[float] = (0.0, 0.0, 0.0)) -> TetMesh:
    """
    Tetrahedralizes the filled cells of a boolean (nx, ny, nz) occupancy grid.

    Args:
        mask (np.ndarray): Cell occupancy.
        cell_m (float): Cube edge length in meters.
        origin (Sequence[float]): Position of grid corner (0, 0, 0).

    Returns:
        TetMesh: Positively oriented mesh containing only used vertices.
    """
    mask = np.asarray(mask, dtype=bool)
    nx, ny, nz = mask.shape
    shape = (nx + 1, ny + 1, nz + 1)

    elements = []
    for i, j, k in zip(*np.nonzero(mask)):
        corners = CORNERS + np.array([i, j, k])
        ids = np.ravel_multi_index(corners.T, shape)
        elements.append(ids[_cell_tets((int(i), int(j), int(k)))])
    elements = np.concatenate(elements, axis=0)

    used = np.unique(elements)
    remap = np.full(np.prod(shape), -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    grid = np.stack(np.unravel_index(used, shape), axis=1).astype(np.float64)
    positions = np.asarray(origin, dtype=np.float64) + cell_m * grid
    return validate_and_orient(TetMesh(positions=positions, elements=remap[elements]))


def box_mesh(
    nx: int, ny: int, nz: int, cell_m: float = 1.0, origin: Sequence[float] = (0.0, 0.0, 0.0)
) -> TetMesh:
    """Box of nx x ny x nz cubes, five tets per cube."""
    return voxel_mesh(np.ones((nx, ny, nz), dtype=bool), cell_m, origin)


def single_tet(scale: float = 1.0) -> TetMesh:
    """The reference tet (0,0,0), (1,0,0), (0,1,0), (0,0,1), scaled."""
    positions = scale * np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=np.float64)
    return TetMesh(positions=positions, elements=[[0, 1, 2, 3]])


def tet_chain(k: int) -> TetMesh:
    """
    k tets where consecutive tets share a face: tet i uses vertices i..i+3 laid out on a helix.
    """
    j = np.arange(k + 3, dtype=np.float64)
    theta = 2.0 * np.pi * j / 3.0
    positions = np.stack([0.5 * j, np.cos(theta), np.sin(theta)], axis=1)
    elements = np.stack([np.arange(k) + s for s in range(4)], axis=1)
    return validate_and_orient(TetMesh(positions=positions, elements=elements))


def disjoint_union(*meshes: TetMesh, spacing: float = 2.0) -> TetMesh:
    """Places meshes side by side along x without shared vertices."""
    positions, elements, offset, shift = [], [], 0, 0.0
    for mesh in meshes:
        pts = mesh.positions - np.array([mesh.positions[:, 0].min() - shift, 0.0, 0.0])
        positions.append(pts)
        elements.append(mesh.elements + offset)
        offset += mesh.n_vertices
        shift = pts[:, 0].max() + spacing
    return TetMesh(positions=np.concatenate(positions), elements=np.concatenate(elements))


def cantilever_mesh(cells: int = 8, cell_m: float = 0.001) -> TetMesh:
    """A cells x 1 x 1 beam along +x (cells=8 gives 40 tets)."""
    return box_mesh(cells, 1, 1, cell_m)


def mushroom_mesh(cell_m: float = 0.01, stem_cells: int = 3, cap_cells: int = 4) -> TetMesh:
    """
    Top-heavy test shape: a one-cell stem standing on z = 0 with a cap that overhangs
    to +x, so the center of mass projects outside the stem footprint.
    """
    mask = np.zeros((cap_cells, 1, stem_cells + 1), dtype=bool)
    mask[0, 0, :stem_cells] = True
    mask[:, 0, stem_cells] = True
    return voxel_mesh(mask, cell_m)

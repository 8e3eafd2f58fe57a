import logging
import os
from typing import List, Optional

import numpy as np

from src.modules.mesh.tet_mesh import TetMesh, boundary_surface

logger = logging.getLogger(__name__)


def _fmt(value: float) -> str:
    # 17 significant digits round-trip every float64 exactly.
    return format(float(value), ".17g")


def _write_lines(path: str, lines: List[str]) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="\n") as file:
        file.write("\n".join(lines) + "\n")


def save_mesh(mesh: TetMesh, path: str, positions: Optional[np.ndarray] = None) -> None:
    """
    Writes a mesh in the `.tet` ASCII format.

    Args:
        mesh (TetMesh): Mesh to write.
        path (str): Destination file.
        positions (Optional[np.ndarray]): Positions to write in place of the mesh's own.
    """
    pts = mesh.positions if positions is None else np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    lines = ["tet 1", f"{mesh.n_vertices} {mesh.n_elements}"]
    lines += [f"v {_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}" for p in pts]
    lines += [f"t {e[0]} {e[1]} {e[2]} {e[3]}" for e in mesh.elements]
    _write_lines(path, lines)
    logger.info(f"Wrote {mesh.n_vertices} vertices and {mesh.n_elements} tets to {path}.")


def save_medit(mesh: TetMesh, path: str) -> None:
    """
    Writes a mesh as an ASCII Medit version 2 file with 1-based indices and zero references.
    """
    lines = ["MeshVersionFormatted 2", "Dimension 3", "Vertices", str(mesh.n_vertices)]
    lines += [f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])} 0" for p in mesh.positions]
    lines += ["Tetrahedra", str(mesh.n_elements)]
    lines += [f"{e[0] + 1} {e[1] + 1} {e[2] + 1} {e[3] + 1} 0" for e in mesh.elements]
    lines.append("End")
    _write_lines(path, lines)
    logger.info(f"Wrote Medit mesh to {path}.")


def export_obj(mesh: TetMesh, path: str, positions: Optional[np.ndarray] = None) -> int:
    """
    Writes the boundary surface as OBJ: every vertex as a `v` line, then 1-based `f` lines.

    Returns:
        int: Number of faces written.
    """
    pts = mesh.positions if positions is None else np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    faces = boundary_surface(mesh)
    lines = [f"v {_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}" for p in pts]
    lines += [f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}" for f in faces]
    _write_lines(path, lines)
    return int(faces.shape[0])

import logging
import os
from abc import ABC, abstractmethod
from typing import Any, Dict, Tuple

from src.modules.mesh.tet_mesh import TetMesh
from utils.dynamic_loader import get_instance

# format name -> (module under src.modules, class name)
MESH_READERS: Dict[str, Tuple[str, str]] = {
    "tet_ascii": ("mesh.tet_reader", "TetReader"),
    "medit_mesh": ("mesh.medit_reader", "MeditReader"),
}


class MeshReader(ABC):
    """
    Abstract base class for readers that parse a tetrahedral mesh file named in the
    configuration into a TetMesh.

    Attributes:
        config (Dict[str, Any]): Configuration settings; reads config["mesh"]["path"].
        mesh_path (str): Path of the mesh file.
    """

    def __init__(self, config: Dict[str, Any]) -> None:
        """
        Initializes the reader with the configuration.

        Args:
            config (Dict[str, Any]): Config settings.

        Raises:
            KeyError: If the 'mesh.path' key is missing from the configuration.
        """
        self.config: Dict[str, Any] = config
        self.logger: logging.Logger = logging.getLogger(self.__class__.__name__)
        try:
            self.mesh_path: str = config["mesh"]["path"]
        except KeyError as e:
            self.logger.error(f"Missing required configuration key: {e}")
            raise KeyError(f"Missing required configuration key: {e}")

    @abstractmethod
    def parse(self, lines: list) -> TetMesh:
        """
        Parses the raw file lines into a mesh. Must be implemented by subclasses.

        Args:
            lines (list): File content split into lines (no trailing newlines).

        Returns:
            TetMesh: The parsed mesh, in file order, without orientation fixes.
        """
        pass

    def load_mesh(self) -> TetMesh:
        """
        Reads the configured file and parses it.

        Returns:
            TetMesh: The parsed mesh.

        Raises:
            FileNotFoundError: If the mesh file does not exist.
        """
        if not os.path.exists(self.mesh_path):
            self.logger.error(f"Mesh file not found at {self.mesh_path}")
            raise FileNotFoundError(f"Mesh file not found at {self.mesh_path}")

        with open(self.mesh_path, "r") as file:
            lines = file.read().splitlines()

        mesh = self.parse(lines)
        self.logger.info(
            f"[{self.__class__.__name__}] Loaded {mesh.n_vertices} vertices and {mesh.n_elements} tets from {self.mesh_path}."
        )
        return mesh


def reader_for(path: str, format: str) -> MeshReader:
    """
    Instantiates the reader registered for a mesh format.

    Args:
        path (str): Mesh file path.
        format (str): One of the keys of MESH_READERS.

    Returns:
        MeshReader: Reader bound to the path.
    """
    if format not in MESH_READERS:
        raise ValueError(f"Unknown mesh format '{format}'. Expected one of {sorted(MESH_READERS)}.")
    module, class_name = MESH_READERS[format]
    config = {"mesh": {"path": path, "module": module, "class": class_name}}
    return get_instance(config, "mesh", "class")


def guess_format(path: str) -> str:
    """Maps a file extension to a mesh format name."""
    return "medit_mesh" if path.lower().endswith(".mesh") else "tet_ascii"


def load_mesh(path: str, format: str = "tet_ascii") -> TetMesh:
    """
    Loads a tetrahedral mesh file.

    Args:
        path (str): File path.
        format (str): `tet_ascii` or `medit_mesh`.

    Returns:
        TetMesh: All vertices and tets in file order; orientation untouched.

    Raises:
        ParseError: On malformed input.
        MeshIndexError: If a tet index is out of range.
    """
    return reader_for(path, format).load_mesh()

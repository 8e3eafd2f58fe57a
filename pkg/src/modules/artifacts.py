import json
import logging
import os
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from src.modules.mesh.tet_mesh import TetMesh
from src.modules.mesh.writers import save_mesh
from src.modules.plastic.plastic_field import PlasticField


def _to_json(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _to_json(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_json(v) for v in value]
    if isinstance(value, np.ndarray):
        return _to_json(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


class ArtifactWriter:
    """
    Writes the files of one command run into an output directory.

    Every artifact is a pure function of its inputs, so reruns produce identical bytes.

    Attributes:
        output_dir (str): Target directory, created on first use.
    """

    def __init__(self, output_dir: str) -> None:
        self.output_dir: str = output_dir
        self.logger: logging.Logger = logging.getLogger(self.__class__.__name__)

    def path(self, name: str) -> str:
        os.makedirs(self.output_dir, exist_ok=True)
        return os.path.join(self.output_dir, name)

    def json(self, name: str, data: Dict[str, Any]) -> str:
        path = self.path(name)
        with open(path, "w", newline="\n") as file:
            file.write(json.dumps(_to_json(data), indent=2))
            file.write("\n")
        self.logger.info(f"[ArtifactWriter] Wrote {path}")
        return path

    def mesh(self, name: str, mesh: TetMesh, positions: Optional[np.ndarray] = None) -> str:
        path = self.path(name)
        save_mesh(mesh, path, positions)
        return path

    def plastic(self, name: str, field: PlasticField) -> str:
        path = self.path(name)
        field.save(path)
        self.logger.info(f"[ArtifactWriter] Wrote {path}")
        return path

    def table(self, name: str, writer: Any) -> str:
        """Writes any object exposing write_csv(path)."""
        path = self.path(name)
        writer.write_csv(path)
        self.logger.info(f"[ArtifactWriter] Wrote {path}")
        return path

    def frame(self, name: str, frame: pd.DataFrame) -> str:
        path = self.path(name)
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        self.logger.info(f"[ArtifactWriter] Wrote {path}")
        return path

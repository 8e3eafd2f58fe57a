from typing import Any, Dict, List

import numpy as np

from src.modules.errors import ParseError
from src.modules.mesh.reader import MeshReader
from src.modules.mesh.tet_mesh import TetMesh

TET_MAGIC = "tet"
TET_VERSION = "1"


class TetReader(MeshReader):
    """
    Reader for the ASCII `.tet` format:

        tet 1
        <N> <Z>
        v <x> <y> <z>        (N lines, meters)
        t <i0> <i1> <i2> <i3> (Z lines, 0-based)

    Lines starting with `#` are comments.
    """

    def __init__(self, config: Dict[str, Any]) -> None:
        super().__init__(config=config)

    def parse(self, lines: List[str]) -> TetMesh:
        """
        Parses `.tet` content.

        Raises:
            ParseError: On any grammar violation, with the 1-based line number.
        """
        records = [(number, line.split()) for number, line in enumerate(lines, start=1)
                   if line.strip() and not line.lstrip().startswith("#")]

        def fail(line: int, reason: str) -> None:
            self.logger.error(f"[TetReader] {self.mesh_path}:{line}: {reason}")
            raise ParseError(line, reason, self.mesh_path)

        if len(records) < 2:
            fail(len(lines) or 1, "file ends before the header")

        line, tokens = records[0]
        if tokens != [TET_MAGIC, TET_VERSION]:
            fail(line, f"expected header '{TET_MAGIC} {TET_VERSION}', got '{' '.join(tokens)}'")

        line, tokens = records[1]
        if len(tokens) != 2:
            fail(line, "expected '<N> <Z>'")
        try:
            n, z = int(tokens[0]), int(tokens[1])
        except ValueError:
            fail(line, f"counts must be integers, got '{' '.join(tokens)}'")
        if n < 0 or z < 0:
            fail(line, "counts must be non-negative")

        body = records[2:]
        if len(body) != n + z:
            fail(body[-1][0] if body else line, f"expected {n} vertex and {z} tet lines, found {len(body)} data lines")

        positions = np.empty((n, 3), dtype=np.float64)
        for row, (line, tokens) in enumerate(body[:n]):
            if len(tokens) != 4 or tokens[0] != "v":
                fail(line, "expected 'v <x> <y> <z>'")
            try:
                positions[row] = [float(t) for t in tokens[1:]]
            except ValueError:
                fail(line, "vertex coordinates must be decimal numbers")

        elements = np.empty((z, 4), dtype=np.int64)
        for row, (line, tokens) in enumerate(body[n:]):
            if len(tokens) != 5 or tokens[0] != "t":
                fail(line, "expected 't <i0> <i1> <i2> <i3>'")
            try:
                elements[row] = [int(t) for t in tokens[1:]]
            except ValueError:
                fail(line, "tet indices must be integers")

        return TetMesh(positions=positions, elements=elements)

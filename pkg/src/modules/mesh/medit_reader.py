from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.modules.errors import ParseError
from src.modules.mesh.reader import MeshReader
from src.modules.mesh.tet_mesh import TetMesh

SUPPORTED_VERSIONS = (2, 3)


class MeditReader(MeshReader):
    """
    Reader for the ASCII Medit `.mesh` subset: the `Vertices` and `Tetrahedra`
    sections of version 2 or 3 files. Indices are converted from 1-based to
    0-based; every other section is skipped.
    """

    def __init__(self, config: Dict[str, Any]) -> None:
        super().__init__(config=config)

    def _fail(self, line: int, reason: str) -> None:
        self.logger.error(f"[MeditReader] {self.mesh_path}:{line}: {reason}")
        raise ParseError(line, reason, self.mesh_path)

    def _section(
        self, records: List[Tuple[int, List[str]]], start: int, width: int, name: str
    ) -> Tuple[np.ndarray, int]:
        """
        Reads `<count>` followed by count rows of `width` numbers plus a reference tag.

        Returns:
            Tuple[np.ndarray, int]: (count, width) numeric rows and the next record index.
        """
        keyword_line, tokens = records[start]
        cursor = start + 1
        if len(tokens) > 1:
            count_token: Optional[str] = tokens[1]
        else:
            if cursor >= len(records):
                self._fail(keyword_line, f"{name} section has no count")
            count_token = records[cursor][1][0]
            keyword_line = records[cursor][0]
            cursor += 1
        try:
            count = int(count_token)
        except ValueError:
            self._fail(keyword_line, f"{name} count must be an integer, got '{count_token}'")

        rows = np.empty((count, width), dtype=np.float64)
        for row in range(count):
            if cursor >= len(records):
                self._fail(records[-1][0], f"{name} section ends after {row} of {count} rows")
            line, values = records[cursor]
            if len(values) < width:
                self._fail(line, f"{name} row needs {width} values plus a reference, got {len(values)}")
            try:
                rows[row] = [float(v) for v in values[:width]]
            except ValueError:
                self._fail(line, f"{name} row contains a non-numeric value")
            cursor += 1
        return rows, cursor

    def parse(self, lines: List[str]) -> TetMesh:
        """
        Parses Medit content.

        Raises:
            ParseError: On malformed Vertices/Tetrahedra sections or unsupported versions.
        """
        records = [(number, line.split()) for number, line in enumerate(lines, start=1)
                   if line.strip() and not line.lstrip().startswith("#")]

        positions: Optional[np.ndarray] = None
        elements: Optional[np.ndarray] = None
        cursor = 0
        while cursor < len(records):
            line, tokens = records[cursor]
            keyword = tokens[0]
            if keyword == "MeshVersionFormatted":
                version_token = tokens[1] if len(tokens) > 1 else (records[cursor + 1][1][0] if cursor + 1 < len(records) else "")
                if version_token not in {str(v) for v in SUPPORTED_VERSIONS}:
                    self._fail(line, f"unsupported Medit version '{version_token}'")
                cursor += 1
            elif keyword == "Vertices":
                positions, cursor = self._section(records, cursor, 3, "Vertices")
            elif keyword == "Tetrahedra":
                raw, cursor = self._section(records, cursor, 4, "Tetrahedra")
                if not np.all(raw == np.round(raw)):
                    self._fail(line, "Tetrahedra indices must be integers")
                elements = raw.astype(np.int64) - 1
            elif keyword == "End":
                break
            else:
                cursor += 1

        if positions is None:
            self._fail(len(lines) or 1, "missing Vertices section")
        if elements is None:
            self._fail(len(lines) or 1, "missing Tetrahedra section")
        return TetMesh(positions=positions, elements=elements)

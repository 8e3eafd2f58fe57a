import os
import tempfile
import unittest
from typing import Any, Dict

import numpy as np

from src.modules.errors import MeshIndexError, ParseError
from src.modules.mesh.generators import box_mesh, single_tet
from src.modules.mesh.medit_reader import MeditReader
from src.modules.mesh.reader import MeshReader, guess_format, load_mesh, reader_for
from src.modules.mesh.tet_reader import TetReader
from src.modules.mesh.writers import export_obj, save_medit, save_mesh

TET_TEXT = """# unit tet
tet 1
4 1
v 0 0 0
v 1 0 0
v 0 1 0
v 0 0 1
t 0 1 2 3
"""

MEDIT_TEXT = """MeshVersionFormatted 2
Dimension 3
Vertices
4
0 0 0 0
1 0 0 0
0 1 0 0
0 0 1 0
Triangles
1
1 2 3 0
Tetrahedra
1
1 2 3 4 0
End
"""


class TestTetReader(unittest.TestCase):
    """
    Unit tests for the `.tet` reader.
    """

    def create_temp_mesh(self, content: str, suffix: str = ".tet") -> str:
        """
        Writes mesh text to a temporary file.

        Returns:
            str: The path to the temporary file.
        """
        temp_file = tempfile.NamedTemporaryFile(delete=False, suffix=suffix, mode="w")
        temp_file.write(content)
        temp_file.close()
        self.addCleanup(os.remove, temp_file.name)
        return temp_file.name

    def reader(self, path: str) -> TetReader:
        config: Dict[str, Any] = {"mesh": {"path": path}}
        return TetReader(config=config)

    def test_parse_valid(self) -> None:
        """
        Test that a well-formed file yields its vertices and tets in file order.
        """
        mesh = self.reader(self.create_temp_mesh(TET_TEXT)).load_mesh()
        self.assertEqual(mesh.n_vertices, 4)
        self.assertEqual(mesh.n_elements, 1)
        np.testing.assert_array_equal(mesh.elements, [[0, 1, 2, 3]])
        np.testing.assert_array_equal(mesh.positions[1], [1.0, 0.0, 0.0])

    def test_bad_header_line(self) -> None:
        """
        Test that a wrong header reports the line it is on.
        """
        path = self.create_temp_mesh(TET_TEXT.replace("tet 1", "tet 2"))
        with self.assertRaises(ParseError) as context:
            self.reader(path).load_mesh()
        self.assertEqual(context.exception.line, 2)

    def test_malformed_vertex_line(self) -> None:
        """
        Test that a short vertex line is reported with its 1-based line number.
        """
        path = self.create_temp_mesh(TET_TEXT.replace("v 1 0 0", "v 1 0"))
        with self.assertRaises(ParseError) as context:
            self.reader(path).load_mesh()
        self.assertEqual(context.exception.line, 5)
        self.assertIn(f"{path}:5", str(context.exception))

    def test_non_numeric_index(self) -> None:
        """
        Test that a non-integer tet index is a parse error on the tet line.
        """
        path = self.create_temp_mesh(TET_TEXT.replace("t 0 1 2 3", "t 0 1 2 x"))
        with self.assertRaises(ParseError) as context:
            self.reader(path).load_mesh()
        self.assertEqual(context.exception.line, 8)

    def test_count_mismatch(self) -> None:
        """
        Test that fewer data lines than announced are rejected.
        """
        path = self.create_temp_mesh(TET_TEXT.replace("4 1", "5 1"))
        with self.assertRaises(ParseError):
            self.reader(path).load_mesh()

    def test_index_out_of_range(self) -> None:
        """
        Test that a tet referencing a missing vertex raises MeshIndexError.
        """
        path = self.create_temp_mesh(TET_TEXT.replace("t 0 1 2 3", "t 0 1 2 4"))
        with self.assertRaises(MeshIndexError):
            self.reader(path).load_mesh()

    def test_missing_file(self) -> None:
        """
        Test that a missing file raises FileNotFoundError.
        """
        with self.assertRaises(FileNotFoundError):
            self.reader("no_such_mesh.tet").load_mesh()

    def test_missing_path_key(self) -> None:
        """
        Test that the reader requires mesh.path in its config.
        """
        with self.assertRaises(KeyError):
            TetReader(config={"mesh": {}})

    def test_abstract_base(self) -> None:
        """
        Test that the reader base class cannot be instantiated.
        """
        with self.assertRaises(TypeError):
            _ = MeshReader(config={"mesh": {"path": "x.tet"}})


class TestMeditReader(unittest.TestCase):
    """
    Unit tests for the Medit `.mesh` reader.
    """

    def create_temp_mesh(self, content: str) -> str:
        temp_file = tempfile.NamedTemporaryFile(delete=False, suffix=".mesh", mode="w")
        temp_file.write(content)
        temp_file.close()
        self.addCleanup(os.remove, temp_file.name)
        return temp_file.name

    def test_parse_valid(self) -> None:
        """
        Test that indices become 0-based and unrelated sections are skipped.
        """
        path = self.create_temp_mesh(MEDIT_TEXT)
        mesh = MeditReader(config={"mesh": {"path": path}}).load_mesh()
        np.testing.assert_array_equal(mesh.elements, [[0, 1, 2, 3]])
        np.testing.assert_array_equal(mesh.positions[3], [0.0, 0.0, 1.0])

    def test_unsupported_version(self) -> None:
        """
        Test that an unknown Medit version is rejected on its line.
        """
        path = self.create_temp_mesh(MEDIT_TEXT.replace("MeshVersionFormatted 2", "MeshVersionFormatted 7"))
        with self.assertRaises(ParseError) as context:
            MeditReader(config={"mesh": {"path": path}}).load_mesh()
        self.assertEqual(context.exception.line, 1)

    def test_missing_tetrahedra(self) -> None:
        """
        Test that a file without a Tetrahedra section is rejected.
        """
        text = MEDIT_TEXT.split("Tetrahedra")[0] + "End\n"
        path = self.create_temp_mesh(text)
        with self.assertRaises(ParseError):
            MeditReader(config={"mesh": {"path": path}}).load_mesh()

    def test_short_vertex_row(self) -> None:
        """
        Test that a vertex row without enough values reports its line.
        """
        path = self.create_temp_mesh(MEDIT_TEXT.replace("1 0 0 0\n", "1 0\n", 1))
        with self.assertRaises(ParseError) as context:
            MeditReader(config={"mesh": {"path": path}}).load_mesh()
        self.assertEqual(context.exception.line, 6)


class TestReaderRegistry(unittest.TestCase):
    """
    Unit tests for format dispatch and the writers.
    """

    def setUp(self) -> None:
        """
        Creates a temporary directory for written meshes.
        """
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_guess_format(self) -> None:
        """
        Test that `.mesh` maps to Medit and everything else to `.tet`.
        """
        self.assertEqual(guess_format("shape.MESH"), "medit_mesh")
        self.assertEqual(guess_format("shape.tet"), "tet_ascii")

    def test_reader_for(self) -> None:
        """
        Test that the registry instantiates the matching reader and rejects unknown formats.
        """
        self.assertIsInstance(reader_for("a.mesh", "medit_mesh"), MeditReader)
        self.assertIsInstance(reader_for("a.tet", "tet_ascii"), TetReader)
        with self.assertRaises(ValueError):
            reader_for("a.vtk", "vtk")

    def test_tet_file_preserves_positions(self) -> None:
        """
        Test that written `.tet` files read back with bit-identical coordinates.
        """
        mesh = box_mesh(2, 1, 1, cell_m=0.1, origin=(0.3, -0.7, 1.0 / 3.0))
        path = os.path.join(self.tmp.name, "box.tet")
        save_mesh(mesh, path)
        loaded = load_mesh(path)
        np.testing.assert_array_equal(loaded.positions, mesh.positions)
        np.testing.assert_array_equal(loaded.elements, mesh.elements)

    def test_medit_file_matches_tet_file(self) -> None:
        """
        Test that the same mesh written as Medit loads identically to its `.tet` form.
        """
        mesh = box_mesh(1, 1, 2, cell_m=0.01)
        tet_path = os.path.join(self.tmp.name, "box.tet")
        medit_path = os.path.join(self.tmp.name, "box.mesh")
        save_mesh(mesh, tet_path)
        save_medit(mesh, medit_path)
        a = load_mesh(tet_path, "tet_ascii")
        b = load_mesh(medit_path, "medit_mesh")
        np.testing.assert_array_equal(a.positions, b.positions)
        np.testing.assert_array_equal(a.elements, b.elements)

    def test_export_obj(self) -> None:
        """
        Test that the OBJ export writes every vertex and the 1-based boundary faces.
        """
        path = os.path.join(self.tmp.name, "nested", "tet.obj")
        n_faces = export_obj(single_tet(), path)
        with open(path) as file:
            lines = file.read().splitlines()
        self.assertEqual(n_faces, 4)
        self.assertEqual(sum(line.startswith("v ") for line in lines), 4)
        faces = [line for line in lines if line.startswith("f ")]
        self.assertEqual(len(faces), 4)
        indices = {int(tok) for face in faces for tok in face.split()[1:]}
        self.assertEqual(indices, {1, 2, 3, 4})


if __name__ == "__main__":
    unittest.main()

import unittest

import numpy as np

from src.modules.errors import DegenerateElement, MeshError, MeshIndexError, NonManifoldFace, ZeroMass
from src.modules.mesh.generators import (
    box_mesh,
    cantilever_mesh,
    disjoint_union,
    mushroom_mesh,
    single_tet,
    tet_chain,
)
from src.modules.mesh.tet_mesh import (
    TetMesh,
    boundary_surface,
    center_of_mass,
    connected_components,
    element_volumes,
    face_adjacency,
    largest_component,
    normalize_unit_cube,
    point_in_convex_polygon,
    select_vertices,
    support_polygon,
    validate_and_orient,
)


def tilted_tet() -> TetMesh:
    """A tet touching the ground with a single vertex."""
    positions = np.array([[0, 0, 0], [1, 0, 1], [0, 1, 1], [0, 0, 2]], dtype=np.float64)
    return TetMesh(positions=positions, elements=[[0, 1, 2, 3]])


class TestTetMesh(unittest.TestCase):
    """
    Unit tests for mesh construction, validation and orientation.
    """

    def test_construction_checks(self) -> None:
        """
        Test that malformed vertex and element arrays are rejected.
        """
        pts = np.eye(4, 3)
        with self.assertRaises(MeshError):
            TetMesh(positions=pts[:3], elements=[[0, 1, 2, 2]])
        with self.assertRaises(MeshError):
            TetMesh(positions=pts, elements=[[0, 1, 2, 2]])
        with self.assertRaises(MeshIndexError):
            TetMesh(positions=pts, elements=[[0, 1, 2, 4]])
        bad = pts.copy()
        bad[0, 0] = np.nan
        with self.assertRaises(MeshError):
            TetMesh(positions=bad, elements=[[0, 1, 2, 3]])

    def test_arrays_are_read_only(self) -> None:
        """
        Test that a mesh cannot be modified in place.
        """
        mesh = single_tet()
        with self.assertRaises(ValueError):
            mesh.positions[0, 0] = 5.0

    def test_reference_volume(self) -> None:
        """
        Test the signed volume of the reference tet.
        """
        np.testing.assert_allclose(element_volumes(single_tet()), [1.0 / 6.0])

    def test_orientation_flip(self) -> None:
        """
        Test that a negatively oriented tet gets its last two indices swapped.
        """
        flipped = TetMesh(positions=single_tet().positions, elements=[[0, 1, 3, 2]])
        self.assertLess(element_volumes(flipped)[0], 0.0)
        oriented = validate_and_orient(flipped)
        np.testing.assert_array_equal(oriented.elements, [[0, 1, 2, 3]])
        np.testing.assert_allclose(element_volumes(oriented), [1.0 / 6.0])

    def test_oriented_mesh_unchanged(self) -> None:
        """
        Test that an already oriented mesh is returned as is.
        """
        mesh = single_tet()
        self.assertIs(validate_and_orient(mesh), mesh)

    def test_degenerate_element(self) -> None:
        """
        Test that a flat tet raises DegenerateElement with its index.
        """
        positions = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0], [0, 0, 1]], dtype=np.float64)
        mesh = TetMesh(positions=positions, elements=[[0, 1, 2, 4], [0, 1, 2, 3]])
        with self.assertRaises(DegenerateElement) as context:
            validate_and_orient(mesh)
        self.assertEqual(context.exception.tet_id, 1)

    def test_with_positions(self) -> None:
        """
        Test that new positions keep the connectivity and are size-checked.
        """
        mesh = single_tet()
        moved = mesh.with_positions(mesh.x + 1.0)
        np.testing.assert_array_equal(moved.elements, mesh.elements)
        np.testing.assert_allclose(moved.positions, mesh.positions + 1.0)
        with self.assertRaises(ValueError):
            mesh.with_positions(np.zeros(9))


class TestTopology(unittest.TestCase):
    """
    Unit tests for components, boundary extraction and adjacency.
    """

    def test_component_counts(self) -> None:
        """
        Test vertex-sharing component counts for one, two and three pieces.
        """
        cube = box_mesh(1, 1, 1)
        self.assertEqual(connected_components(cube)[0], 1)
        self.assertEqual(connected_components(disjoint_union(cube, cube))[0], 2)
        self.assertEqual(connected_components(disjoint_union(cube, single_tet(), cube))[0], 3)

    def test_component_labels(self) -> None:
        """
        Test that labels are the smallest vertex index of each component.
        """
        _, labels = connected_components(disjoint_union(box_mesh(1, 1, 1), box_mesh(1, 1, 1)))
        np.testing.assert_array_equal(labels, [0] * 8 + [8] * 8)

    def test_unused_vertex_is_own_component(self) -> None:
        """
        Test that a vertex referenced by no element forms its own component.
        """
        positions = np.vstack([single_tet().positions, [[5.0, 5.0, 5.0]]])
        mesh = TetMesh(positions=positions, elements=[[0, 1, 2, 3]])
        self.assertEqual(connected_components(mesh)[0], 2)

    def test_boundary_of_single_tet(self) -> None:
        """
        Test that every face of a lone tet is a boundary face.
        """
        self.assertEqual(boundary_surface(single_tet()).shape, (4, 3))

    def test_boundary_of_cube_points_outward(self) -> None:
        """
        Test that a five-tet cube has 12 outward boundary triangles.
        """
        mesh = box_mesh(1, 1, 1)
        faces = boundary_surface(mesh)
        self.assertEqual(faces.shape, (12, 3))
        tri = mesh.positions[faces]
        normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        outward = tri.mean(axis=1) - mesh.positions.mean(axis=0)
        self.assertTrue(np.all(np.einsum("ij,ij->i", normals, outward) > 0.0))

    def test_non_manifold_face(self) -> None:
        """
        Test that a face shared by three tets raises NonManifoldFace.
        """
        positions = np.array(
            [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, -1], [0.2, 0.2, 2.0]], dtype=np.float64
        )
        mesh = TetMesh(positions=positions, elements=[[0, 1, 2, 3], [0, 1, 2, 4], [0, 1, 2, 5]])
        with self.assertRaises(NonManifoldFace) as context:
            boundary_surface(mesh)
        self.assertEqual(context.exception.count, 3)

    def test_face_adjacency(self) -> None:
        """
        Test that the central tet of a cube touches the four corner tets.
        """
        np.testing.assert_array_equal(face_adjacency(box_mesh(1, 1, 1)), [[0, 1], [0, 2], [0, 3], [0, 4]])
        self.assertEqual(face_adjacency(tet_chain(5)).shape, (4, 2))
        self.assertEqual(face_adjacency(single_tet()).shape, (0, 2))

    def test_largest_component(self) -> None:
        """
        Test that the component with the most elements is kept and reindexed.
        """
        union = disjoint_union(box_mesh(1, 1, 1), box_mesh(2, 1, 1))
        kept = largest_component(union)
        self.assertEqual(kept.n_elements, 10)
        self.assertEqual(kept.n_vertices, 12)
        self.assertEqual(connected_components(kept)[0], 1)
        cube = box_mesh(1, 1, 1)
        self.assertIs(largest_component(cube), cube)

    def test_normalize_unit_cube(self) -> None:
        """
        Test that the bounding box moves to the origin with its longest side scaled to 1.
        """
        mesh = normalize_unit_cube(box_mesh(2, 1, 1, cell_m=0.5, origin=(3.0, 3.0, 3.0)))
        np.testing.assert_allclose(mesh.positions.min(axis=0), [0.0, 0.0, 0.0])
        np.testing.assert_allclose(mesh.positions.max(axis=0), [1.0, 0.5, 0.5])


class TestGroundGeometry(unittest.TestCase):
    """
    Unit tests for mass, support polygons and vertex selectors.
    """

    def test_center_of_mass(self) -> None:
        """
        Test that volume-proportional masses put the center of a cube at its middle.
        """
        mesh = box_mesh(1, 1, 1)
        np.testing.assert_allclose(center_of_mass(mesh, element_volumes(mesh)), [0.5, 0.5, 0.5], atol=1e-12)
        with self.assertRaises(ZeroMass):
            center_of_mass(mesh, np.zeros(mesh.n_elements))
        with self.assertRaises(ValueError):
            center_of_mass(mesh, np.ones(3))

    def test_cube_support_polygon(self) -> None:
        """
        Test that a cube on the ground has its bottom square as a counter-clockwise hull.
        """
        polygon = support_polygon(box_mesh(1, 1, 1))
        self.assertFalse(polygon.degenerate)
        np.testing.assert_allclose(polygon.hull, [[0, 0], [1, 0], [1, 1], [0, 1]])
        self.assertAlmostEqual(polygon.area, 1.0)
        self.assertEqual(polygon.contact_indices.size, 4)

    def test_triangle_support(self) -> None:
        """
        Test the support of the reference tet.
        """
        polygon = support_polygon(single_tet())
        self.assertEqual(polygon.hull.shape, (3, 2))
        self.assertAlmostEqual(polygon.area, 0.5)

    def test_point_support_is_degenerate(self) -> None:
        """
        Test that a single ground contact gives a degenerate support.
        """
        polygon = support_polygon(tilted_tet())
        self.assertTrue(polygon.degenerate)
        self.assertEqual(polygon.area, 0.0)

    def test_contact_tol_must_be_positive(self) -> None:
        """
        Test that a non-positive contact tolerance is rejected.
        """
        with self.assertRaises(ValueError):
            support_polygon(single_tet(), contact_tol=0.0)

    def test_point_in_polygon(self) -> None:
        """
        Test inside, outside, boundary and margin cases on the unit square.
        """
        hull = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=np.float64)
        self.assertTrue(point_in_convex_polygon([0.5, 0.5], hull))
        self.assertFalse(point_in_convex_polygon([2.0, 2.0], hull))
        self.assertTrue(point_in_convex_polygon([1.0, 0.5], hull))
        self.assertTrue(point_in_convex_polygon([0.5, 0.5], hull, margin=0.4))
        self.assertFalse(point_in_convex_polygon([0.5, 0.5], hull, margin=0.6))
        self.assertFalse(point_in_convex_polygon([0.0, 0.0], hull[:2]))

    def test_select_vertices(self) -> None:
        """
        Test the none, bottom and explicit selectors.
        """
        mesh = box_mesh(1, 1, 1)
        bottom = select_vertices(mesh, "bottom:1e-6")
        self.assertEqual(bottom.size, 4)
        np.testing.assert_array_equal(mesh.positions[bottom, 2], np.zeros(4))
        self.assertEqual(select_vertices(mesh, "none").size, 0)
        self.assertEqual(select_vertices(mesh, None).size, 0)
        np.testing.assert_array_equal(select_vertices(mesh, [3, 1, 1]), [1, 3])
        with self.assertRaises(ValueError):
            select_vertices(mesh, "top")
        with self.assertRaises(MeshIndexError):
            select_vertices(mesh, [99])


class TestGenerators(unittest.TestCase):
    """
    Unit tests for the structured test shapes.
    """

    def test_cantilever(self) -> None:
        """
        Test that the default beam has 40 tets and its x = 0 face on vertices 0..3.
        """
        beam = cantilever_mesh()
        self.assertEqual(beam.n_elements, 40)
        self.assertEqual(beam.n_vertices, 36)
        np.testing.assert_array_equal(beam.positions[:4, 0], np.zeros(4))
        self.assertTrue(np.all(beam.positions[4:, 0] > 0.0))
        self.assertAlmostEqual(float(element_volumes(beam).sum()) / 8e-9, 1.0, places=9)

    def test_voxel_meshes_are_conforming(self) -> None:
        """
        Test that neighbouring cells share their face diagonals (no interior boundary faces).
        """
        mesh = box_mesh(2, 2, 2)
        self.assertTrue(np.all(element_volumes(mesh) > 0.0))
        # 6 sides x 4 squares x 2 triangles.
        self.assertEqual(boundary_surface(mesh).shape[0], 48)

    def test_mushroom_overhangs(self) -> None:
        """
        Test that the mushroom's center of mass lies beyond its stem.
        """
        mesh = mushroom_mesh()
        com = center_of_mass(mesh, element_volumes(mesh))
        polygon = support_polygon(mesh)
        self.assertGreater(com[0], polygon.hull[:, 0].max())

    def test_tet_chain_oriented(self) -> None:
        """
        Test that the chain has k positive tets.
        """
        chain = tet_chain(4)
        self.assertEqual(chain.n_elements, 4)
        self.assertTrue(np.all(element_volumes(chain) > 0.0))


if __name__ == "__main__":
    unittest.main()

import unittest

import numpy as np

from src.modules.elasticity.assembly import ElasticBody
from src.modules.elasticity.material import MATERIAL_PRESETS
from src.modules.errors import DegenerateSupport, DimensionMismatch
from src.modules.mesh.generators import box_mesh, tet_chain
from src.modules.mesh.tet_mesh import TetMesh
from src.modules.objective.laplacian import biharmonic_reg, element_laplacian
from src.modules.objective.losses import (
    auto_c_hat,
    matching_loss,
    polygon_centroid,
    stability_loss,
    stability_mass_sensitivity,
)
from src.modules.objective.objective import Objective, ObjectiveSpec
from src.modules.plastic.plastic_field import PlasticField, element_masses, identity_field


def central_difference(fn, x: np.ndarray, h: float) -> np.ndarray:
    numeric = np.zeros_like(x)
    for k in range(x.size):
        plus, minus = x.copy(), x.copy()
        plus[k] += h
        minus[k] -= h
        numeric[k] = (fn(plus) - fn(minus)) / (2 * h)
    return numeric


class TestLosses(unittest.TestCase):
    """
    Unit tests for the matching and stability losses.
    """

    def setUp(self) -> None:
        """
        A perturbed tet chain with a random field and its element masses.
        """
        self.rng = np.random.default_rng(9)
        self.mesh = tet_chain(5)
        self.body = ElasticBody.from_mesh(self.mesh, MATERIAL_PRESETS["soft"])
        self.x = self.mesh.x + 0.1 * self.rng.standard_normal(self.mesh.n_vertices * 3)

    def test_matching_loss(self) -> None:
        """
        Test the matching loss value and gradient.
        """
        target = self.mesh.x
        value, grad = matching_loss(self.x, target)
        self.assertAlmostEqual(value, float(np.sum((self.x - target) ** 2)))
        numeric = central_difference(lambda v: matching_loss(v, target)[0], self.x, 1e-6)
        np.testing.assert_allclose(grad, numeric, rtol=1e-6, atol=1e-8)
        self.assertEqual(matching_loss(target, target)[0], 0.0)
        with self.assertRaises(DimensionMismatch):
            matching_loss(self.x, target[:-3])

    def test_stability_loss_gradient(self) -> None:
        """
        Test the stability loss gradient and that it ignores z.
        """
        masses = element_masses(None, self.body.precomp, self.body.material)
        c_hat = np.array([0.3, -0.2])
        _, grad = stability_loss(self.x, self.mesh, masses, c_hat)
        numeric = central_difference(lambda v: stability_loss(v, self.mesh, masses, c_hat)[0], self.x, 1e-6)
        np.testing.assert_allclose(grad, numeric, rtol=1e-6, atol=1e-9)
        np.testing.assert_array_equal(grad.reshape(-1, 3)[:, 2], 0.0)

    def test_stability_mass_sensitivity(self) -> None:
        """
        Test the per-element mass derivative against central differences of the stability loss.
        """
        masses = element_masses(None, self.body.precomp, self.body.material)
        c_hat = np.array([0.3, -0.2])
        sensitivity = stability_mass_sensitivity(self.x, self.mesh, masses, c_hat)
        h = 1e-6 * masses.mean()
        numeric = central_difference(lambda m: stability_loss(self.x, self.mesh, m, c_hat)[0], masses, h)
        self.assertEqual(sensitivity.shape, (self.mesh.n_elements,))
        np.testing.assert_allclose(sensitivity, numeric, rtol=1e-5, atol=1e-8 * np.abs(numeric).max())

    def test_polygon_centroid(self) -> None:
        """
        Test the area centroid of a square and a triangle.
        """
        square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        np.testing.assert_allclose(polygon_centroid(square), [0.5, 0.5])
        triangle = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(polygon_centroid(triangle), [1.0 / 3.0, 1.0 / 3.0])

    def test_auto_c_hat(self) -> None:
        """
        Test the automatic target on a cube and on a tet balanced on one vertex.
        """
        cube = box_mesh(1, 1, 1)
        np.testing.assert_allclose(auto_c_hat(cube, cube.x), [0.5, 0.5])
        tilted = TetMesh(positions=[[0, 0, 0], [1, 0, 1], [0, 1, 1], [0, 0, 2]], elements=[[0, 1, 2, 3]])
        with self.assertRaises(DegenerateSupport):
            auto_c_hat(tilted, tilted.x)


class TestLaplacian(unittest.TestCase):
    """
    Unit tests for the element graph Laplacian and the smoothness penalty.
    """

    def setUp(self) -> None:
        """
        One five-tet cube.
        """
        self.mesh = box_mesh(1, 1, 1)
        self.L = element_laplacian(self.mesh)

    def test_structure(self) -> None:
        """
        Test zero row sums and the degree of the central tet.
        """
        dense = self.L.matrix.toarray()
        np.testing.assert_array_equal(dense.sum(axis=1), np.zeros(5))
        np.testing.assert_array_equal(dense, dense.T)
        self.assertEqual(dense[0, 0], 4.0)
        np.testing.assert_array_equal(np.diag(dense)[1:], np.ones(4))

    def test_constant_field_is_free(self) -> None:
        """
        Test that a spatially constant field costs nothing.
        """
        value, grad = biharmonic_reg(identity_field(5), self.L, 10.0)
        self.assertEqual(value, 0.0)
        np.testing.assert_array_equal(grad, 0.0)

    def test_gradient(self) -> None:
        """
        Test the penalty gradient against central differences.
        """
        rng = np.random.default_rng(4)
        base = identity_field(5).flat() + 0.1 * rng.standard_normal(30)
        value, grad = biharmonic_reg(PlasticField.from_flat(base), self.L, 0.5)
        self.assertGreater(value, 0.0)
        numeric = central_difference(lambda v: biharmonic_reg(PlasticField.from_flat(v), self.L, 0.5)[0], base, 1e-6)
        np.testing.assert_allclose(grad, numeric, rtol=1e-6, atol=1e-9)

    def test_size_mismatch(self) -> None:
        """
        Test that fields of the wrong size are rejected.
        """
        with self.assertRaises(DimensionMismatch):
            biharmonic_reg(identity_field(4), self.L, 1.0)


class TestObjective(unittest.TestCase):
    """
    Unit tests for objective specs and bound objectives.
    """

    def setUp(self) -> None:
        """
        A 2 x 1 x 1 box body.
        """
        self.mesh = box_mesh(2, 1, 1, cell_m=0.01)
        self.body = ElasticBody.from_mesh(self.mesh, MATERIAL_PRESETS["soft"])

    def test_spec_validation(self) -> None:
        """
        Test rejected objective specs.
        """
        with self.assertRaises(ValueError):
            ObjectiveSpec(kind="hover")
        with self.assertRaises(ValueError):
            ObjectiveSpec(kind="match")
        with self.assertRaises(ValueError):
            ObjectiveSpec.stand(reg_weight=-1.0)
        with self.assertRaises(DimensionMismatch):
            ObjectiveSpec.stand(c_hat=[0.0, 0.0, 0.0])
        with self.assertRaises(DimensionMismatch):
            Objective(ObjectiveSpec.match(np.zeros(6)), self.body)

    def test_evaluate(self) -> None:
        """
        Test that the total is loss plus regularizer.
        """
        objective = Objective(ObjectiveSpec.match(self.body.X_init, reg_weight=1.0), self.body)
        coeffs = identity_field(self.mesh.n_elements).coeffs.copy()
        coeffs[0, 0] = 1.2
        field = PlasticField(coeffs=coeffs)
        x = self.body.X_init + 1e-3
        value = objective.evaluate(x, field)
        self.assertAlmostEqual(value.loss, self.body.n_dofs * 1e-6)
        self.assertGreater(value.reg, 0.0)
        self.assertAlmostEqual(value.total, value.loss + value.reg)
        self.assertEqual(objective.with_reg_weight(0.0).evaluate(x, field).reg, 0.0)

    def test_freeze_target(self) -> None:
        """
        Test that an automatic target is frozen once and explicit targets are kept.
        """
        objective = Objective(ObjectiveSpec.stand(), self.body)
        with self.assertRaises(ValueError):
            objective.loss(self.body.X_init, None)
        frozen = objective.freeze_target(self.body.X_init)
        np.testing.assert_allclose(frozen.spec.c_hat, [0.01, 0.005])
        self.assertIs(frozen.freeze_target(self.body.X_init + 1.0), frozen)
        explicit = Objective(ObjectiveSpec.stand(c_hat=[0.0, 0.0]), self.body)
        self.assertIs(explicit.freeze_target(self.body.X_init), explicit)

    def test_match_has_no_field_gradient(self) -> None:
        """
        Test that the matching loss does not depend on the field at fixed positions.
        """
        objective = Objective(ObjectiveSpec.match(self.body.X_init), self.body)
        grad = objective.loss_field_gradient(self.body.X_init, None)
        np.testing.assert_array_equal(grad, np.zeros(6 * self.mesh.n_elements))

    def test_stand_field_gradient(self) -> None:
        """
        Test the mass-driven field gradient of the stability loss against central differences.
        """
        rng = np.random.default_rng(12)
        objective = Objective(ObjectiveSpec.stand(c_hat=[0.004, 0.002]), self.body)
        base = identity_field(self.mesh.n_elements).flat() + 0.05 * rng.standard_normal(6 * self.mesh.n_elements)
        x = self.body.X_init
        grad = objective.loss_field_gradient(x, PlasticField.from_flat(base))
        numeric = central_difference(lambda v: objective.loss(x, PlasticField.from_flat(v))[0], base, 1e-6)
        scale = np.abs(numeric).max()
        np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-6 * scale)


if __name__ == "__main__":
    unittest.main()

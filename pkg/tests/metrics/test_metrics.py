import unittest

import numpy as np
from pydantic import ValidationError

from src.modules.elasticity.assembly import StressField
from src.modules.elasticity.material import MaterialParams
from src.modules.equilibrium.load import ExternalLoad
from src.modules.equilibrium.solver import SolverConfig
from src.modules.mesh.generators import box_mesh, disjoint_union
from src.modules.mesh.tet_mesh import TetMesh, select_vertices
from src.modules.metrics.metrics import (
    FRACTURE_COLUMNS,
    MetricsConfig,
    evaluate_all,
    fracture_auc,
    fracture_curve,
    mean_stress,
    preprocess,
    standability,
    summarize_batch,
    support_margin,
)
from src.modules.plastic.plastic_field import PlasticField, identity_field


def stress_with_von_mises(values) -> StressField:
    vm = np.asarray(values, dtype=np.float64)
    return StressField(cauchy=np.zeros((vm.size, 3, 3)), von_mises=vm, inverted=np.zeros(vm.size, dtype=bool))


def fixed_bottom(mesh: TetMesh) -> ExternalLoad:
    return ExternalLoad.build(fixed_vertices=select_vertices(mesh, "bottom:1e-6"))


class TestScalarMetrics(unittest.TestCase):
    """
    Unit tests for mean stress, the fracture curve and its area.
    """

    def test_mean_stress(self) -> None:
        """
        Test the plain and volume-weighted mean.
        """
        stress = stress_with_von_mises([1.0, 3.0])
        self.assertAlmostEqual(mean_stress(stress), 2.0)
        self.assertAlmostEqual(mean_stress(stress, [1.0, 3.0], volume_weighted=True), 2.5)
        with self.assertRaises(ValueError):
            mean_stress(stress, volume_weighted=True)

    def test_fracture_curve(self) -> None:
        """
        Test the exceedance fractions, with ties not exceeding.
        """
        stress = stress_with_von_mises([1.0, 2.0, 3.0, 4.0])
        curve = fracture_curve(stress, [0.5, 1.0, 2.5, 4.0, 5.0])
        self.assertEqual([f for _, f in curve], [1.0, 0.75, 0.5, 0.0, 0.0])
        self.assertEqual([t for t, _ in curve], [0.5, 1.0, 2.5, 4.0, 5.0])
        with self.assertRaises(ValueError):
            fracture_curve(stress, [1.0, 1.0])
        with self.assertRaises(ValueError):
            fracture_curve(stress, [])

    def test_fracture_auc(self) -> None:
        """
        Test the trapezoid area and the degenerate single-point curve.
        """
        self.assertAlmostEqual(fracture_auc([(0.0, 1.0), (1.0, 0.0)]), 0.5)
        self.assertAlmostEqual(fracture_auc([(0.0, 1.0), (1.0, 1.0), (3.0, 0.0)]), 2.0)
        self.assertEqual(fracture_auc([(1.0, 0.5)]), 0.0)

    def test_config_validation(self) -> None:
        """
        Test rejected metric settings.
        """
        with self.assertRaises(ValidationError):
            MetricsConfig(thresholds_pa=[2.0, 1.0])
        with self.assertRaises(ValidationError):
            MetricsConfig(resolution=8)
        with self.assertRaises(ValidationError):
            MetricsConfig(axis="up")
        self.assertEqual(MetricsConfig().resolved_thresholds().size, 64)


class TestStandability(unittest.TestCase):
    """
    Unit tests for the support polygon test.
    """

    def setUp(self) -> None:
        """
        A 1 m cube with uniform element masses.
        """
        self.cube = box_mesh(1, 1, 1)
        self.masses = np.ones(self.cube.n_elements)

    def test_cube_stands(self) -> None:
        """
        Test that a cube stands, with a 0.5 m margin to its support edges.
        """
        self.assertTrue(standability(self.cube, self.cube.x, self.masses))
        self.assertAlmostEqual(support_margin(self.cube, self.cube.x, self.masses), 0.5)

    def test_margin(self) -> None:
        """
        Test that a margin wider than the distance to the edge fails.
        """
        self.assertTrue(standability(self.cube, self.cube.x, self.masses, margin=0.4))
        self.assertFalse(standability(self.cube, self.cube.x, self.masses, margin=0.6))

    def test_translation_invariant(self) -> None:
        """
        Test that rigid translations do not change the verdict.
        """
        moved = self.cube.x + np.tile([5.0, -3.0, 2.0], self.cube.n_vertices)
        self.assertTrue(standability(self.cube, moved, self.masses))
        self.assertAlmostEqual(support_margin(self.cube, moved, self.masses), 0.5)

    def test_point_support(self) -> None:
        """
        Test that a tet balanced on one vertex never stands.
        """
        tilted = TetMesh(positions=[[0, 0, 0], [1, 0, 1], [0, 1, 1], [0, 0, 2]], elements=[[0, 1, 2, 3]])
        self.assertFalse(standability(tilted, tilted.x, np.ones(1)))
        self.assertEqual(support_margin(tilted, tilted.x, np.ones(1)), float("-inf"))


class TestEvaluateAll(unittest.TestCase):
    """
    End-to-end metric evaluation of small shapes.
    """

    def setUp(self) -> None:
        """
        A 1 cm cube of the default material, fixed at its base.
        """
        self.cube = box_mesh(1, 1, 1, cell_m=0.01)
        self.material = MaterialParams()
        self.cfg = MetricsConfig(resolution=32, thresholds_pa=[1.0, 10.0, 100.0])

    def test_cube_report(self) -> None:
        """
        Test a complete report for a supported cube.
        """
        report = evaluate_all(self.cube, None, self.material, fixed_bottom, self.cfg)
        self.assertFalse(report.failed)
        self.assertEqual(report.cc_count, 1)
        self.assertTrue(report.standable)
        self.assertGreater(report.mean_stress_pa, 0.0)
        self.assertLess(report.mean_stress_pa, 1e-2 * self.material.young_pa)
        self.assertGreaterEqual(report.silhouette_loss, 0.0)
        self.assertEqual(len(report.fracture_curve), 3)
        self.assertEqual(report.fracture_frame().columns.tolist(), FRACTURE_COLUMNS)
        data = report.to_dict()
        self.assertEqual(data["cc"], 1)
        self.assertTrue(data["solver"]["converged"])

    def test_component_count(self) -> None:
        """
        Test that two separate cubes count as two components.
        """
        pair = disjoint_union(self.cube, self.cube, spacing=0.02)
        report = evaluate_all(pair, None, self.material, fixed_bottom, self.cfg)
        self.assertFalse(report.failed)
        self.assertEqual(report.cc_count, 2)

    def test_softer_material_sags_more(self) -> None:
        """
        Test that a 100 times softer material deviates more from its input silhouette.
        """
        column = box_mesh(1, 1, 4, cell_m=0.01)
        cfg = MetricsConfig(resolution=128)
        stiff = evaluate_all(column, None, MaterialParams(young_pa=5e5), fixed_bottom, cfg)
        soft = evaluate_all(column, None, MaterialParams(young_pa=5e3), fixed_bottom, cfg)
        self.assertFalse(stiff.failed or soft.failed)
        self.assertGreater(soft.silhouette_loss, stiff.silhouette_loss)

    def test_free_body_fails(self) -> None:
        """
        Test that an unsupported body yields a failed report instead of raising.
        """
        report = evaluate_all(self.cube, None, self.material, ExternalLoad.build(), self.cfg)
        self.assertTrue(report.failed)
        self.assertIn("NoSupport", report.error)
        self.assertEqual(report.cc_count, 1)
        self.assertIsNone(report.mean_stress_pa)

    def test_field_size_mismatch(self) -> None:
        """
        Test that a plastic field of the wrong size fails the report.
        """
        report = evaluate_all(self.cube, identity_field(3), self.material, fixed_bottom, self.cfg)
        self.assertTrue(report.failed)
        self.assertIn("DimensionMismatch", report.error)

    def test_unconverged(self) -> None:
        """
        Test that a solve exhausting its budget is reported as failed.
        """
        report = evaluate_all(
            self.cube, None, self.material, fixed_bottom, self.cfg, SolverConfig(tol_force=1e-30, max_iters=1)
        )
        self.assertTrue(report.failed)
        self.assertFalse(report.solver["converged"])

    def test_preprocess_keeps_field_rows(self) -> None:
        """
        Test that the largest-component filter drops the matching field rows.
        """
        small = box_mesh(1, 1, 1, cell_m=0.01)
        large = box_mesh(2, 1, 1, cell_m=0.01)
        pair = disjoint_union(small, large, spacing=0.02)
        coeffs = identity_field(pair.n_elements).coeffs.copy()
        coeffs[:, 0] = np.arange(pair.n_elements)
        mesh, field = preprocess(pair, PlasticField(coeffs=coeffs), MetricsConfig(largest_component=True))
        self.assertEqual(mesh.n_elements, 10)
        np.testing.assert_array_equal(field.coeffs[:, 0], np.arange(5, 15))

    def test_summarize_batch(self) -> None:
        """
        Test the per-object and pooled aggregates.
        """
        ok = evaluate_all(self.cube, None, self.material, fixed_bottom, self.cfg)
        bad = evaluate_all(self.cube, None, self.material, ExternalLoad.build(), self.cfg)
        summary = summarize_batch({"b": bad, "a": ok})
        self.assertEqual(summary["objects"], 2)
        self.assertEqual(summary["failed"], ["b"])
        self.assertAlmostEqual(summary["mean_stress_pa_per_object"], ok.mean_stress_pa)
        self.assertAlmostEqual(summary["mean_stress_pa_pooled"], float(np.mean(ok.von_mises)))
        self.assertEqual(summary["standable_fraction"], 1.0)
        self.assertEqual(list(summary["per_object"]), ["a", "b"])


if __name__ == "__main__":
    unittest.main()

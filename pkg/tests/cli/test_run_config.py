import os
import tempfile
import unittest

import numpy as np

from src.modules.errors import ConfigError
from src.modules.mesh.generators import box_mesh
from src.modules.run_config import (
    AttachmentBlock,
    DynamicsBlock,
    LoadBlock,
    MaterialBlock,
    ObjectiveBlock,
    RunConfig,
    load_run_config,
    parse_run_config,
)


class TestLoadRunConfig(unittest.TestCase):
    """
    Tests for reading run configs and reporting schema violations by line.
    """

    def setUp(self) -> None:
        """
        Creates a temporary directory for config files.
        """
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write(self, name: str, text: str) -> str:
        path = os.path.join(self.tmp.name, name)
        with open(path, "w") as file:
            file.write(text)
        return path

    def test_valid_yaml(self) -> None:
        """
        Test that a complete YAML config loads with defaults filled in.
        """
        path = self.write(
            "run.yaml",
            'mesh_path: "cube.tet"\n'
            "material:\n"
            '  preset: "stiff"\n'
            "  poisson: 0.3\n"
            "objective:\n"
            '  kind: "stand"\n',
        )
        config = load_run_config(path)
        self.assertEqual(config.source_path, path)
        self.assertEqual(config.objective.kind, "stand")
        self.assertEqual(config.objective.reg_weight, 1e-2)
        params = config.material.to_params()
        self.assertEqual((params.young_pa, params.poisson), (5e5, 0.3))
        self.assertEqual(config.optimizer.method, "adam")
        self.assertIsNone(config.dynamics)

    def test_valid_json(self) -> None:
        """
        Test that JSON configs go through the same loader.
        """
        path = self.write("run.json", '{"mesh_path": "cube.mesh", "load": {"fixed_selector": [0, 1]}}')
        config = load_run_config(path)
        self.assertEqual(config.load.fixed_selector, [0, 1])
        self.assertEqual(config.mesh_format(), "medit_mesh")

    def test_bad_value_reports_line(self) -> None:
        """
        Test that an invalid enum value names the file, line and key path.
        """
        path = self.write(
            "run.yaml",
            'mesh_path: "cube.tet"\n'
            "material:\n"
            '  preset: "soft"\n'
            "objective:\n"
            '  kind: "hover"\n',
        )
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(path)
        self.assertIn(f"{path}:5: objective.kind", str(ctx.exception))

    def test_extra_key_rejected(self) -> None:
        """
        Test that unknown keys are refused at their own line.
        """
        path = self.write("run.yaml", 'mesh_path: "cube.tet"\nbogus: 1\n')
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(path)
        self.assertIn(f"{path}:2: bogus", str(ctx.exception))

    def test_bad_selector(self) -> None:
        """
        Test that an unknown vertex selector is refused.
        """
        path = self.write("run.yaml", 'mesh_path: "cube.tet"\nload:\n  fixed_selector: "top:1"\n')
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(path)
        self.assertIn(f"{path}:3: load.fixed_selector", str(ctx.exception))

    def test_bad_material(self) -> None:
        """
        Test that an out-of-range Poisson ratio is refused.
        """
        path = self.write("run.yaml", 'mesh_path: "cube.tet"\nmaterial:\n  poisson: 0.6\n')
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(path)
        self.assertIn("material", str(ctx.exception))

    def test_missing_mesh_path(self) -> None:
        """
        Test that the required mesh path is enforced.
        """
        path = self.write("run.yaml", "output_dir: out\n")
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(path)
        self.assertIn("mesh_path", str(ctx.exception))

    def test_unparsable_and_missing(self) -> None:
        """
        Test that broken YAML is a config error and a missing file is FileNotFoundError.
        """
        path = self.write("run.yaml", "mesh_path: [unclosed\n")
        with self.assertRaises(ConfigError):
            load_run_config(path)
        with self.assertRaises(FileNotFoundError):
            load_run_config(os.path.join(self.tmp.name, "absent.yaml"))

    def test_resolve_and_echo(self) -> None:
        """
        Test that relative mesh paths resolve next to the config and the echo omits the source path.
        """
        path = self.write("run.yaml", 'mesh_path: "meshes/cube.tet"\n')
        config = load_run_config(path)
        expected = os.path.join(os.path.dirname(os.path.abspath(path)), "meshes/cube.tet")
        self.assertEqual(config.resolve(config.mesh_path), expected)
        self.assertEqual(config.resolve("/abs/cube.tet"), "/abs/cube.tet")
        self.assertEqual(parse_run_config({"mesh_path": "a.tet"}).resolve("a.tet"), "a.tet")

        echo = config.echo()
        self.assertEqual(echo["mesh_path"], "meshes/cube.tet")
        self.assertNotIn("source_path", echo)
        self.assertIn("solver", echo)


class TestConfigBlocks(unittest.TestCase):
    """
    Tests for turning config blocks into runtime objects.
    """

    def setUp(self) -> None:
        """
        A single 1 cm cube.
        """
        self.mesh = box_mesh(1, 1, 1, cell_m=0.01)

    def test_load_block_build(self) -> None:
        """
        Test selector resolution and attachment targets with an offset.
        """
        block = LoadBlock(
            fixed_selector="bottom:1e-6",
            attachments=[AttachmentBlock(selector=[7], k_n_m=50.0, offset_m=(0.0, 0.0, 0.01))],
        )
        load = block.build(self.mesh)
        np.testing.assert_array_equal(np.sort(load.fixed_vertices), np.nonzero(self.mesh.positions[:, 2] == 0.0)[0])
        np.testing.assert_array_equal(load.attach_vertices, [7])
        np.testing.assert_allclose(load.attach_targets[0], self.mesh.positions[7] + [0.0, 0.0, 0.01])
        np.testing.assert_allclose(load.attach_stiffness, [50.0])

    def test_material_block(self) -> None:
        """
        Test preset defaults and overrides.
        """
        self.assertEqual(MaterialBlock().to_params().young_pa, 5e4)
        self.assertEqual(MaterialBlock(preset="stiff", density_kg_m3=500.0).to_params().density_kg_m3, 500.0)

    def test_objective_block(self) -> None:
        """
        Test that matching targets the input shape and standing leaves c_hat open.
        """
        match = ObjectiveBlock(kind="match", reg_weight=0.5).to_spec(self.mesh)
        np.testing.assert_array_equal(match.X_target, self.mesh.x)
        self.assertEqual(match.reg_weight, 0.5)
        stand = ObjectiveBlock(kind="stand").to_spec(self.mesh)
        self.assertIsNone(stand.c_hat)

    def test_dynamics_block(self) -> None:
        """
        Test the split between integrator settings and run settings.
        """
        block = DynamicsBlock(duration_s=0.5, frame_stride=2, attach_selector="bottom:1e-6")
        cfg = block.to_config()
        self.assertEqual(cfg.dt_s, block.dt_s)
        self.assertFalse(hasattr(cfg, "duration_s"))
        self.assertEqual(len(block.attachments()), 1)
        self.assertEqual(block.attachments()[0].k_n_m, 1e4)
        self.assertEqual(DynamicsBlock().attachments(), [])
        self.assertEqual(DynamicsBlock(attach_selector=[0], k_attach_n_m=0.0).attachments(), [])

    def test_run_config_defaults(self) -> None:
        """
        Test that only the mesh path is required.
        """
        config = RunConfig(mesh_path="cube.tet")
        self.assertEqual(config.mesh_format(), "tet_ascii")
        self.assertEqual(config.load.fixed_selector, "none")
        self.assertEqual(config.output_dir, "output")


if __name__ == "__main__":
    unittest.main()

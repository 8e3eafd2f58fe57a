import os
import unittest
from typing import List

from dotenv import load_dotenv

from src.modules.run_config import RunConfig, load_run_config

# Load environment variables
load_dotenv()

CONFIG_DIR: str = os.path.join("src", "config")


def shipped_configs() -> List[str]:
    """
    Lists the example run configs shipped with the package.

    Returns:
        List[str]: Paths of every YAML and JSON file in src/config.
    """
    return sorted(
        os.path.join(CONFIG_DIR, name) for name in os.listdir(CONFIG_DIR) if name.endswith((".yaml", ".yml", ".json"))
    )


class TestShippedConfigs(unittest.TestCase):
    """
    Unit tests verifying that every example run config validates.
    """

    @classmethod
    def setUpClass(cls) -> None:
        """
        Load all shipped configs once.
        """
        cls.configs: List[RunConfig] = [load_run_config(path) for path in shipped_configs()]

    def test_configs_present(self) -> None:
        """
        Test that the default config and the example runs are shipped.
        """
        names = [os.path.basename(path) for path in shipped_configs()]
        for name in ("config.yaml", "mushroom_stand.yaml", "plant_dynamics.yaml", "cantilever_match.json"):
            with self.subTest(config=name):
                self.assertIn(name, names)

    def test_meshes_resolve_into_data(self) -> None:
        """
        Test that mesh paths point into data/meshes relative to the config directory.
        """
        for config in self.configs:
            with self.subTest(config=config.source_path):
                resolved = os.path.normpath(config.resolve(config.mesh_path))
                self.assertTrue(resolved.endswith(os.path.join("data", "meshes", os.path.basename(config.mesh_path))))

    def test_optimize_configs_have_objectives(self) -> None:
        """
        Test that every config without dynamics carries an objective.
        """
        for config in self.configs:
            if config.dynamics is None:
                with self.subTest(config=config.source_path):
                    self.assertIsNotNone(config.objective)

    def test_dynamics_config(self) -> None:
        """
        Test the keyframed plant config.
        """
        plant = next(c for c in self.configs if c.dynamics is not None)
        self.assertEqual(plant.dynamics.start, "equilibrium")
        self.assertEqual(plant.dynamics.track.times_s, [0.0, 0.5])
        self.assertEqual(len(plant.dynamics.attachments()), 1)


if __name__ == "__main__":
    unittest.main()

"""Generator for the meshes under data/meshes/ used by the shipped configs.

Every mesh comes from the structured generators in src/modules/mesh/generators.py, so the
corpus is fully reproducible. Re-run from the repo root after changing a generator:
    python scripts/build_acceptance_meshes.py
"""
import os
import sys

HERE = os.path.dirname(__file__)
sys.path.insert(0, os.path.normpath(os.path.join(HERE, "..")))

from src.modules.mesh.generators import box_mesh, cantilever_mesh, disjoint_union, mushroom_mesh  # noqa: E402
from src.modules.mesh.writers import save_medit, save_mesh  # noqa: E402

OUT = os.path.normpath(os.path.join(HERE, "..", "data", "meshes"))


def main() -> None:
    cube = box_mesh(1, 1, 1, 0.01)
    meshes = {
        "cantilever.tet": cantilever_mesh(),
        "mushroom.tet": mushroom_mesh(),
        "plant.tet": box_mesh(1, 1, 4, 0.01),
        "cube.tet": cube,
        "two_cubes.tet": disjoint_union(cube, cube, spacing=0.02),
    }
    for name, mesh in meshes.items():
        save_mesh(mesh, os.path.join(OUT, name))
    save_medit(cube, os.path.join(OUT, "cube.mesh"))

    print(f"Wrote {len(meshes) + 1} meshes to {OUT}")


if __name__ == "__main__":
    main()

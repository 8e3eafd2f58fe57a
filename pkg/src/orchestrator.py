import asyncio
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv

from src.modules.artifacts import ArtifactWriter
from src.modules.dynamics.simulator import DynamicsSimulator, DynamicsState, Trajectory
from src.modules.elasticity.assembly import ElasticBody, stress_field
from src.modules.equilibrium.solver import EquilibriumSolution, solve_static
from src.modules.errors import ConfigError, DimensionMismatch, MeshError, NumericalError
from src.modules.mesh.reader import guess_format, load_mesh
from src.modules.mesh.tet_mesh import TetMesh, validate_and_orient
from src.modules.mesh.writers import export_obj, save_medit, save_mesh
from src.modules.metrics.metrics import MetricsReport, evaluate_all, summarize_batch
from src.modules.optimizer.optimizer import OptimizeResult, optimize
from src.modules.plastic.plastic_field import PlasticField
from src.modules.plastic.rest_shape import rest_shape
from src.modules.run_config import RunConfig, load_run_config

# Load environment variables
load_dotenv()

COMMANDS = ("equilibrium", "optimize", "metrics", "simulate")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


class Orchestrator:
    """
    Runs one pipeline command for one run configuration and writes its artifacts.

    Attributes:
        config (RunConfig): Validated run configuration.
        output_dir (str): Directory receiving the artifacts.
        writer (ArtifactWriter): Artifact writer bound to output_dir.
    """

    def __init__(self, config: RunConfig, output_dir: Optional[str] = None) -> None:
        self.config: RunConfig = config
        self.output_dir: str = output_dir or config.output_dir
        self.writer: ArtifactWriter = ArtifactWriter(self.output_dir)
        self.logger: logging.Logger = logging.getLogger(self.__class__.__name__)
        self._mesh: Optional[TetMesh] = None
        self.report: Optional[MetricsReport] = None

    @property
    def mesh(self) -> TetMesh:
        if self._mesh is None:
            path = self.config.resolve(self.config.mesh_path)
            self.logger.info(f"[Orchestrator] Loading mesh {path}")
            self._mesh = validate_and_orient(load_mesh(path, self.config.mesh_format()))
        return self._mesh

    def body(self) -> ElasticBody:
        return ElasticBody.from_mesh(self.mesh, self.config.material.to_params())

    def load_plastic(self, path: Optional[str]) -> Optional[PlasticField]:
        """Reads a plastic field, falling back to the identity when the file is missing."""
        if path is None:
            return None
        if not os.path.exists(path):
            self.logger.warning(f"[Orchestrator] Plastic field {path} not found; using the identity field.")
            return None
        field = PlasticField.load(path)
        if field.n_elements != self.mesh.n_elements:
            raise DimensionMismatch(f"Plastic field has {field.n_elements} elements, mesh has {self.mesh.n_elements}.")
        return field

    def equilibrium(self) -> EquilibriumSolution:
        """
        Writes static.tet, stress.csv and solve.json (plus solve_log.csv when enabled).
        """
        body = self.body()
        load = self.config.load.build(self.mesh)
        sol = solve_static(body, None, load, None, self.config.solver)
        sol.stress = stress_field(sol.x_static, None, body.precomp, body.material)

        self.writer.mesh("static.tet", self.mesh, sol.x_static)
        self.writer.table("stress.csv", sol.stress)
        self.writer.json(
            "solve.json",
            {**sol.summary(), "tol_force": sol.tol_force, "energy_j": sol.energy, "config": self.config.echo()},
        )
        if self.config.solver.write_log:
            self.writer.frame("solve_log.csv", sol.log_frame())
        return sol

    def optimize(self) -> OptimizeResult:
        """
        Writes plastic.txt, rest.tet, static_opt.tet, trace.csv and report.json.
        """
        if self.config.objective is None:
            raise ConfigError(f"{self.config.source_path or '<config>'}: optimize needs an 'objective' block.")
        body = self.body()
        load = self.config.load.build(self.mesh)
        spec = self.config.objective.to_spec(self.mesh)

        def checkpoint(iteration: int, field: PlasticField) -> None:
            self.writer.json("plastic_checkpoint.json", {"iteration": iteration, **field.to_dict()})

        result = optimize(body, load, spec, self.config.optimizer, self.config.solver, checkpoint)
        X_rest, rest_residual = rest_shape(result.field, body)

        self.writer.plastic("plastic.txt", result.field)
        self.writer.mesh("rest.tet", self.mesh, X_rest)
        self.writer.mesh("static_opt.tet", self.mesh, result.solution.x_static)
        self.writer.table("trace.csv", result.trace)
        self.writer.json(
            "report.json",
            {
                "initial": result.initial.__dict__,
                "final": result.final.__dict__,
                "stop_reason": result.stop_reason,
                "iterations": len(result.trace),
                "effective_reg_weight": result.objective.spec.reg_weight,
                "solver": result.solution.summary(),
                "rest_residual": rest_residual,
                "config": self.config.echo(),
            },
        )
        return result

    def metrics(
        self, plastic_path: Optional[str] = None, pair_path: Optional[str] = None, volume_weighted: bool = False
    ) -> MetricsReport:
        """
        Writes metrics.json and fracture.csv.
        """
        field = self.load_plastic(plastic_path)
        cfg = self.config.metrics.to_config()
        if volume_weighted:
            cfg = cfg.model_copy(update={"volume_weighted": True})

        pair = pair_path or self.config.metrics.pair_mesh_path
        target = None
        if pair is not None:
            pair = pair if pair_path else self.config.resolve(pair)
            target = validate_and_orient(load_mesh(pair, guess_format(pair)))

        report = evaluate_all(
            self.mesh, field, self.config.material.to_params(), self.config.load.build, cfg, self.config.solver, target
        )
        self.report = report
        self.writer.json("metrics.json", {**report.to_dict(), "config": self.config.echo()})
        self.writer.table("fracture.csv", report)
        return report

    def simulate(self, plastic_path: Optional[str] = None) -> Trajectory:
        """
        Writes frames/frame_%06d.obj and trajectory.csv.
        """
        block = self.config.dynamics
        if block is None:
            raise ConfigError(f"{self.config.source_path or '<config>'}: simulate needs a 'dynamics' block.")
        if plastic_path is None:
            self.logger.warning("[Orchestrator] No plastic field given; simulating with the identity field.")
        field = self.load_plastic(plastic_path)
        body = self.body()
        load = self.config.load.build(self.mesh, extra=block.attachments())

        initial = None
        if block.start == "equilibrium":
            sol = solve_static(body, field, load, None, self.config.solver)
            if not sol.converged:
                raise NumericalError(f"Initial equilibrium did not converge (residual {sol.residual_inf:.3e}).")
            initial = DynamicsState(x=sol.x_static, v=np.zeros(body.n_dofs))

        simulator = DynamicsSimulator(body, load, block.to_config())
        trajectory = simulator.simulate(
            field, block.duration_s, block.frame_stride, os.path.join(self.output_dir, "frames"), initial
        )
        self.writer.table("trajectory.csv", trajectory)
        return trajectory

    def execute(self, command: str, **options: Any) -> int:
        """
        Runs a command and maps its outcome to an exit code.

        Returns:
            int: 0 on success, 2 on input or configuration errors, 3 on numerical failures.
        """
        try:
            if command == "equilibrium":
                sol = self.equilibrium()
                if not sol.converged:
                    print(f"error: equilibrium did not converge (residual {sol.residual_inf:.3e})", file=sys.stderr)
                    return EXIT_NUMERICAL
            elif command == "optimize":
                self.optimize()
            elif command == "metrics":
                report = self.metrics(options.get("plastic"), options.get("pair"), options.get("volume_weighted", False))
                require = options.get("require_converged") or self.config.metrics.require_converged
                if report.failed and require:
                    print(f"error: {report.error}", file=sys.stderr)
                    return EXIT_NUMERICAL
            elif command == "simulate":
                self.simulate(options.get("plastic"))
            else:
                raise ConfigError(f"Unknown command '{command}'. Expected one of {COMMANDS}.")
        except (ConfigError, MeshError, FileNotFoundError) as e:
            self.logger.error(f"[Orchestrator] {command} failed: {e}")
            print(f"error: {e}", file=sys.stderr)
            return EXIT_INPUT
        except NumericalError as e:
            self.logger.error(f"[Orchestrator] {command} failed: {type(e).__name__}: {e}")
            print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
            return EXIT_NUMERICAL
        self.logger.info(f"[Orchestrator] {command} completed; artifacts in {self.output_dir}")
        return EXIT_OK


def run_config_file(
    command: str,
    config_path: str,
    output_dir: Optional[str] = None,
    reports: Optional[Dict[str, MetricsReport]] = None,
    **options: Any,
) -> int:
    """
    Loads one config and executes a command, mapping config errors to exit code 2.

    Args:
        reports (Optional[Dict[str, MetricsReport]]): Collects the metrics report under the config's stem.
    """
    try:
        config = load_run_config(config_path)
    except (ConfigError, FileNotFoundError) as e:
        logging.error(f"Cannot load {config_path}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    orchestrator = Orchestrator(config, output_dir)
    code = orchestrator.execute(command, **options)
    if reports is not None and orchestrator.report is not None:
        reports[config_stem(config_path)] = orchestrator.report
    return code


def config_stem(config_path: str) -> str:
    return os.path.splitext(os.path.basename(config_path))[0]


def batch_output_dir(output_dir: Optional[str], config_path: str, batch: bool) -> Optional[str]:
    """One subdirectory per config when several configs share an output directory."""
    if output_dir is None or not batch:
        return output_dir
    return os.path.join(output_dir, config_stem(config_path))


async def run_batch(
    command: str, config_paths: Sequence[str], jobs: int = 1, output_dir: Optional[str] = None, **options: Any
) -> List[int]:
    """
    Runs a command over several configs, at most `jobs` at a time, each in a worker thread.

    A metrics batch with a shared output directory also writes batch_summary.json there.

    Returns:
        List[int]: Exit codes in config order.
    """
    semaphore = asyncio.Semaphore(max(1, jobs))
    batch = len(config_paths) > 1
    reports: Optional[Dict[str, MetricsReport]] = {} if command == "metrics" and batch else None

    async def run_one(path: str) -> int:
        async with semaphore:
            logging.info(f"Running {command} for {path}")
            return await asyncio.to_thread(
                run_config_file, command, path, batch_output_dir(output_dir, path, batch), reports, **options
            )

    codes = list(await asyncio.gather(*[run_one(path) for path in config_paths]))
    if reports:
        if output_dir is None:
            logging.info("No shared --output directory; skipping batch_summary.json.")
        else:
            ArtifactWriter(output_dir).json("batch_summary.json", summarize_batch(reports))
    return codes


def convert(
    input_path: str,
    input_format: Optional[str] = None,
    to_tet: Optional[str] = None,
    to_obj: Optional[str] = None,
    to_mesh: Optional[str] = None,
) -> Dict[str, Any]:
    """Translates a mesh file to `.tet`, Medit `.mesh` and/or a boundary OBJ."""
    mesh = validate_and_orient(load_mesh(input_path, input_format or guess_format(input_path)))
    written: Dict[str, Any] = {}
    if to_tet:
        save_mesh(mesh, to_tet)
        written["tet"] = to_tet
    if to_mesh:
        save_medit(mesh, to_mesh)
        written["mesh"] = to_mesh
    if to_obj:
        written["obj_faces"] = export_obj(mesh, to_obj)
    return written

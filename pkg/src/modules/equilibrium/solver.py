import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy import sparse
from scipy.sparse.linalg import splu

from src.modules.elasticity.assembly import (
    ElasticBody,
    StressField,
    elastic_energy,
    internal_forces,
    split_dofs,
    stiffness_matrix,
    vertex_masses,
)
from src.modules.equilibrium.load import (
    ExternalLoad,
    attachment_energy,
    attachment_stiffness_diagonal,
    external_forces,
    gravity_energy,
)
from src.modules.errors import DimensionMismatch, LinearSolveFailure, NoSupport, SolverDiverged
from src.modules.plastic.plastic_field import PlasticField

SOLVE_LOG_COLUMNS = ["iter", "k", "residual_inf", "energy", "step_len"]

# Tikhonov shifts are expressed relative to the mean |diagonal| of the reduced system.
TIKHONOV_FLOOR: float = 1e-8
TIKHONOV_CAP: float = 1e6


class SolverConfig(BaseModel):
    """
    Newton solver settings.

    tol_force=None resolves to 1e-6 * mu * V_total^(2/3) for the body being solved.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    tol_force: Optional[float] = Field(None, gt=0.0)
    max_iters: int = Field(200, ge=1)
    ls_shrink: float = Field(0.5, gt=0.0, lt=1.0)
    ls_c1: float = Field(1e-4, gt=0.0, lt=1.0)
    min_step: float = Field(2.0 ** -30, gt=0.0)
    tikhonov0: float = Field(0.0, ge=0.0)
    write_log: bool = False

    def resolve_tol(self, body: ElasticBody) -> float:
        return self.tol_force if self.tol_force is not None else 1e-6 * body.force_scale


@dataclass(eq=False)
class EquilibriumSolution:
    """
    Result of a static solve.

    Attributes:
        x_static (np.ndarray): 3N equilibrium positions.
        residual_inf (float): max |f_int - f_ext| over free DOFs.
        iterations (int): Accepted Newton steps.
        converged (bool): residual_inf <= tol_force.
        energy (float): Total potential at x_static.
        tol_force (float): Tolerance the solve was run with.
        free_dofs (np.ndarray): DOFs not eliminated by Dirichlet constraints.
        log (List[Dict[str, float]]): One record per Newton iteration.
        stress (Optional[StressField]): Stress cache filled by callers that need it.
    """

    x_static: np.ndarray
    residual_inf: float
    iterations: int
    converged: bool
    energy: float
    tol_force: float
    free_dofs: np.ndarray
    log: List[Dict[str, float]] = field(default_factory=list)
    stress: Optional[StressField] = None

    @property
    def certified(self) -> bool:
        return self.converged and self.residual_inf <= self.tol_force

    def log_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.log, columns=SOLVE_LOG_COLUMNS)

    def summary(self) -> Dict[str, Any]:
        return {"converged": self.converged, "residual": self.residual_inf, "iters": self.iterations}


def potential_terms(
    x: np.ndarray, field: Optional[PlasticField], load: ExternalLoad, body: ElasticBody
) -> Tuple[float, float, float]:
    """(elastic, gravity, attachment) energies in J."""
    masses = vertex_masses(field, body.precomp, body.material)
    return (
        elastic_energy(x, field, body.precomp, body.material),
        gravity_energy(x, load, masses),
        attachment_energy(x, load),
    )


def total_potential(x: np.ndarray, field: Optional[PlasticField], load: ExternalLoad, body: ElasticBody) -> float:
    """
    Elastic energy plus gravity potential plus attachment spring energy.

    Its gradient with respect to x is f_net = f_int - f_ext.
    """
    return float(sum(potential_terms(x, field, load, body)))


def net_forces(x: np.ndarray, field: Optional[PlasticField], load: ExternalLoad, body: ElasticBody) -> np.ndarray:
    """f_net = f_int - f_ext over all 3N DOFs."""
    masses = vertex_masses(field, body.precomp, body.material)
    return internal_forces(x, field, body.precomp, body.material) - external_forces(x, load, masses)


class NewtonSolver:
    """
    Newton-Raphson on the total potential with Dirichlet elimination, a PSD-projected
    stiffness, Armijo backtracking and Tikhonov escalation for singular systems.
    """

    def __init__(self, body: ElasticBody, load: ExternalLoad, config: Optional[SolverConfig] = None) -> None:
        self.body: ElasticBody = body
        self.load: ExternalLoad = load
        self.config: SolverConfig = config or SolverConfig()
        self.logger: logging.Logger = logging.getLogger(self.__class__.__name__)
        load.check_vertices(body.mesh.n_vertices)
        self.free_dofs, self.fixed_dofs = split_dofs(body.mesh.n_vertices, load.fixed_vertices)
        self.attach_diag: np.ndarray = attachment_stiffness_diagonal(body.mesh.n_vertices, load)

    def _reduced_step(self, K: sparse.csr_matrix, grad: np.ndarray, shift: float) -> Tuple[np.ndarray, float]:
        """
        Solves (K_ff + shift I) d = -grad_f, escalating shift until d is a descent direction.

        Returns:
            Tuple[np.ndarray, float]: Step on the free DOFs and the shift that produced it.
        """
        n = K.shape[0]
        mean_diag = float(np.mean(np.abs(K.diagonal()))) or 1.0
        floor, cap = TIKHONOV_FLOOR * mean_diag, TIKHONOV_CAP * mean_diag
        while True:
            try:
                lu = splu((K + shift * sparse.identity(n, format="csr")).tocsc())
                step = lu.solve(-grad)
                if np.all(np.isfinite(step)) and float(step @ grad) < 0.0:
                    return step, shift
            except RuntimeError as e:
                self.logger.debug(f"[NewtonSolver] Factorization failed at shift {shift:.3e}: {e}")
            shift = floor if shift < floor else 10.0 * shift
            if shift > cap:
                self.logger.error(f"[NewtonSolver] Reduced system stays singular up to shift {cap:.3e}.")
                raise LinearSolveFailure(f"Reduced stiffness is singular even with Tikhonov shift {cap:.3e}.")

    def solve(self, field: Optional[PlasticField], x0: Optional[np.ndarray] = None) -> EquilibriumSolution:
        """
        Finds x with f_int(x) = f_ext(x) on the free DOFs.

        Args:
            field (Optional[PlasticField]): Plastic field (None means identity).
            x0 (Optional[np.ndarray]): Starting 3N positions (defaults to X_init).

        Returns:
            EquilibriumSolution: Converged or budget-exhausted iterate.

        Raises:
            NoSupport: If a free body is loaded by gravity.
            SolverDiverged: If the line search cannot decrease the potential.
            LinearSolveFailure: If the Tikhonov escalation is exhausted.
        """
        body, load, cfg = self.body, self.load, self.config
        if not load.has_support and np.any(load.gravity != 0.0):
            self.logger.error("[NewtonSolver] Free body under gravity has no static equilibrium.")
            raise NoSupport("No fixed vertices or attachments, but gravity is nonzero: no equilibrium exists.")

        x = np.array(body.X_init if x0 is None else x0, dtype=np.float64).reshape(-1)
        if x.size != body.n_dofs:
            raise DimensionMismatch(f"Initial guess has {x.size} coordinates, expected {body.n_dofs}.")
        pts = x.reshape(-1, 3)
        pts[load.fixed_vertices] = load.resolved_fixed_targets(body.X_init)

        tol = cfg.resolve_tol(body)
        free = self.free_dofs
        # Without any support the translation modes are singular from the start.
        relative_shift = 0.0 if load.has_support else TIKHONOV_FLOOR

        log: List[Dict[str, float]] = []
        terms = potential_terms(x, field, load, body)
        energy = sum(terms)
        iterations = 0
        converged = False
        while True:
            grad = net_forces(x, field, load, body)[free]
            residual = float(np.max(np.abs(grad))) if grad.size else 0.0
            if residual <= tol:
                converged = True
            if converged or iterations >= cfg.max_iters:
                log.append({"iter": iterations, "k": 0, "residual_inf": residual, "energy": energy, "step_len": 0.0})
                break

            K = stiffness_matrix(x, field, body.precomp, body.material, psd_project=True)
            K = (K + sparse.diags(self.attach_diag)).tocsr()[free][:, free]
            mean_diag = float(np.mean(np.abs(K.diagonal()))) or 1.0
            direction, _ = self._reduced_step(K, grad, max(cfg.tikhonov0, relative_shift * mean_diag))

            slope = float(direction @ grad)
            slack = 1e-12 * sum(abs(t) for t in terms)
            step, backtracks = 1.0, 0
            while True:
                trial = x.copy()
                trial[free] += step * direction
                trial_terms = potential_terms(trial, field, load, body)
                trial_energy = sum(trial_terms)
                if np.isfinite(trial_energy) and trial_energy <= energy + cfg.ls_c1 * step * slope + slack:
                    break
                step *= cfg.ls_shrink
                backtracks += 1
                if step < cfg.min_step:
                    self.logger.error(
                        f"[NewtonSolver] Line search failed at iteration {iterations} (residual {residual:.3e})."
                    )
                    raise SolverDiverged(
                        f"Line search found no decrease down to step {cfg.min_step:.3e} at iteration {iterations}."
                    )

            step_len = float(step * np.max(np.abs(direction)))
            log.append({"iter": iterations, "k": backtracks, "residual_inf": residual, "energy": energy, "step_len": step_len})
            self.logger.debug(
                f"[NewtonSolver] iter {iterations}: residual {residual:.3e}, energy {energy:.9e}, step {step:.3e}"
            )
            x, terms, energy = trial, trial_terms, trial_energy
            iterations += 1

        level = logging.INFO if converged else logging.WARNING
        self.logger.log(
            level,
            f"[NewtonSolver] {'Converged' if converged else 'Stopped without convergence'} after {iterations} "
            f"iterations, residual {residual:.3e} (tol {tol:.3e}).",
        )
        return EquilibriumSolution(
            x_static=x,
            residual_inf=residual,
            iterations=iterations,
            converged=converged,
            energy=float(energy),
            tol_force=tol,
            free_dofs=free,
            log=log,
        )


def solve_static(
    body: ElasticBody,
    field: Optional[PlasticField],
    load: ExternalLoad,
    x0: Optional[np.ndarray] = None,
    cfg: Optional[SolverConfig] = None,
) -> EquilibriumSolution:
    """
    Static equilibrium of a body with plastic field `field` under `load`.

    Args:
        body (ElasticBody): X_init, material and element data.
        field (Optional[PlasticField]): Plastic field (None means identity).
        load (ExternalLoad): Gravity, Dirichlet vertices and attachments.
        x0 (Optional[np.ndarray]): Warm start (defaults to X_init).
        cfg (Optional[SolverConfig]): Solver settings.

    Returns:
        EquilibriumSolution: The solve result; `converged` tells whether the tolerance was met.
    """
    return NewtonSolver(body, load, cfg).solve(field, x0)

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.modules.adjoint.adjoint import objective_gradient
from src.modules.elasticity.assembly import ElasticBody
from src.modules.equilibrium.load import ExternalLoad
from src.modules.equilibrium.solver import EquilibriumSolution, SolverConfig, solve_static
from src.modules.errors import InfeasibleStart, NumericalError, OptimizerStalled
from src.modules.objective.objective import Objective, ObjectiveSpec, ObjectiveValue
from src.modules.optimizer.settings import OptimizeConfig
from src.modules.optimizer.step_rule import StepRule, StepState, step_rule_for
from src.modules.plastic.plastic_field import PlasticField, identity_field, project_eigenvalues

TRACE_COLUMNS = ["iter", "objective", "loss", "reg", "grad_inf", "newton_iters", "accepted"]

CheckpointFn = Callable[[int, PlasticField], None]


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    objective: float
    loss: float
    reg: float
    grad_inf: float
    newton_iters: int
    accepted: bool


@dataclass
class OptimizeTrace:
    """
    Per-iteration records. Objective values are those of the iterate after the iteration.
    """

    records: List[TraceRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.__dict__ for r in self.records], columns=TRACE_COLUMNS)

    def write_csv(self, path: str) -> None:
        frame = self.to_frame()
        frame["accepted"] = frame["accepted"].astype(int)
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


@dataclass
class OptimizeResult:
    """
    Attributes:
        field (PlasticField): Best field seen.
        trace (OptimizeTrace): Iteration records.
        solution (EquilibriumSolution): Equilibrium at the best field.
        initial (ObjectiveValue): Objective at the identity field.
        final (ObjectiveValue): Objective at the best field.
        stop_reason (str): grad_tol, plateau, max_iters or stalled.
        objective (Objective): The bound objective (frozen targets, effective reg weight).
    """

    field: PlasticField
    trace: OptimizeTrace
    solution: EquilibriumSolution
    initial: ObjectiveValue
    final: ObjectiveValue
    stop_reason: str
    objective: Objective


class PlasticOptimizer:
    """
    First-order descent over the plastic field with adjoint gradients, eigenvalue
    projection after every update and step halving on failed or non-improving trials.
    """

    def __init__(
        self,
        body: ElasticBody,
        load: ExternalLoad,
        spec: ObjectiveSpec,
        config: Optional[OptimizeConfig] = None,
        solver_config: Optional[SolverConfig] = None,
        checkpoint: Optional[CheckpointFn] = None,
    ) -> None:
        self.body: ElasticBody = body
        self.load: ExternalLoad = load
        self.spec: ObjectiveSpec = spec
        self.config: OptimizeConfig = config or OptimizeConfig()
        self.solver_config: Optional[SolverConfig] = solver_config
        self.checkpoint: Optional[CheckpointFn] = checkpoint
        self.rule: StepRule = step_rule_for(self.config)
        self.logger: logging.Logger = logging.getLogger(self.__class__.__name__)

    def _project(self, coeffs: np.ndarray) -> PlasticField:
        return project_eigenvalues(PlasticField(coeffs=coeffs), self.config.sigma_min, self.config.sigma_max)

    def _try(self, field: PlasticField, warm: np.ndarray) -> Optional[EquilibriumSolution]:
        try:
            sol = solve_static(self.body, field, self.load, warm, self.solver_config)
        except NumericalError as e:
            self.logger.debug(f"[PlasticOptimizer] Trial solve failed: {e}")
            return None
        return sol if sol.converged else None

    def _start(self) -> Tuple[PlasticField, EquilibriumSolution, Objective]:
        field = identity_field(self.body.mesh.n_elements)
        try:
            sol = solve_static(self.body, field, self.load, None, self.solver_config)
        except NumericalError as e:
            self.logger.error(f"[PlasticOptimizer] Equilibrium at the identity field failed: {e}")
            raise InfeasibleStart(f"Equilibrium at the identity field failed: {e}") from e
        if not sol.converged:
            self.logger.error("[PlasticOptimizer] Equilibrium at the identity field did not converge.")
            raise InfeasibleStart(f"Equilibrium at the identity field stopped at residual {sol.residual_inf:.3e}.")

        objective = Objective(self.spec, self.body).freeze_target(sol.x_static)
        if self.config.reg_auto_scale:
            loss0, _ = objective.loss(sol.x_static, field)
            objective = objective.with_reg_weight(self.spec.reg_weight * loss0)
        return field, sol, objective

    def run(self) -> OptimizeResult:
        """
        Runs the step loop and returns the best field seen.

        A step that fails every backtracking retry after at least one accepted step ends the
        run with stop_reason "stalled" and keeps the best field instead of raising.

        Returns:
            OptimizeResult: Best field, trace, final equilibrium and stop reason.

        Raises:
            InfeasibleStart: If the identity-field equilibrium cannot be solved.
            OptimizerStalled: If the very first step fails every backtracking retry.
        """
        cfg = self.config
        field, sol, objective = self._start()
        value = objective.evaluate(sol.x_static, field)
        initial = value
        best_field, best_sol, best_value = field, sol, value
        self.logger.info(f"[PlasticOptimizer] Start: objective {value.total:.6e} (loss {value.loss:.6e}).")

        trace = OptimizeTrace()
        history = [value.total]
        state = StepState()
        accepted_any = False
        stop_reason = "max_iters"

        for it in range(cfg.max_iters):
            grad = objective_gradient(sol, field, self.body, self.load, objective)
            grad_inf = float(np.max(np.abs(grad)))
            if grad_inf <= cfg.grad_tol:
                trace.append(TraceRecord(it, value.total, value.loss, value.reg, grad_inf, 0, False))
                stop_reason = "grad_tol"
                break

            delta, next_state = self.rule.delta(grad, state)
            scale = 1.0
            accepted = False
            newton_iters = 0
            for _ in range(cfg.max_backtracks + 1):
                trial_field = self._project(field.coeffs + scale * delta.reshape(-1, 6))
                trial_sol = self._try(trial_field, sol.x_static)
                if trial_sol is not None:
                    newton_iters = trial_sol.iterations
                    trial_value = objective.evaluate(trial_sol.x_static, trial_field)
                    if not cfg.backtrack_on_failure or trial_value.total <= value.total:
                        accepted = True
                        break
                if not cfg.backtrack_on_failure:
                    break
                scale *= 0.5

            if not accepted:
                trace.append(TraceRecord(it, value.total, value.loss, value.reg, grad_inf, newton_iters, False))
                if not accepted_any:
                    self.logger.error("[PlasticOptimizer] First step failed every backtracking retry.")
                    raise OptimizerStalled(f"No acceptable step after {cfg.max_backtracks} halvings at iteration {it}.")
                self.logger.warning(f"[PlasticOptimizer] Stalled at iteration {it}; keeping the best field.")
                stop_reason = "stalled"
                break

            accepted_any = True
            field, sol, value, state = trial_field, trial_sol, trial_value, next_state
            trace.append(TraceRecord(it, value.total, value.loss, value.reg, grad_inf, newton_iters, True))
            if value.total < best_value.total:
                best_field, best_sol, best_value = field, sol, value

            if (it + 1) % cfg.log_every == 0:
                self.logger.info(
                    f"[PlasticOptimizer] iter {it + 1}: objective {value.total:.6e}, |grad| {grad_inf:.3e}"
                )
            if self.checkpoint is not None and cfg.checkpoint_every and (it + 1) % cfg.checkpoint_every == 0:
                self.checkpoint(it + 1, best_field)

            history.append(value.total)
            w = cfg.plateau_window
            if len(history) > w:
                reference = history[-w - 1]
                if reference - history[-1] <= cfg.obj_rel_tol * max(abs(reference), np.finfo(float).tiny):
                    stop_reason = "plateau"
                    break

        self.logger.info(
            f"[PlasticOptimizer] Stopped ({stop_reason}) after {len(trace)} iterations: "
            f"objective {initial.total:.6e} -> {best_value.total:.6e}."
        )
        return OptimizeResult(
            field=best_field,
            trace=trace,
            solution=best_sol,
            initial=initial,
            final=best_value,
            stop_reason=stop_reason,
            objective=objective,
        )


def optimize(
    body: ElasticBody,
    load: ExternalLoad,
    spec: ObjectiveSpec,
    cfg: Optional[OptimizeConfig] = None,
    solver_cfg: Optional[SolverConfig] = None,
    checkpoint: Optional[CheckpointFn] = None,
) -> OptimizeResult:
    """
    Optimizes the plastic field so the static shape minimizes the objective.

    Starts from the identity field; each equilibrium is warm-started from the previous one.

    Returns:
        OptimizeResult: Best field, trace and final equilibrium.
    """
    return PlasticOptimizer(body, load, spec, cfg, solver_cfg, checkpoint).run()

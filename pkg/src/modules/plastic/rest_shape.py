import logging
from typing import Optional, Tuple

import numpy as np

from src.modules.elasticity.assembly import ElasticBody
from src.modules.equilibrium.load import zero_load
from src.modules.equilibrium.solver import NewtonSolver, SolverConfig
from src.modules.errors import SolverDiverged
from src.modules.plastic.plastic_field import PlasticField

logger = logging.getLogger(__name__)

# Zero-load solves are held to mu * V_total / L times this factor.
REST_TOL_FACTOR: float = 1e-10


def rest_tolerance(body: ElasticBody) -> float:
    volume = float(body.precomp.volume_init.sum())
    return REST_TOL_FACTOR * body.material.mu * volume / body.mesh.bbox_diagonal()


def rest_shape(
    field: Optional[PlasticField],
    body: ElasticBody,
    cfg: Optional[SolverConfig] = None,
) -> Tuple[np.ndarray, float]:
    """
    Force-free configuration of the body once the plastic field is applied.

    Solves f_int(x) = 0 starting from X_init, then translates the result so its vertex
    centroid coincides with the centroid of X_init.

    Args:
        field (Optional[PlasticField]): Projected plastic field (None means identity).
        body (ElasticBody): X_init, material and element data.
        cfg (Optional[SolverConfig]): Solver settings; tol_force defaults to the rest tolerance.

    Returns:
        Tuple[np.ndarray, float]: 3N rest positions X_rest and the achieved residual norm.

    Raises:
        SolverDiverged: If Newton does not converge within its budget.
    """
    cfg = cfg or SolverConfig()
    if cfg.tol_force is None:
        cfg = cfg.model_copy(update={"tol_force": rest_tolerance(body)})

    solution = NewtonSolver(body, zero_load(), cfg).solve(field, body.X_init)
    if not solution.converged:
        logger.error(f"Rest-shape solve stopped at residual {solution.residual_inf:.3e} after {solution.iterations} iterations.")
        raise SolverDiverged(
            f"Rest-shape solve did not reach {cfg.tol_force:.3e} within {cfg.max_iters} iterations."
        )

    pts = solution.x_static.reshape(-1, 3)
    pts += body.mesh.positions.mean(axis=0) - pts.mean(axis=0)
    return pts.reshape(-1), solution.residual_inf

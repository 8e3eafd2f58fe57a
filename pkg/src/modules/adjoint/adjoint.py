import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from src.modules.elasticity.assembly import ElasticBody, stiffness_matrix
from src.modules.equilibrium.load import ExternalLoad, attachment_stiffness_diagonal
from src.modules.equilibrium.solver import EquilibriumSolution, SolverConfig, solve_static
from src.modules.errors import LinearSolveFailure, NonFiniteGradient, NotConverged
from src.modules.objective.objective import Objective
from src.modules.plastic.jacobian import dforce_dFp
from src.modules.plastic.plastic_field import PlasticField

logger = logging.getLogger(__name__)

FD_ORACLE_MAX_PARAMS: int = 600


@dataclass(eq=False)
class AdjointWorkspace:
    """
    Linearization of the equilibrium at one converged solution.

    Attributes:
        stiffness_exact (sparse.csr_matrix): Unprojected d f_net / dx reduced to the free DOFs,
            attachment springs included.
        dfdp (sparse.csr_matrix): 3N x 6Z Jacobian d f_net / d F_p.
        free_dofs (np.ndarray): Free DOF indices.
        adjoint_vec (Optional[np.ndarray]): 3N solution of K^T lambda = dL/dx (zero on fixed DOFs),
            set by contract_loss_through_solver.
    """

    stiffness_exact: sparse.csr_matrix
    dfdp: sparse.csr_matrix
    free_dofs: np.ndarray
    adjoint_vec: Optional[np.ndarray] = None
    _lu: Optional[object] = field(default=None, repr=False)

    @classmethod
    def assemble(
        cls, sol: EquilibriumSolution, field: Optional[PlasticField], body: ElasticBody, load: ExternalLoad
    ) -> "AdjointWorkspace":
        x = sol.x_static
        K = stiffness_matrix(x, field, body.precomp, body.material, psd_project=False)
        K = (K + sparse.diags(attachment_stiffness_diagonal(body.mesh.n_vertices, load))).tocsr()
        free = sol.free_dofs
        return cls(
            stiffness_exact=K[free][:, free].tocsr(),
            dfdp=dforce_dFp(x, field, body.precomp, body.material, load.gravity),
            free_dofs=free,
        )

    def solve_transposed(self, rhs: np.ndarray) -> np.ndarray:
        """Solves K^T y = rhs on the free DOFs."""
        if self._lu is None:
            try:
                self._lu = splu(self.stiffness_exact.T.tocsc())
            except RuntimeError as e:
                logger.error(f"Equilibrium Jacobian is singular: {e}")
                raise LinearSolveFailure(f"Equilibrium Jacobian is singular: {e}")
        y = self._lu.solve(rhs)
        if not np.all(np.isfinite(y)):
            logger.error("Adjoint solve produced non-finite values.")
            raise LinearSolveFailure("Adjoint solve produced non-finite values.")
        return y


def contract_loss_through_solver(dLdx: np.ndarray, workspace: AdjointWorkspace) -> np.ndarray:
    """
    -(K^-T dL/dx)^T d f_net / d F_p.

    Args:
        dLdx (np.ndarray): 3N loss gradient at the equilibrium.
        workspace (AdjointWorkspace): Linearization at that equilibrium.

    Returns:
        np.ndarray: 6Z contribution of the loss to dJ/dF_p.

    Raises:
        LinearSolveFailure: If the reduced Jacobian cannot be factorized.
    """
    dLdx = np.asarray(dLdx, dtype=np.float64).reshape(-1)
    n_params = workspace.dfdp.shape[1]
    rhs = dLdx[workspace.free_dofs]
    adjoint = np.zeros(dLdx.size)
    if not np.any(rhs):
        workspace.adjoint_vec = adjoint
        return np.zeros(n_params)

    lam = workspace.solve_transposed(rhs)
    curvature = float(lam @ rhs)
    if curvature < 0.0:
        logger.warning(
            f"Equilibrium Jacobian is indefinite along the adjoint direction (lambda.K.lambda = {curvature:.3e}); "
            "the equilibrium may be unstable."
        )
    adjoint[workspace.free_dofs] = lam
    workspace.adjoint_vec = adjoint
    return -np.asarray(workspace.dfdp[workspace.free_dofs].T @ lam).reshape(-1)


def objective_gradient(
    sol: EquilibriumSolution,
    field: PlasticField,
    body: ElasticBody,
    load: ExternalLoad,
    objective: Objective,
) -> np.ndarray:
    """
    dJ/dF_p = -(dL/dx) K^-1 d f_net/d F_p + explicit dL/dF_p + dL_reg/dF_p.

    Args:
        sol (EquilibriumSolution): Converged equilibrium at field.
        field (PlasticField): Plastic field the equilibrium was solved for.
        body (ElasticBody): X_init, material and element data.
        load (ExternalLoad): Load of the equilibrium.
        objective (Objective): Bound objective (stand targets already frozen).

    Returns:
        np.ndarray: 6Z gradient.

    Raises:
        NotConverged: If sol does not carry the residual certificate.
        LinearSolveFailure: If the equilibrium Jacobian is singular.
        NonFiniteGradient: If the result contains NaN or inf.
    """
    if not sol.certified:
        logger.error(f"Gradient requested at an unconverged equilibrium (residual {sol.residual_inf:.3e}).")
        raise NotConverged(
            f"Equilibrium residual {sol.residual_inf:.3e} exceeds tolerance {sol.tol_force:.3e}."
        )
    _, dLdx = objective.loss(sol.x_static, field)
    workspace = AdjointWorkspace.assemble(sol, field, body, load)
    grad = contract_loss_through_solver(dLdx, workspace)
    grad += objective.loss_field_gradient(sol.x_static, field)
    _, reg_grad = objective.regularizer(field)
    grad += reg_grad
    if not np.all(np.isfinite(grad)):
        logger.error("Objective gradient contains non-finite entries.")
        raise NonFiniteGradient("Objective gradient contains NaN or infinite entries.")
    return grad


def objective_value(
    field: PlasticField,
    body: ElasticBody,
    load: ExternalLoad,
    objective: Objective,
    x0: Optional[np.ndarray] = None,
    cfg: Optional[SolverConfig] = None,
) -> float:
    """J(F_p): solve the equilibrium, then evaluate loss plus regularizer."""
    sol = solve_static(body, field, load, x0, cfg)
    if not sol.converged:
        raise NotConverged(f"Equilibrium did not converge (residual {sol.residual_inf:.3e}).")
    return objective.evaluate(sol.x_static, field).total


def fd_gradient_oracle(
    field: PlasticField,
    body: ElasticBody,
    load: ExternalLoad,
    objective: Objective,
    h: float = 1e-5,
    x0: Optional[np.ndarray] = None,
    cfg: Optional[SolverConfig] = None,
) -> np.ndarray:
    """
    Central differences of J over every plastic coefficient, re-solving the equilibrium
    for each perturbation from a warm start.

    Args:
        x0 (Optional[np.ndarray]): Warm start for the perturbed solves; defaults to the
            equilibrium at field.

    Returns:
        np.ndarray: 6Z finite-difference gradient.
    """
    values = field.flat()
    if values.size > FD_ORACLE_MAX_PARAMS:
        raise ValueError(f"Finite-difference oracle is limited to {FD_ORACLE_MAX_PARAMS} parameters, got {values.size}.")
    if x0 is None:
        x0 = solve_static(body, field, load, None, cfg).x_static

    grad = np.zeros(values.size)
    for k in range(values.size):
        plus, minus = values.copy(), values.copy()
        plus[k] += h
        minus[k] -= h
        j_plus = objective_value(PlasticField.from_flat(plus), body, load, objective, x0, cfg)
        j_minus = objective_value(PlasticField.from_flat(minus), body, load, objective, x0, cfg)
        grad[k] = (j_plus - j_minus) / (2.0 * h)
    return grad

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from src.modules.elasticity.assembly import ElasticBody, plastic_kinematics
from src.modules.errors import DimensionMismatch
from src.modules.objective.laplacian import ElementLaplacian, biharmonic_reg, element_laplacian
from src.modules.objective.losses import auto_c_hat, matching_loss, stability_loss, stability_mass_sensitivity
from src.modules.plastic.plastic_field import SYM_BASIS, PlasticField, element_masses

MATCH = "match"
STAND = "stand"


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    """
    Task loss plus regularization weight.

    Attributes:
        kind (str): `match` or `stand`.
        X_target (Optional[np.ndarray]): 3N target positions for `match`.
        c_hat (Optional[np.ndarray]): Center-of-mass target for `stand`; None derives it
            from the support polygon when optimization starts.
        reg_weight (float): Weight of the smoothness regularizer, >= 0.
        contact_tol (Optional[float]): Contact band used to derive c_hat.
    """

    kind: str
    X_target: Optional[np.ndarray] = None
    c_hat: Optional[np.ndarray] = None
    reg_weight: float = 0.0
    contact_tol: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in (MATCH, STAND):
            raise ValueError(f"Objective kind must be '{MATCH}' or '{STAND}', got '{self.kind}'.")
        if self.reg_weight < 0.0:
            raise ValueError(f"reg_weight must be non-negative, got {self.reg_weight}.")
        if self.kind == MATCH:
            if self.X_target is None:
                raise ValueError("A match objective needs X_target.")
            object.__setattr__(self, "X_target", np.asarray(self.X_target, dtype=np.float64).reshape(-1))
        if self.c_hat is not None:
            c_hat = np.asarray(self.c_hat, dtype=np.float64).reshape(-1)
            if c_hat.shape != (2,):
                raise DimensionMismatch(f"c_hat must be a 2-vector, got {c_hat.shape}.")
            object.__setattr__(self, "c_hat", c_hat)

    @classmethod
    def match(cls, X_target: np.ndarray, reg_weight: float = 0.0) -> "ObjectiveSpec":
        return cls(kind=MATCH, X_target=X_target, reg_weight=reg_weight)

    @classmethod
    def stand(
        cls, c_hat: Optional[Sequence[float]] = None, reg_weight: float = 0.0, contact_tol: Optional[float] = None
    ) -> "ObjectiveSpec":
        return cls(kind=STAND, c_hat=None if c_hat is None else np.asarray(c_hat), reg_weight=reg_weight, contact_tol=contact_tol)


@dataclass(frozen=True)
class ObjectiveValue:
    total: float
    loss: float
    reg: float


class Objective:
    """
    An ObjectiveSpec bound to a body: loss and regularizer values and their partial gradients.
    """

    def __init__(self, spec: ObjectiveSpec, body: ElasticBody, laplacian: Optional[ElementLaplacian] = None) -> None:
        if spec.kind == MATCH and spec.X_target.size != body.n_dofs:
            raise DimensionMismatch(f"X_target has {spec.X_target.size} coordinates, body has {body.n_dofs}.")
        self.spec: ObjectiveSpec = spec
        self.body: ElasticBody = body
        self.laplacian: ElementLaplacian = laplacian or element_laplacian(body.mesh)
        self.reg_weight: float = spec.reg_weight
        self.logger: logging.Logger = logging.getLogger(self.__class__.__name__)

    def freeze_target(self, x_static: np.ndarray) -> "Objective":
        """Fixes an automatic center-of-mass target from the given static shape."""
        if self.spec.kind != STAND or self.spec.c_hat is not None:
            return self
        c_hat = auto_c_hat(self.body.mesh, x_static, self.spec.contact_tol)
        self.logger.info(f"[Objective] Center-of-mass target frozen at ({c_hat[0]:.6g}, {c_hat[1]:.6g}).")
        frozen = Objective(replace(self.spec, c_hat=c_hat), self.body, self.laplacian)
        frozen.reg_weight = self.reg_weight
        return frozen

    def with_reg_weight(self, weight: float) -> "Objective":
        scaled = Objective(self.spec, self.body, self.laplacian)
        scaled.reg_weight = float(weight)
        return scaled

    def _c_hat(self) -> np.ndarray:
        if self.spec.c_hat is None:
            raise ValueError("Stand objective has no c_hat yet; call freeze_target first.")
        return self.spec.c_hat

    def loss(self, x_static: np.ndarray, field: Optional[PlasticField]) -> Tuple[float, np.ndarray]:
        """(value, 3N gradient) of the task loss."""
        if self.spec.kind == MATCH:
            return matching_loss(x_static, self.spec.X_target)
        masses = element_masses(field, self.body.precomp, self.body.material)
        return stability_loss(x_static, self.body.mesh, masses, self._c_hat())

    def loss_field_gradient(self, x_static: np.ndarray, field: Optional[PlasticField]) -> np.ndarray:
        """
        6Z gradient of the task loss through its explicit field dependence at fixed positions.

        Only the stability loss has one: element masses scale with det(F_p).
        """
        z = self.body.precomp.n_elements
        if self.spec.kind == MATCH:
            return np.zeros(6 * z)
        mat = self.body.material
        masses = element_masses(field, self.body.precomp, mat)
        dL_dm = stability_mass_sensitivity(x_static, self.body.mesh, masses, self._c_hat())
        kin = plastic_kinematics(field, self.body.precomp)
        dm_da = mat.density_kg_m3 * kin.volume[:, None] * np.einsum("zij,cji->zc", kin.A_inv, SYM_BASIS)
        return (dL_dm[:, None] * dm_da).reshape(-1)

    def regularizer(self, field: PlasticField) -> Tuple[float, np.ndarray]:
        return biharmonic_reg(field, self.laplacian, self.reg_weight)

    def evaluate(self, x_static: np.ndarray, field: PlasticField) -> ObjectiveValue:
        loss, _ = self.loss(x_static, field)
        reg, _ = self.regularizer(field)
        return ObjectiveValue(total=loss + reg, loss=loss, reg=reg)

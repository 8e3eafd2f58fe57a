from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.modules.plastic.plastic_field import DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN


class OptimizeConfig(BaseModel):
    """
    Outer-loop settings for the plastic-field optimization.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    method: Literal["gd", "adam"] = "adam"
    step_size: float = Field(1e-2, gt=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(1e-8, gt=0.0)
    max_iters: int = Field(1000, ge=1)
    grad_tol: float = Field(0.0, ge=0.0)
    obj_rel_tol: float = Field(1e-8, ge=0.0)
    plateau_window: int = Field(10, ge=1)
    sigma_min: float = Field(DEFAULT_SIGMA_MIN, gt=0.0)
    sigma_max: float = Field(DEFAULT_SIGMA_MAX, gt=0.0)
    backtrack_on_failure: bool = True
    max_backtracks: int = Field(20, ge=0)
    reg_auto_scale: bool = True
    checkpoint_every: int = Field(0, ge=0)
    log_every: int = Field(10, ge=1)

    @model_validator(mode="after")
    def _check_bounds(self) -> "OptimizeConfig":
        if self.sigma_min > self.sigma_max:
            raise ValueError(f"sigma_min {self.sigma_min} exceeds sigma_max {self.sigma_max}.")
        return self

from typing import Dict

from pydantic import BaseModel, ConfigDict, Field


class MaterialParams(BaseModel):
    """
    Isotropic material: Young's modulus, Poisson's ratio and density, with the derived
    Lame coefficients used by the constitutive model.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    young_pa: float = Field(5e4, gt=0.0)
    poisson: float = Field(0.45, ge=0.0, lt=0.5)
    density_kg_m3: float = Field(1000.0, gt=0.0)

    @property
    def mu(self) -> float:
        return self.young_pa / (2.0 * (1.0 + self.poisson))

    @property
    def lam(self) -> float:
        return self.young_pa * self.poisson / ((1.0 + self.poisson) * (1.0 - 2.0 * self.poisson))

    @property
    def lam_volumetric(self) -> float:
        """
        Stiffness of the (J - alpha)^2 term. Falls back to mu when lambda is 0 so the
        rest state stays stress free.
        """
        return self.lam if self.lam > 0.0 else self.mu

    @property
    def alpha(self) -> float:
        return 1.0 + self.mu / self.lam_volumetric

    @classmethod
    def from_lame(cls, mu: float, lam: float, density_kg_m3: float = 1000.0) -> "MaterialParams":
        """Inverse of the Lame conversion; handy for tests written in terms of mu and lambda."""
        poisson = lam / (2.0 * (lam + mu))
        young = mu * (3.0 * lam + 2.0 * mu) / (lam + mu)
        return cls(young_pa=young, poisson=poisson, density_kg_m3=density_kg_m3)


MATERIAL_PRESETS: Dict[str, MaterialParams] = {
    "soft": MaterialParams(young_pa=5e4, poisson=0.45, density_kg_m3=1000.0),
    "stiff": MaterialParams(young_pa=5e5, poisson=0.45, density_kg_m3=1000.0),
}


def material_preset(name: str) -> MaterialParams:
    if name not in MATERIAL_PRESETS:
        raise ValueError(f"Unknown material preset '{name}'. Expected one of {sorted(MATERIAL_PRESETS)}.")
    return MATERIAL_PRESETS[name]

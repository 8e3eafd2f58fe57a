import logging
import os
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.modules.dynamics.simulator import DynamicsConfig
from src.modules.elasticity.material import MATERIAL_PRESETS, MaterialParams
from src.modules.equilibrium.load import STANDARD_GRAVITY, ExternalLoad
from src.modules.equilibrium.solver import SolverConfig
from src.modules.errors import ConfigError
from src.modules.mesh.reader import MESH_READERS, guess_format
from src.modules.mesh.tet_mesh import TetMesh, select_vertices
from src.modules.metrics.metrics import MetricsConfig
from src.modules.objective.objective import ObjectiveSpec
from src.modules.optimizer.settings import OptimizeConfig
from utils.dynamic_loader import load_config, locate_config_line

logger = logging.getLogger(__name__)

Selector = Union[str, List[int]]


def _check_selector(value: Selector) -> Selector:
    if isinstance(value, str):
        text = value.strip().lower()
        if text == "none":
            return text
        if text.startswith("bottom:"):
            try:
                tol = float(text.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"'{value}' has no numeric tolerance; expected 'bottom:<tol>'.")
            if tol < 0.0:
                raise ValueError(f"Selector tolerance must be non-negative, got {tol}.")
            return text
        raise ValueError(f"Unknown selector '{value}'. Expected 'none', 'bottom:<tol>' or a list of indices.")
    return value


class _Block(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class MaterialBlock(_Block):
    preset: Optional[Literal["soft", "stiff"]] = None
    young_pa: Optional[float] = None
    poisson: Optional[float] = None
    density_kg_m3: Optional[float] = None

    @model_validator(mode="after")
    def _check_params(self) -> "MaterialBlock":
        try:
            self.to_params()
        except ValidationError as e:
            raise ValueError("; ".join(f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors()))
        return self

    def to_params(self) -> MaterialParams:
        base = MATERIAL_PRESETS[self.preset] if self.preset else MaterialParams()
        overrides = self.model_dump(exclude={"preset"}, exclude_none=True)
        return MaterialParams(**{**base.model_dump(), **overrides})


class AttachmentBlock(_Block):
    """Springs on the selected vertices, anchored at their initial positions plus offset_m."""

    selector: Selector
    k_n_m: float = Field(gt=0.0)
    offset_m: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    check_selector = field_validator("selector")(_check_selector)


class LoadBlock(_Block):
    gravity_m_s2: Tuple[float, float, float] = STANDARD_GRAVITY
    fixed_selector: Selector = "none"
    attachments: List[AttachmentBlock] = Field(default_factory=list)

    check_fixed = field_validator("fixed_selector")(_check_selector)

    def build(self, mesh: TetMesh, extra: Optional[List[AttachmentBlock]] = None) -> ExternalLoad:
        """Resolves the selectors against a mesh."""
        springs = []
        for block in list(self.attachments) + list(extra or []):
            vertices = select_vertices(mesh, block.selector)
            targets = mesh.positions[vertices] + np.asarray(block.offset_m)
            springs.extend((int(v), block.k_n_m, t) for v, t in zip(vertices, targets))
        return ExternalLoad.build(
            gravity=self.gravity_m_s2,
            fixed_vertices=select_vertices(mesh, self.fixed_selector),
            attachments=springs,
        )


class ObjectiveBlock(_Block):
    kind: Literal["match", "stand"]
    reg_weight: float = Field(1e-2, ge=0.0)
    c_hat_m: Optional[Tuple[float, float]] = None
    contact_tol_m: Optional[float] = Field(None, gt=0.0)

    def to_spec(self, mesh: TetMesh) -> ObjectiveSpec:
        """Matching targets the input shape; standing derives c_hat when none is given."""
        if self.kind == "match":
            return ObjectiveSpec.match(mesh.x.copy(), reg_weight=self.reg_weight)
        return ObjectiveSpec.stand(self.c_hat_m, reg_weight=self.reg_weight, contact_tol=self.contact_tol_m)


class MetricsBlock(MetricsConfig):
    pair_mesh_path: Optional[str] = None

    def to_config(self) -> MetricsConfig:
        return MetricsConfig(**self.model_dump(exclude={"pair_mesh_path"}))


class DynamicsBlock(DynamicsConfig):
    duration_s: float = Field(1.0, gt=0.0)
    frame_stride: int = Field(1, ge=1)
    attach_selector: Optional[Selector] = None
    start: Literal["rest", "equilibrium"] = "rest"

    @field_validator("attach_selector")
    @classmethod
    def _check_attach(cls, value: Optional[Selector]) -> Optional[Selector]:
        return None if value is None else _check_selector(value)

    def to_config(self) -> DynamicsConfig:
        return DynamicsConfig(**self.model_dump(exclude={"duration_s", "frame_stride", "attach_selector", "start"}))

    def attachments(self) -> List[AttachmentBlock]:
        if self.attach_selector is None or self.k_attach_n_m == 0.0:
            return []
        return [AttachmentBlock(selector=self.attach_selector, k_n_m=self.k_attach_n_m)]


class RunConfig(_Block):
    """
    One pipeline run. Relative mesh paths are resolved against the config file's directory.
    """

    mesh_path: str
    format: Optional[Literal["tet_ascii", "medit_mesh"]] = None
    material: MaterialBlock = Field(default_factory=MaterialBlock)
    load: LoadBlock = Field(default_factory=LoadBlock)
    objective: Optional[ObjectiveBlock] = None
    solver: SolverConfig = Field(default_factory=SolverConfig)
    optimizer: OptimizeConfig = Field(default_factory=OptimizeConfig)
    metrics: MetricsBlock = Field(default_factory=MetricsBlock)
    dynamics: Optional[DynamicsBlock] = None
    output_dir: str = "output"
    source_path: Optional[str] = Field(None, exclude=True)

    def mesh_format(self) -> str:
        return self.format or guess_format(self.mesh_path)

    def resolve(self, path: str) -> str:
        if os.path.isabs(path) or self.source_path is None:
            return path
        return os.path.join(os.path.dirname(os.path.abspath(self.source_path)), path)

    def echo(self) -> Dict[str, Any]:
        """JSON-ready copy of the settings for provenance."""
        return self.model_dump(mode="json")


def _format_errors(error: ValidationError, path: str) -> str:
    messages = []
    for item in error.errors():
        loc = [part for part in item["loc"] if not isinstance(part, str) or not part.startswith("function-")]
        line = locate_config_line(path, loc)
        where = f"{path}:{line}" if line is not None else path
        dotted = ".".join(str(part) for part in loc) or "<root>"
        messages.append(f"{where}: {dotted}: {item['msg']}")
    return "\n".join(messages)


def parse_run_config(data: Dict[str, Any], path: Optional[str] = None) -> RunConfig:
    """
    Validates a parsed config dictionary.

    Raises:
        ConfigError: With one `<file>:<line>: <key path>: <problem>` line per violation.
    """
    try:
        config = RunConfig(**data)
    except ValidationError as e:
        message = _format_errors(e, path or "<config>")
        logger.error(f"Invalid run configuration:\n{message}")
        raise ConfigError(message) from e
    return config.model_copy(update={"source_path": path})


def load_run_config(path: str) -> RunConfig:
    """
    Reads and validates a YAML or JSON run config.

    Raises:
        FileNotFoundError: If the file does not exist.
        ConfigError: If the file cannot be parsed or violates the schema.
    """
    try:
        data = load_config(path)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return parse_run_config(data, path)


def known_formats() -> List[str]:
    return sorted(MESH_READERS)

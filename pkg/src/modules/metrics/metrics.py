import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.integrate import trapezoid

from src.modules.elasticity.assembly import ElasticBody, StressField, stress_field
from src.modules.elasticity.material import MaterialParams
from src.modules.equilibrium.load import ExternalLoad
from src.modules.equilibrium.solver import SolverConfig, solve_static
from src.modules.errors import DimensionMismatch, PhysCompatError
from src.modules.mesh.tet_mesh import (
    TetMesh,
    center_of_mass,
    connected_components,
    largest_component,
    largest_component_elements,
    normalize_unit_cube,
    point_in_convex_polygon,
    support_polygon,
)
from src.modules.metrics.silhouette import MIN_RESOLUTION, silhouette_loss
from src.modules.plastic.plastic_field import PlasticField, element_masses

logger = logging.getLogger(__name__)

FRACTURE_COLUMNS = ["threshold_pa", "fraction"]
DEFAULT_THRESHOLDS_PA: np.ndarray = np.logspace(1.0, 6.0, 64)

LoadSource = Union[ExternalLoad, Callable[[TetMesh], ExternalLoad]]


class MetricsConfig(BaseModel):
    """
    Settings of one metrics evaluation.

    thresholds_pa=None uses 64 log-spaced thresholds from 10 Pa to 1 MPa.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    axis: Literal["+x", "-x", "+y", "-y", "+z", "-z"] = "+y"
    resolution: int = Field(256, ge=MIN_RESOLUTION)
    thresholds_pa: Optional[List[float]] = None
    volume_weighted: bool = False
    margin_m: float = Field(0.0, ge=0.0)
    contact_tol_m: Optional[float] = Field(None, gt=0.0)
    largest_component: bool = False
    normalize_unit_cube: bool = False
    require_converged: bool = False

    @field_validator("thresholds_pa")
    @classmethod
    def _increasing(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None and (len(value) == 0 or np.any(np.diff(value) <= 0.0)):
            raise ValueError("thresholds_pa must be a non-empty, strictly increasing list.")
        return value

    def resolved_thresholds(self) -> np.ndarray:
        if self.thresholds_pa is None:
            return DEFAULT_THRESHOLDS_PA.copy()
        return np.asarray(self.thresholds_pa, dtype=np.float64)


@dataclass(eq=False)
class MetricsReport:
    """
    Physical-compatibility metrics of one shape.

    A failed report carries the component count, the failure message and, when a solve ran,
    its summary; every other metric is None.
    """

    cc_count: int
    n_elements: int
    mean_stress_pa: Optional[float] = None
    standable: Optional[bool] = None
    silhouette_loss: Optional[float] = None
    fracture_curve: List[Tuple[float, float]] = field(default_factory=list)
    fracture_auc: Optional[float] = None
    solver: Optional[Dict[str, Any]] = None
    failed: bool = False
    error: Optional[str] = None
    von_mises: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cc": self.cc_count,
            "mean_stress_pa": self.mean_stress_pa,
            "standable": self.standable,
            "silhouette_loss": self.silhouette_loss,
            "fracture_auc": self.fracture_auc,
            "fracture_curve": [[t, f] for t, f in self.fracture_curve],
            "solver": self.solver,
            "failed": self.failed,
            "error": self.error,
        }

    def fracture_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.fracture_curve, columns=FRACTURE_COLUMNS)

    def write_csv(self, path: str) -> None:
        self.fracture_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def mean_stress(
    stress: StressField, element_volumes: Optional[Sequence[float]] = None, volume_weighted: bool = False
) -> float:
    """
    Average von Mises stress over all elements in Pa.

    Args:
        stress (StressField): Stress at an equilibrium.
        element_volumes (Optional[Sequence[float]]): (Z,) weights for the volume-weighted mean.
        volume_weighted (bool): Weight each element by its volume instead of counting it once.
    """
    if volume_weighted:
        if element_volumes is None:
            raise ValueError("Volume-weighted mean stress needs element volumes.")
        return float(np.average(stress.von_mises, weights=np.asarray(element_volumes, dtype=np.float64)))
    return float(np.mean(stress.von_mises))


def support_margin(
    mesh: TetMesh, x_static: np.ndarray, per_element_mass: np.ndarray, contact_tol: Optional[float] = None
) -> float:
    """
    Signed distance in meters from the projected center of mass to the support polygon boundary,
    positive inside. Degenerate polygons give -inf.
    """
    polygon = support_polygon(mesh, x_static, contact_tol)
    if polygon.degenerate:
        return float("-inf")
    com = center_of_mass(mesh, per_element_mass, x_static)[:2]
    a = polygon.hull
    edge = np.roll(a, -1, axis=0) - a
    cross = edge[:, 0] * (com[1] - a[:, 1]) - edge[:, 1] * (com[0] - a[:, 0])
    return float(np.min(cross / np.linalg.norm(edge, axis=1)))


def standability(
    mesh: TetMesh,
    x_static: np.ndarray,
    per_element_mass: np.ndarray,
    contact_tol: Optional[float] = None,
    margin: float = 0.0,
) -> bool:
    """
    Whether the projected center of mass lies inside the support polygon shrunk by margin.

    Boundary points count as inside; a point or segment support is never standable.

    Raises:
        ZeroMass: If the total mass is zero.
    """
    polygon = support_polygon(mesh, x_static, contact_tol)
    if polygon.degenerate:
        logger.debug(f"Support polygon is degenerate ({polygon.hull.shape[0]} hull points).")
        return False
    com = center_of_mass(mesh, per_element_mass, x_static)[:2]
    return point_in_convex_polygon(com, polygon.hull, margin)


def fracture_curve(stress: StressField, thresholds: Sequence[float]) -> List[Tuple[float, float]]:
    """
    Fraction of elements whose von Mises stress exceeds each threshold.

    Raises:
        ValueError: If thresholds are not strictly increasing.
    """
    t = np.asarray(thresholds, dtype=np.float64).reshape(-1)
    if t.size == 0 or np.any(np.diff(t) <= 0.0):
        raise ValueError("Fracture thresholds must be a non-empty, strictly increasing sequence.")
    vm = np.sort(stress.von_mises)
    exceeding = vm.size - np.searchsorted(vm, t, side="right")
    fractions = exceeding / vm.size
    return [(float(a), float(b)) for a, b in zip(t, fractions)]


def fracture_auc(curve: Sequence[Tuple[float, float]]) -> float:
    """Trapezoid-rule area under the fracture curve over its thresholds (Pa)."""
    if len(curve) < 2:
        return 0.0
    arr = np.asarray(curve, dtype=np.float64)
    return float(trapezoid(arr[:, 1], arr[:, 0]))


def preprocess(
    mesh: TetMesh, plastic: Optional[PlasticField], cfg: MetricsConfig
) -> Tuple[TetMesh, Optional[PlasticField]]:
    """Applies the largest-component and unit-cube flags, keeping the field rows aligned."""
    if cfg.largest_component:
        keep = largest_component_elements(mesh)
        mesh = largest_component(mesh)
        if plastic is not None and not keep.all():
            plastic = PlasticField(coeffs=plastic.coeffs[keep])
    if cfg.normalize_unit_cube:
        mesh = normalize_unit_cube(mesh)
    return mesh, plastic


def _plastic_volumes(body: ElasticBody, plastic: Optional[PlasticField]) -> np.ndarray:
    det = np.ones(body.mesh.n_elements) if plastic is None else plastic.determinants()
    return body.precomp.volume_init * det


def evaluate_all(
    mesh: TetMesh,
    plastic: Optional[PlasticField],
    material: MaterialParams,
    load: LoadSource,
    cfg: Optional[MetricsConfig] = None,
    solver_cfg: Optional[SolverConfig] = None,
    target: Optional[TetMesh] = None,
) -> MetricsReport:
    """
    Solves the static equilibrium and computes every metric.

    Failures are recorded in the report instead of raised, so batches keep going.

    Args:
        mesh (TetMesh): Shape to evaluate.
        plastic (Optional[PlasticField]): Plastic field (None means identity).
        material (MaterialParams): Material of the shape.
        load (LoadSource): Load, or a callable building it from the preprocessed mesh.
        cfg (Optional[MetricsConfig]): Metric settings.
        solver_cfg (Optional[SolverConfig]): Newton settings.
        target (Optional[TetMesh]): Silhouette reference (defaults to the input shape).

    Returns:
        MetricsReport: All metrics, or a failed report with the component count.
    """
    cfg = cfg or MetricsConfig()
    cc_count, _ = connected_components(mesh)
    report = MetricsReport(cc_count=cc_count, n_elements=mesh.n_elements)
    try:
        work_mesh, work_field = preprocess(mesh, plastic, cfg)
        if work_field is not None and work_field.n_elements != work_mesh.n_elements:
            raise DimensionMismatch(
                f"Plastic field has {work_field.n_elements} elements, mesh has {work_mesh.n_elements}."
            )
        work_load = load(work_mesh) if callable(load) else load
        work_load.check_vertices(work_mesh.n_vertices)
        body = ElasticBody.from_mesh(work_mesh, material)

        sol = solve_static(body, work_field, work_load, None, solver_cfg)
        report.solver = sol.summary()
        if not sol.converged:
            report.failed = True
            report.error = f"Equilibrium did not converge (residual {sol.residual_inf:.3e})."
            logger.warning(report.error)
            return report

        stress = stress_field(sol.x_static, work_field, body.precomp, material)
        sol.stress = stress
        masses = element_masses(work_field, body.precomp, material)
        curve = fracture_curve(stress, cfg.resolved_thresholds())

        reference = work_mesh if target is None else preprocess(target, None, cfg)[0]
        report.mean_stress_pa = mean_stress(stress, _plastic_volumes(body, work_field), cfg.volume_weighted)
        report.standable = standability(work_mesh, sol.x_static, masses, cfg.contact_tol_m, cfg.margin_m)
        report.silhouette_loss = silhouette_loss(
            work_mesh.with_positions(sol.x_static), reference, cfg.axis, cfg.resolution
        )
        report.fracture_curve = curve
        report.fracture_auc = fracture_auc(curve)
        report.von_mises = stress.von_mises
    except PhysCompatError as e:
        logger.error(f"Metrics evaluation failed: {e}")
        report.failed = True
        report.error = f"{type(e).__name__}: {e}"
    return report


def summarize_batch(reports: Dict[str, MetricsReport]) -> Dict[str, Any]:
    """
    Aggregates reports over a batch of shapes.

    Mean stress is given both as the mean of per-object means and pooled over every element
    of every successful object.
    """
    ok = {name: r for name, r in reports.items() if not r.failed}
    summary: Dict[str, Any] = {
        "objects": len(reports),
        "failed": sorted(name for name, r in reports.items() if r.failed),
        "cc_mean": float(np.mean([r.cc_count for r in reports.values()])) if reports else None,
        "mean_stress_pa_per_object": None,
        "mean_stress_pa_pooled": None,
        "standable_fraction": None,
        "silhouette_loss_mean": None,
        "fracture_auc_mean": None,
    }
    if ok:
        pooled = np.concatenate([r.von_mises for r in ok.values()])
        summary["mean_stress_pa_per_object"] = float(np.mean([r.mean_stress_pa for r in ok.values()]))
        summary["mean_stress_pa_pooled"] = float(np.mean(pooled))
        summary["standable_fraction"] = float(np.mean([bool(r.standable) for r in ok.values()]))
        summary["silhouette_loss_mean"] = float(np.mean([r.silhouette_loss for r in ok.values()]))
        summary["fracture_auc_mean"] = float(np.mean([r.fracture_auc for r in ok.values()]))
    summary["per_object"] = {name: reports[name].to_dict() for name in sorted(reports)}
    return summary

import logging
import math
import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import sparse
from scipy.sparse.linalg import splu

from src.modules.elasticity.assembly import (
    ElasticBody,
    elastic_energy,
    split_dofs,
    stiffness_matrix,
    vertex_masses,
)
from src.modules.equilibrium.load import (
    ExternalLoad,
    attachment_energy,
    attachment_stiffness_diagonal,
    gravity_energy,
)
from src.modules.equilibrium.solver import net_forces, potential_terms
from src.modules.errors import DimensionMismatch, SimulationAborted, StepDiverged
from src.modules.mesh.writers import export_obj
from src.modules.plastic.plastic_field import PlasticField

TRAJECTORY_COLUMNS = ["step", "t", "kinetic_j", "elastic_j", "min_z", "max_penetration"]
FRAME_PATTERN = "frame_%06d.obj"


class KeyframeTrack(BaseModel):
    """
    Piecewise-linear translation of every attachment target, held constant outside its time range.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    times_s: List[float]
    offsets_m: List[Tuple[float, float, float]]

    @model_validator(mode="after")
    def _check(self) -> "KeyframeTrack":
        if not self.times_s or len(self.times_s) != len(self.offsets_m):
            raise ValueError("A keyframe track needs as many offsets as times, and at least one key.")
        if np.any(np.diff(self.times_s) <= 0.0):
            raise ValueError("Keyframe times must be strictly increasing.")
        return self

    def offset_at(self, t: float) -> np.ndarray:
        offsets = np.asarray(self.offsets_m, dtype=np.float64)
        return np.array([np.interp(t, self.times_s, offsets[:, k]) for k in range(3)])


class DynamicsConfig(BaseModel):
    """
    Backward-Euler simulation settings.

    ground_z_m=None disables contact. newton_tol_n=None resolves to 1e-6 * mu * V_total^(2/3).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    dt_s: float = Field(1.0 / 120.0, gt=0.0)
    rayleigh_alpha: float = Field(0.01, ge=0.0)
    rayleigh_beta: float = Field(0.001, ge=0.0)
    ground_z_m: Optional[float] = None
    k_contact_n_m: float = Field(1e4, ge=0.0)
    k_attach_n_m: float = Field(1e4, ge=0.0)
    friction_mu: float = Field(0.0, ge=0.0)
    friction_eps_m_s: float = Field(1e-3, gt=0.0)
    newton_max_iters: int = Field(50, ge=1)
    newton_tol_n: Optional[float] = Field(None, gt=0.0)
    ls_shrink: float = Field(0.5, gt=0.0, lt=1.0)
    ls_c1: float = Field(1e-4, gt=0.0, lt=1.0)
    min_step: float = Field(2.0 ** -30, gt=0.0)
    max_halvings: int = Field(4, ge=0)
    track: Optional[KeyframeTrack] = None

    def resolve_tol(self, body: ElasticBody) -> float:
        return self.newton_tol_n if self.newton_tol_n is not None else 1e-6 * body.force_scale


@dataclass(frozen=True, eq=False)
class DynamicsState:
    """
    Attributes:
        x (np.ndarray): 3N positions in m.
        v (np.ndarray): 3N velocities in m/s.
        t (float): Time in s.
    """

    x: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=np.float64).reshape(-1)
        v = np.asarray(self.v, dtype=np.float64).reshape(-1)
        if x.shape != v.shape or x.size % 3:
            raise DimensionMismatch(f"Positions ({x.size}) and velocities ({v.size}) must be equal multiples of 3.")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ValueError("Dynamics state contains NaN or infinite entries.")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)


@dataclass(frozen=True)
class EnergyRecord:
    step: int
    t: float
    kinetic_j: float
    elastic_j: float
    gravity_j: float
    attachment_j: float
    contact_j: float
    min_z: float
    max_penetration: float

    @property
    def mechanical_j(self) -> float:
        return self.kinetic_j + self.elastic_j + self.gravity_j + self.contact_j


@dataclass
class Trajectory:
    states: List[DynamicsState] = field(default_factory=list)
    records: List[EnergyRecord] = field(default_factory=list)
    frames: List[str] = field(default_factory=list)
    max_drift: float = 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.__dict__ for r in self.records], columns=TRAJECTORY_COLUMNS)

    def write_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def penetration(x: np.ndarray, ground_z: Optional[float]) -> np.ndarray:
    """(N,) depth of every vertex below the ground plane (0 above it)."""
    z = np.asarray(x, dtype=np.float64).reshape(-1, 3)[:, 2]
    if ground_z is None:
        return np.zeros(z.size)
    return np.maximum(ground_z - z, 0.0)


def contact_energy(x: np.ndarray, ground_z: Optional[float], k_contact: float) -> float:
    """Penalty energy 1/2 k_c sum d_i^2 in J."""
    d = penetration(x, ground_z)
    return float(0.5 * k_contact * d @ d)


def contact_gradient(x: np.ndarray, ground_z: Optional[float], k_contact: float) -> np.ndarray:
    """3N gradient of the penalty energy; minus the normal contact force k_c d."""
    grad = np.zeros((np.asarray(x).size // 3, 3))
    grad[:, 2] = -k_contact * penetration(x, ground_z)
    return grad.reshape(-1)


def contact_hessian_diagonal(x: np.ndarray, ground_z: Optional[float], k_contact: float) -> np.ndarray:
    diag = np.zeros((np.asarray(x).size // 3, 3))
    diag[:, 2] = np.where(penetration(x, ground_z) > 0.0, k_contact, 0.0)
    return diag.reshape(-1)


def friction_forces(state: DynamicsState, cfg: DynamicsConfig) -> np.ndarray:
    """
    3N smoothed Coulomb friction from the state's penalty normal forces and tangential velocities.
    """
    f = np.zeros((state.x.size // 3, 3))
    if cfg.friction_mu == 0.0 or cfg.ground_z_m is None:
        return f.reshape(-1)
    normal = cfg.k_contact_n_m * penetration(state.x, cfg.ground_z_m)
    vt = state.v.reshape(-1, 3)[:, :2]
    speed = np.sqrt(np.einsum("ij,ij->i", vt, vt) + cfg.friction_eps_m_s ** 2)
    f[:, :2] = -cfg.friction_mu * (normal / speed)[:, None] * vt
    return f.reshape(-1)


@dataclass(eq=False)
class _StepContext:
    dt: float
    x_prev: np.ndarray
    x_hat: np.ndarray
    damping: sparse.csr_matrix
    friction: np.ndarray
    load: ExternalLoad


class DynamicsSimulator:
    """
    Implicit backward-Euler FEM: each step minimizes the incremental potential with
    line-searched Newton. Rayleigh damping alpha M + beta K(x^n) and friction are frozen at x^n.
    """

    def __init__(self, body: ElasticBody, load: ExternalLoad, config: Optional[DynamicsConfig] = None) -> None:
        self.body: ElasticBody = body
        self.load: ExternalLoad = load
        self.config: DynamicsConfig = config or DynamicsConfig()
        self.logger: logging.Logger = logging.getLogger(self.__class__.__name__)
        load.check_vertices(body.mesh.n_vertices)
        self.free_dofs, self.fixed_dofs = split_dofs(body.mesh.n_vertices, load.fixed_vertices)
        self.fixed_positions: np.ndarray = load.resolved_fixed_targets(body.X_init)

    def load_at(self, t: float) -> ExternalLoad:
        """Load with attachment targets moved along the keyframe track."""
        track = self.config.track
        if track is None or not self.load.attach_vertices.size:
            return self.load
        return ExternalLoad(
            gravity=self.load.gravity,
            fixed_vertices=self.load.fixed_vertices,
            fixed_targets=self.load.fixed_targets,
            attach_vertices=self.load.attach_vertices,
            attach_stiffness=self.load.attach_stiffness,
            attach_targets=self.load.attach_targets + track.offset_at(t),
        )

    def _mass_diagonal(self, field: Optional[PlasticField]) -> np.ndarray:
        return np.repeat(vertex_masses(field, self.body.precomp, self.body.material), 3)

    def context(self, state: DynamicsState, field: Optional[PlasticField], dt: float) -> _StepContext:
        cfg = self.config
        damping = cfg.rayleigh_alpha * sparse.diags(self._mass_diagonal(field))
        if cfg.rayleigh_beta > 0.0:
            K = stiffness_matrix(state.x, field, self.body.precomp, self.body.material, psd_project=True)
            damping = damping + cfg.rayleigh_beta * K
        return _StepContext(
            dt=dt,
            x_prev=state.x,
            x_hat=state.x + dt * state.v,
            damping=sparse.csr_matrix(damping),
            friction=friction_forces(state, cfg),
            load=self.load_at(state.t + dt),
        )

    def potential(self, x: np.ndarray, field: Optional[PlasticField], ctx: _StepContext) -> float:
        cfg = self.config
        m = self._mass_diagonal(field)
        d = x - ctx.x_hat
        e = x - ctx.x_prev
        inertia = 0.5 / ctx.dt ** 2 * float(d @ (m * d))
        damping = 0.5 / ctx.dt * float(e @ (ctx.damping @ e))
        stored = sum(potential_terms(x, field, ctx.load, self.body))
        contact = contact_energy(x, cfg.ground_z_m, cfg.k_contact_n_m)
        return inertia + damping + stored + contact - float(ctx.friction @ x)

    def gradient(self, x: np.ndarray, field: Optional[PlasticField], ctx: _StepContext) -> np.ndarray:
        cfg = self.config
        m = self._mass_diagonal(field)
        return (
            m * (x - ctx.x_hat) / ctx.dt ** 2
            + ctx.damping @ (x - ctx.x_prev) / ctx.dt
            + net_forces(x, field, ctx.load, self.body)
            + contact_gradient(x, cfg.ground_z_m, cfg.k_contact_n_m)
            - ctx.friction
        )

    def hessian(self, x: np.ndarray, field: Optional[PlasticField], ctx: _StepContext) -> sparse.csr_matrix:
        cfg = self.config
        diag = (
            self._mass_diagonal(field) / ctx.dt ** 2
            + attachment_stiffness_diagonal(self.body.mesh.n_vertices, ctx.load)
            + contact_hessian_diagonal(x, cfg.ground_z_m, cfg.k_contact_n_m)
        )
        K = stiffness_matrix(x, field, self.body.precomp, self.body.material, psd_project=True)
        return (K + ctx.damping / ctx.dt + sparse.diags(diag)).tocsr()

    def step(self, state: DynamicsState, field: Optional[PlasticField], dt: Optional[float] = None) -> DynamicsState:
        """
        Advances one backward-Euler step.

        Raises:
            StepDiverged: If Newton exhausts its budget or the line search stalls.
        """
        cfg = self.config
        dt = cfg.dt_s if dt is None else float(dt)
        if state.x.size != self.body.n_dofs:
            raise DimensionMismatch(f"State has {state.x.size} coordinates, expected {self.body.n_dofs}.")
        ctx = self.context(state, field, dt)
        free = self.free_dofs
        tol = cfg.resolve_tol(self.body)

        x = state.x.copy()
        x.reshape(-1, 3)[self.load.fixed_vertices] = self.fixed_positions
        energy = self.potential(x, field, ctx)
        for it in range(cfg.newton_max_iters + 1):
            grad = self.gradient(x, field, ctx)[free]
            residual = float(np.max(np.abs(grad))) if grad.size else 0.0
            if residual <= tol:
                break
            if it == cfg.newton_max_iters:
                self.logger.error(f"[DynamicsSimulator] Newton budget exhausted at t={state.t:.6f} (residual {residual:.3e}).")
                raise StepDiverged(f"Step at t={state.t:.6f} stopped at residual {residual:.3e} after {it} iterations.")

            H = self.hessian(x, field, ctx)[free][:, free].tocsc()
            try:
                direction = -splu(H).solve(grad)
            except RuntimeError as e:
                self.logger.error(f"[DynamicsSimulator] Step system is singular: {e}")
                raise StepDiverged(f"Step system is singular at t={state.t:.6f}: {e}") from e

            slope = float(direction @ grad)
            slack = 1e-12 * abs(energy)
            step = 1.0
            while True:
                trial = x.copy()
                trial[free] += step * direction
                trial_energy = self.potential(trial, field, ctx)
                if np.isfinite(trial_energy) and trial_energy <= energy + cfg.ls_c1 * step * slope + slack:
                    break
                step *= cfg.ls_shrink
                if step < cfg.min_step:
                    self.logger.error(f"[DynamicsSimulator] Line search failed at t={state.t:.6f}.")
                    raise StepDiverged(f"Line search found no decrease at t={state.t:.6f} (residual {residual:.3e}).")
            x, energy = trial, trial_energy

        return DynamicsState(x=x, v=(x - state.x) / dt, t=state.t + dt)

    def advance(self, state: DynamicsState, field: Optional[PlasticField], dt: float, depth: int = 0) -> DynamicsState:
        """One step of length dt, split into halves on failure up to max_halvings levels deep."""
        try:
            return self.step(state, field, dt)
        except StepDiverged as e:
            if depth >= self.config.max_halvings:
                self.logger.error(f"[DynamicsSimulator] Step still fails at dt={dt:.3e}: {e}")
                raise SimulationAborted(f"Step at t={state.t:.6f} fails even at dt={dt:.3e}.") from e
            self.logger.warning(f"[DynamicsSimulator] Halving dt to {dt / 2:.3e} at t={state.t:.6f}.")
            mid = self.advance(state, field, dt / 2.0, depth + 1)
            return self.advance(mid, field, dt / 2.0, depth + 1)

    def energies(self, step: int, state: DynamicsState, field: Optional[PlasticField]) -> EnergyRecord:
        cfg = self.config
        masses = vertex_masses(field, self.body.precomp, self.body.material)
        load = self.load_at(state.t)
        pts = state.x.reshape(-1, 3)
        return EnergyRecord(
            step=step,
            t=state.t,
            kinetic_j=float(0.5 * state.v @ (np.repeat(masses, 3) * state.v)),
            elastic_j=elastic_energy(state.x, field, self.body.precomp, self.body.material),
            gravity_j=gravity_energy(state.x, load, masses),
            attachment_j=attachment_energy(state.x, load),
            contact_j=contact_energy(state.x, cfg.ground_z_m, cfg.k_contact_n_m),
            min_z=float(pts[:, 2].min()),
            max_penetration=float(penetration(state.x, cfg.ground_z_m).max()),
        )

    def simulate(
        self,
        field: Optional[PlasticField],
        duration_s: float,
        frame_stride: int = 1,
        output_dir: Optional[str] = None,
        initial: Optional[DynamicsState] = None,
    ) -> Trajectory:
        """
        Runs ceil(duration / dt) steps and exports the boundary surface every frame_stride steps.

        Args:
            field (Optional[PlasticField]): Plastic field (None means identity).
            duration_s (float): Simulated time in s.
            frame_stride (int): Steps between exported frames; frame k is the state at step k * stride.
            output_dir (Optional[str]): Directory for the frame OBJs (no export when None).
            initial (Optional[DynamicsState]): Start state (defaults to X_init at rest).

        Raises:
            SimulationAborted: If a step fails at the smallest allowed dt.
        """
        if duration_s <= 0.0:
            raise ValueError(f"Duration must be positive, got {duration_s}.")
        if frame_stride < 1:
            raise ValueError(f"Frame stride must be at least 1, got {frame_stride}.")
        dt = self.config.dt_s
        n_steps = int(math.ceil(duration_s / dt - 1e-9))
        state = initial or DynamicsState(x=self.body.X_init.copy(), v=np.zeros(self.body.n_dofs))

        trajectory = Trajectory(states=[state], records=[self.energies(0, state, field)])
        self.logger.info(f"[DynamicsSimulator] Simulating {n_steps} steps of {dt:.6f} s.")
        for k in range(n_steps):
            if output_dir is not None and k % frame_stride == 0:
                path = os.path.join(output_dir, FRAME_PATTERN % (k // frame_stride))
                export_obj(self.body.mesh, path, state.x)
                trajectory.frames.append(path)
            nxt = self.advance(state, field, dt)
            trajectory.max_drift = max(trajectory.max_drift, float(np.max(np.abs(nxt.x - state.x))))
            state = nxt
            trajectory.states.append(state)
            trajectory.records.append(self.energies(k + 1, state, field))

        self.logger.info(
            f"[DynamicsSimulator] Done at t={state.t:.6f} s; max per-step drift {trajectory.max_drift:.3e} m."
        )
        return trajectory


def incremental_potential(
    x_candidate: np.ndarray,
    state: DynamicsState,
    field: Optional[PlasticField],
    body: ElasticBody,
    load: ExternalLoad,
    cfg: Optional[DynamicsConfig] = None,
    dt: Optional[float] = None,
) -> Tuple[float, np.ndarray]:
    """
    Per-step merit function whose minimizer is the backward-Euler update.

    Returns:
        Tuple[float, np.ndarray]: The potential and its 3N gradient (the step residual).
    """
    sim = DynamicsSimulator(body, load, cfg)
    ctx = sim.context(state, field, sim.config.dt_s if dt is None else dt)
    x = np.asarray(x_candidate, dtype=np.float64).reshape(-1)
    return sim.potential(x, field, ctx), sim.gradient(x, field, ctx)


def step(
    state: DynamicsState,
    field: Optional[PlasticField],
    body: ElasticBody,
    load: ExternalLoad,
    cfg: Optional[DynamicsConfig] = None,
) -> DynamicsState:
    """One backward-Euler step of cfg.dt_s."""
    return DynamicsSimulator(body, load, cfg).step(state, field)


def simulate(
    body: ElasticBody,
    field: Optional[PlasticField],
    load: ExternalLoad,
    cfg: Optional[DynamicsConfig] = None,
    duration_s: float = 1.0,
    frame_stride: int = 1,
    output_dir: Optional[str] = None,
    initial: Optional[DynamicsState] = None,
) -> Trajectory:
    """Repeated steps with dt halving on failure, exporting frames to output_dir."""
    return DynamicsSimulator(body, load, cfg).simulate(field, duration_s, frame_stride, output_dir, initial)

"""Time integration of the coupled density/attractant system.

Equations on (0, L):

    u_t = u_xx - (V(u) v_x)_x + lam*u - u^2      (cell density)
    v_t = v_xx - v - c*u*v                       (attractant)

with zero Neumann data for u at both ends and for v at the vessel end,
and the outward flux v_x = mu*v/(1+v) at the tumor end.

Scheme: IMEX Euler. Diffusion is implicit through the mirror-row
tridiagonal solve; the chemotactic divergence, the logistic term and
-v - c*u*v are explicit. The nonlinear tumor-boundary flux of v is
lagged: each step's implicit operator carries the Robin coefficient
mu/(1 + v_old(L)).

The chemotactic flux V(u) v_x is discretized with first-order upwinding
of u in the drift direction, which trades formal second order for
positivity. On the tumor-boundary face the flux uses the boundary value
mu*v/(1+v) of v_x, so the discrete mass balance of u telescopes exactly:
with lam = 0 the change of the trapezoidal mass of u equals
-dt * (boundary flux + quadratic absorption) summed over steps, to
round-off. Audits rely on this.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import PositivityError, SolverError
from .grid import Field, Grid1D, integrate, make_field, norm
from .sensitivity import SensitivitySpec

__all__ = [
    "ModelParams",
    "SimState",
    "StepControl",
    "Trajectory",
    "cfl_dt",
    "step",
    "run",
    "chemotaxis_divergence",
    "boundary_flux_v",
    "write_trajectory_csv",
    "write_diagnostics_csv",
]

POSITIVITY_HARD_LIMIT = -1e-9  # beyond this a step is rejected outright
DRIFT_FLOOR = 1e-30

DIAG_COLUMNS = (
    "t", "mass_u", "mass_v", "linf_u", "linf_v", "l2_u", "l2_v",
    "l2_u_minus_lam", "min_u", "min_v", "boundary_flux_v", "chem_boundary_flux",
)


@dataclass(frozen=True)
class ModelParams:
    """Full parameterization of the coupled system.

    lam: logistic growth rate of u (any real).
    mu: tumor-boundary flux strength for v (any real).
    c: consumption rate, >= 0. The model proper has c > 0; c = 0 is
       admitted so the decoupled v-problem can be run as a comparison
       (supersolution) twin of a coupled run.
    V: chemotactic sensitivity.
    """

    lam: float
    mu: float
    c: float
    V: SensitivitySpec

    def __post_init__(self):
        for name in ("lam", "mu", "c"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"model parameter {name} must be finite")
        if self.c < 0:
            raise ValueError(f"consumption rate c must be >= 0, got {self.c}")


@dataclass(frozen=True)
class SimState:
    t: float
    u: Field
    v: Field


@dataclass(frozen=True)
class StepControl:
    """Time-stepping controls. dt=None means per-step CFL selection."""

    t_end: float
    dt: float | None = None
    output_every: int = 10
    dt_safety: float = 0.4

    def __post_init__(self):
        if self.t_end <= 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.dt is not None and self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0 < self.dt_safety <= 1:
            raise ValueError(f"dt_safety must lie in (0, 1], got {self.dt_safety}")
        if self.output_every < 1:
            raise ValueError("output_every must be >= 1")


def boundary_flux_v(p: ModelParams, v_boundary: float) -> float:
    """Outward flux of v at the tumor end: mu * v / (1 + v)."""
    return float(p.mu * v_boundary / (1.0 + v_boundary))


def chemotaxis_divergence(grid: Grid1D, u: np.ndarray, v: np.ndarray,
                          p: ModelParams) -> np.ndarray:
    """Divergence of the upwind chemotactic flux J = V(u) v_x.

    Faces between nodes use the upwind u (left value when v increases
    across the face). The vessel-end face flux is zero; the tumor-end
    face uses v's boundary flux value so u's mass bookkeeping closes.
    Cell widths are h inside and h/2 at the boundary nodes.
    """
    h = grid.h
    dv = v[1:] - v[:-1]
    u_up = np.where(dv > 0.0, u[:-1], u[1:])
    j = np.asarray(p.V.V(u_up)) * dv / h
    j_tumor = float(np.asarray(p.V.V(u[-1]))) * boundary_flux_v(p, v[-1])
    div = np.empty(grid.n)
    div[0] = j[0] / (0.5 * h)
    div[1:-1] = (j[1:] - j[:-1]) / h
    div[-1] = (j_tumor - j[-1]) / (0.5 * h)
    return div


def cfl_dt(state: SimState, p: ModelParams, grid: Grid1D,
           dt_safety: float = 0.4) -> float:
    """Largest safe step for the explicit terms, times dt_safety.

    The advective candidate is h over the largest face drift speed
    max|V'(u)| * max|v_x| (the tumor-boundary face contributes its flux
    value); the reaction cap is 0.5 / max(lam + 2*max u, 1 + c*max u).
    A safety factor <= 0.5 makes the upwind update provably
    nonnegativity-preserving (boundary cells are half-width, doubling
    their drain rate).
    """
    u = state.u.values
    v = state.v.values
    h = grid.h
    grad = float(np.abs(np.diff(v)).max()) / h if grid.n > 1 else 0.0
    grad = max(grad, abs(boundary_flux_v(p, v[-1])))
    drift = float(np.abs(np.asarray(p.V.V_prime(u))).max()) * grad
    advective = h / max(drift, DRIFT_FLOOR)
    linf_u = float(np.abs(u).max())
    reaction = 0.5 / max(p.lam + 2.0 * linf_u, 1.0 + p.c * linf_u)
    return dt_safety * float(min(advective, reaction))


def _imex_banded(grid: Grid1D, dt: float, robin_mu: float = 0.0) -> np.ndarray:
    """(3, n) banded form of I + dt * (-d2/dx2) with mirror rows, plus an
    optional lagged Robin term in the last diagonal entry."""
    n, h = grid.n, grid.h
    r = dt / (h * h)
    ab = np.empty((3, n))
    ab[0, :] = -r
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :] = -r
    ab[0, 1] = -2.0 * r   # super-diagonal entry of row 0 (mirror)
    ab[2, n - 2] = -2.0 * r  # sub-diagonal entry of row n-1 (mirror)
    ab[1, n - 1] -= 2.0 * dt * robin_mu / h
    return ab


def _advance(grid: Grid1D, p: ModelParams, state: SimState, dt: float) -> SimState:
    u = state.u.values
    v = state.v.values
    div = chemotaxis_divergence(grid, u, v, p)
    u_rhs = u + dt * (-div + p.lam * u - u * u)
    v_rhs = v + dt * (-v - p.c * u * v)
    mu_lagged = p.mu / (1.0 + v[-1])
    try:
        u_new = scipy.linalg.solve_banded((1, 1), _imex_banded(grid, dt), u_rhs)
        v_new = scipy.linalg.solve_banded(
            (1, 1), _imex_banded(grid, dt, mu_lagged), v_rhs
        )
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SolverError(f"implicit diffusion solve failed at t={state.t:g}: {exc}")
    t_new = state.t + dt
    low = float(min(u_new.min(), v_new.min()))
    if low < POSITIVITY_HARD_LIMIT or not (
        np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))
    ):
        raise PositivityError(
            f"density dropped to {low:.3e} at t={t_new:g}; dt={dt:g} is too large",
            t=t_new,
            min_value=low,
        )
    return SimState(t_new, make_field(grid, u_new), make_field(grid, v_new))


def step(state: SimState, p: ModelParams, ctrl: StepControl) -> SimState:
    """One IMEX Euler step; dt from ctrl or, if unset, from cfl_dt."""
    grid = state.u.grid
    dt = ctrl.dt if ctrl.dt is not None else cfl_dt(state, p, grid, ctrl.dt_safety)
    return _advance(grid, p, state, dt)


@dataclass
class Trajectory:
    """Snapshots plus per-snapshot diagnostics of one simulation."""

    grid: Grid1D
    params: ModelParams
    ctrl: StepControl
    states: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    min_u_overall: float = np.inf
    min_v_overall: float = np.inf
    steps_taken: int = 0
    max_dt_used: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.diagnostics["t"])

    def series(self, name: str) -> np.ndarray:
        return np.asarray(self.diagnostics[name])

    def final_state(self) -> SimState:
        return self.states[-1]

    def _record(self, state: SimState):
        p = self.params
        u, v = state.u, state.v
        d = self.diagnostics
        d.setdefault("t", []).append(state.t)
        d.setdefault("mass_u", []).append(integrate(u))
        d.setdefault("mass_v", []).append(integrate(v))
        d.setdefault("linf_u", []).append(norm(u, "Linf"))
        d.setdefault("linf_v", []).append(norm(v, "Linf"))
        d.setdefault("l2_u", []).append(norm(u, "L2"))
        d.setdefault("l2_v", []).append(norm(v, "L2"))
        d.setdefault("l2_u_minus_lam", []).append(
            norm(make_field(self.grid, u.values - p.lam), "L2")
        )
        d.setdefault("min_u", []).append(float(u.values.min()))
        d.setdefault("min_v", []).append(float(v.values.min()))
        d.setdefault("boundary_flux_v", []).append(boundary_flux_v(p, v.values[-1]))
        # integrand of the mass-balance boundary term: mu * V(u) v/(1+v)
        d.setdefault("chem_boundary_flux", []).append(
            float(np.asarray(p.V.V(u.values[-1]))) * boundary_flux_v(p, v.values[-1])
        )
        self.states.append(state)


def run(u0: Field, v0: Field, p: ModelParams, ctrl: StepControl) -> Trajectory:
    """Integrate from (u0, v0) to t_end, recording every output_every
    steps (plus the initial and final states).

    Initial data must be nonnegative. On a solver failure the partial
    trajectory is attached to the raised exception as exc.trajectory.
    """
    grid = u0.grid
    if v0.grid is not grid and (v0.grid.L != grid.L or v0.grid.n != grid.n):
        raise ValueError("u0 and v0 must live on the same grid")
    if u0.values.min() < 0 or v0.values.min() < 0:
        raise ValueError("initial data must be nonnegative")
    traj = Trajectory(grid=grid, params=p, ctrl=ctrl)
    state = SimState(0.0, u0, v0)
    traj.min_u_overall = float(u0.values.min())
    traj.min_v_overall = float(v0.values.min())
    traj._record(state)
    k = 0
    try:
        while state.t < ctrl.t_end - 1e-12:
            if ctrl.dt is not None:
                dt = ctrl.dt
            else:
                dt = cfl_dt(state, p, grid, ctrl.dt_safety)
            dt = min(dt, ctrl.t_end - state.t)
            state = _advance(grid, p, state, dt)
            k += 1
            traj.steps_taken = k
            traj.max_dt_used = max(traj.max_dt_used, dt)
            traj.min_u_overall = min(traj.min_u_overall, float(state.u.values.min()))
            traj.min_v_overall = min(traj.min_v_overall, float(state.v.values.min()))
            if k % ctrl.output_every == 0 or state.t >= ctrl.t_end - 1e-12:
                traj._record(state)
    except SolverError as exc:
        exc.trajectory = traj
        raise
    return traj


def write_trajectory_csv(traj: Trajectory, fh) -> None:
    """Long-format snapshot table: one row per (snapshot, node)."""
    fh.write("t,x,u,v\n")
    xs = traj.grid.nodes
    for state in traj.states:
        t = float(state.t)
        for x, uu, vv in zip(xs, state.u.values, state.v.values):
            fh.write(f"{t!r},{float(x)!r},{float(uu)!r},{float(vv)!r}\n")


def write_diagnostics_csv(traj: Trajectory, fh, theta: Field | None = None) -> None:
    """Per-snapshot diagnostics table.

    l2_v_minus_theta is the distance to the supplied steady profile;
    below the flux threshold the relevant profile is 0 and theta may be
    omitted.
    """
    fh.write("t,mass_u,mass_v,linf_u,linf_v,l2_v_minus_theta,boundary_flux_v\n")
    theta_vals = theta.values if theta is not None else 0.0
    for i, state in enumerate(traj.states):
        dist = norm(make_field(traj.grid, state.v.values - theta_vals), "L2")
        row = (
            traj.diagnostics["t"][i],
            traj.diagnostics["mass_u"][i],
            traj.diagnostics["mass_v"][i],
            traj.diagnostics["linf_u"][i],
            traj.diagnostics["linf_v"][i],
            dist,
            traj.diagnostics["boundary_flux_v"][i],
        )
        fh.write(",".join(repr(float(x)) for x in row) + "\n")

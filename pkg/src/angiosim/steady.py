"""Steady states organizing the long-time dynamics.

Three states matter: the trivial state (0, 0), the density-dominant
state (lam, 0), and -- once the boundary flux strength mu exceeds the
threshold mu1 -- the attractant-dominant state (0, theta_mu), where
theta_mu is the positive solution of

    -theta'' + theta = 0,  theta'(0) = 0,  theta'(L) = mu*theta/(1+theta).

On an interval that problem has the closed form
theta(x) = A cosh(x) / cosh(L) with A = mu/tanh(L) - 1, which serves
both as the Newton starting point and as an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import dynamics
from .elliptic import flux_residual, solve_nonlinear_bvp
from .errors import BelowThresholdError, SolverError
from .grid import Field, Grid1D, const_field, make_field
from .spectral import compute_mu1

__all__ = [
    "SteadyState",
    "theta_closed_form",
    "theta_mu",
    "semi_trivial_u",
    "stationary_residual",
]

RESIDUAL_BOUND = 1e-8


@dataclass(frozen=True)
class SteadyState:
    """One equilibrium of the coupled system with its residual."""

    u_part: Field
    v_part: Field
    kind: str  # "trivial" | "u-dominant" | "v-dominant"
    residual: float

    def __post_init__(self):
        if self.u_part.values.min() < 0 or self.v_part.values.min() < 0:
            raise ValueError("steady-state components must be nonnegative")
        if self.residual > RESIDUAL_BOUND:
            raise ValueError(
                f"stationary residual {self.residual:.3e} exceeds {RESIDUAL_BOUND:g}"
            )


def theta_closed_form(grid: Grid1D, mu: float) -> Field:
    """Interval solution A*cosh(x)/cosh(L), A = mu/tanh(L) - 1.

    Positive only above the threshold tanh(L); below it the returned
    profile is negative and useful solely as a reference.
    """
    amplitude = mu / math.tanh(grid.L) - 1.0
    return make_field(grid, amplitude * np.cosh(grid.nodes) / math.cosh(grid.L))


def theta_mu(grid: Grid1D, mu: float) -> Field:
    """Positive steady attractant profile for mu above the threshold.

    Raises BelowThresholdError when mu <= mu1(grid): there the only
    nonnegative steady solution is zero, and callers must be able to
    tell "no positive state exists" apart from a solver failure.
    """
    mu1 = compute_mu1(grid)
    if mu <= mu1:
        raise BelowThresholdError(
            f"mu = {mu:g} is at or below the flux threshold mu1 = {mu1:.8f}; "
            "no positive steady profile exists"
        )
    guess = theta_closed_form(grid, mu)
    if guess.values.min() <= 0.0:
        # mu sits between the discrete threshold and tanh(L); fall back
        # to a small positive constant so Newton starts on the right branch
        guess = const_field(grid, max(mu / math.tanh(grid.L) - 1.0, 0.1))
    theta = solve_nonlinear_bvp(
        grid,
        a=const_field(grid, 1.0),
        g=lambda w: mu * w / (1.0 + w),
        g_prime=lambda w: mu / (1.0 + w) ** 2,
        source=const_field(grid, 0.0),
        w0=guess,
    )
    if theta.values.min() <= 0.0:
        raise SolverError(
            f"Newton converged to a non-positive profile for mu = {mu:g}"
        )
    return theta


def stationary_residual(grid: Grid1D, p: dynamics.ModelParams,
                        u: Field, v: Field) -> float:
    """Inf-norm residual of the time-derivative-free coupled system,
    using the same spatial discretization as the integrator."""
    uv = u.values
    vv = v.values
    chem = dynamics.chemotaxis_divergence(grid, uv, vv, p)
    r_u = flux_residual(
        grid,
        a=const_field(grid, 0.0),
        g=lambda w: 0.0,
        w=uv,
        source=p.lam * uv - uv * uv - chem,
    )
    r_v = flux_residual(
        grid,
        a=make_field(grid, 1.0 + p.c * uv),
        g=lambda w: p.mu * w / (1.0 + w),
        w=vv,
        source=np.zeros(grid.n),
    )
    return float(max(np.abs(r_u).max(), np.abs(r_v).max()))


def semi_trivial_u(grid: Grid1D, lam: float,
                   p: dynamics.ModelParams | None = None) -> SteadyState:
    """The spatially constant state (lam, 0).

    Its residual is parameter-free (every term vanishes identically),
    so p is only needed when the caller wants the residual evaluated
    with a specific sensitivity; a placeholder is used otherwise.
    """
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    if p is None:
        from .sensitivity import linear_saturating

        p = dynamics.ModelParams(lam=lam, mu=0.0, c=1.0, V=linear_saturating())
    elif p.lam != lam:
        p = replace(p, lam=lam)
    u = const_field(grid, lam)
    v = const_field(grid, 0.0)
    res = stationary_residual(grid, p, u, v)
    kind = "trivial" if lam == 0 else "u-dominant"
    return SteadyState(u_part=u, v_part=v, kind=kind, residual=res)

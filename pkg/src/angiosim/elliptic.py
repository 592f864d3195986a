"""Discrete operator -d2/dx2 + a(x) with mixed boundary rows.

Boundary handling is ghost-node (mirror) elimination throughout: the
normal-derivative condition is written with a centered difference
through a fictitious node one spacing outside the domain, and the
fictitious value is substituted into the regular second-difference row.
The vessel end always carries a zero-Neumann row; the tumor end carries
zero-Neumann, a linear Robin row, or a nonlinear flux condition
dw/dn = g(w) solved by damped Newton.

Sign convention for Robin data: the stored coefficient b means
dw/dn = -b*w on the tumor boundary, so an outward flux dw/dn = mu*w
is represented by b = -mu.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import (
    NonConvergenceError,
    SingularJacobianError,
    SpectralShiftError,
)
from .grid import Field, Grid1D, make_field

__all__ = [
    "BoundarySpec",
    "BandedOperator",
    "assemble",
    "apply_operator",
    "solve_linear",
    "solve_nonlinear_bvp",
    "flux_residual",
]

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
NEWTON_MAX_HALVINGS = 8


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary data: zero Neumann on the vessel end, and one of
    {zero Neumann, linear Robin, nonlinear flux} on the tumor end."""

    gamma2_kind: str  # "neumann" | "robin" | "flux"
    robin_b: float = 0.0
    flux: Callable[[float], float] | None = None
    flux_prime: Callable[[float], float] | None = None

    @staticmethod
    def neumann() -> "BoundarySpec":
        return BoundarySpec("neumann")

    @staticmethod
    def robin(b: float) -> "BoundarySpec":
        """Linear Robin row dw/dn = -b*w at the tumor end."""
        if not np.isfinite(b):
            raise ValueError("Robin coefficient must be finite")
        return BoundarySpec("robin", robin_b=float(b))

    @staticmethod
    def nonlinear_flux(g: Callable, g_prime: Callable) -> "BoundarySpec":
        """Nonlinear outward flux dw/dn = g(w) at the tumor end.

        g(0) must vanish so that the zero state stays a solution of the
        homogeneous problem.
        """
        if abs(float(g(0.0))) > 1e-14:
            raise ValueError("nonlinear boundary flux must satisfy g(0) = 0")
        return BoundarySpec("flux", flux=g, flux_prime=g_prime)


@dataclass(frozen=True)
class BandedOperator:
    """Tridiagonal matrix for -d2/dx2 + a(x) with boundary rows applied.

    sub[i], diag[i], sup[i] hold row i's couplings to nodes i-1, i, i+1;
    sub[0] and sup[n-1] are unused.
    """

    grid: Grid1D
    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    a: Field
    bc: BoundarySpec

    def to_banded(self) -> np.ndarray:
        """(3, n) array in scipy.linalg.solve_banded layout."""
        n = self.grid.n
        ab = np.zeros((3, n))
        ab[0, 1:] = self.sup[:-1]
        ab[1, :] = self.diag
        ab[2, :-1] = self.sub[1:]
        return ab


def assemble(grid: Grid1D, a: Field, bc: BoundarySpec) -> BandedOperator:
    """Build the tridiagonal discretization of -d2/dx2 + a(x).

    Only linear boundary kinds are assembled here; a nonlinear flux
    condition has no fixed matrix and is handled by solve_nonlinear_bvp
    (its Newton Jacobian is this operator with b = -g'(w) at the
    current iterate).
    """
    if not np.all(np.isfinite(a.values)):
        raise ValueError("potential a(x) must be finite")
    if bc.gamma2_kind == "flux":
        raise ValueError(
            "nonlinear flux rows are linearized per Newton step; "
            "use solve_nonlinear_bvp or pass a robin() linearization"
        )
    n, h = grid.n, grid.h
    inv_h2 = 1.0 / (h * h)
    sub = np.full(n, -inv_h2)
    sup = np.full(n, -inv_h2)
    diag = np.full(n, 2.0 * inv_h2) + a.values
    sup[0] = -2.0 * inv_h2  # mirror row at the vessel end
    sub[-1] = -2.0 * inv_h2  # mirror row at the tumor end
    if bc.gamma2_kind == "robin":
        diag[-1] += 2.0 * bc.robin_b / h
    return BandedOperator(grid, sub, diag, sup, a, bc)


def apply_operator(op: BandedOperator, w: np.ndarray | Field) -> np.ndarray:
    """Tridiagonal matrix-vector product."""
    v = w.values if isinstance(w, Field) else np.asarray(w, dtype=float)
    n = op.grid.n
    out = np.empty(n)
    out[0] = op.diag[0] * v[0] + op.sup[0] * v[1]
    out[1:-1] = op.sub[1:-1] * v[:-2] + op.diag[1:-1] * v[1:-1] + op.sup[1:-1] * v[2:]
    out[-1] = op.sub[-1] * v[-2] + op.diag[-1] * v[-1]
    return out


def solve_linear(op: BandedOperator, rhs: Field | np.ndarray) -> Field:
    """Direct banded solve of op * w = rhs.

    A singular or numerically broken-down factorization raises
    SpectralShiftError so eigenvalue callers can re-shift and retry.
    """
    b = rhs.values if isinstance(rhs, Field) else np.asarray(rhs, dtype=float)
    try:
        w = scipy.linalg.solve_banded((1, 1), op.to_banded(), b)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as exc:
        raise SpectralShiftError(f"banded solve failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise SpectralShiftError("banded solve produced non-finite values "
                                 "(singular or near-singular pivot)")
    return make_field(op.grid, w)


def _second_difference(w: np.ndarray, h: float) -> np.ndarray:
    """Interior rows of -w'' via (w_i - w_{i-1}) + (w_i - w_{i+1}).

    Differencing neighbors first keeps the 1/h^2 cancellation near the
    machine floor for smooth w, which the Newton termination test needs.
    """
    return ((w[1:-1] - w[:-2]) + (w[1:-1] - w[2:])) / (h * h)


def flux_residual(
    grid: Grid1D,
    a: Field,
    g: Callable,
    w: np.ndarray,
    source: np.ndarray,
) -> np.ndarray:
    """Residual of -w'' + a*w = source with mirror row at the vessel end
    and outward flux dw/dn = g(w) at the tumor end."""
    h = grid.h
    r = np.empty(grid.n)
    r[1:-1] = _second_difference(w, h)
    r[0] = 2.0 * (w[0] - w[1]) / (h * h)
    r[-1] = 2.0 * (w[-1] - w[-2]) / (h * h) - 2.0 * float(g(w[-1])) / h
    r += a.values * w - source
    return r


def solve_nonlinear_bvp(
    grid: Grid1D,
    a: Field,
    g: Callable,
    g_prime: Callable,
    source: Field,
    w0: Field,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
    residual_history: list | None = None,
) -> Field:
    """Damped Newton solve of -w'' + a*w = source with dw/dn = g(w) at
    the tumor end.

    Terminates when the residual inf-norm drops to tol, widened to the
    attainable double-precision floor ~4*eps*|w|/h^2 when that exceeds
    tol: storing the iterate quantizes each residual component in jumps
    of ulp(w)/h^2, so no representable vector beats that scale on fine
    grids. Steps that do not decrease the residual are halved up to
    NEWTON_MAX_HALVINGS times; if no halved step decreases it either,
    the full step is taken (near the floor the residual bounces rather
    than descends, and freezing the iterate would stall the iteration).
    """
    if not np.all(np.isfinite(w0.values)):
        raise ValueError("initial iterate must be finite")
    eps = float(np.finfo(float).eps)
    h2 = grid.h * grid.h
    w = w0.values.copy()
    src = source.values
    r = flux_residual(grid, a, g, w, src)
    rnorm = float(np.abs(r).max())
    if residual_history is not None:
        residual_history.append(rnorm)
    tol_eff = tol
    for _ in range(max_iter):
        tol_eff = max(tol, 4.0 * eps * float(np.abs(w).max()) / h2)
        if rnorm <= tol_eff:
            return make_field(grid, w)
        jac = assemble(grid, a, BoundarySpec.robin(-float(g_prime(w[-1]))))
        try:
            delta = solve_linear(jac, -r).values
        except SpectralShiftError as exc:
            raise SingularJacobianError(f"Newton Jacobian solve failed: {exc}") from exc
        full = None
        step = 1.0
        accepted = False
        for _halving in range(NEWTON_MAX_HALVINGS + 1):
            w_try = w + step * delta
            r_try = flux_residual(grid, a, g, w_try, src)
            r_try_norm = float(np.abs(r_try).max())
            if full is None:
                full = (w_try, r_try, r_try_norm)
            if np.isfinite(r_try_norm) and r_try_norm < rnorm:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            w_try, r_try, r_try_norm = full
        if not np.isfinite(r_try_norm):
            raise NonConvergenceError(
                "Newton step produced a non-finite residual", residual=rnorm
            )
        w, r, rnorm = w_try, r_try, r_try_norm
        if residual_history is not None:
            residual_history.append(rnorm)
    if rnorm <= tol_eff:
        return make_field(grid, w)
    raise NonConvergenceError(
        f"Newton did not reach residual {tol:g} in {max_iter} steps "
        f"(last residual {rnorm:.3e})",
        residual=rnorm,
    )

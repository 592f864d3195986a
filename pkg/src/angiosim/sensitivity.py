"""Chemotactic sensitivity functions and numerical hypothesis checkers.

A sensitivity function V maps cell density to chemotactic response; the
model requires V(0) = 0 and V > 0 away from zero. The checkers here
estimate growth exponents of V near zero (superlinearity) and power
envelopes on a working range, so a harness run can record which
structural conditions its V actually satisfies. Checks are numerical on
sample grids because tabulated user functions are admitted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import SensitivityHypothesisError

__all__ = [
    "SensitivitySpec",
    "saturating_power",
    "linear_saturating",
    "truncated_linear",
    "tabulated",
    "H1Report",
    "EnvelopeReport",
    "check_hypothesis2",
    "derivative_consistency",
    "check_H1",
    "check_growth_envelope",
    "f_g_diagnostics",
]

# log-spaced sample grid used by the basic positivity / consistency checks
_SAMPLE_GRID = np.logspace(-8.0, 2.0, 201)


@dataclass(frozen=True)
class SensitivitySpec:
    """A sensitivity function V with its analytic derivative.

    kinks lists points where V' jumps (empty for smooth families); the
    finite-difference consistency check skips their neighborhoods.
    envelope_exponent is the natural power for growth-envelope checks,
    None when there is no canonical choice (tabulated data).
    """

    family: str
    V: Callable[[np.ndarray], np.ndarray]
    V_prime: Callable[[np.ndarray], np.ndarray]
    params: tuple = ()
    kinks: tuple = ()
    envelope_exponent: float | None = None

    def describe(self) -> dict:
        return {"family": self.family, "params": list(self.params)}


def saturating_power(alpha: float) -> SensitivitySpec:
    """V(s) = s^alpha / (1 + s^alpha), alpha >= 1. Bounded by 1."""
    if alpha < 1:
        raise ValueError(f"saturating-power exponent must be >= 1, got {alpha}")
    a = float(alpha)

    def V(s):
        sp = np.maximum(np.asarray(s, dtype=float), 0.0)
        p = sp**a
        return p / (1.0 + p)

    def Vp(s):
        sp = np.maximum(np.asarray(s, dtype=float), 0.0)
        p = sp**a
        with np.errstate(divide="ignore", invalid="ignore"):
            out = a * sp ** (a - 1.0) / (1.0 + p) ** 2
        return np.where(sp > 0.0, out, 1.0 if a == 1.0 else 0.0)

    return SensitivitySpec("saturating-power", V, Vp, params=(a,),
                           envelope_exponent=a)


def linear_saturating() -> SensitivitySpec:
    """V(s) = s / (1 + s)."""

    def V(s):
        sp = np.maximum(np.asarray(s, dtype=float), 0.0)
        return sp / (1.0 + sp)

    def Vp(s):
        sp = np.maximum(np.asarray(s, dtype=float), 0.0)
        return 1.0 / (1.0 + sp) ** 2

    return SensitivitySpec("linear-saturating", V, Vp, envelope_exponent=1.0)


def truncated_linear(v_max: float) -> SensitivitySpec:
    """V(s) = min(s, v_max); derivative jumps at s = v_max."""
    if v_max <= 0:
        raise ValueError(f"truncation level must be positive, got {v_max}")
    m = float(v_max)

    def V(s):
        return np.minimum(np.maximum(np.asarray(s, dtype=float), 0.0), m)

    def Vp(s):
        sp = np.asarray(s, dtype=float)
        return np.where((sp >= 0.0) & (sp < m), 1.0, 0.0)

    return SensitivitySpec("truncated-linear", V, Vp, params=(m,),
                           kinks=(m,), envelope_exponent=1.0)


def tabulated(s_knots, v_knots) -> SensitivitySpec:
    """Piecewise-linear V from user samples; V' is piecewise constant."""
    s = np.asarray(s_knots, dtype=float)
    v = np.asarray(v_knots, dtype=float)
    if s.ndim != 1 or s.shape != v.shape or s.size < 2:
        raise ValueError("tabulated sensitivity needs matching 1D knot arrays")
    if np.any(np.diff(s) <= 0):
        raise ValueError("tabulated knots must be strictly increasing")
    if s[0] > 0:
        s = np.concatenate(([0.0], s))
        v = np.concatenate(([0.0], v))
    if abs(v[0]) > 1e-14:
        raise ValueError("tabulated sensitivity must start from V(0) = 0")
    slopes = np.diff(v) / np.diff(s)

    def V(x):
        return np.interp(np.maximum(np.asarray(x, dtype=float), 0.0), s, v)

    def Vp(x):
        xp = np.maximum(np.asarray(x, dtype=float), 0.0)
        idx = np.clip(np.searchsorted(s, xp, side="right") - 1, 0, slopes.size - 1)
        return np.where(xp >= s[-1], 0.0, slopes[idx])

    return SensitivitySpec("tabulated", V, Vp, params=tuple(s),
                           kinks=tuple(s[1:]))


def check_hypothesis2(spec: SensitivitySpec) -> None:
    """Require V(0) = 0 and V > 0 on the positive sample range."""
    if abs(float(np.asarray(spec.V(0.0)))) > 1e-14:
        raise SensitivityHypothesisError(
            f"{spec.family}: V(0) = {float(np.asarray(spec.V(0.0)))!r}, expected 0"
        )
    vals = np.asarray(spec.V(_SAMPLE_GRID))
    if np.any(vals <= 0.0):
        s_bad = _SAMPLE_GRID[np.argmin(vals)]
        raise SensitivityHypothesisError(
            f"{spec.family}: V is not positive at s = {s_bad:g}"
        )


def derivative_consistency(spec: SensitivitySpec, eps: float = 1e-5) -> float:
    """Max deviation of a central difference from V' on the sample grid.

    Points within 3*eps of a declared kink are skipped: the central
    difference straddles the jump there and measures nothing useful.
    """
    s = _SAMPLE_GRID[_SAMPLE_GRID > 3.0 * eps]  # all families clip at s = 0
    for k in spec.kinks:
        s = s[np.abs(s - k) > 3.0 * eps]
    approx = (np.asarray(spec.V(s + eps)) - np.asarray(spec.V(s - eps))) / (2.0 * eps)
    return float(np.abs(approx - np.asarray(spec.V_prime(s))).max())


@dataclass(frozen=True)
class H1Report:
    """Fitted near-zero growth exponents of V and |V'|."""

    k0: float
    j: float
    passed: bool

    def to_json_dict(self) -> dict:
        return {"k0": self.k0, "j": self.j, "pass": self.passed}


def check_H1(spec: SensitivitySpec, d: int, delta: float,
             slack: float = 0.05) -> H1Report:
    """Estimate growth orders of V and |V'| on (0, delta] by log-log
    least squares and compare against the superlinearity thresholds
    k0 > 1 + d/2 and j > d/2 (slack absorbs fit noise)."""
    if delta <= 0 or delta > 1:
        raise ValueError(f"delta must be in (0, 1], got {delta}")
    s = np.logspace(np.log10(delta / 100.0), np.log10(delta), 50)
    v = np.asarray(spec.V(s))
    if np.any(v <= 0.0):
        raise SensitivityHypothesisError(
            f"{spec.family}: V not positive on ({delta / 100:g}, {delta:g})"
        )
    k0 = float(np.polyfit(np.log(s), np.log(v), 1)[0])
    vp = np.abs(np.asarray(spec.V_prime(s)))
    pos = vp > 0.0
    if not pos.any():
        j = float("inf")  # |V'| identically 0 satisfies any envelope
    else:
        j = float(np.polyfit(np.log(s[pos]), np.log(vp[pos]), 1)[0])
    passed = (k0 > 1.0 + d / 2.0 - slack) and (j > d / 2.0 - slack)
    return H1Report(k0=k0, j=j, passed=passed)


@dataclass(frozen=True)
class EnvelopeReport:
    """Two-sided power envelope constants c_m s^alpha <= V <= C_M s^alpha."""

    c_m: float
    C_M: float
    passed: bool

    def to_json_dict(self) -> dict:
        return {"c_m": self.c_m, "C_M": self.C_M, "pass": self.passed}


def check_growth_envelope(spec: SensitivitySpec, alpha: float,
                          s_max: float) -> EnvelopeReport:
    """Estimate the envelope constants on (0, s_max].

    The ratio V(s)/s^alpha is sampled on two log grids whose lower ends
    differ by two decades; a c_m (or C_M) that keeps shrinking (growing)
    under that refinement signals a vanishing or unbounded envelope and
    fails the check rather than reporting a grid-dependent constant.
    """
    if alpha < 1:
        raise ValueError(f"envelope exponent must be >= 1, got {alpha}")
    if s_max <= 0:
        raise ValueError(f"s_max must be positive, got {s_max}")

    def ratio_extrema(s_floor):
        s = np.logspace(np.log10(s_floor), np.log10(s_max), 400)
        r = np.asarray(spec.V(s)) / s**alpha
        return float(r.min()), float(r.max())

    c_m, C_M = ratio_extrema(1e-8 * min(1.0, s_max))
    c_m_fine, C_M_fine = ratio_extrema(1e-10 * min(1.0, s_max))
    vanishing = c_m_fine < 0.9 * c_m
    unbounded = C_M_fine > 1.1 * C_M
    if vanishing:
        c_m = 0.0
    if unbounded:
        C_M = float("inf")
    passed = (c_m > 0.0) and np.isfinite(C_M) and not vanishing and not unbounded
    return EnvelopeReport(c_m=c_m, C_M=C_M, passed=passed)


def f_g_diagnostics(spec: SensitivitySpec, delta: float) -> dict:
    """Suprema over (0, delta) of V^2 and of
    2*(s - delta)^2 * V'(s)^2 + 2*V(s)^2, on a 10^4-point grid."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    s = np.linspace(delta / 1e4, delta, 10000)
    v2 = np.asarray(spec.V(s)) ** 2
    vp = np.asarray(spec.V_prime(s))
    g_vals = 2.0 * np.minimum(s - delta, 0.0) ** 2 * vp**2 + 2.0 * v2
    return {"f": float(v2.max()), "g": float(g_vals.max())}

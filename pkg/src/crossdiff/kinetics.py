"""Lotka-Volterra competition kinetics: regimes, equilibria, and ODE stability.

Everything here is closed-form 2x2 algebra; no general eigensolver is used,
so results are exactly reproducible and cheap enough for large random sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Relative tolerance at which a competition-ratio equality is treated as a
#: degenerate (no-coexistence) boundary case.
RATIO_TOL = 1e-12

#: Relative tolerance on eigenvalue real parts below which an equilibrium is
#: classified as marginal.
STABILITY_TOL = 1e-12

WEAK = "weak"
STRONG = "strong"
NO_COEXISTENCE = "no_coexistence"

STABLE = "stable"
UNSTABLE = "unstable"
MARGINAL = "marginal"


class RegimeError(ValueError):
    """An operation required a competition regime the parameters do not satisfy."""


@dataclass(frozen=True)
class ReactionParams:
    """Growth/competition rates plus diffusion coefficients.

    r_u, r_v are intrinsic growth rates, r11/r22 intraspecific and r12/r21
    interspecific competition rates. d_u, d_v are the base diffusion
    coefficients and d12 the cross-diffusion coefficient acting on u.
    """

    r_u: float
    r_v: float
    r11: float
    r12: float
    r21: float
    r22: float
    d_u: float = 1.0
    d_v: float = 1.0
    d12: float = 0.0

    def __post_init__(self) -> None:
        for name in ("r_u", "r_v", "r11", "r12", "r21", "r22", "d_u", "d_v"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.d12 < 0.0:
            raise ValueError("d12 must be nonnegative")


@dataclass(frozen=True)
class RegimeClass:
    """Competition-regime tag together with its signed invariants R, S, T."""

    tag: str
    R: float
    S: float
    T: float


@dataclass(frozen=True)
class Equilibrium:
    u: float
    v: float
    kind: str  # "trivial" | "semi_trivial_u" | "semi_trivial_v" | "coexistence"
    stability: str | None = None


def rst(p: ReactionParams) -> tuple[float, float, float]:
    """Signed invariants R = r11 r22 - r12 r21, S = r_v r11 - r_u r21, T = r_u r22 - r_v r12."""
    R = p.r11 * p.r22 - p.r12 * p.r21
    S = p.r_v * p.r11 - p.r_u * p.r21
    T = p.r_u * p.r22 - p.r_v * p.r12
    return R, S, T


def classify_regime(p: ReactionParams, ratio_tol: float = RATIO_TOL) -> RegimeClass:
    """Classify into weak/strong competition or the degenerate boundary.

    Weak means r12/r22 < r_u/r_v < r11/r21 (equivalently R, S, T > 0),
    strong is the reversed chain (R, S, T < 0). Any ratio equality within
    ``ratio_tol`` (relative) counts as degenerate and gets no coexistence.
    """
    R, S, T = rst(p)
    scales = (
        p.r11 * p.r22 + p.r12 * p.r21,
        p.r_v * p.r11 + p.r_u * p.r21,
        p.r_u * p.r22 + p.r_v * p.r12,
    )
    if any(abs(x) <= ratio_tol * s for x, s in zip((R, S, T), scales)):
        tag = NO_COEXISTENCE
    elif R > 0 and S > 0 and T > 0:
        tag = WEAK
    elif R < 0 and S < 0 and T < 0:
        tag = STRONG
    else:
        tag = NO_COEXISTENCE
    return RegimeClass(tag, R, S, T)


def equilibria(p: ReactionParams) -> list[Equilibrium]:
    """All homogeneous steady states of the reaction part.

    The trivial and the two semi-trivial states always exist; the coexistence
    state (T/R, S/R) is returned only in the weak or strong regime, where both
    of its components are positive.
    """
    eqs = [
        Equilibrium(0.0, 0.0, "trivial"),
        Equilibrium(p.r_u / p.r11, 0.0, "semi_trivial_u"),
        Equilibrium(0.0, p.r_v / p.r22, "semi_trivial_v"),
    ]
    reg = classify_regime(p)
    if reg.tag in (WEAK, STRONG):
        eqs.append(Equilibrium(reg.T / reg.R, reg.S / reg.R, "coexistence"))
    return eqs


def coexistence(p: ReactionParams) -> Equilibrium:
    """The coexistence equilibrium, or RegimeError if the regime is degenerate."""
    reg = classify_regime(p)
    if reg.tag == NO_COEXISTENCE:
        raise RegimeError("no coexistence equilibrium: parameters are on a regime boundary")
    return Equilibrium(reg.T / reg.R, reg.S / reg.R, "coexistence")


def reaction(u, v, p: ReactionParams):
    """Reaction rates (f, g). Accepts scalars or numpy arrays."""
    f = u * (p.r_u - p.r11 * u - p.r12 * v)
    g = v * (p.r_v - p.r21 * u - p.r22 * v)
    return f, g


def jacobian(u: float, v: float, p: ReactionParams) -> np.ndarray:
    """Jacobian of the reaction part at (u, v) as a 2x2 array."""
    return np.array(
        [
            [p.r_u - 2.0 * p.r11 * u - p.r12 * v, -p.r12 * u],
            [-p.r21 * v, p.r_v - p.r21 * u - 2.0 * p.r22 * v],
        ]
    )


def max_eigenvalue_real_part(tr: float, det: float) -> float:
    """Largest real part among eigenvalues of a 2x2 matrix with given trace/determinant."""
    disc = tr * tr - 4.0 * det
    if disc >= 0.0:
        return 0.5 * (tr + math.sqrt(disc))
    return 0.5 * tr


def classify_equilibrium(p: ReactionParams, eq: Equilibrium, tol: float = STABILITY_TOL) -> str:
    """Stability tag for an equilibrium of the reaction ODE.

    Stable iff trace < 0 and determinant > 0; an eigenvalue real part within
    ``tol * max(|tr|, sqrt(|det|), 1)`` of zero is reported as marginal.
    """
    jac = jacobian(eq.u, eq.v, p)
    tr = jac[0, 0] + jac[1, 1]
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    mu = max_eigenvalue_real_part(tr, det)
    scale = max(abs(tr), math.sqrt(abs(det)), 1.0)
    if abs(mu) < tol * scale:
        return MARGINAL
    return STABLE if mu < 0.0 else UNSTABLE

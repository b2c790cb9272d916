"""Linear stability of the coexistence state against zero-flux spatial modes.

The mode matrix for wavenumber eigenvalue lam has trace
tr(J*) - (D_u + d_v) lam and determinant a2 lam^2 + b1 lam + c0 with
a2 = d_v D_u, b1 = -D_u J22 - d_v J11 + D_v J21, c0 = det(J*), where
(D_u, D_v) are the partial derivatives of the active diffusivity at the
equilibrium. Instability over some band of lam requires b1 < 0 and
b1^2 > 4 a2 c0; for the avoidance model this reduces to a closed-form
threshold on the cross-diffusion coefficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diffusivity as dv
from .diffusivity import DdsParams, TransitionRates
from .kinetics import (
    WEAK,
    Equilibrium,
    ReactionParams,
    RegimeError,
    classify_regime,
    coexistence,
    jacobian,
)
from .pde import ModelSpec

CATEGORY_REACTION_UNSTABLE = "reaction_unstable"
CATEGORY_ACTIVATOR_INHIBITOR = "activator_inhibitor"
CATEGORY_NON_ACTIVATOR_INHIBITOR = "non_activator_inhibitor"

VERDICT_REQUIRED_INCREASING = "required_increasing"
VERDICT_REQUIRED_DECREASING = "required_decreasing"
VERDICT_ENHANCES = "enhances"
VERDICT_REDUCES = "reduces"
VERDICT_NOT_APPLICABLE = "not_applicable"


def neumann_eigenvalues(length: float, n_max: int) -> np.ndarray:
    """Eigenvalues (n pi / L)^2 of the zero-flux Laplacian on [0, L], n = 0..n_max."""
    if not length > 0:
        raise ValueError("length must be positive")
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    n = np.arange(n_max + 1)
    return (n * np.pi / length) ** 2


@dataclass(frozen=True)
class DispersionCoeffs:
    """Coefficients of the mode determinant a2 lam^2 + b1 lam + c0.

    d1, d2 are the diffusivity partials at the equilibrium and d_v the plain
    diffusion coefficient of v; together with trace_j they determine the full
    mode matrix, not just its determinant.
    """

    a2: float
    b1: float
    c0: float
    d1: float
    d2: float
    d_v: float
    trace_j: float


@dataclass(frozen=True)
class UnstableBand:
    lo: float
    hi: float
    homogeneous_unstable: bool = False


def _diffusivity_gradient(model: ModelSpec, u: float, v: float) -> tuple[float, float]:
    p = model.params
    if model.variant in ("skt_plus_limit", "skt_fast_plus"):
        d1, d2 = dv.grad_d_plus(p, model.rates, u, v)
    elif model.variant in ("skt_minus_limit", "skt_fast_minus"):
        d1, d2 = dv.grad_d_minus(p, model.rates, u, v)
    else:
        d1, d2 = dv.grad_d_dds(model.dds, model.rates, u, v)
    return float(d1), float(d2)


def dispersion_coeffs(model: ModelSpec, eq: Equilibrium) -> DispersionCoeffs:
    """Mode-determinant coefficients at the coexistence equilibrium."""
    if eq.kind != "coexistence":
        raise ValueError("dispersion analysis is defined at the coexistence equilibrium")
    p = model.params
    d1, d2 = _diffusivity_gradient(model, eq.u, eq.v)
    jac = jacobian(eq.u, eq.v, p)
    b1 = -d1 * jac[1, 1] - p.d_v * jac[0, 0] + d2 * jac[1, 0]
    c0 = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    return DispersionCoeffs(
        a2=p.d_v * d1,
        b1=float(b1),
        c0=float(c0),
        d1=d1,
        d2=d2,
        d_v=p.d_v,
        trace_j=float(jac[0, 0] + jac[1, 1]),
    )


def mode_determinant(coeffs: DispersionCoeffs, lam):
    """Determinant of the mode matrix at wavenumber eigenvalue lam."""
    lam = np.asarray(lam, dtype=float)
    return (coeffs.a2 * lam + coeffs.b1) * lam + coeffs.c0


def growth_rate(coeffs: DispersionCoeffs, trace_at_eq: float, lam):
    """Largest eigenvalue real part of the mode matrix at lam (vectorized)."""
    lam = np.asarray(lam, dtype=float)
    tr = trace_at_eq - (coeffs.d1 + coeffs.d_v) * lam
    det = mode_determinant(coeffs, lam)
    disc = tr * tr - 4.0 * det
    root = np.sqrt(np.maximum(disc, 0.0))
    out = np.where(disc >= 0.0, 0.5 * (tr + root), 0.5 * tr)
    return float(out) if out.ndim == 0 else out


def unstable_band(coeffs: DispersionCoeffs) -> UnstableBand | None:
    """Open interval of lam with negative mode determinant, if any.

    With c0 < 0 the homogeneous mode is itself unstable; the band is then
    reported from zero up to the positive root and flagged.
    """
    a2, b1, c0 = coeffs.a2, coeffs.b1, coeffs.c0
    if not a2 > 0:
        raise ValueError("quadratic coefficient must be positive")
    disc = b1 * b1 - 4.0 * a2 * c0
    if c0 < 0.0:
        hi = (-b1 + math.sqrt(disc)) / (2.0 * a2)
        return UnstableBand(0.0, hi, homogeneous_unstable=True)
    if b1 < 0.0 and disc > 0.0:
        root = math.sqrt(disc)
        return UnstableBand((-b1 - root) / (2.0 * a2), (-b1 + root) / (2.0 * a2))
    return None


def _avoidance_setup(p: ReactionParams, rates: TransitionRates):
    reg = classify_regime(p)
    if reg.tag != WEAK:
        raise RegimeError("the avoidance instability threshold is defined in the weak regime")
    eq = coexistence(p)
    phi_star = float(dv.phi(rates, eq.v))
    phip_star = float(dv.phi_prime(rates, eq.v))
    det_j = eq.u * eq.v * reg.R
    alpha = p.r21 * eq.u * phip_star - p.r22 * phi_star
    beta = p.d_u * p.r22 * eq.v + p.d_v * p.r11 * eq.u
    return eq, phi_star, phip_star, det_j, alpha, beta


def avoidance_coeffs_for_d12(p: ReactionParams, rates: TransitionRates, d12: float) -> DispersionCoeffs:
    """Dispersion coefficients of the avoidance model at a given d12."""
    eq = coexistence(p)
    phi_star = float(dv.phi(rates, eq.v))
    phip_star = float(dv.phi_prime(rates, eq.v))
    jac = jacobian(eq.u, eq.v, p)
    d1 = p.d_u + d12 * phi_star
    d2 = d12 * eq.u * phip_star
    b1 = -d1 * jac[1, 1] - p.d_v * jac[0, 0] + d2 * jac[1, 0]
    c0 = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    return DispersionCoeffs(p.d_v * d1, float(b1), float(c0), d1, d2, p.d_v, float(np.trace(jac)))


def avoidance_delta_star(p: ReactionParams, rates: TransitionRates, d12: float) -> float:
    """Band discriminant b1^2 - 4 a2 c0 of the avoidance model, from first principles."""
    c = avoidance_coeffs_for_d12(p, rates, d12)
    return c.b1 * c.b1 - 4.0 * c.a2 * c.c0


@dataclass(frozen=True)
class ThresholdReport:
    """Closed-form avoidance instability threshold in the cross-diffusion coefficient.

    d12_minus/d12_plus are the roots of the band discriminant as a quadratic
    in d12; instability of some heterogeneous mode requires
    d12 > max(tilde_d12, d12_plus) = d12_plus. delta_star_star is the
    (quarter) discriminant of that quadratic; the alternative closed form
    reported alongside differs algebraically and is kept for comparison only.
    """

    alpha: float
    beta: float
    tilde_d12: float
    d12_minus: float
    d12_plus: float
    delta_star_star: float
    delta_star_star_alt: float
    d12: float
    turing_possible: bool
    reason: str
    discrete_modes: tuple[int, ...] | None = None
    discrete_possible: bool | None = None


def turing_threshold_plus(
    p: ReactionParams,
    rates: TransitionRates,
    length: float | None = None,
    n_max: int = 64,
) -> ThresholdReport:
    """Threshold data for the avoidance model (weak regime only).

    If ``length`` is given, the report also states which zero-flux modes of
    that domain fall in the unstable band at the supplied d12.
    """
    eq, phi_star, _, det_j, alpha, beta = _avoidance_setup(p, rates)
    nan = math.nan
    if alpha <= 0.0:
        return ThresholdReport(
            alpha=alpha, beta=beta, tilde_d12=nan, d12_minus=nan, d12_plus=nan,
            delta_star_star=nan, delta_star_star_alt=nan, d12=p.d12,
            turing_possible=False, reason="alpha_nonpositive",
        )
    av = alpha * eq.v
    tilde = beta / av
    # quadratic A x^2 - 2 C x + E in x = d12; larger root first, cancellation-safe
    quad_a = av * av
    quad_c = alpha * beta * eq.v + 2.0 * p.d_v * phi_star * det_j
    quad_e = beta * beta - 4.0 * p.d_u * p.d_v * det_j
    delta2 = quad_c * quad_c - quad_a * quad_e
    d12_plus = (quad_c + math.sqrt(delta2)) / quad_a
    d12_minus = quad_e / (quad_a * d12_plus)
    delta2_alt = (p.d_v * phi_star * det_j) ** 2 + av * (beta * phi_star + p.d_v * av)

    possible = p.d12 > d12_plus
    reason = "d12_above_threshold" if possible else "d12_below_threshold"
    discrete_modes = None
    discrete_possible = None
    if length is not None:
        lams = neumann_eigenvalues(length, n_max)[1:]
        coeffs = avoidance_coeffs_for_d12(p, rates, p.d12)
        inside = mode_determinant(coeffs, lams) < 0.0
        discrete_modes = tuple(int(n) for n in (np.nonzero(inside)[0] + 1))
        discrete_possible = bool(inside.any())
    return ThresholdReport(
        alpha=float(alpha), beta=float(beta), tilde_d12=float(tilde),
        d12_minus=float(d12_minus), d12_plus=float(d12_plus),
        delta_star_star=float(delta2), delta_star_star_alt=float(delta2_alt),
        d12=p.d12, turing_possible=possible, reason=reason,
        discrete_modes=discrete_modes, discrete_possible=discrete_possible,
    )


@dataclass(frozen=True)
class HidingReport:
    """Sign decomposition showing the hiding model cannot destabilize.

    b1 = term_base_v + term_base_u + term_cross with the first two strictly
    positive and the cross term nonnegative, so no mode determinant can turn
    negative regardless of the switching-rate family.
    """

    b1: float
    term_base_v: float
    term_base_u: float
    term_cross: float
    d2_sign: int
    verdict: str = "always_stable"


def hiding_stability_check(p: ReactionParams, rates: TransitionRates) -> HidingReport:
    """Evaluate the hiding-model mode coefficient and its positive decomposition."""
    reg = classify_regime(p)
    if reg.tag != WEAK:
        raise RegimeError("the hiding stability statement is for the weak regime")
    if not p.d12 < p.d_u:
        raise ValueError("hiding model requires d12 < d_u")
    eq = coexistence(p)
    phi_star = float(dv.phi(rates, eq.v))
    phip_star = float(dv.phi_prime(rates, eq.v))
    term_base_v = (p.d_u - p.d12 * phi_star) * p.r22 * eq.v
    term_base_u = p.d_v * p.r11 * eq.u
    term_cross = p.d12 * eq.u * phip_star * p.r21 * eq.v
    d2 = -p.d12 * eq.u * phip_star
    return HidingReport(
        b1=term_base_v + term_base_u + term_cross,
        term_base_v=term_base_v,
        term_base_u=term_base_u,
        term_cross=term_cross,
        d2_sign=int(np.sign(d2)),
    )


@dataclass(frozen=True)
class DdsConditionReport:
    """Necessary-condition check (d_b - d_a) * dQ/dv < 0 at the split equilibrium."""

    lhs: float
    satisfied: bool
    q3: float
    u_a: float
    u_b: float


def dds_necessary_condition(dp: DdsParams, rates: TransitionRates, eq: Equilibrium) -> DdsConditionReport:
    """Evaluate the implicit-split necessary condition for instability at eq."""
    if eq.kind != "coexistence":
        raise ValueError("the condition is evaluated at the coexistence equilibrium")
    part = dv.dds_partition(dp, rates, eq.u, eq.v)
    _, _, q3 = dv.dds_q_gradient(dp, rates, part.u_a, part.u_b, eq.v)
    lhs = (dp.d_b - dp.d_a) * float(q3)
    return DdsConditionReport(lhs=lhs, satisfied=lhs < 0.0, q3=float(q3), u_a=part.u_a, u_b=part.u_b)


@dataclass(frozen=True)
class SignStructure:
    """Classification of a Jacobian sign pattern against cross-diffusion."""

    signs: tuple[int, int, int, int]  # (J11, J12, J21, J22)
    d2_sign: int
    category: str
    cross_diffusion_verdict: str


_SIGN_MAP = {"+": 1, "-": -1, "−": -1, 1: 1, -1: -1, 1.0: 1, -1.0: -1}
_D2_MAP = {"+": 1, "-": -1, "−": -1, "0": 0, 0: 0, 1: 1, -1: -1, 0.0: 0, 1.0: 1, -1.0: -1}


def sign_classify(signs, d2_sign) -> SignStructure:
    """Classify a strict sign pattern of the 2x2 reaction Jacobian.

    Patterns whose trace cannot be negative or whose determinant cannot be
    positive are reaction-unstable. Among the rest, mixed-diagonal patterns
    are the classical activator-inhibitor ones (plain diffusion can already
    destabilize; cross-diffusion enhances or reduces that, depending on the
    sign of its v-derivative against J21). Both-diagonal-negative patterns
    need cross-diffusion with a definite v-monotonicity to destabilize:
    increasing when J21 < 0, decreasing when J21 > 0.
    """
    try:
        s = tuple(_SIGN_MAP[x] for x in signs)
    except (KeyError, TypeError):
        raise ValueError("signs must be four entries from {+, -} (zero not allowed)")
    if len(s) != 4:
        raise ValueError("signs must have exactly four entries (J11, J12, J21, J22)")
    try:
        d2 = _D2_MAP[d2_sign]
    except (KeyError, TypeError):
        raise ValueError("d2_sign must be one of {+, -, 0}")
    s11, s12, s21, s22 = s

    if s11 > 0 and s22 > 0:
        category = CATEGORY_REACTION_UNSTABLE  # trace cannot be negative
    elif s11 * s22 < 0:
        if s12 * s21 < 0:
            category = CATEGORY_ACTIVATOR_INHIBITOR
        else:
            category = CATEGORY_REACTION_UNSTABLE  # determinant cannot be positive
    else:
        category = CATEGORY_NON_ACTIVATOR_INHIBITOR

    if category == CATEGORY_REACTION_UNSTABLE:
        verdict = VERDICT_NOT_APPLICABLE
    elif category == CATEGORY_NON_ACTIVATOR_INHIBITOR:
        verdict = VERDICT_REQUIRED_INCREASING if s21 < 0 else VERDICT_REQUIRED_DECREASING
    elif d2 == 0:
        verdict = VERDICT_NOT_APPLICABLE
    else:
        verdict = VERDICT_ENHANCES if d2 * s21 < 0 else VERDICT_REDUCES
    return SignStructure(signs=s, d2_sign=d2, category=category, cross_diffusion_verdict=verdict)

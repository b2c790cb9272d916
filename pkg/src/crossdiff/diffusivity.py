"""Transition-rate families, the induced switching fraction, and diffusivities.

Three diffusivity functions are provided: the avoidance form
``D_plus = u (d_u + d12 phi(v))``, the hiding form ``D_minus = u (d_u - d12 phi(v))``
with ``d12 < d_u``, and the implicit sub-population form
``D_dds = d_a u_a + d_b u_b`` where (u_a, u_b) solves a scalar monotone
balance equation at each (u, v).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .kinetics import ReactionParams

#: Residual tolerance factor guaranteed by the partition solver.
PARTITION_TOL = 1e-12

_MAX_ITER = 100


class PartitionConvergenceError(RuntimeError):
    """The implicit sub-population solve failed to converge (invalid rate family?)."""


@dataclass(frozen=True)
class TransitionRates:
    """A (h, k) transition-rate family with analytic derivatives.

    ``v_max`` bounds the admissible argument for families whose definition is
    only valid on a finite range (the linear avoidance family, tabulated
    families); evaluation outside [v_min, v_max] through phi() raises.
    """

    family: str
    params: dict
    h: Callable = field(repr=False, compare=False)
    k: Callable = field(repr=False, compare=False)
    h_prime: Callable = field(repr=False, compare=False)
    k_prime: Callable = field(repr=False, compare=False)
    v_min: float = 0.0
    v_max: float | None = None


def skt_linear(m: float) -> TransitionRates:
    """Linear switching rates h = v/m, k = 1 - v/m on [0, m]; phi(v) = v/m."""
    if not m > 0:
        raise ValueError("m must be strictly positive")
    return TransitionRates(
        family="skt_linear",
        params={"m": m},
        h=lambda w: np.asarray(w, dtype=float) / m,
        k=lambda w: 1.0 - np.asarray(w, dtype=float) / m,
        h_prime=lambda w: np.full_like(np.asarray(w, dtype=float), 1.0 / m),
        k_prime=lambda w: np.full_like(np.asarray(w, dtype=float), -1.0 / m),
        v_max=m,
    )


def affine(a0: float, b0: float) -> TransitionRates:
    """Affine rates h = a0 + w, k = b0 + w (both increasing, bounded below)."""
    if not (a0 > 0 and b0 > 0):
        raise ValueError("affine offsets must be strictly positive")
    return TransitionRates(
        family="affine",
        params={"a0": a0, "b0": b0},
        h=lambda w: a0 + np.asarray(w, dtype=float),
        k=lambda w: b0 + np.asarray(w, dtype=float),
        h_prime=lambda w: np.ones_like(np.asarray(w, dtype=float)),
        k_prime=lambda w: np.ones_like(np.asarray(w, dtype=float)),
    )


def power_law(a0: float, b0: float, p: float, q: float) -> TransitionRates:
    """Power-law rates h = (a0 + w)^p, k = (b0 + w)^q with 0 < p <= q.

    Only the exponent ordering is enforced; narrower restrictions needed by
    any particular analysis are left to the caller.
    """
    if not a0 > 0:
        raise ValueError("a0 must be strictly positive")
    if b0 < 0:
        raise ValueError("b0 must be nonnegative")
    if not (0 < p <= q):
        raise ValueError("exponents must satisfy 0 < p <= q")
    return TransitionRates(
        family="power_law",
        params={"a0": a0, "b0": b0, "p": p, "q": q},
        h=lambda w: (a0 + np.asarray(w, dtype=float)) ** p,
        k=lambda w: (b0 + np.asarray(w, dtype=float)) ** q,
        h_prime=lambda w: p * (a0 + np.asarray(w, dtype=float)) ** (p - 1.0),
        k_prime=lambda w: q * (b0 + np.asarray(w, dtype=float)) ** (q - 1.0),
    )


def custom(w: np.ndarray, h_values: np.ndarray, k_values: np.ndarray) -> TransitionRates:
    """Tabulated rates interpolated with a monotone piecewise cubic.

    The interpolant preserves the monotonic shape of the tables, so sign
    constraints on h' and k' carry over from the data. Evaluation is limited
    to the tabulated range.
    """
    w = np.asarray(w, dtype=float)
    hv = np.asarray(h_values, dtype=float)
    kv = np.asarray(k_values, dtype=float)
    if w.ndim != 1 or len(w) < 2 or np.any(np.diff(w) <= 0):
        raise ValueError("w must be a strictly increasing 1D table with at least 2 points")
    if hv.shape != w.shape or kv.shape != w.shape:
        raise ValueError("h_values and k_values must match w in shape")
    if np.any(hv < 0) or np.any(kv < 0):
        raise ValueError("tabulated rates must be nonnegative")
    h_ip = PchipInterpolator(w, hv)
    k_ip = PchipInterpolator(w, kv)
    return TransitionRates(
        family="custom",
        params={"w": w.tolist(), "h": hv.tolist(), "k": kv.tolist()},
        h=h_ip,
        k=k_ip,
        h_prime=h_ip.derivative(),
        k_prime=k_ip.derivative(),
        v_min=float(w[0]),
        v_max=float(w[-1]),
    )


def check_skt_admissible(rates: TransitionRates, v_hi: float | None = None, samples: int = 101) -> None:
    """Verify by sampling that 0 < h, k <= 1 with h nondecreasing and k nonincreasing.

    Endpoints are excluded so families that vanish exactly at the boundary of
    their range (like the linear one) pass.
    """
    hi = v_hi if v_hi is not None else rates.v_max
    if hi is None:
        raise ValueError("an upper sampling bound is required for an unbounded family")
    tol = 1e-9
    w = np.linspace(rates.v_min, hi, samples + 2)[1:-1]
    h, k = np.asarray(rates.h(w)), np.asarray(rates.k(w))
    hp, kp = np.asarray(rates.h_prime(w)), np.asarray(rates.k_prime(w))
    if np.any(h <= 0) or np.any(k <= 0) or np.any(h > 1 + tol) or np.any(k > 1 + tol):
        raise ValueError("rates must take values in (0, 1] on the sampled range")
    if np.any(hp < -tol) or np.any(kp > tol):
        raise ValueError("avoidance/hiding families need h nondecreasing and k nonincreasing")


def check_dds_admissible(rates: TransitionRates, w_hi: float = 100.0, samples: int = 101) -> None:
    """Verify by sampling that h, k are positive, bounded below, and increasing."""
    tol = 1e-9
    w = np.linspace(0.0, w_hi, samples)
    h, k = np.asarray(rates.h(w)), np.asarray(rates.k(w))
    hp, kp = np.asarray(rates.h_prime(w)), np.asarray(rates.k_prime(w))
    if np.any(h <= 0) or np.any(k <= 0):
        raise ValueError("sub-population rates must be strictly positive")
    if np.any(hp < -tol) or np.any(kp < -tol):
        raise ValueError("sub-population rates must both be increasing")


def _check_domain(rates: TransitionRates, v) -> None:
    v = np.asarray(v, dtype=float)
    slack = 1e-12 * max(1.0, abs(rates.v_max)) if rates.v_max is not None else 0.0
    if np.any(v < rates.v_min - 1e-12 * max(1.0, abs(rates.v_min))):
        raise ValueError(f"argument below admissible range [{rates.v_min}, {rates.v_max}]")
    if rates.v_max is not None and np.any(v > rates.v_max + slack):
        raise ValueError(f"argument above admissible range [{rates.v_min}, {rates.v_max}]")


def phi(rates: TransitionRates, v):
    """Switching fraction h / (h + k)."""
    _check_domain(rates, v)
    h = rates.h(v)
    k = rates.k(v)
    return h / (h + k)


def phi_prime(rates: TransitionRates, v):
    """Derivative of the switching fraction, (h' k - h k') / (h + k)^2."""
    _check_domain(rates, v)
    h, k = rates.h(v), rates.k(v)
    hp, kp = rates.h_prime(v), rates.k_prime(v)
    return (hp * k - h * kp) / (h + k) ** 2


def d_plus(p: ReactionParams, rates: TransitionRates, u, v):
    """Avoidance diffusivity u (d_u + d12 phi(v))."""
    return u * (p.d_u + p.d12 * phi(rates, v))


def grad_d_plus(p: ReactionParams, rates: TransitionRates, u, v):
    """Partial derivatives (d/du, d/dv) of the avoidance diffusivity."""
    return p.d_u + p.d12 * phi(rates, v), p.d12 * u * phi_prime(rates, v)


def _require_hiding(p: ReactionParams) -> None:
    if not p.d12 < p.d_u:
        raise ValueError("hiding diffusivity requires d12 < d_u")


def d_minus(p: ReactionParams, rates: TransitionRates, u, v):
    """Hiding diffusivity u (d_u - d12 phi(v)); requires d12 < d_u."""
    _require_hiding(p)
    return u * (p.d_u - p.d12 * phi(rates, v))


def grad_d_minus(p: ReactionParams, rates: TransitionRates, u, v):
    """Partial derivatives (d/du, d/dv) of the hiding diffusivity."""
    _require_hiding(p)
    return p.d_u - p.d12 * phi(rates, v), -p.d12 * u * phi_prime(rates, v)


@dataclass(frozen=True)
class DdsParams:
    """Coupling weights and sub-population diffusion coefficients."""

    a: float
    b: float
    d: float
    c: float = 0.0
    d_a: float = 1.0
    d_b: float = 1.0

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.b > 0 and self.d > 0):
            raise ValueError("a, b, d must be strictly positive")
        if self.c < 0:
            raise ValueError("c must be nonnegative")
        if not (self.d_a > 0 and self.d_b > 0):
            raise ValueError("d_a, d_b must be strictly positive")


@dataclass(frozen=True)
class Partition:
    """Sub-population split of u at a point, with solver diagnostics."""

    u_a: float
    u_b: float
    residual: float
    iterations: int


def _balance(dp: DdsParams, rates: TransitionRates, u, v, x):
    """Residual k(b x + d v) x - h(a (u - x) + c v) (u - x) of the split equation."""
    return rates.k(dp.b * x + dp.d * v) * x - rates.h(dp.a * (u - x) + dp.c * v) * (u - x)


def _balance_slope(dp: DdsParams, rates: TransitionRates, u, v, x):
    arg_k = dp.b * x + dp.d * v
    arg_h = dp.a * (u - x) + dp.c * v
    return (
        rates.k(arg_k)
        + dp.b * x * rates.k_prime(arg_k)
        + rates.h(arg_h)
        + dp.a * (u - x) * rates.h_prime(arg_h)
    )


def solve_partition_grid(
    dp: DdsParams,
    rates: TransitionRates,
    u: np.ndarray,
    v: np.ndarray,
    x0: np.ndarray | None = None,
    max_iter: int = _MAX_ITER,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Vectorized safeguarded Newton for the sub-population split on a grid.

    The balance residual is strictly increasing in x on [0, u] with opposite
    signs at the ends, so bisection fallback guarantees convergence. Iterates
    are polished well past the guaranteed tolerance so that downstream
    finite-difference checks are not limited by solver noise.

    Returns (u_b, residual, iterations); raises PartitionConvergenceError with
    the offending flat index if the guaranteed tolerance is not met.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(u < 0) or np.any(v < 0):
        raise ValueError("densities must be nonnegative")
    u, v = np.broadcast_arrays(u, v)

    scale = np.maximum(1.0, u * np.asarray(rates.h(dp.a * u + dp.c * v), dtype=float))
    tol = PARTITION_TOL * scale
    tight = 64.0 * np.finfo(float).eps * scale

    lo = np.zeros_like(u)
    hi = u.copy()
    if x0 is None:
        h0 = np.asarray(rates.h(dp.a * u + dp.c * v), dtype=float)
        k0 = np.asarray(rates.k(dp.d * v), dtype=float)
        x = u * h0 / (h0 + k0)
    else:
        x = np.clip(np.asarray(x0, dtype=float).copy(), lo, hi)

    iterations = 0
    for iterations in range(1, max_iter + 1):
        f = np.asarray(_balance(dp, rates, u, v, x), dtype=float)
        done = (np.abs(f) <= tight) | (hi - lo <= 4.0 * np.finfo(float).eps * np.maximum(u, 1.0))
        if np.all(done):
            break
        pos = f > 0
        hi = np.where(pos & ~done, x, hi)
        lo = np.where(~pos & ~done, x, lo)
        slope = np.asarray(_balance_slope(dp, rates, u, v, x), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - f / slope
        bad = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi)
        step = np.where(bad, 0.5 * (lo + hi), newton)
        x = np.where(done, x, step)

    residual = np.abs(np.asarray(_balance(dp, rates, u, v, x), dtype=float))
    if np.any(residual > tol):
        idx = int(np.argmax(residual / tol))
        raise PartitionConvergenceError(
            f"split solve did not converge at flat index {idx} "
            f"(residual {residual.flat[idx]:.3e}, tol {tol.flat[idx]:.3e})"
        )
    return x, residual, iterations


def dds_partition(dp: DdsParams, rates: TransitionRates, u: float, v: float) -> Partition:
    """Unique split (u_a, u_b) of u with the switching fluxes in balance."""
    if u == 0.0:
        return Partition(0.0, 0.0, 0.0, 0)
    x, residual, iterations = solve_partition_grid(dp, rates, np.asarray(u, float), np.asarray(v, float))
    u_b = float(x)
    return Partition(float(u) - u_b, u_b, float(residual), iterations)


def dds_q_gradient(dp: DdsParams, rates: TransitionRates, u_a, u_b, v):
    """Partials of the switching balance with respect to (u_a, u_b, v)."""
    arg_h = dp.a * u_a + dp.c * v
    arg_k = dp.b * u_b + dp.d * v
    h, hp = rates.h(arg_h), rates.h_prime(arg_h)
    k, kp = rates.k(arg_k), rates.k_prime(arg_k)
    q1 = -(h + dp.a * u_a * hp)
    q2 = k + dp.b * u_b * kp
    q3 = dp.d * u_b * kp - dp.c * u_a * hp
    return q1, q2, q3


def dds_partials(
    dp: DdsParams,
    rates: TransitionRates,
    u: float,
    v: float,
    part: Partition | None = None,
) -> tuple[float, float, float, float]:
    """Implicit-function derivatives (du_b/du, du_b/dv, du_a/du, du_a/dv) of the split."""
    if part is None:
        part = dds_partition(dp, rates, u, v)
    q1, q2, q3 = dds_q_gradient(dp, rates, part.u_a, part.u_b, v)
    den = q2 - q1  # strictly positive for admissible families
    d1_ub = -q1 / den
    d2_ub = -q3 / den
    return float(d1_ub), float(d2_ub), float(1.0 - d1_ub), float(-d2_ub)


def d_dds(
    dp: DdsParams,
    rates: TransitionRates,
    u: float,
    v: float,
    part: Partition | None = None,
) -> float:
    """Sub-population diffusivity d_a u_a + d_b u_b at the balanced split."""
    if part is None:
        part = dds_partition(dp, rates, u, v)
    return dp.d_a * part.u_a + dp.d_b * part.u_b


def grad_d_dds(
    dp: DdsParams,
    rates: TransitionRates,
    u: float,
    v: float,
    part: Partition | None = None,
) -> tuple[float, float]:
    """Partial derivatives (d/du, d/dv) of the sub-population diffusivity."""
    d1_ub, d2_ub, _, _ = dds_partials(dp, rates, u, v, part)
    return dp.d_a + (dp.d_b - dp.d_a) * d1_ub, (dp.d_b - dp.d_a) * d2_ub

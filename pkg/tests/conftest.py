import numpy as np
import pytest

from crossdiff import ReactionParams


@pytest.fixture
def weak_witness() -> ReactionParams:
    return ReactionParams(r_u=3, r_v=1, r11=4, r12=1, r21=1, r22=1, d_u=1, d_v=1, d12=150)


@pytest.fixture
def strong_witness() -> ReactionParams:
    return ReactionParams(r_u=1, r_v=1, r11=1, r12=2, r21=2, r22=1, d_u=1, d_v=1, d12=0)


def random_regime_params(rng: np.random.Generator, regime: str, d12: float = 0.0,
                         margin_lo: float = 1.2, margin_hi: float = 3.0) -> ReactionParams:
    """Random parameters in the requested regime, built from the ratio chain.

    The three ratios r12/r22, r_u/r_v, r11/r21 are placed with multiplicative
    margins of at least margin_lo, so the draw is never near a boundary.
    """
    r_v = rng.uniform(0.3, 3.0)
    r21 = rng.uniform(0.3, 3.0)
    r22 = rng.uniform(0.3, 3.0)
    mid = rng.uniform(0.4, 2.5)
    m1 = rng.uniform(margin_lo, margin_hi)
    m2 = rng.uniform(margin_lo, margin_hi)
    if regime == "weak":
        lo, hi = mid / m1, mid * m2
        r12 = lo * r22
        r11 = hi * r21
    elif regime == "strong":
        lo, hi = mid / m1, mid * m2
        r11 = lo * r21
        r12 = hi * r22
    else:
        raise ValueError(regime)
    return ReactionParams(r_u=mid * r_v, r_v=r_v, r11=r11, r12=r12, r21=r21, r22=r22,
                          d_u=1.0, d_v=1.0, d12=d12)

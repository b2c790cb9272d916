import math

import numpy as np
import pytest

from crossdiff import (
    ReactionParams,
    classify_equilibrium,
    classify_regime,
    coexistence,
    equilibria,
    jacobian,
    reaction,
    rst,
)
from crossdiff.kinetics import RegimeError

from conftest import random_regime_params


def test_rst_near_decoupled_logistic():
    # vanishing interspecific coupling: the invariants collapse to (1, 1, 1)
    R, S, T = rst(ReactionParams(1, 1, 1, 1e-12, 1e-12, 1))
    assert R == pytest.approx(1.0)
    assert S == pytest.approx(1.0)
    assert T == pytest.approx(1.0)


def test_rst_weak_witness(weak_witness):
    assert rst(weak_witness) == (3.0, 1.0, 2.0)


def test_rst_strong_witness(strong_witness):
    assert rst(strong_witness) == (-3.0, -1.0, -1.0)


def test_classify_regime_witnesses(weak_witness, strong_witness):
    assert classify_regime(weak_witness).tag == "weak"
    assert classify_regime(strong_witness).tag == "strong"
    degenerate = ReactionParams(1, 1, 1, 1, 1, 1)
    assert classify_regime(degenerate).tag == "no_coexistence"


def test_params_validation():
    with pytest.raises(ValueError):
        ReactionParams(0, 1, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        ReactionParams(1, 1, 1, 1, 1, 1, d12=-0.1)


def test_equilibria_weak_witness(weak_witness):
    eqs = {e.kind: e for e in equilibria(weak_witness)}
    assert set(eqs) == {"trivial", "semi_trivial_u", "semi_trivial_v", "coexistence"}
    assert eqs["semi_trivial_u"].u == pytest.approx(3 / 4)
    assert eqs["semi_trivial_v"].v == pytest.approx(1.0)
    assert eqs["coexistence"].u == pytest.approx(2 / 3)
    assert eqs["coexistence"].v == pytest.approx(1 / 3)


def test_equilibria_degenerate_has_three():
    eqs = equilibria(ReactionParams(1, 1, 1, 1, 1, 1))
    assert len(eqs) == 3
    with pytest.raises(RegimeError):
        coexistence(ReactionParams(1, 1, 1, 1, 1, 1))


def test_reaction_zero_at_origin(weak_witness):
    assert reaction(0.0, 0.0, weak_witness) == (0.0, 0.0)


def test_reaction_vanishes_at_equilibria(weak_witness, strong_witness):
    for p in (weak_witness, strong_witness):
        for eq in equilibria(p):
            f, g = reaction(eq.u, eq.v, p)
            scale = max(1.0, eq.u, eq.v)
            assert abs(f) <= 1e-12 * scale
            assert abs(g) <= 1e-12 * scale


def test_reaction_semi_trivial_value():
    p = ReactionParams(3, 1, 4, 1, 1, 1)
    f, g = reaction(1.0, 0.0, p)
    assert f == pytest.approx(-1.0)
    assert g == 0.0


def test_jacobian_at_coexistence(weak_witness):
    eq = coexistence(weak_witness)
    jac = jacobian(eq.u, eq.v, weak_witness)
    expected = np.array([[-8 / 3, -2 / 3], [-1 / 3, -1 / 3]])
    assert np.allclose(jac, expected, rtol=1e-14)


def test_jacobian_at_origin(weak_witness):
    jac = jacobian(0.0, 0.0, weak_witness)
    assert np.allclose(jac, np.diag([weak_witness.r_u, weak_witness.r_v]))


def test_jacobian_matches_finite_differences(weak_witness):
    rng = np.random.default_rng(7)
    for _ in range(100):
        u, v = rng.uniform(0.0, 3.0, 2)
        step = 1e-6 * max(1.0, abs(u), abs(v))
        jac = jacobian(u, v, weak_witness)
        fd = np.empty((2, 2))
        for col, (du, dvv) in enumerate(((step, 0.0), (0.0, step))):
            fp = reaction(u + du, v + dvv, weak_witness)
            fm = reaction(u - du, v - dvv, weak_witness)
            fd[0, col] = (fp[0] - fm[0]) / (2 * step)
            fd[1, col] = (fp[1] - fm[1]) / (2 * step)
        assert np.allclose(jac, fd, rtol=1e-6, atol=1e-9)


def test_stability_weak_witness(weak_witness):
    tags = {e.kind: classify_equilibrium(weak_witness, e) for e in equilibria(weak_witness)}
    assert tags["trivial"] == "unstable"
    assert tags["semi_trivial_u"] == "unstable"
    assert tags["semi_trivial_v"] == "unstable"
    assert tags["coexistence"] == "stable"


def test_stability_strong_witness(strong_witness):
    tags = {e.kind: classify_equilibrium(strong_witness, e) for e in equilibria(strong_witness)}
    assert tags["trivial"] == "unstable"
    assert tags["semi_trivial_u"] == "stable"
    assert tags["semi_trivial_v"] == "stable"
    assert tags["coexistence"] == "unstable"


def test_degenerate_semi_trivial_is_marginal():
    p = ReactionParams(1, 1, 1, 1, 1, 1)
    eqs = {e.kind: e for e in equilibria(p)}
    assert classify_equilibrium(p, eqs["semi_trivial_u"]) == "marginal"


def test_regime_sign_test_matches_ratio_test():
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        regime = "weak" if rng.uniform() < 0.5 else "strong"
        p = random_regime_params(rng, regime)
        reg = classify_regime(p)
        assert reg.tag == regime
        ratios = (p.r12 / p.r22, p.r_u / p.r_v, p.r11 / p.r21)
        if regime == "weak":
            assert ratios[0] < ratios[1] < ratios[2]
            assert reg.R > 0 and reg.S > 0 and reg.T > 0
        else:
            assert ratios[2] < ratios[1] < ratios[0]
            assert reg.R < 0 and reg.S < 0 and reg.T < 0


def test_coexistence_trace_det_signs():
    rng = np.random.default_rng(13)
    for _ in range(500):
        regime = "weak" if rng.uniform() < 0.5 else "strong"
        p = random_regime_params(rng, regime)
        reg = classify_regime(p)
        eq = coexistence(p)
        jac = jacobian(eq.u, eq.v, p)
        tr = jac[0, 0] + jac[1, 1]
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        assert tr < 0
        assert det == pytest.approx(eq.u * eq.v * reg.R, rel=1e-9)
        assert det == pytest.approx(reg.S * reg.T / reg.R, rel=1e-9)
        assert (det > 0) == (regime == "weak")

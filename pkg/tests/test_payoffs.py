import numpy as np
import pytest

from rough_heston.grid import make_uniform_grid
from rough_heston.payoffs import (AsianCall, EuropeanCall, LookbackCall, VarianceCall,
                                  VarianceSwap, evaluate, payoff_from_spec)

G = make_uniform_grid(4, 1.0)


def _paths(seed=0, m=200):
    rng = np.random.default_rng(seed)
    S = np.exp(np.cumsum(np.c_[np.zeros(m), 0.2 * rng.standard_normal((m, 4))], axis=1))
    X = np.cumsum(np.c_[np.zeros(m), 0.01 * rng.standard_normal((m, 4)) + 0.004], axis=1)
    return S, X


def test_at_the_money_european_is_zero():
    assert evaluate(EuropeanCall(1.0), [1.2, 0.8, 1.1, 0.9, 1.0], np.zeros(5), G) == 0.0


def test_zero_strike_lookback_is_the_maximum():
    S, X = _paths()
    np.testing.assert_array_equal(evaluate(LookbackCall(0.0), S, X, G), S.max(axis=1))
    assert evaluate(LookbackCall(0.0), [3.0, 1, 1, 1, 1], np.zeros(5), G) == 3.0


def test_asian_constant_path():
    assert evaluate(AsianCall(1.5), np.full(5, 1.5), np.zeros(5), G) == 0.0
    assert evaluate(AsianCall(1.0), np.full(5, 1.5), np.zeros(5), G) == pytest.approx(0.5)


def test_asian_uses_right_endpoints():
    S = np.array([100.0, 1.0, 1.0, 1.0, 1.0])
    assert evaluate(AsianCall(0.0), S, np.zeros(5), G) == pytest.approx(1.0)


def test_variance_payoffs():
    X = np.array([0.0, 0.01, 0.02, 0.015, 0.03])
    assert evaluate(VarianceSwap(), np.ones(5), X, G) == 0.03
    assert evaluate(VarianceCall(0.02), np.ones(5), X, G) == pytest.approx(0.01)
    assert evaluate(VarianceSwap(), np.ones(5), -X, G) == -0.03  # not floored


def test_lookback_dominates_european_and_all_nonnegative():
    S, X = _paths(1)
    for K in (0.5, 1.0, 1.5):
        lb, eu = LookbackCall(K)(S, X, G), EuropeanCall(K)(S, X, G)
        assert np.all(lb >= eu)
        for p in (EuropeanCall(K), AsianCall(K), LookbackCall(K), VarianceCall(0.01)):
            assert np.all(p(S, X, G) >= 0)


def test_asian_invariant_under_interior_permutation():
    S, X = _paths(2)
    rng = np.random.default_rng(0)
    perm = np.r_[0, 1 + rng.permutation(4)]
    np.testing.assert_allclose(AsianCall(1.0)(S[:, perm], X, G), AsianCall(1.0)(S, X, G),
                               rtol=1e-14, atol=1e-15)


def test_shape_validation_and_strikes():
    with pytest.raises(ValueError):
        evaluate(EuropeanCall(1.0), np.ones(4), np.zeros(4), G)
    with pytest.raises(ValueError):
        EuropeanCall(-1.0)


def test_spec_construction():
    assert payoff_from_spec({"type": "variance_call"}, V0=0.02) == VarianceCall(0.02)
    assert payoff_from_spec({"type": "asian_call", "strike": 1.1}, 0.02) == AsianCall(1.1)
    assert isinstance(payoff_from_spec({"type": "variance_swap"}, 0.02), VarianceSwap)
    with pytest.raises(ValueError):
        payoff_from_spec({"type": "variance_call", "strike": 0.03}, 0.02)
    with pytest.raises(ValueError):
        payoff_from_spec({"type": "variance_swap", "strike": 1.0}, 0.02)
    with pytest.raises(ValueError):
        payoff_from_spec({"type": "european_call"}, 0.02)

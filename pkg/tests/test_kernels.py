import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from rough_heston.grid import make_grid, make_uniform_grid
from rough_heston.kernels import (ExponentiallyDamped, FractionalPowerLaw, LogKernel,
                                  ProductKernel, SumKernel, evaluate,
                                  exact_linear_drift_convolution, kernel_from_spec,
                                  power_law_resolvent, precompute_weights, verify_regularity)

GAMMA_06 = 1.4891922488128171  # Gamma(0.6), tabulated value

KERNELS = [
    FractionalPowerLaw(c=1.3, H=0.1),
    FractionalPowerLaw(c=1.0, H=0.5),
    ExponentiallyDamped(c=1.0, beta=1.0, H=0.1),
    ExponentiallyDamped(c=0.7, beta=0.0, H=0.3),
    LogKernel(),
    SumKernel((FractionalPowerLaw(c=1.0, H=0.2), LogKernel())),
    ProductKernel(FractionalPowerLaw(c=1.0, H=0.3), LogKernel()),
]


def test_constant_kernel_is_one():
    assert evaluate(FractionalPowerLaw(c=1.0, H=0.5), 0.73) == 1.0


def test_gamma_normalized_at_one():
    k = FractionalPowerLaw.gamma_normalized(0.1)
    assert evaluate(k, 1.0) == pytest.approx(1.0 / GAMMA_06, rel=1e-14)
    assert evaluate(k, 1.0) == pytest.approx(0.671505, abs=5e-7)
    # the normalisation of the first primitive, 1/Gamma(1.6), is a different number
    assert k.integrated(1.0) == pytest.approx(1.119175, abs=5e-7)


def test_log_kernel_value():
    assert evaluate(LogKernel(), 1.0) == pytest.approx(math.log(1.5), rel=1e-15)
    assert evaluate(LogKernel(), 1.0) == pytest.approx(0.405465, abs=5e-7)


@pytest.mark.parametrize("t", [0.0, -1.0])
def test_nonpositive_time_is_a_domain_error(t):
    with pytest.raises(ValueError):
        evaluate(FractionalPowerLaw(c=1.0, H=0.1), t)


def test_power_law_rejects_bad_parameters():
    with pytest.raises(ValueError):
        FractionalPowerLaw(c=1.0, H=0.7)
    with pytest.raises(ValueError):
        FractionalPowerLaw(c=0.0, H=0.1)


def test_hurst_of_compositions_is_the_minimum():
    s = SumKernel((FractionalPowerLaw(c=1.0, H=0.2), FractionalPowerLaw(c=1.0, H=0.4)))
    p = ProductKernel(FractionalPowerLaw(c=1.0, H=0.3), ExponentiallyDamped(1.0, 2.0, 0.15))
    assert s.hurst_exponent == 0.2
    assert p.hurst_exponent == 0.15


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: type(k).__name__)
@settings(max_examples=60, deadline=None)
@given(s=st.floats(1e-6, 5.0), frac=st.floats(1e-6, 1.0))
def test_nonincreasing_and_finite(kernel, s, frac):
    t = s + frac * 3.0
    ks, kt = evaluate(kernel, s), evaluate(kernel, t)
    assert np.isfinite(ks) and np.isfinite(kt)
    assert kt >= 0.0
    assert kt <= ks * (1 + 1e-14)


@settings(max_examples=100, deadline=None)
@given(H=st.floats(0.01, 0.5), a=st.floats(1e-3, 1e3), t=st.floats(1e-4, 10.0))
def test_power_law_scaling(H, a, t):
    k = FractionalPowerLaw(c=1.0, H=H)
    assert evaluate(k, a * t) == pytest.approx(a ** (H - 0.5) * evaluate(k, t), rel=1e-12)


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: type(k).__name__)
def test_primitives_match_quadrature(kernel):
    for t in (0.1, 0.7, 2.0):
        k1, _ = integrate.quad(kernel, 0, t, limit=200, points=[t * 1e-6, t * 1e-3])
        k2, _ = integrate.quad(lambda s: (t - s) * kernel(s), 0, t, limit=200,
                               points=[t * 1e-6, t * 1e-3])
        assert kernel.integrated(t) == pytest.approx(k1, rel=1e-7)
        assert kernel.double_integrated(t) == pytest.approx(k2, rel=1e-7)


class TestWeights:
    def test_constant_kernel_all_ones(self):
        w = precompute_weights(FractionalPowerLaw(c=1.0, H=0.5), make_uniform_grid(2, 1.0))
        assert [w[1, 0], w[2, 0], w[2, 1]] == [1.0, 1.0, 1.0]

    def test_gamma_kernel_two_steps(self):
        k = FractionalPowerLaw(c=1.0 / GAMMA_06, H=0.1)
        w = precompute_weights(k, make_uniform_grid(2, 1.0))
        assert w[1, 0] == pytest.approx(0.5 ** -0.4 / GAMMA_06, rel=1e-14)
        assert w[2, 1] == w[1, 0]
        assert w[2, 0] == pytest.approx(1.0 / GAMMA_06, rel=1e-14)

    def test_sum_kernel_weights_add(self):
        a, b = FractionalPowerLaw(c=1.0, H=0.2), LogKernel()
        g = make_uniform_grid(7, 1.5)
        lhs = precompute_weights(SumKernel((a, b)), g).matrix()
        rhs = precompute_weights(a, g).matrix() + precompute_weights(b, g).matrix()
        np.testing.assert_allclose(lhs, rhs, rtol=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_grid_matches_direct_evaluation(self, seed):
        rng = np.random.default_rng(seed)
        nodes = np.concatenate([[0.0], np.sort(rng.uniform(0, 2.0, 12)), [2.0]])
        g = make_grid(nodes)
        k = ExponentiallyDamped(c=1.0, beta=0.5, H=0.2)
        w = precompute_weights(k, g)
        for kk in range(1, g.n + 1):
            for i in range(kk):
                assert w[kk, i] == k(nodes[kk] - nodes[i])

    def test_uniform_storage_equals_dense_definition(self):
        k = FractionalPowerLaw.gamma_normalized(0.1)
        g = make_uniform_grid(16, 1.0)
        w = precompute_weights(k, g)
        for kk in range(1, 17):
            expected = k(g.nodes[kk] - g.nodes[:kk])
            np.testing.assert_allclose(w.row(kk), expected, rtol=1e-14)
            assert np.all(np.diff(w.row(kk)) >= 0)

    def test_out_of_range_index(self):
        w = precompute_weights(LogKernel(), make_uniform_grid(3, 1.0))
        with pytest.raises(IndexError):
            w[1, 1]


class TestDriftConvolution:
    def test_zero_theta(self):
        assert exact_linear_drift_convolution(LogKernel(), 0.0, 1.3) == 0.0

    def test_constant_kernel(self):
        k = FractionalPowerLaw(c=1.0, H=0.5)
        assert exact_linear_drift_convolution(k, 1.0, 2.0) == pytest.approx(2.0, rel=1e-14)

    def test_rough_kernel_beta_oracle(self):
        k = FractionalPowerLaw(c=1.0 / GAMMA_06, H=0.1)
        expected = 0.02 * special.beta(2.0, 0.6) / GAMMA_06
        assert exact_linear_drift_convolution(k, 0.02, 1.0) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("kernel", KERNELS[:5], ids=lambda k: type(k).__name__)
    @settings(max_examples=15, deadline=None)
    @given(theta=st.floats(0.001, 2.0), t=st.floats(0.01, 3.0))
    def test_matches_adaptive_quadrature(self, kernel, theta, t):
        H = kernel.hurst_exponent
        # algebraic endpoint weight handles the singular factor at s = t
        if isinstance(kernel, FractionalPowerLaw):
            val, _ = integrate.quad(lambda s: kernel.c * theta * s, 0, t, weight="alg",
                                    wvar=(0.0, H - 0.5), epsabs=0, epsrel=1e-12)
        elif isinstance(kernel, ExponentiallyDamped):
            val, _ = integrate.quad(lambda s: kernel.c * np.exp(-kernel.beta * (t - s)) * theta * s,
                                    0, t, weight="alg", wvar=(0.0, H - 0.5),
                                    epsabs=0, epsrel=1e-12)
        else:
            val, _ = integrate.quad(lambda s: kernel(t - s) * theta * s, 0, t, limit=400,
                                    points=[t * (1 - 1e-6), t * (1 - 1e-3)],
                                    epsabs=0, epsrel=1e-12)
        got = exact_linear_drift_convolution(kernel, theta, t)
        assert got == pytest.approx(val, rel=1e-8)


class TestResolvent:
    @pytest.mark.parametrize("H", [0.05, 0.1, 0.3, 0.45])
    def test_identity_on_grid(self, H):
        res = power_law_resolvent(FractionalPowerLaw.gamma_normalized(H))
        errs = [abs(res.convolve_with_kernel(t) - 1.0) for t in np.linspace(0.05, 2.0, 9)]
        assert max(errs) <= 1e-6

    def test_constant_from_gamma_functions(self):
        # for c = 1/Gamma(H+1/2), C_H = 1/Gamma(1/2 - H)
        res = power_law_resolvent(FractionalPowerLaw.gamma_normalized(0.1))
        assert res.normalizing_constant == pytest.approx(1.0 / math.gamma(0.4), rel=1e-13)
        assert res.density(1.0) == pytest.approx(res.normalizing_constant)

    def test_constant_kernel_rejected(self):
        with pytest.raises(ValueError):
            power_law_resolvent(FractionalPowerLaw(c=1.0, H=0.5))


class TestRegularity:
    def test_rough_power_law_bounded(self):
        rep = verify_regularity(FractionalPowerLaw(c=1.0, H=0.1), make_uniform_grid(64, 1.0), 0.1)
        assert rep.bounded and np.isfinite(rep.sup_a2) and np.isfinite(rep.sup_a3)

    def test_constant_kernel_ratio_is_one(self):
        rep = verify_regularity(FractionalPowerLaw(c=1.0, H=0.5), make_uniform_grid(32, 1.0), 0.5)
        np.testing.assert_allclose(rep.a2_ratios, 1.0, rtol=1e-12)
        assert rep.sup_a3 == 0.0 and rep.bounded

    def test_damped_kernel_bounded(self):
        rep = verify_regularity(ExponentiallyDamped(c=1.0, beta=1.0, H=0.1),
                                make_uniform_grid(64, 1.0), 0.1)
        assert rep.bounded

    def test_refinement_sups_converge_for_rough_kernel(self):
        # bounded by the continuous constants 1/(2H) and about 2.816
        rep = verify_regularity(FractionalPowerLaw(c=1.0, H=0.1), make_uniform_grid(64, 1.0), 0.1)
        assert rep.sup_a2 < 5.0 and rep.sup_a3 < 2.82

    def test_too_large_exponent_is_reported(self):
        # H = 0.1 kernel cannot satisfy the bound with exponent 0.4
        rep = verify_regularity(FractionalPowerLaw(c=1.0, H=0.1), make_uniform_grid(64, 1.0), 0.4)
        assert not rep.bounded


def test_kernel_from_spec_round_trip():
    k = kernel_from_spec({"type": "power_law", "c": "gamma_normalized", "H": 0.1})
    assert k == FractionalPowerLaw.gamma_normalized(0.1)
    s = kernel_from_spec({"type": "sum", "parts": [{"type": "log"},
                                                   {"type": "exp_damped", "beta": 1, "H": 0.2}]})
    assert evaluate(s, 0.5) == pytest.approx(math.log(1 + 1 / 1.5) + math.exp(-0.5) * 0.5 ** -0.3)
    with pytest.raises(ValueError):
        kernel_from_spec({"type": "nope"})

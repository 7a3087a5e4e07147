import math

import numpy as np
import pytest
from scipy import integrate, special

from hermitelab.combinatorics import ContractionIndex, enumerate_indices
from hermitelab.constants import (
    ConstantResult,
    K_x_alpha,
    Method,
    beta_identity_quadrature,
    breuer_major_sigma,
    c_Hq,
    c_Hq_quadrature,
    c_squared,
    critical_constant,
    fou_covariance,
    fou_variance,
    kernel_autocorrelation,
    limit_constants,
    ma_covariance,
)
from hermitelab.hermite import CriticalCaseError, Polynomial
from hermitelab.process import HurstSpec, Kernel

EXP = Kernel.exponential(1.0)


@pytest.mark.parametrize("H", [0.55, 0.7, 0.9])
def test_c_squared_q1_specialization(H):
    assert c_squared(1, H) == pytest.approx(H * (2 * H - 1) / special.beta(H - 0.5, 2 - 2 * H), rel=1e-13)


def test_c_squared_vanishes_at_half():
    values = [c_squared(2, 0.5 + 10.0 ** -k) for k in range(2, 7)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert values[-1] < 1e-5


def test_c_Hq_two_dimensional_oracle():
    # 1/c^2 = q! B^q int int |s - s'|^{2H-2}, with the square done as a genuine 2-D integral.
    spec = HurstSpec(2, 0.8)
    B = special.beta(spec.H0 - 0.5, 2 - 2 * spec.H0)
    lower, _ = integrate.dblquad(lambda y, x: (x - y) ** (2 * spec.H - 2), 0, 1, 0, lambda x: x,
                                 epsabs=1e-12, epsrel=1e-12)
    oracle = math.factorial(2) * B ** 2 * 2 * lower
    assert oracle == pytest.approx(1 / c_squared(2, 0.8), rel=1e-6)


@pytest.mark.parametrize("H0", [0.6, 0.75, 0.9, 0.97])
def test_beta_identity(H0):
    val, err = beta_identity_quadrature(H0)
    assert val == pytest.approx(special.beta(H0 - 0.5, 2 - 2 * H0), rel=1e-9)


@pytest.mark.parametrize("q,H", [(1, 0.7), (2, 0.8), (3, 0.9), (4, 0.6)])
def test_c_Hq_quadrature_matches(q, H):
    spec = HurstSpec(q, H)
    assert c_Hq_quadrature(spec).value == pytest.approx(c_Hq(spec).value, rel=1e-9)


def test_result_validation():
    with pytest.raises(ValueError):
        ConstantResult(1.0, -1.0, Method.QUADRATURE)
    with pytest.raises(ValueError):
        ConstantResult(1.0, 0.1, Method.MONTE_CARLO)
    r = ConstantResult(1.0, 0.0, Method.CLOSED_FORM, {"a": 1})
    assert r.digest == ConstantResult(2.0, 0.0, Method.CLOSED_FORM, {"a": 1}).digest


@pytest.mark.parametrize("kernel", [EXP, Kernel.power_cutoff(3.0), Kernel.exponential(2.5).scaled(0.5)])
def test_k_without_contractions(kernel):
    spec = HurstSpec(2, 0.8)
    alpha = ContractionIndex(3, 2, (0, 0, 0))
    assert K_x_alpha(kernel, alpha, spec).value == pytest.approx(kernel.integral() ** 3)


def test_k_two_factor_direct_oracle():
    spec = HurstSpec(2, 0.8)
    gam = (2 * spec.H0 - 2) * 1
    # Direct 2-D quadrature over the two triangles v > v' and v < v'.
    half, _ = integrate.dblquad(lambda vp, v: math.exp(-v - vp) * (v - vp) ** gam, 0, 60, 0, lambda v: v,
                                epsabs=1e-10, epsrel=1e-10)
    got = K_x_alpha(EXP, ContractionIndex(2, 2, (1,)), spec)
    assert got.method is Method.CLOSED_FORM
    assert got.value == pytest.approx(2 * half, rel=1e-5)
    assert got.value == pytest.approx(math.gamma(gam + 1))


@pytest.mark.parametrize("r", [1, 2])
def test_k_dual_method_exponential(r):
    spec = HurstSpec(2, 0.8)
    alpha = ContractionIndex(2, 2, (r,))
    quad = K_x_alpha(EXP, alpha, spec, "quadrature")
    mc = K_x_alpha(EXP, alpha, spec, "monte_carlo", seed=3)
    closed = K_x_alpha(EXP, alpha, spec, "closed_form")
    assert quad.value == pytest.approx(closed.value, rel=1e-9)
    assert abs(quad.value - mc.value) < 3 * (quad.abs_error + mc.abs_error)


@pytest.mark.slow
def test_k_dual_method_power_kernel_three_factors():
    spec = HurstSpec(3, 0.8)
    kernel = Kernel.power_cutoff(4.0)
    alpha = ContractionIndex.from_mapping(3, 3, {(1, 2): 1, (1, 3): 2, (2, 3): 1})
    quad = K_x_alpha(kernel, alpha, spec, "quadrature")
    mc = K_x_alpha(kernel, alpha, spec, "monte_carlo", seed=5)
    assert abs(quad.value - mc.value) < 3 * (quad.abs_error + mc.abs_error)
    assert quad.value > 0


def test_k_three_factor_symmetry():
    spec = HurstSpec(3, 0.8)
    vals = [K_x_alpha(EXP, a, spec, "quadrature").value for a in enumerate_indices(3, 3, order=1)]
    assert np.ptp(vals) < 1e-8 * vals[0]


def test_k_four_factors_uses_monte_carlo():
    spec = HurstSpec(2, 0.8)
    alpha = ContractionIndex(4, 2, (1, 0, 0, 0, 0, 1))
    got = K_x_alpha(EXP, alpha, spec, n_samples=100_000, seed=1)
    assert got.method is Method.MONTE_CARLO and got.seed == 1
    # Two independent pairs: the integral factorizes into two n=2 integrals.
    pair = K_x_alpha(EXP, ContractionIndex(2, 2, (1,)), spec).value
    assert abs(got.value - pair ** 2) < 4 * got.abs_error


def test_k_positive_on_admissible_indices():
    spec = HurstSpec(2, 0.85)
    for n in (2, 3):
        for alpha in enumerate_indices(n, 2):
            r = K_x_alpha(EXP, alpha, spec)
            assert r.value > 0 and math.isfinite(r.value) and r.abs_error < 1e-4 * r.value


def test_k_mismatched_q():
    with pytest.raises(ValueError):
        K_x_alpha(EXP, ContractionIndex(2, 3, (1,)), HurstSpec(2, 0.8))


def test_limit_constant_linear_q2():
    k = Kernel.exponential(2.0)
    out = limit_constants(Polynomial([0, 3]), k, HurstSpec(2, 0.8))
    assert out.K1 == 0
    assert out.K2 == pytest.approx(3 * k.integral())


def test_limit_constant_even_polynomial_odd_q():
    out = limit_constants(Polynomial([1, 0, 1, 0, 2]), EXP, HurstSpec(3, 0.9))
    assert out.K1 == 0


def test_limit_constant_cubic_q3_positive():
    out = limit_constants(Polynomial([0, 0, 0, 1]), EXP, HurstSpec(3, 0.8))
    assert 0 < out.K1 < math.inf
    assert all(t["contribution"] > 0 for t in out.terms)
    with_beta = limit_constants(Polynomial([0, 0, 0, 1]), EXP, HurstSpec(3, 0.8), include_beta=True)
    B = special.beta(HurstSpec(3, 0.8).H0 - 0.5, 2 - 2 * HurstSpec(3, 0.8).H0)
    assert with_beta.K1 == pytest.approx(out.K1 * B ** 4)


def test_limit_constant_rejects_q1():
    with pytest.raises(ValueError):
        limit_constants(Polynomial([0, 0, 1]), EXP, HurstSpec(1, 0.8))


def test_kernel_autocorrelation_exponential():
    assert kernel_autocorrelation(Kernel.exponential(2.0), 0.3) == pytest.approx(math.exp(-0.6) / 4)
    p = Kernel.power_cutoff(3.0)
    direct, _ = integrate.quad(lambda a: (1 + a) ** -3 * (1 + a + 0.5) ** -3, 0, np.inf)
    assert kernel_autocorrelation(p, -0.5) == pytest.approx(direct)


@pytest.mark.parametrize("H", [0.55, 0.7, 0.9])
@pytest.mark.parametrize("alpha", [1.0, 2.0])
def test_fou_variance(H, alpha):
    got = fou_covariance(H, alpha, 0.0)
    assert got.value == pytest.approx(fou_variance(H, alpha), rel=1e-8)


def test_fou_covariance_against_double_integral():
    H, s = 0.7, 1.5
    # int_{-inf}^0 int_{-inf}^s e^{-(s-u)} e^{v} |u-v|^{2H-2} du dv, split at the diagonal.
    f = lambda u, v: math.exp(-(s - u) + v) * abs(u - v) ** (2 * H - 2)  # noqa: E731
    parts = [integrate.dblquad(lambda u, v: f(u, v), -40, 0, lo, hi, epsabs=1e-10, epsrel=1e-8)[0]
             for lo, hi in ((lambda v: -40, lambda v: v), (lambda v: v, lambda v: s))]
    assert fou_covariance(H, 1.0, s).value == pytest.approx(H * (2 * H - 1) * sum(parts), rel=1e-4)


def test_fou_decay_and_monotone():
    vals = [fou_covariance(0.7, 1.0, s).value for s in (0, 0.5, 1, 2, 5, 10, 20)]
    assert all(v > 0 for v in vals)
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert fou_covariance(0.55, 1.0, 20).value < fou_covariance(0.9, 1.0, 20).value


def test_general_kernel_covariance_matches_exponential_path():
    H = 0.7
    a = ma_covariance(H, Kernel.exponential(1.0), 3.0).value
    b = fou_covariance(H, 1.0, 3.0).value
    assert a == b


def test_breuer_major_rejects_rank_one():
    with pytest.raises(CriticalCaseError):
        breuer_major_sigma(Polynomial([0, 1]), EXP, 0.6)


def test_breuer_major_positive():
    r = breuer_major_sigma(Polynomial([0, 0, 1]), EXP, 0.55)
    assert 0 < r.value < math.inf
    assert r.inputs["rank"] == 2


def test_critical_constant_informational():
    r = critical_constant(Polynomial([0, 0, 1]), 1.0, 0.75)
    assert r.value == pytest.approx(math.sqrt(2 * 3 / 16))
    assert r.inputs["status"] == "informational"
    with pytest.raises(ValueError):
        critical_constant(Polynomial([0, 0, 1]), 1.0, 0.7)

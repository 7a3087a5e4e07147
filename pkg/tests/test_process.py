import math

import numpy as np
import pytest
from scipy.linalg import toeplitz

from hermitelab.process import (
    HurstSpec,
    Kernel,
    SamplePath,
    TruncationError,
    driven_path,
    fgn,
    fgn_autocovariance,
    hermite_path,
    hermite_values,
    hou_path,
    increment_autocovariance,
    moving_average,
    moving_average_variance,
    partial_sum_variance,
    plan_grid,
)


def within(estimate, target, se, k=3.0):
    return abs(estimate - target) <= k * se


def test_autocovariance_closed_form():
    assert fgn_autocovariance(0.5, 1) == 0
    assert fgn_autocovariance(0.9, 1) == pytest.approx((2 ** 1.8 - 2) / 2, rel=1e-14)
    assert fgn_autocovariance(0.7, 0, dt=0.25) == pytest.approx(0.25 ** 1.4)


@pytest.mark.parametrize("H0,lag1", [(0.5, 0.0), (0.9, (2 ** 1.8 - 2) / 2)])
def test_fgn_lag_one(H0, lag1):
    est = []
    for s in range(100):
        x = fgn(H0, 2048, 1.0, seed=11, stream=s).values
        est.append(np.mean(x[:-1] * x[1:]))
    est = np.array(est)
    assert within(est.mean(), lag1, est.std(ddof=1) / np.sqrt(est.size))


def test_fgn_partial_sums_self_similar():
    H0 = 0.75
    sums = np.array([np.cumsum(fgn(H0, 64, 1 / 64, 5, s).values) for s in range(1000)])
    for idx in (15, 31, 63):
        t = (idx + 1) / 64
        v = sums[:, idx] ** 2 / t ** (2 * H0)
        assert within(v.mean(), 1.0, v.std(ddof=1) / np.sqrt(v.size))


def test_fgn_deterministic():
    a = fgn(0.8, 1000, 0.1, 3, 4).values
    b = fgn(0.8, 1000, 0.1, 3, 4).values
    c = fgn(0.8, 1000, 0.1, 3, 5).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_fgn_rejects_bad_input():
    with pytest.raises(ValueError):
        fgn(1.2, 10, 1.0, 0)
    with pytest.raises(ValueError):
        fgn(0.7, 1, 1.0, 0)


def test_hermite_values():
    x = np.linspace(-2, 2, 7)
    np.testing.assert_allclose(hermite_values(3, x), x ** 3 - 3 * x)
    np.testing.assert_allclose(hermite_values(4, x), x ** 4 - 6 * x ** 2 + 3)


@pytest.mark.parametrize("q,H0,m", [(2, 0.9, 50), (3, 0.8, 40), (1, 0.7, 30)])
def test_partial_sum_variance_against_matrix(q, H0, m):
    R = toeplitz(fgn_autocovariance(H0, np.arange(m)))
    oracle = math.factorial(q) * np.sum(R ** q)
    assert partial_sum_variance(q, H0, m) == pytest.approx(oracle, rel=1e-12)


@pytest.mark.parametrize("q,H,b", [(2, 0.8, 3), (3, 0.7, 2)])
def test_increment_autocovariance_against_matrix(q, H, b):
    spec = HurstSpec(q, H)
    dt = 0.5
    n = 6
    R = toeplitz(fgn_autocovariance(spec.H0, np.arange(n * b)))
    per_unit = round(b / dt)
    scale2 = 1 / partial_sum_variance(q, spec.H0, per_unit)
    blocks = np.kron(np.eye(n), np.ones(b))
    cov = scale2 * math.factorial(q) * blocks @ (R ** q) @ blocks.T
    got = increment_autocovariance(spec, dt, b, n)
    np.testing.assert_allclose(got, cov[0], rtol=1e-12)


def test_hermite_path_fbm_variance():
    spec = HurstSpec(1, 0.7)
    Z = np.array([hermite_path(spec, 16, 1.0, 16, 9, s).values for s in range(2000)])
    for idx in (4, 8, 16):
        t = idx / 16
        v = Z[:, idx] ** 2 / t ** 1.4
        assert within(v.mean(), 1.0, v.std(ddof=1) / np.sqrt(v.size))


def test_hermite_path_rosenblatt_shape():
    spec = HurstSpec(2, 0.8)
    Z = np.array([hermite_path(spec, 16, 1.0, 2 ** 12, 21, s).values for s in range(400)])
    z1 = Z[:, -1]
    assert Z[:, 0].max() == 0.0
    v = z1 ** 2
    assert within(v.mean(), 1.0, v.std(ddof=1) / np.sqrt(v.size))
    skew = np.mean((z1 - z1.mean()) ** 3) / z1.std() ** 3
    assert skew > 0.2


def test_hermite_path_errors():
    with pytest.raises(ValueError):
        hermite_path(HurstSpec(2, 0.8), 64, 1.0, 32, 0)
    with pytest.raises(ValueError):
        HurstSpec(2, 0.5)
    with pytest.raises(ValueError):
        hermite_path(HurstSpec(2, 0.8), 64, 1.0, 100, 0)


def test_hermite_path_deterministic():
    spec = HurstSpec(3, 0.75)
    a = hermite_path(spec, 32, 2.0, 512, 1, 2)
    b = hermite_path(spec, 32, 2.0, 512, 1, 2)
    assert np.array_equal(a.values, b.values)
    assert a.model == b.model


def _brownian_path(n=400, dt=0.5, seed=0):
    inc = fgn(0.5, n, dt, seed).values
    return SamplePath(dt, np.concatenate([[0.0], np.cumsum(inc)]), seed, 0, t0=-10.0)


def test_delta_kernel_returns_rescaled_increments():
    Z = _brownian_path()
    k = Kernel.tabulated([1 / Z.dt], Z.dt)
    X = moving_average(Z, k, truncation=Z.dt, burn_in=0.0)
    np.testing.assert_allclose(X.values, Z.increments() / Z.dt)


def test_moving_average_linear():
    Z = _brownian_path()
    k = Kernel.exponential(1.5)
    base = moving_average(Z, k, 12.0, 1.0).values
    assert np.array_equal(moving_average(Z, k.scaled(2.0), 12.0, 1.0).values, 2.0 * base)
    np.testing.assert_allclose(moving_average(Z, k.scaled(-0.3), 12.0, 1.0).values, -0.3 * base,
                               rtol=1e-12, atol=1e-12)


def test_truncation_error_suggests_window():
    Z = _brownian_path()
    with pytest.raises(TruncationError, match="use M >="):
        moving_average(Z, Kernel.exponential(1.0), truncation=2.0, burn_in=0.0)


def test_kernel_tails():
    k = Kernel.exponential(2.0)
    M = k.suggested_truncation(1e-6)
    assert k.tail_mass(M) == pytest.approx(1e-6)
    p = Kernel.power_cutoff(3.0, 2.0)
    M = p.suggested_truncation(1e-4)
    assert p.tail_mass(M) == pytest.approx(1e-4)
    assert p.integral() == pytest.approx(1.0)
    t = Kernel.tabulated([1.0, 2.0, 3.0], 0.5)
    assert t.tail_mass(0.5) == pytest.approx(2.5)
    assert t.integral() == pytest.approx(3.0)


def test_kernel_cell_means_integrate_to_kernel_mass():
    for k in (Kernel.exponential(0.7), Kernel.power_cutoff(2.5)):
        w = k.cell_means(0.01, 200000)
        assert np.sum(w) * 0.01 == pytest.approx(k.integral(), rel=1e-3)


def _ensemble_at(spec, kernel, plan, seed, n_rep, idx=0):
    return np.array([driven_path(spec, kernel, plan, seed, s).values[idx] for s in range(n_rep)])


def test_fou_variance_matches_closed_form():
    spec = HurstSpec(1, 0.7)
    k = Kernel.exponential(1.0)
    plan = plan_grid(k, 1.0, 0.05)
    x = _ensemble_at(spec, k, plan, 17, 3000)
    target = 0.7 * math.gamma(1.4)
    assert moving_average_variance(spec, k, 0.05, plan.truncation) == pytest.approx(target, rel=2e-3)
    v = x ** 2
    assert within(v.mean(), target, v.std(ddof=1) / np.sqrt(v.size))


def test_hermite_ma_variance_matches_exact_discrete_value():
    spec = HurstSpec(2, 0.8)
    k = Kernel.exponential(1.0)
    plan = plan_grid(k, 1.0, 0.25, internal_per_step=8)
    x = _ensemble_at(spec, k, plan, 23, 1500)
    exact = moving_average_variance(spec, k, 0.25, plan.truncation, 8)
    v = x ** 2
    assert within(v.mean(), exact, v.std(ddof=1) / np.sqrt(v.size))


def test_hou_variance_q1():
    U = np.array([hou_path(HurstSpec(1, 0.7), 1.0, 20, 1.0, 31, s).values[0] for s in range(3000)])
    v = U ** 2
    assert within(v.mean(), 0.7 * math.gamma(1.4), v.std(ddof=1) / np.sqrt(v.size))


def test_hou_time_average_of_identity_shrinks():
    spec = HurstSpec(2, 0.8)
    short = [np.mean(hou_path(spec, 1.0, 64, 64.0, 41, s).values) for s in range(40)]
    long = [np.mean(hou_path(spec, 1.0, 4096, 4096.0, 43, s).values) for s in range(40)]
    assert np.std(long) < 0.5 * np.std(short)


def test_stationarity_of_driven_path():
    spec = HurstSpec(2, 0.8)
    k = Kernel.exponential(1.0)
    plan = plan_grid(k, 200.0, 0.25, internal_per_step=4)
    paths = np.array([driven_path(spec, k, plan, 51, s).values for s in range(400)])
    early, late = paths[:, 0], paths[:, -1]
    se_mean = np.hypot(early.std(ddof=1), late.std(ddof=1)) / np.sqrt(early.size)
    assert abs(early.mean() - late.mean()) < 3 * se_mean
    e2, l2 = early ** 2, late ** 2
    se_var = np.hypot(e2.std(ddof=1), l2.std(ddof=1)) / np.sqrt(e2.size)
    assert abs(e2.mean() - l2.mean()) < 3 * se_var


def test_path_round_trips(tmp_path):
    p = hermite_path(HurstSpec(2, 0.7), 8, 1.0, 64, 5, 1)
    p.to_binary(tmp_path / "p.bin")
    back = SamplePath.from_binary(tmp_path / "p.bin")
    assert np.array_equal(back.values, p.values)
    assert back.header() == p.header()
    p.to_csv(tmp_path / "p.csv")
    data = np.loadtxt(tmp_path / "p.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 1], p.values)
    np.testing.assert_array_equal(data[:, 0], p.times)


def test_binary_is_little_endian_float64(tmp_path):
    p = SamplePath(0.5, np.array([1.0, -2.5]), 0, 0)
    p.to_binary(tmp_path / "p.bin")
    raw = (tmp_path / "p.bin").read_bytes()
    assert raw[-16:] == np.array([1.0, -2.5], dtype="<f8").tobytes()

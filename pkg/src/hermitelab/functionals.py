"""Centered integral functionals S_T(t) of P(X) and their variance scaling in T."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats

from .hermite import Family, Polynomial, RegimeLabel, classify_regime, hurst_zero
from .process import (
    HurstSpec,
    Kernel,
    SamplePath,
    driven_path,
    moving_average_variance,
    plan_grid,
)

MIN_REPLICATIONS = 200
FIT_POINTS = 5
# Stream layout: horizon index i uses streams (i + 1) * STRIDE + replication,
# the centering pilot uses streams 0..pilot_paths-1.
STREAM_STRIDE = 2 ** 32


class DegenerateFunctionalError(ArithmeticError):
    """The sample variance of S_T(1) is not positive at some horizon."""


class CoverageError(ValueError):
    pass


# -- integration on a grid ---------------------------------------------------------

def _primitive(path: SamplePath, f_values: np.ndarray, t: np.ndarray) -> np.ndarray:
    """int_0^t of the piecewise-linear interpolant of ``f_values`` on the path grid."""
    dt = path.dt
    cum = np.concatenate([[0.0], np.cumsum(0.5 * dt * (f_values[1:] + f_values[:-1]))])
    u = (np.asarray(t, dtype=float) - path.t0) / dt
    k = np.minimum(np.floor(u + 1e-9).astype(int), f_values.size - 1)
    frac = np.clip(u - k, 0.0, None)
    k_next = np.minimum(k + 1, f_values.size - 1)
    slope = f_values[k_next] - f_values[k]
    partial = dt * frac * (f_values[k] + 0.5 * frac * slope)
    return cum[k] + partial


def _check_coverage(path: SamplePath, T: float) -> None:
    if path.t0 > 1e-12:
        raise CoverageError(f"path starts at {path.t0}, after time 0")
    if T > path.t_end + 1e-9 * max(1.0, T):
        raise CoverageError(f"horizon T={T} exceeds path coverage [0, {path.t_end}]")


@dataclass(frozen=True)
class FunctionalSample:
    T: float
    t_points: tuple[float, ...]
    values: np.ndarray
    replication: int
    centering: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("functional values are not finite")


def evaluate_functional(X: SamplePath, P: Polynomial, T: float, t_points, centering: float) -> FunctionalSample:
    """Trapezoidal ``int_0^{T t} (P(X(s)) - centering) ds`` for each ``t``.

    Between grid nodes the integrand is interpolated linearly, so the value at
    ``t`` always equals the value at ``t' < t`` plus the integral over
    ``(T t', T t]`` of the same interpolant.
    """
    t_points = tuple(float(t) for t in t_points)
    if T <= 0 or any(not 0 < t <= 1 for t in t_points):
        raise ValueError("need T > 0 and t_points in (0, 1]")
    _check_coverage(X, T)
    f = P(X.values) - centering
    lower = _primitive(X, f, np.array([0.0]))[0]
    values = _primitive(X, f, T * np.array(t_points)) - lower
    return FunctionalSample(T, t_points, values, X.stream, centering)


def hou_ergodic_average(U: SamplePath, f: Polynomial, T: float) -> float:
    """Time average ``(1/T) int_0^T f(U_s) ds`` by the trapezoidal rule."""
    if T <= 0:
        raise ValueError("T must be positive")
    _check_coverage(U, T)
    vals = f(U.values)
    return float((_primitive(U, vals, np.array([T]))[0] - _primitive(U, vals, np.array([0.0]))[0]) / T)


# -- scaling scan --------------------------------------------------------------------

@dataclass(frozen=True)
class ScanSettings:
    """Numerical knobs of a scaling scan (grid step, Hermite resolution, pilot size)."""

    dt: float = 0.5
    internal_per_step: int = 4
    t_points: tuple[float, ...] = (0.25, 0.5, 1.0)
    pilot_paths: int = 8
    threads: int = 1
    fit_points: int = FIT_POINTS


@dataclass
class ScalingReport:
    T_grid: tuple[float, ...]
    var_hat: np.ndarray
    var_se: np.ndarray
    slope: float
    slope_se: float
    intercept: float
    predicted_slope: float
    vanishing_exponent_alpha0: Fraction
    regime: RegimeLabel
    centering: float
    centering_method: str
    replications: int
    seed: int
    settings: ScanSettings
    samples: dict[float, np.ndarray] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.slope):
            raise ValueError("fitted slope is not finite")
        if any(b <= a for a, b in zip(self.T_grid, self.T_grid[1:])):
            raise ValueError("T_grid must be strictly increasing")

    @property
    def fit_T(self) -> tuple[float, ...]:
        return self.T_grid[-self.settings.fit_points:]

    def rescaled(self, T: float | None = None) -> np.ndarray:
        """``T**e * S_T(t)`` at horizon ``T`` (default: the largest), all t_points."""
        T = self.T_grid[-1] if T is None else T
        return T ** float(self.regime.normalization_exponent) * self.samples[T]

    def agrees(self, allowance: float = 0.1) -> bool:
        return abs(self.slope - self.predicted_slope) < 2 * self.slope_se + allowance

    def to_json(self) -> dict:
        return {
            "T_grid": list(self.T_grid),
            "var_hat": [float(v) for v in self.var_hat],
            "var_se": [float(v) for v in self.var_se],
            "fit_T": list(self.fit_T),
            "slope": self.slope,
            "slope_se": self.slope_se,
            "intercept": self.intercept,
            "predicted_slope": self.predicted_slope,
            "vanishing_exponent_alpha0": str(self.vanishing_exponent_alpha0),
            "regime": self.regime.to_json(),
            "centering": self.centering,
            "centering_method": self.centering_method,
            "replications": self.replications,
            "seed": self.seed,
        }


def variance_with_se(x: np.ndarray) -> tuple[float, float]:
    """Unbiased sample variance and its standard error from the fourth central moment."""
    n = x.size
    dev = x - x.mean()
    m2 = float(np.dot(dev, dev) / n)
    m4 = float(np.mean(dev ** 4))
    var = m2 * n / (n - 1)
    se = math.sqrt(max(m4 - m2 * m2 * (n - 3) / (n - 1), 0.0) / n)
    return var, se


def weighted_loglog_fit(T, var, se) -> tuple[float, float, float]:
    """WLS fit of log var on log T with delta-method weights; returns slope, its SE, intercept."""
    x = np.log(np.asarray(T, dtype=float))
    y = np.log(np.asarray(var, dtype=float))
    s = np.asarray(se, dtype=float) / np.asarray(var, dtype=float)
    w = 1.0 / s ** 2
    A = np.column_stack([np.ones_like(x), x])
    cov = np.linalg.inv(A.T @ (A * w[:, None]))
    beta = cov @ (A.T @ (w * y))
    return float(beta[1]), float(math.sqrt(cov[1, 1])), float(beta[0])


def _path_for(spec: HurstSpec, kernel: Kernel, T: float, settings: ScanSettings, seed: int, stream: int):
    b = 1 if spec.q == 1 else settings.internal_per_step
    plan = plan_grid(kernel, T, settings.dt, b)
    return driven_path(spec, kernel, plan, seed, stream)


def centering_value(spec: HurstSpec, kernel: Kernel, P: Polynomial, T: float, settings: ScanSettings,
                    seed: int) -> tuple[float, str]:
    """E[P(X(0))]: exact Gaussian moment for q = 1, pooled pilot average for q >= 2."""
    if spec.q == 1:
        plan = plan_grid(kernel, T, settings.dt, 1)
        var = moving_average_variance(spec, kernel, settings.dt, plan.truncation, 1)
        return float(P.gaussian_mean(var)), "exact"
    total = 0.0
    for k in range(settings.pilot_paths):
        X = _path_for(spec, kernel, T, settings, seed, k)
        total += hou_ergodic_average(X, P, X.t_end)
    return total / settings.pilot_paths, f"pilot_mc[{settings.pilot_paths}]"


def scan_scaling(spec: HurstSpec, kernel: Kernel, P: Polynomial, T_grid, replications: int, seed: int,
                 settings: ScanSettings = ScanSettings()) -> ScalingReport:
    """Estimate the growth exponent of Var(S_T(1)) across a geometric horizon grid."""
    T_grid = tuple(float(T) for T in T_grid)
    if len(T_grid) < settings.fit_points:
        raise ValueError(f"need at least {settings.fit_points} horizons, got {len(T_grid)}")
    ratios = [b / a for a, b in zip(T_grid, T_grid[1:])]
    if T_grid[0] <= 0 or not all(math.isclose(r, ratios[0], rel_tol=1e-9) for r in ratios) or ratios[0] <= 1:
        raise ValueError("T_grid must be geometric and increasing")
    if replications < MIN_REPLICATIONS:
        raise ValueError(f"need at least {MIN_REPLICATIONS} replications, got {replications}")
    if 1.0 not in settings.t_points:
        raise ValueError("t_points must include 1")
    regime = classify_regime(spec.q, spec.H, P)
    centering, how = centering_value(spec, kernel, P, T_grid[-1], settings, seed)
    t_idx = settings.t_points.index(1.0)

    def one(i: int, T: float, r: int) -> np.ndarray:
        X = _path_for(spec, kernel, T, settings, seed, (i + 1) * STREAM_STRIDE + r)
        return evaluate_functional(X, P, T, settings.t_points, centering).values

    samples: dict[float, np.ndarray] = {}
    var_hat, var_se = [], []
    with ThreadPoolExecutor(max_workers=max(1, settings.threads)) as pool:
        for i, T in enumerate(T_grid):
            # map preserves replication order, so the reduction below is thread-count independent
            rows = np.array(list(pool.map(lambda r: one(i, T, r), range(replications))))
            samples[T] = rows
            v, s = variance_with_se(rows[:, t_idx])
            if not v > 0:
                raise DegenerateFunctionalError(f"non-positive variance estimate {v!r} at T={T!r}")
            var_hat.append(v)
            var_se.append(s)
    var_hat, var_se = np.array(var_hat), np.array(var_se)
    k = settings.fit_points
    slope, slope_se, intercept = weighted_loglog_fit(T_grid[-k:], var_hat[-k:], var_se[-k:])
    return ScalingReport(T_grid, var_hat, var_se, slope, slope_se, intercept, float(regime.variance_slope),
                         1 - 2 * hurst_zero(spec.q, spec.H), regime, centering, how, replications, seed,
                         settings, samples)


# -- limit diagnostics -----------------------------------------------------------------

class Power(str, enum.Enum):
    OK = "OK"
    UNDERPOWERED = "UNDERPOWERED"


@dataclass(frozen=True)
class LimitDiagnostics:
    n: int
    skewness: float
    excess_kurtosis: float
    normality_pvalue: float
    skew_pvalue: float
    self_similarity: tuple[float, ...]
    t_points: tuple[float, ...]
    family: Family
    expectation: str
    power: Power

    def to_json(self) -> dict:
        return {
            "n": self.n, "skewness": self.skewness, "excess_kurtosis": self.excess_kurtosis,
            "normality_pvalue": self.normality_pvalue, "skew_pvalue": self.skew_pvalue,
            "self_similarity": list(self.self_similarity), "t_points": list(self.t_points),
            "family": self.family.value, "expectation": self.expectation, "power": self.power.value,
        }


_EXPECTATION = {
    Family.BROWNIAN: "gaussian",
    Family.FBM: "gaussian",
    Family.ROSENBLATT: "positive skew",
    Family.HERMITE_D: "non-gaussian for rank >= 2",
}


def limit_diagnostics(samples, regime: RegimeLabel, t_points=(1.0,)) -> LimitDiagnostics:
    """Marginal moment checks on ``T**e S_T`` plus variance self-similarity ratios.

    ``samples`` has one row per replication and one column per entry of
    ``t_points``; the column at t = 1 feeds the marginal statistics. The
    self-similarity ratios are ``Var(S(t)) / (t**(2 H_lim) Var(S(1)))``.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    t_points = tuple(float(t) for t in t_points)
    if x.shape[1] != len(t_points) or 1.0 not in t_points:
        raise ValueError("samples need one column per t_point, including t = 1")
    n = x.shape[0]
    last = x[:, t_points.index(1.0)]
    skew = float(stats.skew(last))
    kurt = float(stats.kurtosis(last))
    normal_p = float(stats.normaltest(last).pvalue) if n >= 20 else math.nan
    skew_p = float(stats.skewtest(last).pvalue) if n >= 8 else math.nan
    h_lim = float(regime.variance_slope) / 2
    var = x.var(axis=0, ddof=1)
    base = var[t_points.index(1.0)]
    ratios = tuple(float(v / (t ** (2 * h_lim) * base)) for v, t in zip(var, t_points))
    return LimitDiagnostics(n, skew, kurt, normal_p, skew_p, ratios, t_points, regime.family,
                            _EXPECTATION[regime.family],
                            Power.OK if n >= MIN_REPLICATIONS else Power.UNDERPOWERED)

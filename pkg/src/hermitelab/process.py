"""Sample paths: fractional Gaussian noise, approximate Hermite processes, moving averages.

Hermite processes of order ``q >= 2`` are approximated by normalized partial
sums of ``H_q(xi_i)``, where ``xi`` is unit-variance fractional Gaussian
noise with Hurst index ``H0 = 1 - (1 - H)/q``. The normalization is the exact
finite-sum variance, so ``Var(Z(1)) == 1`` holds without Monte Carlo error.
For ``q == 1`` the generator is exact fractional Brownian motion.
"""

from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Any

import numpy as np
from scipy import fft as sfft
from scipy import signal

DEFAULT_TAIL_TOL = 1e-6


def rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for the pair ``(seed, stream)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


@dataclass(frozen=True)
class HurstSpec:
    q: int
    H: float

    def __post_init__(self):
        if self.q < 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if not 0.5 < self.H < 1:
            raise ValueError(f"H must lie in (1/2, 1), got {self.H}")

    @property
    def H0(self) -> float:
        return 1 - (1 - self.H) / self.q


# -- fractional Gaussian noise -------------------------------------------------

def fgn_autocovariance(H0: float, k, dt: float = 1.0):
    """Autocovariance of fGn increments on a grid of step ``dt``."""
    k = np.abs(np.asarray(k, dtype=float))
    h2 = 2 * H0
    return 0.5 * dt ** h2 * (np.abs(k + 1) ** h2 - 2 * k ** h2 + np.abs(k - 1) ** h2)


class EmbeddingError(RuntimeError):
    pass


@lru_cache(maxsize=16)
def _circulant_sqrt_eigs(H0: float, n: int) -> np.ndarray:
    size = sfft.next_fast_len(n, real=False)
    for _ in range(4):
        gamma = fgn_autocovariance(H0, np.arange(size + 1))
        row = np.concatenate([gamma, gamma[-2:0:-1]])
        eig = sfft.fft(row).real
        if eig.min() >= -1e-10 * eig.max():
            eig = np.clip(eig, 0.0, None)
            return np.sqrt(eig / row.size)
        size = sfft.next_fast_len(2 * size, real=False)
    raise EmbeddingError(f"circulant embedding not nonnegative for H0={H0}, n={n} after padding x8")


def fgn_array(H0: float, n: int, generator: np.random.Generator, dt: float = 1.0) -> np.ndarray:
    """Exact fGn sample of length ``n`` (Davies-Harte circulant embedding)."""
    if not 0 < H0 < 1:
        raise ValueError(f"H0 must lie in (0, 1), got {H0}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if H0 == 0.5:
        return generator.standard_normal(n) * dt ** 0.5
    lam = _circulant_sqrt_eigs(float(H0), int(n))
    m = lam.size
    w = generator.standard_normal(m) + 1j * generator.standard_normal(m)
    out = sfft.fft(lam * w)[:n].real
    return out * dt ** H0


# -- sample paths ----------------------------------------------------------------

@dataclass(frozen=True)
class SamplePath:
    """Values on the uniform grid ``t0, t0 + dt, ...`` with generation metadata."""

    dt: float
    values: np.ndarray
    seed: int
    stream: int
    model: dict[str, Any] = field(default_factory=dict)
    t0: float = 0.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.values.ndim != 1 or self.values.size < 2:
            raise ValueError("a path needs at least two values")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("path contains non-finite values")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.values.size - 1)

    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def header(self) -> dict[str, Any]:
        return {"dt": self.dt, "t0": self.t0, "n": int(self.values.size),
                "seed": self.seed, "stream": self.stream, "model": self.model}

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("time,value\n")
            for t, v in zip(self.times, self.values):
                fh.write(f"{float(t)!r},{float(v)!r}\n")

    def to_binary(self, path) -> None:
        head = json.dumps(self.header(), sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(b"HLSP")
            fh.write(struct.pack("<II", 1, len(head)))
            fh.write(head)
            fh.write(self.values.astype("<f8").tobytes())

    @classmethod
    def from_binary(cls, path) -> "SamplePath":
        raw = Path(path).read_bytes()
        if raw[:4] != b"HLSP":
            raise ValueError("not a sample-path file")
        version, hlen = struct.unpack("<II", raw[4:12])
        if version != 1:
            raise ValueError(f"unsupported version {version}")
        head = json.loads(raw[12:12 + hlen])
        values = np.frombuffer(raw[12 + hlen:], dtype="<f8").astype(float)
        return cls(head["dt"], values, head["seed"], head["stream"], head["model"], head["t0"])


def fgn(H0: float, n: int, dt: float, seed: int, stream: int = 0) -> SamplePath:
    """Increments of fBm with Hurst ``H0`` on a grid of step ``dt``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if dt <= 0:
        raise ValueError("dt must be positive")
    values = fgn_array(H0, n, rng(seed, stream), dt)
    return SamplePath(dt, values, seed, stream, {"kind": "fgn", "H0": H0, "n": n})


# -- Hermite processes -----------------------------------------------------------

def hermite_values(q: int, x: np.ndarray) -> np.ndarray:
    """Probabilists' Hermite polynomial He_q evaluated at ``x``."""
    prev, cur = np.ones_like(x), x.copy()
    if q == 0:
        return prev
    for j in range(1, q):
        prev, cur = cur, x * cur - j * prev
    return cur


@lru_cache(maxsize=64)
def partial_sum_variance(q: int, H0: float, m: int) -> float:
    """Var(sum_{i<m} He_q(xi_i)) for unit fGn ``xi`` of Hurst ``H0``."""
    k = np.arange(1, m)
    r = fgn_autocovariance(H0, k) ** q
    return math.factorial(q) * (m + 2.0 * np.sum((m - k) * r))


def _hermite_step_scale(spec: HurstSpec, internal_dt: float) -> float:
    per_unit = max(1, int(round(1.0 / internal_dt)))
    return 1.0 / math.sqrt(partial_sum_variance(spec.q, spec.H0, per_unit))


def hermite_increments(spec: HurstSpec, n_steps: int, dt: float, internal_per_step: int,
                       generator: np.random.Generator) -> np.ndarray:
    """Increments of the (approximate) Hermite process over ``n_steps`` cells of width ``dt``."""
    if spec.q == 1:
        return fgn_array(spec.H, n_steps, generator, dt)
    b = int(internal_per_step)
    if b < 1:
        raise ValueError("internal_per_step must be >= 1")
    xi = fgn_array(spec.H0, n_steps * b, generator)
    y = hermite_values(spec.q, xi)
    blocks = y.reshape(n_steps, b).sum(axis=1)
    return blocks * _hermite_step_scale(spec, dt / b)


def hermite_path(spec: HurstSpec, n_grid: int, t_max: float, n_internal: int,
                 seed: int, stream: int = 0) -> SamplePath:
    """Path of Z^{H,q} on ``[0, t_max]`` with ``n_grid`` output steps.

    ``n_internal`` is the total number of Hermite-sum terms; it must be a
    multiple of ``n_grid``. For ``q == 1`` it is ignored (exact fBm).
    """
    if n_grid < 1 or t_max <= 0:
        raise ValueError("need n_grid >= 1 and t_max > 0")
    if n_internal < n_grid:
        raise ValueError(f"n_internal={n_internal} is below n_grid={n_grid}")
    if spec.q > 1 and n_internal % n_grid:
        raise ValueError("n_internal must be a multiple of n_grid")
    dt = t_max / n_grid
    b = n_internal // n_grid
    inc = hermite_increments(spec, n_grid, dt, b, rng(seed, stream))
    values = np.concatenate([[0.0], np.cumsum(inc)])
    model = {"kind": "hermite", "q": spec.q, "H": spec.H, "n_internal": int(n_internal), "t_max": t_max}
    return SamplePath(dt, values, seed, stream, model)


def increment_autocovariance(spec: HurstSpec, dt: float, internal_per_step: int, n_lags: int) -> np.ndarray:
    """Exact Cov(dZ_0, dZ_k), k < n_lags, of the generator's output increments."""
    k = np.arange(n_lags)
    if spec.q == 1:
        return fgn_autocovariance(spec.H, k, dt)
    b = int(internal_per_step)
    scale2 = _hermite_step_scale(spec, dt / b) ** 2
    lags = np.arange(-(b - 1), b)
    weights = b - np.abs(lags)
    fine = k[:, None] * b + lags[None, :]
    r = fgn_autocovariance(spec.H0, fine) ** spec.q
    return scale2 * math.factorial(spec.q) * (r * weights).sum(axis=1)


# -- kernels and moving averages --------------------------------------------------

class KernelKind(str, enum.Enum):
    EXPONENTIAL = "exponential"
    POWER_CUTOFF = "power_cutoff"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class Kernel:
    """Causal kernel x(s), zero for s < 0.

    EXPONENTIAL: ``amplitude * exp(-rate * s)``.
    POWER_CUTOFF: ``amplitude * (1 + s/scale) ** (-power)`` with ``power > 1``;
    it lies in S_L for every ``L < power``.
    TABULATED: ``amplitude * samples[k]`` on ``[k*dt, (k+1)*dt)``, zero beyond.
    """

    kind: KernelKind
    rate: float = 1.0
    power: float = 2.0
    scale: float = 1.0
    samples: tuple[float, ...] = ()
    dt: float = 0.0
    amplitude: float = 1.0

    @classmethod
    def exponential(cls, rate: float) -> "Kernel":
        if rate <= 0:
            raise ValueError("rate must be positive")
        return cls(KernelKind.EXPONENTIAL, rate=rate)

    @classmethod
    def power_cutoff(cls, power: float, scale: float = 1.0) -> "Kernel":
        if power <= 1 or scale <= 0:
            raise ValueError("need power > 1 and scale > 0")
        return cls(KernelKind.POWER_CUTOFF, power=power, scale=scale)

    @classmethod
    def tabulated(cls, samples, dt: float) -> "Kernel":
        if dt <= 0 or len(samples) == 0:
            raise ValueError("need dt > 0 and at least one sample")
        return cls(KernelKind.TABULATED, samples=tuple(float(s) for s in samples), dt=dt)

    @classmethod
    def from_spec(cls, spec: dict) -> "Kernel":
        allowed = {"kind", "amplitude"} | {
            "exponential": {"rate"}, "power_cutoff": {"power", "scale"}, "tabulated": {"samples", "dt"},
        }.get(spec.get("kind"), set())
        if set(spec) - allowed:
            raise ValueError(f"unknown kernel keys: {sorted(set(spec) - allowed)}")
        kind = KernelKind(spec["kind"])
        if kind is KernelKind.EXPONENTIAL:
            k = cls.exponential(spec.get("rate", 1.0))
        elif kind is KernelKind.POWER_CUTOFF:
            k = cls.power_cutoff(spec["power"], spec.get("scale", 1.0))
        else:
            k = cls.tabulated(spec["samples"], spec["dt"])
        return k.scaled(spec["amplitude"]) if "amplitude" in spec else k

    def to_spec(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind.value}
        if self.kind is KernelKind.EXPONENTIAL:
            out["rate"] = self.rate
        elif self.kind is KernelKind.POWER_CUTOFF:
            out.update(power=self.power, scale=self.scale)
        else:
            out.update(samples=list(self.samples), dt=self.dt)
        if self.amplitude != 1.0:
            out["amplitude"] = self.amplitude
        return out

    def scaled(self, a: float) -> "Kernel":
        return replace(self, amplitude=self.amplitude * a)

    @property
    def decay_class(self) -> str:
        """``S_L`` membership label: exponential and tabulated kernels are in every S_L."""
        if self.kind is KernelKind.POWER_CUTOFF:
            return f"S_L for L < {self.power}"
        return "S_L for all L"

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        pos = s >= 0
        if self.kind is KernelKind.EXPONENTIAL:
            val = np.exp(-self.rate * np.where(pos, s, 0.0))
        elif self.kind is KernelKind.POWER_CUTOFF:
            val = (1 + np.where(pos, s, 0.0) / self.scale) ** (-self.power)
        else:
            idx = np.floor(np.where(pos, s, 0.0) / self.dt).astype(int)
            table = np.append(np.asarray(self.samples), 0.0)
            val = table[np.clip(idx, 0, len(self.samples))]
        return self.amplitude * np.where(pos, val, 0.0)

    def _antiderivative(self, s):
        # F(s) = int_0^s x; tabulated handled separately.
        s = np.asarray(s, dtype=float)
        if self.kind is KernelKind.EXPONENTIAL:
            return -np.expm1(-self.rate * s) / self.rate
        p, c = self.power, self.scale
        return c / (p - 1) * (1 - (1 + s / c) ** (1 - p))

    def integral(self) -> float:
        """int_0^inf x(s) ds."""
        if self.kind is KernelKind.EXPONENTIAL:
            return self.amplitude / self.rate
        if self.kind is KernelKind.POWER_CUTOFF:
            return self.amplitude * self.scale / (self.power - 1)
        return self.amplitude * self.dt * float(np.sum(self.samples))

    def tail_mass(self, M: float) -> float:
        """int_M^inf |x(s)| ds."""
        a = abs(self.amplitude)
        if self.kind is KernelKind.EXPONENTIAL:
            return a * math.exp(-self.rate * M) / self.rate
        if self.kind is KernelKind.POWER_CUTOFF:
            return a * self.scale / (self.power - 1) * (1 + M / self.scale) ** (1 - self.power)
        start = int(math.floor(M / self.dt + 1e-12))
        return a * self.dt * float(np.sum(np.abs(self.samples[start:])))

    def suggested_truncation(self, tail_tol: float = DEFAULT_TAIL_TOL) -> float:
        a = abs(self.amplitude)
        if self.kind is KernelKind.EXPONENTIAL:
            return max(0.0, math.log(a / (self.rate * tail_tol)) / self.rate)
        if self.kind is KernelKind.POWER_CUTOFF:
            p, c = self.power, self.scale
            return max(0.0, c * ((tail_tol * (p - 1) / (a * c)) ** (1 / (1 - p)) - 1))
        return self.dt * len(self.samples)

    def cell_means(self, dt: float, n_cells: int) -> np.ndarray:
        """Average of x over ``[k dt, (k+1) dt)`` for k < n_cells."""
        if self.kind is KernelKind.TABULATED:
            if not math.isclose(dt, self.dt, rel_tol=1e-12):
                raise ValueError(f"tabulated kernel has dt={self.dt}, path has dt={dt}")
            out = np.zeros(n_cells)
            m = min(n_cells, len(self.samples))
            out[:m] = self.samples[:m]
            return self.amplitude * out
        edges = self._antiderivative(dt * np.arange(n_cells + 1))
        return self.amplitude * np.diff(edges) / dt


class TruncationError(ValueError):
    pass


def truncation_steps(kernel: Kernel, dt: float, tail_tol: float = DEFAULT_TAIL_TOL) -> int:
    return max(1, int(math.ceil(kernel.suggested_truncation(tail_tol) / dt - 1e-9)))


def moving_average(Z: SamplePath, kernel: Kernel, truncation: float, burn_in: float,
                   tail_tol: float = DEFAULT_TAIL_TOL) -> SamplePath:
    """X(t) = sum_i x(t - u_i) dZ(u_i) over the truncation window.

    The first ``truncation + burn_in`` of ``Z`` is consumed; the output starts at
    time 0 on the same grid.
    """
    tail = kernel.tail_mass(truncation)
    if tail > tail_tol:
        raise TruncationError(
            f"kernel tail mass {tail:.3g} beyond M={truncation} exceeds {tail_tol:g}; "
            f"use M >= {kernel.suggested_truncation(tail_tol):.6g}")
    dt = Z.dt
    K = max(1, int(math.ceil(truncation / dt - 1e-9)))
    B = int(math.ceil(burn_in / dt - 1e-9))
    dZ = Z.increments()
    if dZ.size < K + B + 1:
        raise ValueError("path too short for the truncation window and burn-in")
    w = kernel.cell_means(dt, K)
    # X at grid index j uses dZ[j-1-k], k < K.
    full = signal.fftconvolve(dZ, w, mode="full")[: dZ.size]
    values = full[K - 1 + B:]
    model = {"kind": "moving_average", "source": Z.model, "kernel": kernel.to_spec(),
             "truncation": truncation, "burn_in": burn_in}
    return SamplePath(dt, values, Z.seed, Z.stream, model)


def moving_average_variance(spec: HurstSpec, kernel: Kernel, dt: float, truncation: float,
                            internal_per_step: int = 1) -> float:
    """Exact Var(X(0)) of the discretized moving average produced by this module."""
    K = max(1, int(math.ceil(truncation / dt - 1e-9)))
    w = kernel.cell_means(dt, K)
    cov = increment_autocovariance(spec, dt, internal_per_step, K)
    acf = np.correlate(w, w, mode="full")[K - 1:]
    return float(cov[0] * acf[0] + 2 * np.dot(cov[1:], acf[1:]))


@dataclass(frozen=True)
class GridPlan:
    """Output grid plus the window needed before time 0."""

    dt: float
    n_out: int
    truncation: float
    burn_in: float
    internal_per_step: int

    @property
    def n_total(self) -> int:
        K = max(1, int(math.ceil(self.truncation / self.dt - 1e-9)))
        B = int(math.ceil(self.burn_in / self.dt - 1e-9))
        return self.n_out + K + B


def plan_grid(kernel: Kernel, t_max: float, dt: float, internal_per_step: int = 1,
              tail_tol: float = DEFAULT_TAIL_TOL, burn_in: float | None = None) -> GridPlan:
    K = truncation_steps(kernel, dt, tail_tol)
    M = K * dt
    n_out = int(round(t_max / dt))
    return GridPlan(dt, n_out, M, M if burn_in is None else burn_in, internal_per_step)


def driven_path(spec: HurstSpec, kernel: Kernel, plan: GridPlan, seed: int, stream: int = 0,
                tail_tol: float = DEFAULT_TAIL_TOL) -> SamplePath:
    """Moving average of a fresh Hermite path, covering ``[0, n_out*dt]``."""
    n = plan.n_total
    inc = hermite_increments(spec, n, plan.dt, plan.internal_per_step, rng(seed, stream))
    t0 = -(n - plan.n_out) * plan.dt
    Z = SamplePath(plan.dt, np.concatenate([[0.0], np.cumsum(inc)]), seed, stream,
                   {"kind": "hermite", "q": spec.q, "H": spec.H,
                    "internal_per_step": plan.internal_per_step}, t0)
    return moving_average(Z, kernel, plan.truncation, plan.burn_in, tail_tol)


def hou_path(spec: HurstSpec, rate: float, n_grid: int, t_max: float, seed: int, stream: int = 0,
             internal_per_step: int = 8, tail_tol: float = DEFAULT_TAIL_TOL) -> SamplePath:
    """Stationary Hermite-Ornstein-Uhlenbeck path on ``[0, t_max]``."""
    kernel = Kernel.exponential(rate)
    b = 1 if spec.q == 1 else internal_per_step
    plan = plan_grid(kernel, t_max, t_max / n_grid, b, tail_tol)
    return driven_path(spec, kernel, plan, seed, stream, tail_tol)

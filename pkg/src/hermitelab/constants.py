"""Normalizing constants, contraction integrals and covariance constants.

Every public function returns a :class:`ConstantResult` carrying the value, an
absolute error estimate and the method used. Singular integrands
``|u|**gamma`` with ``gamma > -1`` are handled with QUADPACK's algebraic
weights after reducing to gap coordinates.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations
from typing import Any

import numpy as np
from scipy import integrate, special

from .combinatorics import ContractionIndex, coefficient, enumerate_indices
from .hermite import CriticalCaseError, Polynomial, as_fraction, centered_rank, expand
from .power_counting import hls_admissible
from .process import HurstSpec, Kernel, KernelKind, rng

QUAD_RTOL = 1e-10


class Method(str, enum.Enum):
    CLOSED_FORM = "CLOSED_FORM"
    QUADRATURE = "QUADRATURE"
    MONTE_CARLO = "MONTE_CARLO"


@dataclass(frozen=True)
class ConstantResult:
    value: float
    abs_error: float
    method: Method
    inputs: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if not self.abs_error >= 0:
            raise ValueError("error estimate must be non-negative")
        if self.method is Method.MONTE_CARLO and self.seed is None:
            raise ValueError("Monte Carlo results must record their seed")

    @property
    def digest(self) -> str:
        blob = json.dumps(self.inputs, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_json(self) -> dict:
        out = {"value": self.value, "abs_error": self.abs_error, "method": self.method.value,
               "inputs": self.inputs, "digest": self.digest}
        if self.seed is not None:
            out["seed"] = self.seed
        return out


def _quad(f, a, b, **kw) -> tuple[float, float]:
    kw.setdefault("limit", 200)
    kw.setdefault("epsabs", 0.0)
    kw.setdefault("epsrel", QUAD_RTOL)
    val, err = integrate.quad(f, a, b, **kw)
    return float(val), float(err)


def _power_weighted(g, gamma: float, upper: float = math.inf, split: float = 1.0) -> tuple[float, float]:
    """int_0^upper u**gamma g(u) du for gamma > -1, singular weight handled exactly."""
    cut = min(split, upper)
    v1, e1 = _quad(g, 0.0, cut, weight="alg", wvar=(gamma, 0.0))
    if upper <= cut:
        return v1, e1
    v2, e2 = _quad(lambda u: u ** gamma * g(u), cut, upper)
    return v1 + v2, e1 + e2


# -- Hermite-process normalization --------------------------------------------------

def c_squared(q: int, H: float) -> float:
    """c_{H,q}**2 = H(2H-1) / (q! B(H0 - 1/2, 2 - 2 H0)**q), via log-Gamma."""
    spec = HurstSpec(q, H)
    H0 = spec.H0
    log = (math.log(H) + math.log(2 * H - 1) - special.gammaln(q + 1)
           - q * special.betaln(H0 - 0.5, 2 - 2 * H0))
    return math.exp(log)


def c_Hq(spec: HurstSpec) -> ConstantResult:
    """Constant making Var(Z(1)) = 1 for the kernel representation of Z^{H,q}."""
    c = math.sqrt(c_squared(spec.q, spec.H))
    return ConstantResult(c, 4 * np.finfo(float).eps * c, Method.CLOSED_FORM,
                          {"q": spec.q, "H": spec.H})


def beta_identity_quadrature(H0: float) -> tuple[float, float]:
    """int_R (1 - xi)_+^{H0-3/2} (-xi)_+^{H0-3/2} d xi by quadrature.

    Equals B(H0 - 1/2, 2 - 2 H0). With ``xi = -u`` the integrand is
    ``u**a (1+u)**a``; the tail is mapped by ``u = 1/t`` onto a weight
    ``t**(1 - 2 H0)``.
    """
    a = H0 - 1.5
    head, e1 = _quad(lambda u: (1 + u) ** a, 0.0, 1.0, weight="alg", wvar=(a, 0.0))
    tail, e2 = _quad(lambda t: (1 + t) ** a, 0.0, 1.0, weight="alg", wvar=(-2 * a - 2, 0.0))
    return head + tail, e1 + e2


def unit_square_energy(H: float) -> tuple[float, float]:
    """int_{[0,1]^2} |s - s'|^{2H-2} = 2 int_0^1 (1 - u) u^{2H-2} du by quadrature."""
    v, e = _quad(lambda u: 1.0 - u, 0.0, 1.0, weight="alg", wvar=(2 * H - 2, 0.0))
    return 2 * v, 2 * e


def c_Hq_quadrature(spec: HurstSpec) -> ConstantResult:
    """c_{H,q} from quadrature of the variance integral instead of Beta functions."""
    B, eB = beta_identity_quadrature(spec.H0)
    D, eD = unit_square_energy(spec.H)
    inv = math.factorial(spec.q) * B ** spec.q * D
    rel = spec.q * eB / B + eD / D
    c = inv ** -0.5
    return ConstantResult(c, 0.5 * rel * c, Method.QUADRATURE, {"q": spec.q, "H": spec.H})


# -- kernel helpers -------------------------------------------------------------------

def _lag_product(kernel: Kernel, shifts) -> float:
    """int_0^inf prod_k x(w + shifts_k) dw for non-negative shifts."""
    shifts = np.asarray(shifts, dtype=float)
    n = shifts.size
    if kernel.kind is KernelKind.EXPONENTIAL:
        lam = kernel.rate
        return kernel.amplitude ** n * math.exp(-lam * shifts.sum()) / (n * lam)
    f = lambda w: float(np.prod(kernel(w + shifts)))  # noqa: E731
    if kernel.kind is KernelKind.TABULATED:
        support = kernel.dt * len(kernel.samples)
        edges = sorted({e - s for s in shifts for e in kernel.dt * np.arange(len(kernel.samples) + 1)
                        if 0 < e - s < support})
        val, _ = _quad(f, 0.0, support, points=edges or None, limit=500)
        return val
    val, _ = _quad(f, 0.0, math.inf)
    return val


def _abs_mass(kernel: Kernel) -> float:
    if kernel.kind is KernelKind.TABULATED:
        return abs(kernel.amplitude) * kernel.dt * float(np.sum(np.abs(kernel.samples)))
    return abs(kernel.integral())


def _sample_kernel(kernel: Kernel, gen: np.random.Generator, shape) -> np.ndarray:
    """Draws from the density |x| / int |x|."""
    if kernel.kind is KernelKind.EXPONENTIAL:
        return gen.exponential(1.0 / kernel.rate, size=shape)
    if kernel.kind is KernelKind.POWER_CUTOFF:
        u = gen.random(size=shape)
        return kernel.scale * ((1 - u) ** (1 / (1 - kernel.power)) - 1)
    w = np.abs(np.asarray(kernel.samples))
    cell = gen.choice(w.size, size=shape, p=w / w.sum())
    return kernel.dt * (cell + gen.random(size=shape))


# -- contraction integrals ---------------------------------------------------------------

def _gammas(alpha: ContractionIndex, H0: float) -> dict[tuple[int, int], float]:
    return {pair: (2 * H0 - 2) * a for pair, a in zip(combinations(range(alpha.n), 2), alpha.entries)}


def _k_quadrature(kernel: Kernel, alpha: ContractionIndex, H0: float) -> tuple[float, float]:
    g = _gammas(alpha, H0)
    n = alpha.n
    if n == 2:
        gam = g[(0, 1)]
        v, e = _power_weighted(lambda u: _lag_product(kernel, [0.0, u]), gam)
        return 2 * v, 2 * e
    if n != 3:
        raise ValueError("quadrature is implemented for n <= 3")
    total, err = 0.0, 0.0
    for a, b, c in permutations(range(3)):
        gab = g[tuple(sorted((a, b)))]
        gbc = g[tuple(sorted((b, c)))]
        gac = g[tuple(sorted((a, c)))]

        # Gaps g1 = r s, g2 = r (1 - s) between the ordered points.
        def angular(r, gab=gab, gbc=gbc):
            v, _ = _quad(lambda s: _lag_product(kernel, [0.0, r * s, r]), 0.0, 1.0,
                         weight="alg", wvar=(gab, gbc))
            return v

        v, e = _power_weighted(angular, 1 + gab + gbc + gac)
        total += v
        err += e
    return total, err


def _k_monte_carlo(kernel: Kernel, alpha: ContractionIndex, H0: float, n_samples: int,
                   seed: int, stream: int, batch: int = 50_000) -> tuple[float, float]:
    g = _gammas(alpha, H0)
    gen = rng(seed, stream)
    mass = _abs_mass(kernel)
    total, total2, done = 0.0, 0.0, 0
    while done < n_samples:
        m = min(batch, n_samples - done)
        v = _sample_kernel(kernel, gen, (m, alpha.n))
        w = np.prod(np.sign(kernel(v)), axis=1)
        for (i, j), gam in g.items():
            if gam:
                w = w * np.abs(v[:, i] - v[:, j]) ** gam
        total += float(np.sum(w))
        total2 += float(np.sum(w * w))
        done += m
    mean = total / done
    var = max(total2 / done - mean * mean, 0.0)
    return mass ** alpha.n * mean, mass ** alpha.n * math.sqrt(var / done)


def K_x_alpha(kernel: Kernel, alpha: ContractionIndex, spec: HurstSpec, method: str = "auto",
              n_samples: int = 400_000, seed: int = 0, stream: int = 0) -> ConstantResult:
    """int_{R_+^n} prod x(v_k) prod_{i<j} |v_i - v_j|^{(2 H0 - 2) alpha_ij} dv.

    ``method`` is ``closed_form`` (no contractions, or the exponential kernel
    with ``n = 2``), ``quadrature`` (``n <= 3``), ``monte_carlo`` (importance
    sampling from ``|x|``) or ``auto``.
    """
    if alpha.q != spec.q:
        raise ValueError(f"alpha has q={alpha.q} but the spec has q={spec.q}")
    report = hls_admissible(alpha.n, alpha.q, spec.H, alpha)
    if not report.admissible:
        raise ValueError("HLS condition fails: " + "; ".join(str(c) for c in report.failures()))
    H0 = spec.H0
    inputs = {"kernel": kernel.to_spec(), "alpha": list(alpha.entries), "n": alpha.n,
              "q": spec.q, "H": spec.H}
    n = alpha.n
    exp2 = kernel.kind is KernelKind.EXPONENTIAL and n == 2
    if method == "auto":
        method = "closed_form" if alpha.size == 0 or n == 1 or exp2 else \
            ("quadrature" if n <= 3 else "monte_carlo")
    if method == "closed_form":
        if alpha.size == 0 or n == 1:
            v = kernel.integral() ** n
        elif exp2:
            gam = (2 * H0 - 2) * alpha.entries[0]
            lam = kernel.rate
            v = kernel.amplitude ** 2 * math.gamma(gam + 1) / lam ** (gam + 2)
        else:
            raise ValueError("no closed form for this kernel and index")
        return ConstantResult(v, 8 * np.finfo(float).eps * abs(v), Method.CLOSED_FORM, inputs)
    if method == "quadrature":
        if n == 1 or alpha.size == 0:
            v = kernel.integral() ** n
            return ConstantResult(v, 8 * np.finfo(float).eps * abs(v), Method.QUADRATURE, inputs)
        v, e = _k_quadrature(kernel, alpha, H0)
        return ConstantResult(v, e, Method.QUADRATURE, inputs)
    if method == "monte_carlo":
        v, e = _k_monte_carlo(kernel, alpha, H0, n_samples, seed, stream)
        worst = min((g for g in _gammas(alpha, H0).values()), default=0.0)
        if worst <= -0.5:
            inputs["warning"] = "pairwise exponent <= -1/2: infinite-variance weights, error estimate unreliable"
        inputs["n_samples"] = n_samples
        return ConstantResult(v, e, Method.MONTE_CARLO, inputs, seed=seed)
    raise ValueError(f"unknown method {method!r}")


# -- limit constants -------------------------------------------------------------------------

@dataclass(frozen=True)
class LimitConstants:
    K1: float
    K2: float | None
    abs_error: float
    terms: tuple[dict, ...]
    note: str = ""

    def to_json(self) -> dict:
        return {"K1": self.K1, "K2": self.K2, "abs_error": self.abs_error,
                "terms": list(self.terms), "note": self.note}


def limit_constants(P: Polynomial, kernel: Kernel, spec: HurstSpec, include_beta: bool = False,
                    **k_options) -> LimitConstants:
    """Constants of the fBm (order 1) and Rosenblatt (order 2) limits for q >= 2.

    ``K_i`` sums ``a_n c_{H,q}^n C_alpha K_{x,alpha,H0} / c_{H_i,i}`` over indices
    with ``i`` free legs, with ``H_1 = H0`` and ``H_2 = 2 H0 - 1``. Each
    contracted pair of kernel legs produces a factor ``B(H0 - 1/2, 2 - 2 H0)``;
    ``include_beta=True`` multiplies it in, the default leaves it out.
    """
    if spec.q < 2:
        raise ValueError("limit constants are defined for q >= 2")
    H0 = spec.H0
    c = c_Hq(spec).value
    B = math.exp(special.betaln(H0 - 0.5, 2 - 2 * H0))
    H2 = 2 * H0 - 1
    c1 = c_Hq(HurstSpec(1, H0)).value
    c2 = c_Hq(HurstSpec(2, H2)).value if H2 > 0.5 else None
    K1 = K2 = 0.0
    err = 0.0
    terms = []
    note = ""
    for n, a in enumerate(P.coeffs):
        if not a or n < 1:
            continue
        for order, target in ((1, "K1"), (2, "K2")):
            if (n * spec.q - order) % 2 or order > n * spec.q:
                continue
            if order == 1 and n % 2 == 0:
                continue
            if order == 2 and c2 is None:
                note = f"H_2 = 2 H0 - 1 = {H2:.6g} <= 1/2: no Rosenblatt limit, K2 undefined"
                continue
            for alpha in enumerate_indices(n, spec.q, order=order):
                if n == 1:
                    continue
                k = K_x_alpha(kernel, alpha, spec, **k_options)
                factor = float(a) * c ** n * coefficient(alpha) / (c1 if order == 1 else c2)
                if include_beta:
                    factor *= B ** alpha.size
                contribution = factor * k.value
                err += abs(factor) * k.abs_error
                terms.append({"constant": target, "n": n, "alpha": list(alpha.entries),
                              "C_alpha": coefficient(alpha), "K": k.value, "method": k.method.value,
                              "contribution": contribution})
                if order == 1:
                    K1 += contribution
                else:
                    K2 += contribution
    if spec.q == 2 and len(P.coeffs) > 1 and P.coeffs[1]:
        if c2 is not None:
            K2 += float(P.coeffs[1]) * kernel.integral()
            terms.append({"constant": "K2", "n": 1, "alpha": [], "contribution":
                          float(P.coeffs[1]) * kernel.integral()})
    return LimitConstants(K1, K2 if c2 is not None else None, err, tuple(terms), note)


# -- moving-average covariance ---------------------------------------------------------------

def kernel_autocorrelation(kernel: Kernel, w: float) -> float:
    """int_0^inf x(a) x(a + |w|) da."""
    return _lag_product(kernel, [0.0, abs(w)])


def ma_covariance(H: float, kernel: Kernel, s: float) -> ConstantResult:
    """Cov(X(s), X(0)) for X = int x(t - u) dB^H(u), by quadrature.

    Uses ``rho(s) = H(2H-1) int_0^inf y^{2H-2} (A(y - s) + A(y + s)) dy`` with
    ``A`` the kernel autocorrelation; the same value holds for any Hermite
    driver with the same H.
    """
    if not 0.5 < H < 1:
        raise ValueError("H must lie in (1/2, 1)")
    s = abs(float(s))
    g = lambda y: kernel_autocorrelation(kernel, y - s) + kernel_autocorrelation(kernel, y + s)  # noqa: E731
    gam = 2 * H - 2
    if s == 0:
        v, e = _power_weighted(g, gam)
    elif s <= 1:
        v1, e1 = _power_weighted(g, gam, upper=s, split=s)
        v2, e2 = _quad(lambda y: y ** gam * g(y), s, 1.0)
        v3, e3 = _quad(lambda y: y ** gam * g(y), 1.0, math.inf)
        v, e = v1 + v2 + v3, e1 + e2 + e3
    else:
        v1, e1 = _power_weighted(g, gam, upper=1.0)
        v2, e2 = _quad(lambda y: y ** gam * g(y), 1.0, s)
        v3, e3 = _quad(lambda y: y ** gam * g(y), s, math.inf)
        v, e = v1 + v2 + v3, e1 + e2 + e3
    k = H * (2 * H - 1)
    return ConstantResult(k * v, k * e, Method.QUADRATURE, {"H": H, "kernel": kernel.to_spec(), "s": s})


def fou_covariance(H: float, alpha: float, s: float) -> ConstantResult:
    """Stationary covariance of the fractional OU process with rate ``alpha``."""
    return ma_covariance(H, Kernel.exponential(alpha), s)


def fou_variance(H: float, alpha: float) -> float:
    """Closed form rho(0) = H Gamma(2H) / alpha^{2H} for unit-variance fBm at t = 1."""
    return H * math.gamma(2 * H) / alpha ** (2 * H)


# -- Breuer-Major -------------------------------------------------------------------------------

def _correlation_integral(H: float, kernel: Kernel, k: int, s_max: float) -> tuple[float, float]:
    """2 int_0^inf rho(s)^k ds, quadrature up to ``s_max`` plus the power-law tail."""
    rho = lambda s: ma_covariance(H, kernel, s).value  # noqa: E731
    head, err = 0.0, 0.0
    edges = [0.0, 1.0, 4.0, 16.0, 64.0, s_max]
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = _quad(lambda s: rho(s) ** k, a, b, epsrel=1e-8)
        head += v
        err += e
    amp = H * (2 * H - 1) * kernel.integral() ** 2
    expo = k * (2 * H - 2) + 1
    tail = -(amp ** k) * s_max ** expo / expo
    # Leading correction is O(s_max^-2) relative to the tail.
    return 2 * (head + tail), 2 * (err + abs(tail) * 10 / s_max ** 2)


def breuer_major_sigma(P: Polynomial, kernel: Kernel, H: float, s_max: float = 256.0) -> ConstantResult:
    """Limit of Var(int_0^T P(X)) / T in the Brownian regime (q = 1).

    ``sum_{k >= d} k! b_k^2 2 int_0^inf rho(s)^k ds`` where ``b_k`` are the
    Hermite coefficients of ``P`` for the variance ``rho(0)`` of X.
    """
    rho0 = ma_covariance(H, kernel, 0.0)
    exp = expand(P, Fraction(repr(rho0.value)))
    d = exp.rank
    if d is None:
        raise ValueError("constant polynomial: the centered functional vanishes")
    if d * (2 * H - 2) >= -1:
        raise CriticalCaseError(
            f"correlations not summable: rank {d} gives tail exponent {d * (2 * H - 2):.4g} >= -1, "
            "outside the Brownian regime")
    total, err = 0.0, 0.0
    parts = {}
    for k, b in sorted(exp.coeffs.items()):
        I, e = _correlation_integral(H, kernel, k, s_max)
        w = math.factorial(k) * float(b) ** 2
        parts[str(k)] = w * I
        total += w * I
        err += w * e
    return ConstantResult(total, err, Method.QUADRATURE,
                          {"H": H, "kernel": kernel.to_spec(), "P": [str(a) for a in P.coeffs],
                           "rank": d, "rho0": rho0.value, "by_order": parts})


def critical_constant(P: Polynomial, alpha: float, H: float) -> ConstantResult:
    """``a_d sqrt(d! 3 / (16 alpha^2))`` at the critical Hurst index (informational only).

    ``a_d`` is the rank coefficient of P in the Hermite basis for unit variance.
    """
    d = centered_rank(P)
    if as_fraction(H) != 1 - Fraction(1, 2 * d):
        raise ValueError(f"H={H} is not the critical value 1 - 1/(2d) for d={d}")
    a_d = float(expand(P).coeffs[d])
    v = a_d * math.sqrt(math.factorial(d) * 3 / (16 * alpha ** 2))
    return ConstantResult(v, 0.0, Method.CLOSED_FORM,
                          {"P": [str(a) for a in P.coeffs], "alpha": alpha, "H": H,
                           "status": "informational"})

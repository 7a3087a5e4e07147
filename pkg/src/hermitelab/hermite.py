"""Exact Hermite-basis expansions of polynomials and limit-regime classification."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np


def as_fraction(value) -> Fraction:
    """Exact rational from an int, Fraction, decimal string or float literal.

    Floats go through ``repr`` so ``0.8`` becomes ``4/5``, not the binary
    expansion.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(str(value).strip())


@dataclass(frozen=True)
class Polynomial:
    """Power-basis polynomial ``sum coeffs[n] x**n`` with exact coefficients."""

    coeffs: tuple[Fraction, ...]

    def __init__(self, coeffs: Iterable = (0,)):
        c = [as_fraction(a) for a in coeffs] or [Fraction(0)]
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def parse(cls, text: str) -> "Polynomial":
        """Parse ``"a0,a1,...,aN"`` (commas or whitespace; rationals like ``1/3`` allowed)."""
        parts = [p for p in text.replace(",", " ").split() if p]
        if not parts:
            raise ValueError("empty coefficient list")
        return cls(parts)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_constant(self) -> bool:
        return self.degree == 0

    def __add__(self, other: "Polynomial") -> "Polynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (n - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (n - len(other.coeffs))
        return Polynomial(x + y for x, y in zip(a, b))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + other.scale(-1)

    def scale(self, c) -> "Polynomial":
        c = as_fraction(c)
        return Polynomial(c * a for a in self.coeffs)

    def shift_up(self) -> "Polynomial":
        """Multiply by x."""
        return Polynomial((Fraction(0),) + self.coeffs)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return Polynomial(out)

    def __call__(self, x):
        """Float evaluation (Horner) for numpy arrays or scalars."""
        return np.polyval([float(a) for a in reversed(self.coeffs)], x)

    def gaussian_mean(self, variance) -> Fraction:
        """E[P(G)] for G ~ N(0, variance), from the moments variance^j (2j-1)!!."""
        v = as_fraction(variance)
        total, moment = Fraction(0), Fraction(1)
        for j, a in enumerate(self.coeffs):
            if j % 2 == 0:
                if j > 0:
                    moment *= v * (j - 1)
                total += a * moment
        return total

    def odd_degrees(self) -> tuple[int, ...]:
        return tuple(n for n, a in enumerate(self.coeffs) if a and n % 2)

    def __str__(self) -> str:
        terms = [f"{a}*x^{n}" for n, a in enumerate(self.coeffs) if a]
        return " + ".join(terms) or "0"


def hermite_polynomial(k: int, variance=1) -> Polynomial:
    """Monic Hermite polynomial of degree ``k`` orthogonal for N(0, variance).

    Uses ``H_{k+1} = x H_k - variance * k * H_{k-1}``.
    """
    if k < 0:
        raise ValueError(f"degree must be >= 0, got {k}")
    v = as_fraction(variance)
    if v <= 0:
        raise ValueError(f"variance must be positive, got {variance}")
    prev, cur = Polynomial([1]), Polynomial([0, 1])
    if k == 0:
        return prev
    for j in range(1, k):
        prev, cur = cur, cur.shift_up() - prev.scale(v * j)
    return cur


@dataclass(frozen=True)
class HermiteExpansion:
    """``P = mean_term + sum_k coeffs[k] H_k`` for Hermite polynomials of ``variance``."""

    variance: Fraction
    mean_term: Fraction
    coeffs: dict[int, Fraction] = field(default_factory=dict)

    @property
    def rank(self) -> int | None:
        nonzero = [k for k, b in self.coeffs.items() if b]
        return min(nonzero) if nonzero else None

    def to_polynomial(self) -> Polynomial:
        out = Polynomial([self.mean_term])
        for k, b in sorted(self.coeffs.items()):
            out = out + hermite_polynomial(k, self.variance).scale(b)
        return out

    @classmethod
    def from_coefficients(cls, coeffs: Sequence, variance=1) -> "HermiteExpansion":
        """Wrap a truncated list ``[b0, b1, ..., bK]`` of Hermite coefficients."""
        b = [as_fraction(c) for c in coeffs]
        return cls(as_fraction(variance), b[0] if b else Fraction(0),
                   {k: c for k, c in enumerate(b) if k >= 1 and c})

    def to_json(self) -> dict:
        return {
            "variance": str(self.variance),
            "mean": str(self.mean_term),
            "rank": self.rank,
            "expansion": {str(k): _num(b) for k, b in sorted(self.coeffs.items())},
        }


def _num(x: Fraction):
    return int(x) if x.denominator == 1 else str(x)


def expand(P: Polynomial, variance=1) -> HermiteExpansion:
    """Rewrite ``P`` in the Hermite basis by peeling off the leading monic term."""
    v = as_fraction(variance)
    if v <= 0:
        raise ValueError(f"variance must be positive, got {variance}")
    rest = P
    coeffs: dict[int, Fraction] = {}
    for k in range(P.degree, 0, -1):
        b = rest.coeffs[k] if k < len(rest.coeffs) else Fraction(0)
        if b:
            coeffs[k] = b
            rest = rest - hermite_polynomial(k, v).scale(b)
    return HermiteExpansion(v, rest.coeffs[0], dict(sorted(coeffs.items())))


def centered_rank(P: Polynomial, variance=1) -> int:
    rank = expand(P, variance).rank
    if rank is None:
        raise ValueError("rank undefined for a constant polynomial")
    return rank


class Family(str, enum.Enum):
    BROWNIAN = "BROWNIAN"
    FBM = "FBM"
    HERMITE_D = "HERMITE_D"
    ROSENBLATT = "ROSENBLATT"


@dataclass(frozen=True)
class RegimeLabel:
    """Predicted limit: ``T**normalization_exponent * S_T`` converges to ``family``."""

    family: Family
    normalization_exponent: Fraction
    limit_hurst: Fraction | None
    rank_used: int

    @property
    def variance_slope(self) -> Fraction:
        """Growth exponent of Var(S_T(1)) in T."""
        return -2 * self.normalization_exponent

    def to_json(self) -> dict:
        return {
            "family": self.family.value,
            "normalization_exponent": str(self.normalization_exponent),
            "limit_hurst": None if self.limit_hurst is None else str(self.limit_hurst),
            "rank": self.rank_used,
            "predicted_slope": float(self.variance_slope),
        }


class CriticalCaseError(ValueError):
    pass


def hurst_zero(q: int, H) -> Fraction:
    """H0 = 1 - (1 - H)/q."""
    return 1 - (1 - as_fraction(H)) / q


def classify_regime(q: int, H, P: Polynomial, variance=1) -> RegimeLabel:
    """Limit regime of the centered integral functional of ``P(X)``.

    For ``q == 1`` the answer depends on the centered Hermite rank ``d`` of
    ``P`` under N(0, variance); for ``q >= 2`` only on the parity of ``q``
    and of the degrees carrying nonzero power-basis coefficients.
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    H = as_fraction(H)
    if not Fraction(1, 2) < H < 1:
        raise ValueError(f"H must lie in (1/2, 1), got {H}")
    if P.is_constant():
        raise ValueError("constant polynomial: the centered functional vanishes")
    d = centered_rank(P, variance)
    if q == 1:
        threshold = 1 - Fraction(1, 2 * d)
        if H == threshold:
            raise CriticalCaseError(
                f"critical case H = 1 - 1/(2d) = {threshold}: "
                "only covered for the OU functional (see fou critical constant)")
        if H < threshold:
            return RegimeLabel(Family.BROWNIAN, Fraction(-1, 2), None, d)
        return RegimeLabel(Family.HERMITE_D, d * (1 - H) - 1, 1 - d * (1 - H), d)
    h0 = hurst_zero(q, H)
    if q % 2 and P.odd_degrees():
        return RegimeLabel(Family.FBM, -h0, h0, d)
    return RegimeLabel(Family.ROSENBLATT, 1 - 2 * h0, 2 * h0 - 1, d)

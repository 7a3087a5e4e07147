"""Contraction multi-indices for products of multiple Wiener-Ito integrals.

A product of ``n`` integrals of order ``q`` expands over multi-indices
``alpha = (alpha_ij)_{i<j}``: ``alpha_ij`` legs of factor ``i`` are paired with
legs of factor ``j``. Everything here is exact integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import factorial, prod
from typing import Iterator


def _pairs(n: int) -> list[tuple[int, int]]:
    return list(combinations(range(n), 2))


@dataclass(frozen=True)
class ContractionIndex:
    """Multi-index in A_{n,q}; ``entries`` follows the lexicographic pair order."""

    n: int
    q: int
    entries: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.n < 1 or self.q < 1:
            raise ValueError(f"n and q must be >= 1, got n={self.n}, q={self.q}")
        if len(self.entries) != self.n * (self.n - 1) // 2:
            raise ValueError("entries must have one value per pair i<j")
        if any(a < 0 for a in self.entries):
            raise ValueError("contraction counts must be non-negative")
        if any(b < 0 for b in self.free_legs):
            raise ValueError(f"row sums exceed q={self.q}: {self.entries}")

    @classmethod
    def from_mapping(cls, n: int, q: int, mapping: dict[tuple[int, int], int]) -> "ContractionIndex":
        """Build from 1-based ``{(i, j): alpha_ij}``; missing pairs are zero."""
        entries = tuple(mapping.get((i + 1, j + 1), 0) for i, j in _pairs(n))
        return cls(n, q, entries)

    def __getitem__(self, pair: tuple[int, int]) -> int:
        i, j = sorted(pair)
        return dict(zip(_pairs(self.n), self.entries))[(i - 1, j - 1)]

    def as_mapping(self) -> dict[tuple[int, int], int]:
        return {(i + 1, j + 1): a for (i, j), a in zip(_pairs(self.n), self.entries)}

    @property
    def size(self) -> int:
        """|alpha|, the number of contracted pairs."""
        return sum(self.entries)

    @property
    def free_legs(self) -> tuple[int, ...]:
        used = [0] * self.n
        for (i, j), a in zip(_pairs(self.n), self.entries):
            used[i] += a
            used[j] += a
        return tuple(self.q - u for u in used)

    @property
    def order(self) -> int:
        """m = nq - 2|alpha|, the chaos order of the contraction."""
        return self.n * self.q - 2 * self.size


def enumerate_indices(n: int, q: int, order: int | None = None) -> list[ContractionIndex]:
    """All of A_{n,q}, optionally only those with ``nq - 2|alpha| == order``.

    Output is lexicographic in the flattened entry vector.
    """
    if n < 1 or q < 1:
        raise ValueError(f"n and q must be >= 1, got n={n}, q={q}")
    if order is not None:
        if not 0 <= order <= n * q:
            raise ValueError(f"order must lie in [0, {n * q}], got {order}")
        if (n * q - order) % 2:
            raise ValueError(f"order {order} has the wrong parity for nq={n * q}")
    target = None if order is None else (n * q - order) // 2
    pairs = _pairs(n)
    out = []
    for entries in _search(pairs, n, q, target):
        out.append(ContractionIndex(n, q, entries))
    return out


def _search(pairs, n, q, target) -> Iterator[tuple[int, ...]]:
    # Depth-first with row budgets; ascending values keep lexicographic order.
    budget = [q] * n
    current: list[int] = []

    def rec(pos: int, total: int):
        if pos == len(pairs):
            if target is None or total == target:
                yield tuple(current)
            return
        i, j = pairs[pos]
        cap = min(budget[i], budget[j])
        if target is not None:
            cap = min(cap, target - total)
        for a in range(cap + 1):
            budget[i] -= a
            budget[j] -= a
            current.append(a)
            yield from rec(pos + 1, total + a)
            current.pop()
            budget[i] += a
            budget[j] += a

    yield from rec(0, 0)


def coefficient(alpha: ContractionIndex) -> int:
    """C_alpha = q!^n / (prod beta0_k! * prod alpha_ij!), exactly."""
    num = factorial(alpha.q) ** alpha.n
    den = prod(factorial(b) for b in alpha.free_legs) * prod(factorial(a) for a in alpha.entries)
    value, rem = divmod(num, den)
    assert rem == 0
    return value


def free_leg_profile(alpha: ContractionIndex) -> tuple[tuple[int, ...], tuple[int, ...], int]:
    """Return ``(beta0, beta, m)`` with ``beta`` the running sum of ``beta0``."""
    beta0 = alpha.free_legs
    running, beta = 0, []
    for b in beta0:
        running += b
        beta.append(running)
    return beta0, tuple(beta), alpha.order


def gaussian_moment(n: int) -> int:
    """n-th moment of N(0,1), computed as the sum of C_alpha over A^0_{n,1}."""
    if n < 2 or n % 2:
        raise ValueError(f"n must be even and >= 2, got {n}")
    return sum(coefficient(a) for a in enumerate_indices(n, 1, order=0))


def to_json(indices: list[ContractionIndex]) -> list[dict]:
    rows = []
    for a in indices:
        beta0, beta, m = free_leg_profile(a)
        rows.append({
            "alpha": {f"{i},{j}": v for (i, j), v in a.as_mapping().items()},
            "size": a.size,
            "m": m,
            "beta0": list(beta0),
            "beta": list(beta),
            "C": coefficient(a),
        })
    return rows

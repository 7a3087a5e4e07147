"""Finiteness of integrals of products of powers of linear forms.

A problem is a list of linear forms ``M_i`` on R^n with exponent pairs
``(mu_i, nu_i)``: the i-th factor behaves like ``|M_i x|**mu_i`` near zero
and like ``|M_i x|**nu_i`` near infinity. The verdict is decided with exact
rational arithmetic over the spans generated by subsets of the forms.
A brute numerical oracle for ``n <= 2`` cross-checks the verdicts.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

from .combinatorics import ContractionIndex
from .hermite import as_fraction

MAX_FORMS = 24

Vector = tuple[Fraction, ...]


# -- exact linear algebra -----------------------------------------------------------

def _reduce(v: Sequence[Fraction], basis: list[tuple[int, Vector]]) -> list[Fraction]:
    """Reduce ``v`` against an echelon basis of (pivot, row) pairs with unit pivots."""
    v = list(v)
    for p, row in basis:
        c = v[p]
        if c:
            v = [a - c * b for a, b in zip(v, row)]
    return v


def _insert(v: Sequence[Fraction], basis: list[tuple[int, Vector]]) -> list[tuple[int, Vector]] | None:
    """Basis extended by ``v``, or None if ``v`` already lies in the span."""
    r = _reduce(v, basis)
    p = next((i for i, a in enumerate(r) if a), None)
    if p is None:
        return None
    row = tuple(a / r[p] for a in r)
    new = [(q, tuple(a - b[p] * c for a, c in zip(b, row)) if b[p] else b) for q, b in basis]
    return sorted(new + [(p, row)])


def rank(rows: Iterable[Sequence]) -> int:
    basis: list[tuple[int, Vector]] = []
    for v in rows:
        nxt = _insert([as_fraction(a) for a in v], basis)
        if nxt is not None:
            basis = nxt
    return len(basis)


# -- problem and verdict ------------------------------------------------------------

@dataclass(frozen=True)
class PowerCountingProblem:
    """Linear forms (rows) on R^n with near-zero / near-infinity exponents."""

    dimension: int
    functionals: tuple[Vector, ...]
    exponents: tuple[tuple[Fraction, Fraction], ...]
    bounds: tuple[tuple[Fraction, Fraction], ...] = ()

    def __init__(self, dimension: int, functionals, exponents, bounds=None):
        rows = tuple(tuple(as_fraction(a) for a in r) for r in functionals)
        exps = tuple((as_fraction(m), as_fraction(n)) for m, n in exponents)
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        if not rows:
            raise ValueError("need at least one linear form")
        if len(rows) != len(exps):
            raise ValueError(f"{len(rows)} forms but {len(exps)} exponent pairs")
        if any(len(r) != dimension for r in rows):
            raise ValueError(f"every form needs {dimension} coordinates")
        b = tuple((as_fraction(a), as_fraction(c)) for a, c in bounds) if bounds else \
            tuple((Fraction(1), Fraction(1)) for _ in rows)
        if len(b) != len(rows) or any(not 0 < a <= c for a, c in b):
            raise ValueError("bounds must satisfy 0 < a_i <= b_i, one pair per form")
        object.__setattr__(self, "dimension", dimension)
        object.__setattr__(self, "functionals", rows)
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "bounds", b)

    @property
    def size(self) -> int:
        return len(self.functionals)

    @classmethod
    def from_json(cls, data: dict) -> "PowerCountingProblem":
        return cls(data["dimension"], data["functionals"], data["exponents"], data.get("bounds"))

    def to_json(self) -> dict:
        s = lambda row: [str(a) for a in row]  # noqa: E731
        return {"dimension": self.dimension,
                "functionals": [s(r) for r in self.functionals],
                "exponents": [s(e) for e in self.exponents],
                "bounds": [s(b) for b in self.bounds]}


class Finite(str, enum.Enum):
    YES = "YES"
    CONDITIONS_VIOLATED = "CONDITIONS_VIOLATED"
    HYPOTHESIS_FAILED = "HYPOTHESIS_FAILED"


@dataclass(frozen=True)
class Witness:
    condition: str          # "a" (near zero) or "b" (near infinity)
    subset: tuple[int, ...]  # 0-based indices of a basis of the offending span
    closure: tuple[int, ...]
    value: Fraction

    def to_json(self) -> dict:
        key = "d0" if self.condition == "a" else "d_inf"
        return {"condition": self.condition, "subset": [i + 1 for i in self.subset],
                "span_members": [i + 1 for i in self.closure], key: _num(self.value)}


def _num(x: Fraction):
    return int(x) if x.denominator == 1 else str(x)


@dataclass(frozen=True)
class CountingVerdict:
    finite: Finite
    witness: Witness | None
    subsets_examined: int
    span_dimension: int
    bounded: bool = False

    def to_json(self) -> dict:
        return {"finite": self.finite.value,
                "witness": None if self.witness is None else self.witness.to_json(),
                "subsets_examined": self.subsets_examined,
                "span_dimension": self.span_dimension,
                "mode": "bounded" if self.bounded else "whole_space"}


# -- the counting theorem -----------------------------------------------------------

@dataclass
class _Flat:
    basis_idx: tuple[int, ...]
    closure: tuple[int, ...]


def _closure(problem: PowerCountingProblem, basis: list[tuple[int, Vector]]) -> tuple[int, ...]:
    return tuple(i for i, v in enumerate(problem.functionals) if not any(_reduce(v, basis)))


def _independent_subsets(problem: PowerCountingProblem):
    """Yield (indices, echelon basis) for every independent subset, by size then lexicographically."""
    K = problem.size
    level = [((), [])]
    yield (), []
    for _ in range(problem.dimension):
        nxt = []
        for idx, basis in level:
            for j in range((idx[-1] + 1) if idx else 0, K):
                b = _insert(problem.functionals[j], basis)
                if b is not None:
                    nxt.append((idx + (j,), b))
        for item in nxt:
            yield item
        level = nxt


def _spans(problem: PowerCountingProblem, dedupe: bool) -> Iterable[_Flat]:
    seen = set()
    for idx, basis in _independent_subsets(problem):
        if dedupe:
            sig = tuple(basis)
            if sig in seen:
                continue
            seen.add(sig)
        yield _Flat(idx, _closure(problem, basis))


def check_integrability(problem: PowerCountingProblem, dedupe: bool = True,
                        bounded: bool = False) -> CountingVerdict:
    """Decide finiteness via conditions (a) ``d0 > 0`` and (b) ``d_inf < 0``.

    (a) runs over nonempty independent subsets; (b) over independent subsets
    whose span does not contain every form. ``bounded=True`` checks only (a),
    which decides the integral over a bounded neighbourhood of the origin.
    Spans are visited by size, then lexicographically, so the reported witness
    is the first offending span with its lexicographically smallest basis.
    """
    if problem.size > MAX_FORMS:
        raise ValueError(f"{problem.size} forms exceeds the enumeration cap of {MAX_FORMS}")
    n = problem.dimension
    dim = rank(problem.functionals)
    if dim < n:
        return CountingVerdict(Finite.HYPOTHESIS_FAILED, None, 0, dim, bounded)
    everything = set(range(problem.size))
    mu = [e[0] for e in problem.exponents]
    nu = [e[1] for e in problem.exponents]
    examined = 0
    for flat in _spans(problem, dedupe):
        examined += 1
        r = len(flat.basis_idx)
        inside = set(flat.closure)
        if r > 0:
            d0 = r + sum((mu[i] for i in inside), Fraction(0))
            if d0 <= 0:
                return CountingVerdict(Finite.CONDITIONS_VIOLATED,
                                       Witness("a", flat.basis_idx, flat.closure, d0), examined, dim, bounded)
        if not bounded and inside != everything:
            dinf = n - r + sum((nu[i] for i in everything - inside), Fraction(0))
            if dinf >= 0:
                return CountingVerdict(Finite.CONDITIONS_VIOLATED,
                                       Witness("b", flat.basis_idx, flat.closure, dinf), examined, dim, bounded)
    return CountingVerdict(Finite.YES, None, examined, dim, bounded)


# -- Hardy-Littlewood-Sobolev admissibility -----------------------------------------

@dataclass(frozen=True)
class Inequality:
    name: str
    lhs: Fraction
    relation: str
    rhs: Fraction
    holds: bool

    def __str__(self) -> str:
        return f"{self.name}: {self.lhs} {self.relation} {self.rhs} ({'ok' if self.holds else 'FAILS'})"


@dataclass(frozen=True)
class HLSReport:
    status: str                       # "admissible", "boundary", "violated", "trivial"
    p: Fraction
    gammas: tuple[Fraction, ...]
    checks: tuple[Inequality, ...] = field(default_factory=tuple)

    @property
    def admissible(self) -> bool:
        return self.status != "violated"

    def failures(self) -> list[Inequality]:
        return [c for c in self.checks if not c.holds]

    def to_json(self) -> dict:
        return {"status": self.status, "admissible": self.admissible, "p": str(self.p),
                "gammas": [str(g) for g in self.gammas], "checks": [str(c) for c in self.checks]}


def hls_admissible(n: int, q: int, H, alpha: ContractionIndex) -> HLSReport:
    """Check the multilinear HLS exponents for the contraction integral of ``alpha``.

    ``p = 1/(1 - (1-H) 2|alpha|/(nq))`` and ``gamma_ij = (2 - 2 H0) alpha_ij``.
    The exponent identity is the scale-invariant one, ``sum gamma = n (1 - 1/p)``.
    ``p == 1/H`` happens exactly when no free legs remain; it is reported as
    ``boundary`` (the kernel still lies in L^{1/H}).
    """
    if (alpha.n, alpha.q) != (n, q):
        raise ValueError(f"alpha belongs to A_{{{alpha.n},{alpha.q}}}, not A_{{{n},{q}}}")
    H = as_fraction(H)
    if not Fraction(1, 2) < H < 1:
        raise ValueError(f"H must lie in (1/2, 1), got {H}")
    H0 = 1 - (1 - H) / q
    gammas = tuple((2 - 2 * H0) * a for a in alpha.entries)
    size = alpha.size
    p = 1 / (1 - (1 - H) * Fraction(2 * size, n * q))
    if size == 0:
        return HLSReport("trivial", p, gammas, (Inequality("p", p, "==", Fraction(1), True),))
    checks = [
        Inequality("p > 1", p, ">", Fraction(1), p > 1),
        Inequality("p < n", p, "<", Fraction(n), p < n),
    ]
    for (i, j), g in zip(combinations(range(1, n + 1), 2), gammas):
        if g:
            checks.append(Inequality(f"gamma_{i}{j} < 1", g, "<", Fraction(1), 0 < g < 1))
    total = sum(gammas, Fraction(0))
    checks.append(Inequality("sum gamma = n(1 - 1/p)", total, "==", n * (1 - 1 / p),
                             total == n * (1 - 1 / p)))
    checks.append(Inequality("p < 1/H", p, "<", 1 / H, p < 1 / H))
    bad = [c for c in checks if not c.holds]
    if not bad:
        status = "admissible"
    elif all(c.name == "p < 1/H" for c in bad) and p == 1 / H:
        status = "boundary"
    else:
        status = "violated"
    return HLSReport(status, p, gammas, tuple(checks))


# -- instances ----------------------------------------------------------------------

def vanishing_term_problem(alpha: ContractionIndex, H0, L) -> PowerCountingProblem:
    """Power-counting system for the second moment of a contraction term.

    Variables ``(w_1..w_n, w'_1..w'_n, xi)``; forms ``w_k``, ``w'_k`` with
    exponents ``(0, -L)``, ``w_i - w_j`` and ``w'_i - w'_j`` with the contraction
    power, ``xi - w_k + w'_k`` with the free-leg power.
    """
    H0, L = as_fraction(H0), as_fraction(L)
    n = alpha.n
    dim = 2 * n + 1
    e = 2 * H0 - 2
    rows, exps = [], []

    def unit(*coords):
        v = [Fraction(0)] * dim
        for k, c in coords:
            v[k] += c
        return v

    for k in range(n):
        rows.append(unit((k, 1)))
        exps.append((Fraction(0), -L))
    for k in range(n):
        rows.append(unit((n + k, 1)))
        exps.append((Fraction(0), -L))
    for (i, j), a in zip(combinations(range(n), 2), alpha.entries):
        rows.append(unit((i, 1), (j, -1)))
        exps.append((e * a, e * a))
    for (i, j), a in zip(combinations(range(n), 2), alpha.entries):
        rows.append(unit((n + i, 1), (n + j, -1)))
        exps.append((e * a, e * a))
    for k, b in enumerate(alpha.free_legs):
        rows.append(unit((2 * n, 1), (k, -1), (n + k, 1)))
        exps.append((e * b, e * b))
    return PowerCountingProblem(dim, rows, exps)


# -- numerical divergence oracle ----------------------------------------------------

class OracleVerdict(str, enum.Enum):
    CONVERGENT = "CONVERGENT"
    DIVERGENT = "DIVERGENT"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class OracleReport:
    verdict: OracleVerdict
    partial_integrals: tuple[float, ...]
    ratios: tuple[float, ...]


GROWTH_THRESHOLD = 1.5
RATIO_ROUNDING = 1e-6
STALL_RATIO = 0.95


def _radial_integral(c: np.ndarray, mu: np.ndarray, nu: np.ndarray, n: int, lo: float, hi: float,
                     bounded: bool) -> float:
    """Exact int_lo^hi r^(n-1) prod f_i(r c_i) dr for the piecewise power profiles."""
    if hi <= lo:
        return 0.0
    pos = c > 0
    cuts = np.sort(1.0 / c[pos])
    knots = np.unique(np.clip(np.concatenate([[lo, hi], cuts]), lo, hi))
    logc = np.log(np.where(pos, c, 1.0))
    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        if b <= a:
            continue
        mid = 0.5 * (a + b)
        near = (mid * c <= 1) | bounded
        e = np.where(near, mu, nu)
        const = float(np.sum(e[pos] * logc[pos]))
        power = (n - 1) + float(np.sum(e[pos]))
        if abs(power + 1) < 1e-13:
            piece = math.log(b / a)
        else:
            piece = (b ** (power + 1) - a ** (power + 1)) / (power + 1)
        total += math.exp(const) * piece
    return total


def _partial_integral(M: np.ndarray, mu, nu, eps: float, R: float, bounded: bool) -> float:
    n = M.shape[1]

    def along(direction: np.ndarray) -> float:
        c = np.abs(M @ direction)
        if np.any(c == 0):
            return 0.0
        lo = max(eps, float(np.max(eps / c)))
        return _radial_integral(c, mu, nu, n, lo, R, bounded)

    if n == 1:
        return along(np.array([1.0])) + along(np.array([-1.0]))
    # The integrand is even, so half a turn suffices. Each arc between zero
    # lines of the forms is split in two and integrated in log-distance from
    # its zero line, where the integrand varies over many scales.
    f = lambda t: along(np.array([math.cos(t), math.sin(t)]))  # noqa: E731
    zeros = sorted(set(math.atan2(-m[0], m[1]) % math.pi for m in M))
    floor = 0.25 * eps / (R * float(np.max(np.linalg.norm(M, axis=1))))
    total = 0.0
    for a, b in zip(zeros, zeros[1:] + [zeros[0] + math.pi]):
        h = 0.5 * (b - a)
        if h <= floor:
            continue
        for start, sign in ((a, 1.0), (b, -1.0)):
            g = lambda u: f(start + sign * math.exp(u)) * math.exp(u)  # noqa: E731
            val, _ = integrate.quad(g, math.log(floor), math.log(h), limit=400,
                                    epsabs=0.0, epsrel=1e-10)
            total += val
    return 2.0 * total


def divergence_oracle(problem: PowerCountingProblem, levels: int = 4, base: float = 256.0,
                      bounded: bool = False) -> OracleReport:
    """Numerical finiteness check for ``n <= 2``.

    The factors are ``|t|**mu`` for ``|t| <= 1`` and ``|t|**nu`` beyond. Partial
    integrals are taken over ``{|M_i x| >= eps, |x| <= R}`` with
    ``eps = base**-k`` and ``R = base**k`` (``R = 1`` when bounded). A convergent
    integral has increments shrinking by at least ``GROWTH_THRESHOLD`` per level.
    Divergence needs the last increment ratio at 1 or above, or at least
    ``STALL_RATIO`` and still rising (a logarithmic divergence approached from
    below). Anything in between is inconclusive: for exponents on a 1/20
    lattice a convergent integral has limiting ratio at most ``256**(-1/20)``,
    but polynomial prefactors can keep early ratios above that.
    """
    n = problem.dimension
    if n > 2:
        raise ValueError("the oracle handles dimension <= 2 only")
    M = np.array([[float(a) for a in r] for r in problem.functionals])
    mu = np.array([float(m) for m, _ in problem.exponents])
    nu = np.array([float(v) for _, v in problem.exponents])
    if np.any(np.concatenate([mu, nu]) < -3) or np.any(np.concatenate([mu, nu]) > 0):
        raise ValueError("oracle exponents must lie in [-3, 0]")
    parts = []
    for k in range(1, levels + 1):
        eps = base ** -k
        R = 1.0 if bounded else base ** k
        parts.append(_partial_integral(M, mu, nu, eps, R, bounded))
    inc = np.diff(parts)
    ratios = tuple(float(b / a) if a > 0 else (0.0 if b <= 0 else math.inf) for a, b in zip(inc[:-1], inc[1:]))
    if all(r <= 1 / GROWTH_THRESHOLD for r in ratios):
        verdict = OracleVerdict.CONVERGENT
    elif ratios and (ratios[-1] >= 1 - RATIO_ROUNDING
                     or (ratios[-1] >= STALL_RATIO and all(np.diff(ratios) >= -RATIO_ROUNDING))):
        verdict = OracleVerdict.DIVERGENT
    else:
        verdict = OracleVerdict.INCONCLUSIVE
    return OracleReport(verdict, tuple(float(p) for p in parts), ratios)


def random_planar_problem(seed: int, n_forms: int = 4, grid: int = 20) -> PowerCountingProblem:
    """Random 2-D instance: integer forms, exponents on the 1/grid lattice in [-0.9, -0.1]."""
    from .process import rng

    g = rng(seed, 0)
    while True:
        rows = g.integers(-2, 3, size=(n_forms, 2))
        if np.all(np.any(rows != 0, axis=1)) and rank(rows.tolist()) == 2:
            break
    lattice = np.arange(-round(0.9 * grid), -round(0.1 * grid) + 1) / grid
    exps = [(Fraction(int(round(a * grid)), grid), Fraction(int(round(b * grid)), grid))
            for a, b in g.choice(lattice, size=(n_forms, 2))]
    return PowerCountingProblem(2, rows.tolist(), exps)

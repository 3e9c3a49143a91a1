"""Shared domain types and multi-index arithmetic."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

MultiIndex = tuple[int, ...]

# Largest exactly representable integer in a signed 64-bit word; multinomials
# above this are rejected so downstream float conversion stays meaningful.
MAX_EXACT_INT = 2**63 - 1
MAX_MULTINOMIAL_DEGREE = 12


class DegreeOverflowError(ValueError):
    """Raised when a multinomial coefficient would not fit the integer width."""


class TrainingDataError(ValueError):
    """Raised for datasets that cannot be trained on (one class, bad labels)."""


@dataclass(frozen=True)
class Dataset:
    """Observation matrix ``X`` (n x d) with labels ``y`` in {-1, +1}."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2:
            raise TrainingDataError("X must be a 2-D matrix")
        if X.shape[0] != y.shape[0]:
            raise TrainingDataError(
                f"X has {X.shape[0]} rows but y has {y.shape[0]} labels"
            )
        if not np.all(np.isfinite(X)):
            raise TrainingDataError("X contains non-finite entries")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise TrainingDataError("labels must be -1 or +1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def check_trainable(self) -> None:
        if self.n < 2:
            raise TrainingDataError("need at least two observations")
        if not (np.any(self.y > 0) and np.any(self.y < 0)):
            raise TrainingDataError("both classes must be present")

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.y[idx])

    def with_features(self, X) -> "Dataset":
        return Dataset(X, self.y)


@dataclass(frozen=True)
class NormParam:
    """The rational pair (r, s) with q = r/s and p = r/(r - s).

    ``p`` is the norm on the hyperplane normal, ``q`` its dual.
    """

    r: int
    s: int = 1

    def __post_init__(self):
        r, s = self.r, self.s
        if int(r) != r or int(s) != s:
            raise ValueError("r and s must be integers")
        object.__setattr__(self, "r", int(r))
        object.__setattr__(self, "s", int(s))
        if not self.r > self.s >= 1:
            raise ValueError(f"need r > s >= 1, got r={r}, s={s}")
        if math.gcd(self.r, self.s) != 1:
            raise ValueError(f"gcd(r, s) must be 1, got r={r}, s={s}")
        if not self.dual_coefficient < 0:  # pragma: no cover - guaranteed for p > 1
            raise ArithmeticError("dual coefficient must be negative")

    @classmethod
    def from_p(cls, p) -> "NormParam":
        """Build from the primal exponent p (string "4/3", Fraction, or number)."""
        pf = Fraction(p).limit_denominator(10_000) if not isinstance(p, str) else Fraction(p)
        if pf <= 1:
            raise ValueError("p must exceed 1")
        q = pf / (pf - 1)
        return cls(q.numerator, q.denominator)

    @property
    def q(self) -> float:
        return self.r / self.s

    @property
    def p(self) -> float:
        return self.r / (self.r - self.s)

    @property
    def p_fraction(self) -> Fraction:
        return Fraction(self.r, self.r - self.s)

    @property
    def q_fraction(self) -> Fraction:
        return Fraction(self.r, self.s)

    @property
    def integer_q(self) -> bool:
        return self.s == 1

    @property
    def even_q(self) -> bool:
        return self.s == 1 and self.r % 2 == 0

    @property
    def dual_coefficient(self) -> float:
        """The factor 1/p^q - 1/p^(q-1) multiplying the q-norm term of the dual."""
        p, q = self.p, self.q
        return p ** (-q) - p ** (1.0 - q)

    def __str__(self) -> str:
        return f"{self.r}/{self.r - self.s}"


@dataclass(frozen=True)
class Hyperplane:
    """Separating hyperplane {z : omega . z + b = 0}."""

    omega: np.ndarray
    b: float

    def __post_init__(self):
        w = np.array(self.omega, dtype=float).ravel()
        w.setflags(write=False)
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "b", float(self.b))

    def decision(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=float) @ self.omega + self.b


def sign_with_tie(values) -> np.ndarray:
    """Sign mapping an exact zero to +1."""
    v = np.asarray(values, dtype=float)
    return np.where(v >= 0.0, 1.0, -1.0)


def multinomial_coeff(gamma: Sequence[int]) -> int:
    """(|gamma|)! / prod(gamma_i!) in exact integer arithmetic."""
    gamma = tuple(int(g) for g in gamma)
    if any(g < 0 for g in gamma):
        raise ValueError("multi-index entries must be nonnegative")
    deg = sum(gamma)
    if deg > MAX_MULTINOMIAL_DEGREE:
        raise DegreeOverflowError(
            f"degree {deg} exceeds the supported maximum {MAX_MULTINOMIAL_DEGREE}"
        )
    value = _multinomial(tuple(sorted((g for g in gamma if g), reverse=True)))
    if value > MAX_EXACT_INT:  # pragma: no cover - unreachable for deg <= 12
        raise DegreeOverflowError("multinomial exceeds 64-bit integer width")
    return value


@lru_cache(maxsize=4096)
def _multinomial(parts: tuple[int, ...]) -> int:
    total, out = 0, 1
    for g in parts:
        total += g
        out *= math.comb(total, g)
    return out


def _compositions(m: int, degree: int) -> Iterator[MultiIndex]:
    """All length-m exponent vectors of the given degree, lexicographically descending."""
    if m == 1:
        yield (degree,)
        return
    for first in range(degree, -1, -1):
        for rest in _compositions(m - 1, degree - first):
            yield (first,) + rest


@lru_cache(maxsize=256)
def _enumerate_cached(m: int, degree_cap: int, homogeneous: bool) -> tuple[MultiIndex, ...]:
    if homogeneous:
        return tuple(_compositions(m, degree_cap))
    out: list[MultiIndex] = []
    for deg in range(degree_cap + 1):
        out.extend(_compositions(m, deg))
    return tuple(out)


def multi_index_enumerate(m: int, degree_cap: int, homogeneous: bool = False) -> list[MultiIndex]:
    """Multi-indices over m variables in graded-lexicographic order.

    The constant index comes first; within a degree, larger powers of the
    earlier variables come first, so for m=2 the degree-2 block reads
    (2,0), (1,1), (0,2).  With ``homogeneous`` only indices of degree exactly
    ``degree_cap`` are produced.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if degree_cap < 0:
        raise ValueError("degree_cap must be nonnegative")
    return list(_enumerate_cached(int(m), int(degree_cap), bool(homogeneous)))


def exponent_matrix(m: int, degree_cap: int, homogeneous: bool = False) -> np.ndarray:
    idx = multi_index_enumerate(m, degree_cap, homogeneous)
    return np.array(idx, dtype=np.int64).reshape(len(idx), m)


def graded_lex_key(gamma: Sequence[int]) -> tuple:
    """Sort key matching :func:`multi_index_enumerate`."""
    return (sum(gamma), tuple(-g for g in gamma))


@dataclass
class IndexMap:
    """Position lookup for an enumerated multi-index list."""

    indices: list[MultiIndex]
    position: dict[MultiIndex, int] = field(init=False)

    def __post_init__(self):
        self.position = {g: k for k, g in enumerate(self.indices)}

    def __len__(self) -> int:
        return len(self.indices)

    def __getitem__(self, gamma: MultiIndex) -> int:
        return self.position[tuple(gamma)]

    def __contains__(self, gamma) -> bool:
        return tuple(gamma) in self.position


def add_indices(a: Sequence[int], b: Sequence[int]) -> MultiIndex:
    return tuple(x + y for x, y in zip(a, b))


def unit_index(m: int, i: int) -> MultiIndex:
    return tuple(1 if k == i else 0 for k in range(m))

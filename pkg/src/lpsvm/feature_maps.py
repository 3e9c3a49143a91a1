"""Truncated-basis feature maps applied before primal training."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _accel
from .core import Dataset, exponent_matrix

KINDS = ("identity", "monomial", "gaussian_weighted", "quadratic")


@dataclass(frozen=True)
class TransformSpec:
    """Which lift to apply: identity, monomial(eta), or gaussian_weighted(eta, sigma, r).

    ``quadratic`` is the fixed map (x1^2, 2^(1/r) x1 x2, x2^2) on 2-D inputs.
    """

    kind: str = "identity"
    eta: int = 1
    sigma: float = 1.0
    r: int = 2

    def __post_init__(self):
        kind = {"gaussian": "gaussian_weighted"}.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if int(self.eta) != self.eta or self.eta < 1:
            raise ValueError("eta must be a positive integer")
        object.__setattr__(self, "eta", int(self.eta))
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if int(self.r) != self.r or self.r < 1:
            raise ValueError("r must be a positive integer")
        object.__setattr__(self, "r", int(self.r))
        if kind == "gaussian_weighted" and self.r < 2:
            raise ValueError("gaussian_weighted needs r >= 2")

    @classmethod
    def identity(cls) -> "TransformSpec":
        return cls("identity")

    @classmethod
    def monomial(cls, eta: int) -> "TransformSpec":
        return cls("monomial", eta=eta)

    @classmethod
    def gaussian(cls, eta: int, sigma: float, r: int = 2) -> "TransformSpec":
        return cls("gaussian_weighted", eta=eta, sigma=sigma, r=r)

    @classmethod
    def quadratic(cls, r: int) -> "TransformSpec":
        return cls("quadratic", r=r)

    def with_r(self, r: int) -> "TransformSpec":
        return replace(self, r=r)

    def output_dim(self, d: int) -> int:
        if self.kind == "identity":
            return d
        if self.kind == "quadratic":
            return 3
        return math.comb(d + self.eta, d)


def monomial_map(z, eta: int) -> np.ndarray:
    """All monomials z^gamma with |gamma| <= eta, graded-lex, constant first.

    Accepts a single vector (returns a vector) or an n x d matrix (returns the
    row-wise lift).
    """
    Z = np.asarray(z, dtype=float)
    single = Z.ndim == 1
    Z = np.atleast_2d(Z)
    E = exponent_matrix(Z.shape[1], eta)
    out = _accel.monomial_features(Z, E)
    return out[0] if single else out


def _gaussian_weights(d: int, eta: int, sigma: float, r: int) -> np.ndarray:
    E = exponent_matrix(d, eta)
    log_fact = np.array([sum(math.lgamma(g + 1) for g in row) for row in E])
    return (2.0 * sigma) ** (1.0 / r) * np.exp(-log_fact / r)


def gaussian_weighted_map(z, eta: int, sigma: float, r: int) -> np.ndarray:
    """exp(-sigma |z|^2) (2 sigma)^(1/r) z^gamma / (gamma!)^(1/r) for |gamma| <= eta."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if r < 2:
        raise ValueError("r must be at least 2")
    Z = np.asarray(z, dtype=float)
    single = Z.ndim == 1
    Z = np.atleast_2d(Z)
    mono = monomial_map(Z, eta)
    w = _gaussian_weights(Z.shape[1], eta, sigma, r)
    damp = np.exp(-sigma * np.einsum("ij,ij->i", Z, Z))
    out = damp[:, None] * mono * w[None, :]
    return out[0] if single else out


def generalized_gaussian(points, sigma: float) -> float:
    """Limit as eta -> infinity of sum_gamma prod_a Phi~[eta]_gamma(x_a) for r points.

    Summing the series gives 2 sigma exp(-sigma sum_a |x_a|^2) exp(sum_k prod_a x_ak);
    for two points this is the scaled Gaussian-type kernel
    2 sigma exp(-sigma (|z|^2 + |z'|^2) + z . z').
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    sq = float(np.sum(P * P))
    cross = float(np.sum(np.prod(P, axis=0)))
    return float(2.0 * sigma * np.exp(-sigma * sq + cross))


def quadratic_map(Z, r: int) -> np.ndarray:
    """(x1^2, 2^(1/r) x1 x2, x2^2) row-wise on 2-column input."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[1] != 2:
        raise ValueError("the quadratic preset needs 2-D inputs")
    x1, x2 = Z[:, 0], Z[:, 1]
    return np.column_stack([x1 * x1, 2.0 ** (1.0 / r) * x1 * x2, x2 * x2])


def transform_matrix(X, spec: TransformSpec) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if spec.kind == "identity":
        return X
    if spec.kind == "monomial":
        return monomial_map(X, spec.eta)
    if spec.kind == "quadratic":
        return quadratic_map(X, spec.r)
    return gaussian_weighted_map(X, spec.eta, spec.sigma, spec.r)


def apply_transform(ds: Dataset, spec: TransformSpec) -> Dataset:
    if spec.kind == "identity":
        return ds
    return ds.with_features(transform_matrix(ds.X, spec))


@dataclass(frozen=True)
class Standardizer:
    """Per-column z-score fitted on training rows; constant columns keep scale 1."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale)

    def apply(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

"""Stratified k-fold cross-validation and the (C, sigma) grid search."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.model_selection import StratifiedKFold

from ..conic import SolverFailure
from ..core import Dataset, NormParam
from ..feature_maps import TransformSpec
from ..primal import train_primal

NONZERO_RTOL = 1e-6


def default_grid() -> tuple[float, ...]:
    """{2^k : k = -7..7}."""
    return tuple(2.0**k for k in range(-7, 8))


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    norms: tuple[NormParam, ...] = (NormParam(2),)
    transform: str = "identity"
    etas: tuple[int, ...] = (1,)
    sigmas: tuple[float, ...] = (1.0,)
    Cs: tuple[float, ...] = (1.0,)
    folds: int = 10
    seed: int = 0
    standardize: bool = True
    tol: float = 1e-8

    def __post_init__(self):
        for name in ("norms", "etas", "sigmas", "Cs"):
            value = tuple(getattr(self, name))
            object.__setattr__(self, name, value)
            if not value:
                raise ConfigError(f"{name} must not be empty")
        if self.folds < 2:
            raise ConfigError("need at least 2 folds")
        if any(not c > 0 for c in self.Cs) or any(not s > 0 for s in self.sigmas):
            raise ConfigError("C and sigma values must be positive")
        TransformSpec(self.transform)  # validates the kind

    def check(self, ds: Dataset) -> None:
        minority = int(min(np.sum(ds.y > 0), np.sum(ds.y < 0)))
        if self.folds > minority:
            raise ConfigError(f"{self.folds} folds exceed the minority class count {minority}")

    def specs(self) -> list[TransformSpec]:
        """One transform per (eta, sigma); sigma only varies for the Gaussian lift."""
        kind = TransformSpec(self.transform).kind
        if kind == "identity":
            return [TransformSpec.identity()]
        if kind == "gaussian_weighted":
            return [TransformSpec(kind, eta=e, sigma=s) for e in self.etas for s in self.sigmas]
        return [TransformSpec(kind, eta=e) for e in self.etas]

    def combinations(self):
        for norm, spec, C in itertools.product(self.norms, self.specs(), self.Cs):
            # the Gaussian weights use the norm's own r
            if spec.kind in ("gaussian_weighted", "quadratic"):
                spec = spec.with_r(max(norm.r, 2))
            yield norm, spec, float(C)


@dataclass(frozen=True)
class MetricsRow:
    r: int
    s: int
    transform: str
    eta: int
    sigma: float
    C: float
    acc_train: float
    acc_test: float
    time: float
    pct_nonzero: float
    failed_folds: int = 0

    @property
    def norm(self) -> NormParam:
        return NormParam(self.r, self.s)

    @property
    def p_label(self) -> str:
        frac = self.norm.p_fraction
        return str(frac.numerator) if frac.denominator == 1 else f"{frac.numerator}/{frac.denominator}"


def accuracy(pred, y) -> float:
    return 100.0 * float(np.mean(np.asarray(pred) == np.asarray(y)))


def pct_nonzero(omega) -> float:
    omega = np.abs(np.asarray(omega, dtype=float))
    if omega.size == 0 or omega.max() == 0:
        return 0.0
    return 100.0 * float(np.mean(omega > NONZERO_RTOL * omega.max()))


def fold_indices(y, folds: int, seed: int) -> list[np.ndarray]:
    """Test-index arrays of a seeded, shuffled stratified partition."""
    skf = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    y = np.asarray(y)
    return [test for _, test in skf.split(np.zeros((y.size, 1)), y)]


@dataclass
class _FoldStats:
    acc_train: list = field(default_factory=list)
    acc_test: list = field(default_factory=list)
    time: list = field(default_factory=list)
    nonzero: list = field(default_factory=list)
    failed: int = 0

    def mean(self, name: str) -> float:
        vals = getattr(self, name)
        return float(np.mean(vals)) if vals else math.nan


def evaluate(ds: Dataset, norm: NormParam, spec: TransformSpec, C: float, config: ExperimentConfig,
             folds: list[np.ndarray] | None = None) -> MetricsRow:
    """Cross-validated metrics for one parameter combination."""
    folds = folds if folds is not None else fold_indices(ds.y, config.folds, config.seed)
    stats = _FoldStats()
    everything = np.arange(ds.n)
    for test in folds:
        train = np.setdiff1d(everything, test)
        tr, te = ds.subset(train), ds.subset(test)
        try:
            model = train_primal(tr, norm, C, spec, tol=config.tol, standardize=config.standardize)
        except SolverFailure:
            stats.failed += 1
            continue
        stats.acc_train.append(accuracy(model.predict(tr.X), tr.y))
        stats.acc_test.append(accuracy(model.predict(te.X), te.y))
        stats.time.append(model.solve_time)
        stats.nonzero.append(pct_nonzero(model.omega))
    return MetricsRow(
        r=norm.r,
        s=norm.s,
        transform=spec.kind,
        eta=spec.eta if spec.kind in ("monomial", "gaussian_weighted") else 1,
        sigma=spec.sigma if spec.kind == "gaussian_weighted" else 0.0,
        C=float(C),
        acc_train=stats.mean("acc_train"),
        acc_test=stats.mean("acc_test"),
        time=stats.mean("time"),
        pct_nonzero=stats.mean("nonzero"),
        failed_folds=stats.failed,
    )


def cross_validate(ds: Dataset, config: ExperimentConfig) -> list[MetricsRow]:
    """One row per (norm, transform, C) combination, all on the same folds."""
    config.check(ds)
    folds = fold_indices(ds.y, config.folds, config.seed)
    return [evaluate(ds, norm, spec, C, config, folds) for norm, spec, C in config.combinations()]


def best_row(rows: list[MetricsRow]) -> MetricsRow:
    """Highest mean test accuracy; ties go to the smaller C, then the smaller sigma."""
    if not rows:
        raise ValueError("no rows to choose from")

    def key(row: MetricsRow):
        acc = row.acc_test if not math.isnan(row.acc_test) else -math.inf
        return (-acc, row.C, row.sigma)

    return min(rows, key=key)


@dataclass(frozen=True)
class GridResult:
    C: float
    sigma: float
    best: MetricsRow
    rows: tuple[MetricsRow, ...]


def grid_search(ds: Dataset, config: ExperimentConfig) -> GridResult:
    rows = cross_validate(ds, config)
    best = best_row(rows)
    return GridResult(best.C, best.sigma, best, tuple(rows))

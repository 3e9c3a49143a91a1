"""Lagrangian dual of the l_p-SVM.

With g_j(alpha) = sum_i alpha_i y_i x_ij the dual reads

    max  k_p * sum_j |g_j(alpha)|^q + sum_i alpha_i
    s.t. alpha in H_y = {alpha in [0, C]^n : y . alpha = 0}

where k_p = p^-q - p^(1-q) < 0.  For even integer q the power is a
polynomial everywhere; otherwise the sign of each g_j is fixed on the cells
of the hyperplane arrangement {g_j = 0}, and on each cell the objective is a
homogeneous polynomial of degree r (q = r/s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import _accel
from .conic import STATUS_OPTIMAL, Affine, ConicProgram, SolverFailure, power_tower
from .core import Dataset, Hyperplane, NormParam, exponent_matrix, multinomial_coeff

MAX_CELL_DIM = 20
MAX_POLY_TERMS = 250_000


class CellBoundaryError(ValueError):
    """Gradient requested where the sign pattern is not locally constant."""


class SizeGuardError(ValueError):
    """Problem exceeds the dimension guard of an exponential-size routine."""


class NoSupportVectorError(ValueError):
    """Every multiplier sits at a bound, so the intercept is undetermined."""


class DualNonconvergenceError(RuntimeError):
    pass


def _xy(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    return ds.X, ds.y


def _g(alpha, ds: Dataset) -> np.ndarray:
    X, y = _xy(ds)
    return X.T @ (np.asarray(alpha, dtype=float) * y)


@dataclass(frozen=True)
class DualFeasibleSet:
    """H_y = {alpha in [0, C]^n : y . alpha = 0}."""

    y: np.ndarray
    C: float

    def contains(self, alpha, tol: float = 1e-8) -> bool:
        a = np.asarray(alpha, dtype=float)
        return bool(
            np.all(a >= -tol) and np.all(a <= self.C + tol) and abs(a @ self.y) <= tol
        )

    def project(self, z) -> np.ndarray:
        return _accel.project_box_hyperplane(
            np.asarray(z, dtype=float), np.asarray(self.y, dtype=float), float(self.C)
        )


# objective ----------------------------------------------------------------


def dual_objective(alpha, ds: Dataset, norm: NormParam, C: float | None = None) -> float:
    g = _g(alpha, ds)
    return float(norm.dual_coefficient * np.sum(np.abs(g) ** norm.q) + np.sum(alpha))


def dual_gradient(
    alpha, ds: Dataset, norm: NormParam, C: float | None = None, cell: "SignCell | None" = None
) -> np.ndarray:
    """Gradient of :func:`dual_objective`.

    For q other than an even integer the sign of every nontrivial g_j must be
    locally constant, so ``cell`` is required and alpha must lie strictly
    inside it.
    """
    X, y = _xy(ds)
    alpha = np.asarray(alpha, dtype=float)
    g = _g(alpha, ds)
    q = norm.q
    if norm.even_q:
        dg = g ** (norm.r - 1)
    else:
        if cell is None:
            raise CellBoundaryError("a sign cell is required unless q is an even integer")
        if not cell.strictly_contains(alpha, ds):
            raise CellBoundaryError("alpha lies on the boundary of (or outside) the cell")
        dg = cell.signs * np.abs(g) ** (q - 1.0)
    return 1.0 + norm.dual_coefficient * q * y * (X @ dg)


# cells --------------------------------------------------------------------


@dataclass(frozen=True)
class SignCell:
    """Sign pattern s with rows M_j = s_j (y * x_.j): the cell is {M alpha >= 0}.

    ``trivial`` marks columns whose g_j vanishes identically on H_y; their sign
    is fixed to +1 and they contribute no row.  ``free`` cells (even r) impose
    no sign restriction at all.
    """

    signs: np.ndarray
    rows: np.ndarray
    trivial: np.ndarray
    free: bool = False

    @property
    def active_rows(self) -> np.ndarray:
        return self.rows[~self.trivial]

    def contains(self, alpha, ds: Dataset | None = None, tol: float = 1e-9) -> bool:
        if self.free:
            return True
        return bool(np.all(self.active_rows @ np.asarray(alpha, dtype=float) >= -tol))

    def strictly_contains(self, alpha, ds: Dataset | None = None, tol: float = 0.0) -> bool:
        if self.free:
            return True
        vals = self.active_rows @ np.asarray(alpha, dtype=float)
        return bool(np.all(vals > tol))


def _trivial_mask(A: np.ndarray, y: np.ndarray, tol: float) -> np.ndarray:
    """Columns a_j = y * x_.j lying in span(y) (so g_j = 0 on H_y)."""
    proj = np.outer(y, y @ A) / (y @ y)
    resid = np.linalg.norm(A - proj, axis=0)
    scale = np.maximum(np.linalg.norm(A, axis=0), 1.0)
    return resid <= tol * scale


def _cell_margin(rows: np.ndarray, y: np.ndarray) -> float:
    """max eps s.t. alpha >= eps, rows @ alpha >= eps, y . alpha = 0, sum alpha = 1."""
    n = y.shape[0]
    k = rows.shape[0]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.zeros((n + k, n + 1))
    A_ub[:n, :n] = -np.eye(n)
    A_ub[:n, -1] = 1.0
    if k:
        A_ub[n:, :n] = -rows
        A_ub[n:, -1] = 1.0
    A_eq = np.zeros((2, n + 1))
    A_eq[0, :n] = y
    A_eq[1, :n] = 1.0
    b_eq = np.array([0.0, 1.0])
    bounds = [(None, None)] * n + [(None, 1.0)]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n + k), A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if res.status != 0:
        return -np.inf
    return float(-res.fun)


def enumerate_cells(ds: Dataset, r: int, *, tol: float = 1e-9) -> list[SignCell]:
    """Full-dimensional cells of {g_j = 0} restricted to H_y.

    Even r gives the single unrestricted cell.  For odd r the sign patterns
    are explored depth-first (+1 before -1) and a prefix is pruned as soon
    as an LP shows it has no relative interior in H_y.
    """
    X, y = _xy(ds)
    A = y[:, None] * X  # n x D, column j is the normal of g_j
    D = A.shape[1]
    trivial = _trivial_mask(A, y, 1e-12)
    if r % 2 == 0:
        return [SignCell(np.ones(D), A.T.copy(), trivial, free=True)]
    active = np.flatnonzero(~trivial)
    if active.size > MAX_CELL_DIM:
        raise SizeGuardError(
            f"{active.size} nontrivial columns exceed the cell-enumeration limit {MAX_CELL_DIM}"
        )
    cells: list[SignCell] = []

    def dfs(prefix: list[float]):
        k = len(prefix)
        rows = (np.asarray(prefix)[:, None] * A[:, active[:k]].T).reshape(k, A.shape[0])
        if _cell_margin(rows, y) <= tol:
            return
        if len(prefix) == active.size:
            signs = np.ones(D)
            signs[active] = prefix
            cells.append(SignCell(signs, (signs[:, None] * A.T), trivial))
            return
        dfs(prefix + [1.0])
        dfs(prefix + [-1.0])

    dfs([])
    return cells


# homogeneous expansion --------------------------------------------------------


@dataclass(frozen=True)
class HomogeneousPoly:
    """sum_k coefficients[k] * alpha^exponents[k] with every |exponents[k]| = degree."""

    degree: int
    exponents: np.ndarray
    coefficients: np.ndarray

    def __call__(self, alpha) -> float:
        return _accel.poly_eval(self.exponents, self.coefficients, np.asarray(alpha, dtype=float))

    def __len__(self) -> int:
        return self.coefficients.shape[0]

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(v) for v in e): float(c) for e, c in zip(self.exponents, self.coefficients)}

    def coefficient(self, gamma) -> float:
        gamma = np.asarray(gamma)
        hit = np.flatnonzero(np.all(self.exponents == gamma, axis=1))
        return float(self.coefficients[hit[0]]) if hit.size else 0.0


def _multinomials(E: np.ndarray) -> np.ndarray:
    return np.array([float(multinomial_coeff(row)) for row in E])


def expand_homogeneous(
    ds: Dataset, cell: SignCell | None, r: int, *, columns=None
) -> HomogeneousPoly:
    """sum_j (s_j g_j(alpha))^r as a coefficient map over |gamma| = r:
    coefficient of gamma = c_gamma y^gamma sum_j s_j^r x_.j^gamma."""
    if r < 2:
        raise ValueError("degree must be at least 2")
    X, y = _xy(ds)
    n, D = X.shape
    terms = math.comb(n + r - 1, r)
    if terms > MAX_POLY_TERMS:
        raise SizeGuardError(f"{terms} monomials exceed the expansion limit {MAX_POLY_TERMS}")
    signs = np.ones(D) if cell is None else np.asarray(cell.signs, dtype=float)
    weights = signs**r
    if columns is not None:
        mask = np.zeros(D)
        mask[np.asarray(columns)] = 1.0
        weights = weights * mask
    E = exponent_matrix(n, r, homogeneous=True)
    coef = _accel.homogeneous_coefficients(E, _multinomials(E), y, X, weights)
    return HomogeneousPoly(r, E, coef)


# solving ----------------------------------------------------------------------


@dataclass
class DualSolution:
    alpha: np.ndarray
    value: float
    method: str
    iterations: int = 0
    cell_index: int | None = None
    cell_values: list[float] = field(default_factory=list)


def _projected_gradient(ds, norm, C, tol, max_iter) -> DualSolution:
    X, y = _xy(ds)
    H = DualFeasibleSet(y, C)
    f = lambda a: dual_objective(a, ds, norm)  # noqa: E731
    grad = lambda a: dual_gradient(a, ds, norm)  # noqa: E731

    # curvature scale of the power term at the box radius
    q = norm.q
    xnorm = float(np.linalg.norm(X, 2)) if X.size else 0.0
    gmax = C * float(np.sum(np.abs(X))) + 1.0
    L = abs(norm.dual_coefficient) * q * (q - 1.0) * xnorm**2 * gmax ** max(q - 2.0, 0.0)
    step = 1.0 / max(L, 1e-12)

    alpha = H.project(np.full(y.shape[0], 0.5 * C))
    fa, ga = f(alpha), grad(alpha)
    history = [fa]
    for it in range(1, max_iter + 1):
        pg = H.project(alpha + ga) - alpha
        if np.linalg.norm(pg) <= tol:
            return DualSolution(alpha, fa, "projected_gradient", it)
        # spectral projected gradient: project once, then a nonmonotone
        # Armijo search along the feasible direction
        d = H.project(alpha + step * ga) - alpha
        slope = ga @ d
        ref = max(history[-10:])
        t = 1.0
        while True:
            cand = alpha + t * d
            fc = f(cand)
            if fc >= ref + 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        gc = grad(cand)
        sdiff = cand - alpha
        ydiff = gc - ga
        alpha, fa, ga = cand, fc, gc
        history.append(fa)
        # Barzilai-Borwein step (concave objective: -y.s >= 0)
        curv = -(sdiff @ ydiff)
        step = (sdiff @ sdiff) / curv if curv > 1e-300 else 1e12
        step = min(max(step, 1e-12), 1e12)
    pg = np.linalg.norm(H.project(alpha + ga) - alpha)
    raise DualNonconvergenceError(
        f"projected gradient stopped after {max_iter} iterations (|pg| = {pg:.3e})"
    )


def _solve_cell(ds, norm, C, cell: SignCell, tol) -> tuple[np.ndarray, float]:
    """max sum(alpha) + k_p sum_j (s_j g_j)^q over H_y and the cell, as an SOCP."""
    X, y = _xy(ds)
    n, D = X.shape
    prog = ConicProgram()
    alpha = prog.add_vars(n, "alpha")
    for i in range(n):
        prog.add_ge(alpha[i])
        prog.add_ge(C - alpha[i])
    prog.add_eq(sum((y[i] * alpha[i] for i in range(n)), Affine()))
    us = []
    for j in np.flatnonzero(~cell.trivial):
        gj = sum((y[i] * X[i, j] * alpha[i] for i in range(n) if X[i, j] != 0.0), Affine())
        u = prog.add_var(f"u[{j}]")
        if cell.free:
            v = prog.add_var(f"v[{j}]")
            prog.add_ge(v - gj)
            prog.add_ge(v + gj)
        else:
            v = cell.signs[j] * gj
            prog.add_ge(v)
        # u^s >= v^r  <=>  u >= v^q
        power_tower(prog, u, v, norm.r, norm.r - norm.s, tag=f"cell{j}")
        us.append(u)
    objective = -sum(alpha, Affine()) - norm.dual_coefficient * sum(us, Affine())
    prog.minimize(objective)
    sol = prog.solve(tol=tol)
    if sol.status != STATUS_OPTIMAL:
        raise SolverFailure(sol.status)
    a = np.clip(sol.value(alpha), 0.0, C)
    return a, dual_objective(a, ds, norm)


def solve_dual(
    ds: Dataset,
    norm: NormParam,
    C: float,
    method: str = "auto",
    tol: float = 1e-8,
    max_iter: int = 50_000,
) -> DualSolution:
    """Maximize the dual over H_y.

    ``projected_gradient`` (even integer q) runs spectral projected ascent:
    Barzilai-Borwein steps with a nonmonotone Armijo search.  ``cellwise`` solves the
    concave program on every sign cell (one cell for even r) and keeps the
    best; the first cell wins ties.
    """
    ds.check_trainable()
    if not C > 0:
        raise ValueError("C must be positive")
    if method == "auto":
        method = "projected_gradient" if norm.even_q else "cellwise"
    if method == "projected_gradient":
        if not norm.even_q:
            raise ValueError("projected_gradient needs an even integer q")
        return _projected_gradient(ds, norm, C, tol, max_iter)
    if method != "cellwise":
        raise ValueError(f"unknown method {method!r}")
    cells = enumerate_cells(ds, norm.r)
    best = None
    values = []
    for k, cell in enumerate(cells):
        a, val = _solve_cell(ds, norm, C, cell, tol)
        values.append(val)
        if best is None or val > best[1] + 1e-12 * max(1.0, abs(val)):
            best = (a, val, k)
    a, val, k = best
    return DualSolution(a, val, "cellwise", len(cells), k, values)


def recover_omega(alpha, ds: Dataset, norm: NormParam) -> np.ndarray:
    """Stationarity of the Lagrangian in omega: omega_j = sgn(g_j) |g_j|^(q-1) / p^(q-1)."""
    g = _g(alpha, ds)
    q, p = norm.q, norm.p
    return np.sign(g) * np.abs(g) ** (q - 1.0) / p ** (q - 1.0)


def recover_hyperplane(
    alpha, ds: Dataset, norm: NormParam, C: float, tol: float | None = None
) -> Hyperplane:
    """omega_j = sgn(g_j) |g_j|^(q-1) / p^(q-1); b averaged over interior multipliers."""
    X, y = _xy(ds)
    alpha = np.asarray(alpha, dtype=float)
    omega = recover_omega(alpha, ds, norm)
    tol = 1e-5 * C if tol is None else tol
    interior = (alpha > tol) & (alpha < C - tol)
    if not np.any(interior):
        raise NoSupportVectorError("no multiplier strictly between 0 and C")
    b = float(np.mean(y[interior] - X[interior] @ omega))
    return Hyperplane(omega, b)


# fractional q -------------------------------------------------------------------


@dataclass(frozen=True)
class FractionalDual:
    """Cell form for q = r/s, s > 1, in variables (alpha, delta):

        max  k_p * sum_j delta_j + sum_i alpha_i
        s.t. (s_j g_j(alpha))^r - delta_j^s <= 0,  j = 1..D
             alpha in H_y and the cell.
    """

    norm: NormParam
    C: float
    cell: SignCell
    coefficient: float
    column_polys: tuple[HomogeneousPoly, ...]
    y: np.ndarray

    def objective(self, alpha, delta) -> float:
        return float(self.coefficient * np.sum(delta) + np.sum(alpha))

    def constraints(self, alpha, delta) -> np.ndarray:
        delta = np.asarray(delta, dtype=float)
        vals = np.array([poly(alpha) for poly in self.column_polys])
        return vals - delta**self.norm.s

    def is_feasible(self, alpha, delta, tol: float = 1e-8) -> bool:
        H = DualFeasibleSet(self.y, self.C)
        return bool(
            H.contains(alpha, tol)
            and self.cell.contains(alpha, tol=tol)
            and np.all(self.constraints(alpha, delta) <= tol * (1.0 + np.abs(delta) ** self.norm.s))
        )


def build_fractional_dual(ds: Dataset, norm: NormParam, C: float, cell: SignCell) -> FractionalDual:
    if norm.s == 1:
        raise ValueError("integer q uses the homogeneous expansion directly")
    D = ds.d
    polys = tuple(expand_homogeneous(ds, cell, norm.r, columns=[j]) for j in range(D))
    return FractionalDual(norm, float(C), cell, norm.dual_coefficient, polys, ds.y)

"""Higher-order kernels, their symmetric tensors, and rank-one decompositions.

For data lifted by Phi (rows Phi(x_i), plus an evaluation point Phi(z)) and a
sign vector s, the order-r kernel is

    K_{gamma, lam}(z) = sum_j s_j^r prod_i Phi_j(x_i)^gamma_i * Phi_j(z)^lam

with |gamma| + lam = r.  Collecting these numbers over multisets of indices
in {x_1, ..., x_n, z} gives a symmetric tensor of order r and dimension n+1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import linprog

from .core import multinomial_coeff


class DegreeMismatchError(ValueError):
    pass


class SignConditionError(ValueError):
    """A rank-one term's eigenvalue sign disagrees with the induced kernel sign."""

    def __init__(self, cell: int, component: int, alpha: np.ndarray):
        self.cell, self.component, self.alpha = cell, component, np.asarray(alpha)
        super().__init__(
            f"sign condition fails for cell {cell}, component {component} at alpha={np.array2string(self.alpha, precision=4)}"
        )


class ZeroRowError(ValueError):
    pass


# ---------------------------------------------------------------------------
# storage


@dataclass(frozen=True)
class SymmetricTensor:
    """Order-r tensor over {0..dim-1}, one value per sorted index tuple."""

    order: int
    dim: int
    values: dict[tuple[int, ...], float] = field(repr=False)

    def __post_init__(self):
        if self.order < 1 or self.dim < 1:
            raise ValueError("order and dim must be positive")
        clean = {}
        for key, val in self.values.items():
            k = tuple(sorted(int(i) for i in key))
            if len(k) != self.order or k[0] < 0 or k[-1] >= self.dim:
                raise ValueError(f"index {key} out of range")
            clean[k] = float(val)
        object.__setattr__(self, "values", clean)

    def __getitem__(self, idx) -> float:
        return self.values.get(tuple(sorted(int(i) for i in idx)), 0.0)

    def keys(self) -> Iterable[tuple[int, ...]]:
        return itertools.combinations_with_replacement(range(self.dim), self.order)

    @classmethod
    def from_dense(cls, T: np.ndarray, atol: float = 1e-12) -> "SymmetricTensor":
        T = np.asarray(T, dtype=float)
        order, dim = T.ndim, T.shape[0]
        vals = {}
        for key in itertools.combinations_with_replacement(range(dim), order):
            for perm in set(itertools.permutations(key)):
                if abs(T[perm] - T[key]) > atol * max(1.0, abs(T[key])):
                    raise ValueError("array is not symmetric")
            vals[key] = T[key]
        return cls(order, dim, vals)

    @classmethod
    def from_function(cls, order: int, dim: int, fn: Callable[[tuple[int, ...]], float]) -> "SymmetricTensor":
        return cls(order, dim, {k: fn(k) for k in itertools.combinations_with_replacement(range(dim), order)})

    def to_dense(self) -> np.ndarray:
        T = np.zeros((self.dim,) * self.order)
        for key in self.keys():
            v = self.values.get(key, 0.0)
            for perm in set(itertools.permutations(key)):
                T[perm] = v
        return T

    def frobenius(self) -> float:
        """Norm over the full (unsymmetrized) array."""
        total = 0.0
        for key, v in self.values.items():
            counts = np.bincount(np.asarray(key), minlength=1)
            total += multinomial_coeff(tuple(int(c) for c in counts if c)) * v * v
        return math.sqrt(total)

    def is_psd(self, shift: float = 1e-12) -> bool:
        """Matrix case only: Cholesky of T + shift I."""
        if self.order != 2:
            raise ValueError("PSD check is defined for order-2 tensors")
        M = self.to_dense()
        try:
            np.linalg.cholesky(M + shift * np.eye(self.dim))
        except np.linalg.LinAlgError:
            return False
        return True


def write_tensor(T: SymmetricTensor) -> str:
    """Header "order dim", then "i1 ... ir value" per sorted index (1-based)."""
    lines = [f"{T.order} {T.dim}"]
    for key in T.keys():
        idx = " ".join(str(i + 1) for i in key)
        lines.append(f"{idx} {T[key]!r}")
    return "\n".join(lines) + "\n"


def read_tensor(text: str) -> SymmetricTensor:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ValueError("empty tensor document")
    try:
        order, dim = int(rows[0][0]), int(rows[0][1])
    except (ValueError, IndexError) as exc:
        raise ValueError("header must be 'order dim'") from exc
    vals = {}
    for lineno, parts in enumerate(rows[1:], start=2):
        if len(parts) != order + 1:
            raise ValueError(f"line {lineno}: expected {order} indices and a value")
        try:
            key = tuple(int(p) - 1 for p in parts[:order])
            vals[key] = float(parts[order])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    return SymmetricTensor(order, dim, vals)


# ---------------------------------------------------------------------------
# kernels


def kernel_value(Phi_x, Phi_z, signs, gamma, lam: int, r: int) -> float:
    """sum_j s_j^r prod_i Phi_j(x_i)^gamma_i Phi_j(z)^lam."""
    Phi_x = np.atleast_2d(np.asarray(Phi_x, dtype=float))
    Phi_z = np.asarray(Phi_z, dtype=float).ravel()
    gamma = np.asarray(gamma, dtype=np.int64)
    if np.any(gamma < 0) or lam < 0:
        raise DegreeMismatchError("negative exponent")
    if int(gamma.sum()) + int(lam) != r:
        raise DegreeMismatchError(f"|gamma| + lambda = {int(gamma.sum()) + lam} but r = {r}")
    s = np.ones(Phi_x.shape[1]) if signs is None else np.asarray(signs, dtype=float)
    sr = s**r
    prod = np.prod(Phi_x ** gamma[:, None], axis=0) * Phi_z**lam
    return float(sr @ prod)


def _split_index(key: tuple[int, ...], n: int) -> tuple[np.ndarray, int]:
    counts = np.bincount(np.asarray(key, dtype=np.int64), minlength=n + 1)
    return counts[:n], int(counts[n])


def tensor_from_kernel(kernel: Callable[[np.ndarray, int], float], n: int, r: int) -> SymmetricTensor:
    """Entry (i_1..i_r) over {x_1..x_n, z} is kernel(gamma, lam) where gamma counts
    the data indices and lam the multiplicity of the evaluation index n."""
    vals = {}
    for key in itertools.combinations_with_replacement(range(n + 1), r):
        gamma, lam = _split_index(key, n)
        vals[key] = kernel(gamma, lam)
    return SymmetricTensor(r, n + 1, vals)


def kernel_tensor(Phi_x, Phi_z, signs, r: int) -> SymmetricTensor:
    Phi_x = np.atleast_2d(np.asarray(Phi_x, dtype=float))
    n = Phi_x.shape[0]
    return tensor_from_kernel(lambda g, l: kernel_value(Phi_x, Phi_z, signs, g, l, r), n, r)


def cauchy_tensor(rows, r: int, norm_ord: float = 2) -> SymmetricTensor:
    """1 / (|x_i1| + ... + |x_ir|) over the given rows (data followed by z)."""
    if r % 2:
        raise ValueError("the Cauchy construction needs an even order")
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    norms = np.linalg.norm(rows, ord=norm_ord, axis=1)
    if np.any(norms <= 0):
        bad = int(np.flatnonzero(norms <= 0)[0])
        raise ZeroRowError(f"row {bad} has zero norm")
    return SymmetricTensor.from_function(r, rows.shape[0], lambda k: 1.0 / float(norms[list(k)].sum()))


# ---------------------------------------------------------------------------
# rank-one decomposition


@dataclass(frozen=True)
class RankOneDecomposition:
    """T ~ sum_j psi[j] * V[j] (x) ... (x) V[j] with unit rows V[j]."""

    psi: np.ndarray
    V: np.ndarray
    residual: float
    order: int
    history: tuple[float, ...] = ()

    @property
    def rank(self) -> int:
        return int(self.psi.shape[0])

    def reconstruct(self) -> np.ndarray:
        m = self.V.shape[1] if self.V.ndim == 2 and self.V.size else 0
        T = np.zeros((m,) * self.order)
        for p, v in zip(self.psi, self.V):
            T += p * _outer_power(v, self.order)
        return T


def _outer_power(v: np.ndarray, r: int) -> np.ndarray:
    out = v
    for _ in range(r - 1):
        out = np.multiply.outer(out, v)
    return out


def _unfold(T: np.ndarray, mode: int) -> np.ndarray:
    return np.moveaxis(T, mode, 0).reshape(T.shape[mode], -1)


def _khatri_rao(mats: list[np.ndarray]) -> np.ndarray:
    out = mats[0]
    for M in mats[1:]:
        out = (out[:, None, :] * M[None, :, :]).reshape(-1, out.shape[1])
    return out


def _cp_als(T: np.ndarray, factors: list[np.ndarray], max_iter: int, tol: float):
    """Plain CP-ALS; each sweep solves exact least squares per mode, so the
    residual sequence is nonincreasing."""
    r = T.ndim
    unf = [_unfold(T, k) for k in range(r)]
    history = []
    norm_t = np.linalg.norm(T)
    for _ in range(max_iter):
        for k in range(r):
            others = [factors[m] for m in range(r) if m != k]
            KR = _khatri_rao(others)
            gram = np.ones((factors[0].shape[1],) * 2)
            for M in others:
                gram *= M.T @ M
            rhs = unf[k] @ KR
            factors[k] = np.linalg.lstsq(gram.T, rhs.T, rcond=None)[0].T
        approx = _cp_full(factors)
        res = float(np.linalg.norm(T - approx))
        history.append(res)
        if res <= tol or (len(history) > 1 and history[-2] - res <= 1e-15 * max(norm_t, 1.0)):
            break
    return factors, history


def _cp_full(factors: list[np.ndarray]) -> np.ndarray:
    r = len(factors)
    m = factors[0].shape[0]
    KR = _khatri_rao(factors[1:])
    return (factors[0] @ KR.T).reshape((m,) * r)


def _symmetrize(T: np.ndarray, factors: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray, float]:
    """Collapse CP factors onto symmetric rank-one terms and refit psi by least squares."""
    r = T.ndim
    V = []
    for j in range(factors[0].shape[1]):
        # average the mode directions after sign alignment with mode 0
        ref = factors[0][:, j]
        acc = np.zeros_like(ref)
        for F in factors:
            col = F[:, j]
            acc += col if col @ ref >= 0 else -col
        nrm = np.linalg.norm(acc)
        V.append(acc / nrm if nrm > 0 else acc)
    V = np.array(V)
    psi, res = _fit_psi(T, V)
    return psi, V, res


def _fit_psi(T: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, float]:
    r = T.ndim
    if V.shape[0] == 0:
        return np.zeros(0), float(np.linalg.norm(T))
    basis = np.array([_outer_power(v, r).ravel() for v in V]).T
    psi = np.linalg.lstsq(basis, T.ravel(), rcond=None)[0]
    res = float(np.linalg.norm(T.ravel() - basis @ psi))
    return psi, res


def _best_rank_one(T: np.ndarray, rng, restarts: int = 5, iters: int = 200) -> np.ndarray:
    """Symmetric higher-order power iteration for a dominant rank-one direction."""
    r, m = T.ndim, T.shape[0]
    best, best_val = None, -np.inf
    for _ in range(restarts):
        v = rng.standard_normal(m)
        v /= np.linalg.norm(v)
        for _ in range(iters):
            w = T
            for _ in range(r - 1):
                w = w @ v
            nw = np.linalg.norm(w)
            if nw == 0:
                break
            v_new = w / nw
            if np.linalg.norm(v_new - v) < 1e-13 or np.linalg.norm(v_new + v) < 1e-13:
                v = v_new
                break
            v = v_new
        val = abs(float(_contract(T, v)))
        if val > best_val:
            best, best_val = v, val
    return best


def _contract(T: np.ndarray, v: np.ndarray) -> float:
    w = T
    for _ in range(T.ndim):
        w = w @ v
    return float(w)


def als_decompose(
    T: SymmetricTensor | np.ndarray,
    D_max: int,
    restarts: int = 50,
    tol: float = 1e-10,
    *,
    max_iter: int = 500,
    seed: int = 0,
) -> RankOneDecomposition:
    """Smallest-rank symmetric decomposition found by CP-ALS with restarts.

    The rank grows from 1 to ``D_max``; the first start at each rank is the
    previous solution plus a dominant direction of the deflated residual, the
    rest are unit-normal random.  Order-2 inputs use the eigendecomposition.
    """
    dense = T.to_dense() if isinstance(T, SymmetricTensor) else np.asarray(T, dtype=float)
    r = dense.ndim
    if r < 2:
        raise ValueError("order must be at least 2")
    m = dense.shape[0]
    base = float(np.linalg.norm(dense))
    if base <= tol:
        return RankOneDecomposition(np.zeros(0), np.zeros((0, m)), base, r, (base,))

    if r == 2:
        w, U = np.linalg.eigh(0.5 * (dense + dense.T))
        order = np.argsort(-np.abs(w))
        w, U = w[order], U[:, order]
        best = None
        for D in range(1, min(D_max, m) + 1):
            approx = (U[:, :D] * w[:D]) @ U[:, :D].T
            res = float(np.linalg.norm(dense - approx))
            best = RankOneDecomposition(w[:D].copy(), U[:, :D].T.copy(), res, r, (res,))
            if res <= tol:
                break
        return best

    rng = np.random.default_rng(seed)
    prev_V = np.zeros((0, m))
    overall = None
    for D in range(1, D_max + 1):
        best = None
        for start in range(max(1, restarts)):
            if start == 0:
                psi_prev, _ = _fit_psi(dense, prev_V)
                resid = dense - sum(
                    (p * _outer_power(v, r) for p, v in zip(psi_prev, prev_V)), np.zeros_like(dense)
                )
                vnew = _best_rank_one(resid, rng)
                V0 = np.vstack([prev_V, vnew[None, :]])
                psi0, _ = _fit_psi(dense, V0)
                scale = np.sign(psi0) * np.abs(psi0) ** (1.0 / r)
                factors = [(V0 * scale[:, None]).T.copy() for _ in range(r)]
                if r % 2 == 0:
                    # an even power cannot carry the sign through a real root
                    factors[0] = (V0 * (psi0 / np.where(scale != 0, np.abs(scale) ** (r - 1), 1.0))[:, None]).T
            else:
                factors = [rng.standard_normal((m, D)) for _ in range(r)]
            factors, history = _cp_als(dense, factors, max_iter, tol)
            psi, V, res = _symmetrize(dense, factors)
            cand = RankOneDecomposition(psi, V, res, r, tuple(history))
            if best is None or cand.residual < best.residual:
                best = cand
            if best.residual <= tol:
                break
        if overall is None or best.residual < overall.residual:
            overall = best
        prev_V = best.V
        if best.residual <= tol:
            return best
    return overall


# ---------------------------------------------------------------------------
# transformation induced by a decomposition


@dataclass(frozen=True)
class TensorTransform:
    Phi_x: np.ndarray
    Phi_z: np.ndarray
    signs: np.ndarray
    verification: str  # "exact" for even order, "sample-verified" for odd

    def kernel(self, gamma, lam: int, r: int) -> float:
        return kernel_value(self.Phi_x, self.Phi_z, self.signs, gamma, lam, r)


def transform_from_decomposition(
    dec: RankOneDecomposition,
    r: int,
    *,
    y=None,
    alpha_samples=None,
    cell_index: int = 0,
    tol: float = 1e-9,
) -> TensorTransform:
    """Phi_j(x_i) = |psi_j|^(1/r) v_ji (last coordinate of v_j belongs to z).

    Even r requires every psi_j >= -tol.  Odd r requires
    sgn(psi_j) = sgn(sum_i alpha_i y_i Phi_j(x_i)) at each supplied sample alpha;
    passing samples only shows the condition was not refuted.
    """
    if dec.order != r:
        raise DegreeMismatchError(f"decomposition has order {dec.order}, expected {r}")
    psi = np.asarray(dec.psi, dtype=float)
    V = np.asarray(dec.V, dtype=float)
    if r % 2 == 0:
        bad = np.flatnonzero(psi < -tol)
        if bad.size:
            j = int(bad[0])
            raise SignConditionError(cell_index, j, np.array([psi[j]]))
        psi = np.clip(psi, 0.0, None)
        signs = np.ones_like(psi)
        status = "exact"
    else:
        if y is None or alpha_samples is None:
            raise ValueError("odd order needs labels and alpha samples for the sign check")
        signs = np.where(psi >= 0, 1.0, -1.0)
        status = "sample-verified"
    Phi = (np.abs(psi) ** (1.0 / r))[:, None] * V  # D x (n+1)
    Phi_x, Phi_z = Phi[:, :-1].T, Phi[:, -1]
    if r % 2 == 1:
        y = np.asarray(y, dtype=float)
        for alpha in np.atleast_2d(np.asarray(alpha_samples, dtype=float)):
            s = (alpha * y) @ Phi_x
            for j in range(Phi_x.shape[1]):
                if abs(s[j]) > tol and np.sign(s[j]) != signs[j]:
                    raise SignConditionError(cell_index, j, alpha)
    return TensorTransform(Phi_x, Phi_z, signs, status)


def sample_cell(cell_rows, y, C: float, count: int = 100, seed: int = 0) -> np.ndarray:
    """Vertices of H_y and the cell (by LPs in random directions) plus random
    convex combinations of them as interior samples."""
    rows = np.atleast_2d(np.asarray(cell_rows, dtype=float))
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    rng = np.random.default_rng(seed)
    A_ub = -rows if rows.size else None
    b_ub = np.zeros(rows.shape[0]) if rows.size else None
    verts = []
    for _ in range(2 * n):
        c = rng.standard_normal(n)
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=y[None, :], b_eq=[0.0],
                      bounds=[(0.0, C)] * n, method="highs")
        if res.status == 0:
            verts.append(res.x)
    if not verts:
        return np.zeros((0, n))
    verts = np.unique(np.round(np.array(verts), 12), axis=0)
    weights = rng.dirichlet(np.ones(len(verts)), size=count)
    return np.vstack([verts, weights @ verts])

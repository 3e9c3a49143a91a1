"""Moment relaxations of the dual on one sign cell.

Pseudo-moments w_gamma (|gamma| <= 2t) replace the monomials alpha^gamma; the
relaxation of order t is

    min  L_w(-F)
    s.t. M_t(w) >= 0,  M_{t-1}(g w) >= 0 for every constraint g >= 0,  w_0 = 1,

with constraints: the cell rows, the label equality written as the pair
+-y.alpha >= 0, and the box rows alpha_i >= 0, C - alpha_i >= 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .conic import STATUS_OPTIMAL, ConeDims, solve_conic
from .conic.cones import svec_dim
from .core import IndexMap, NormParam, add_indices, multi_index_enumerate
from .dual import HomogeneousPoly, SignCell

MAX_MOMENTS = 2000
MAX_BLOCK = 200


class MissingMomentError(KeyError):
    pass


class OrderTooLowError(ValueError):
    pass


class SdpSizeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# moment sequences


@dataclass
class MomentSequence:
    """Truncated moment vector over all multi-indices with |gamma| <= degree."""

    n: int
    degree: int
    values: np.ndarray

    def __post_init__(self):
        self.index = IndexMap(multi_index_enumerate(self.n, self.degree))
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.shape[0] != len(self.index):
            raise ValueError(
                f"expected {len(self.index)} moments for n={self.n}, degree={self.degree}"
            )

    def __getitem__(self, gamma) -> float:
        gamma = tuple(int(g) for g in gamma)
        if gamma not in self.index:
            raise MissingMomentError(gamma)
        return float(self.values[self.index[gamma]])

    @property
    def order(self) -> int:
        """Largest t with M_t(w) fully defined."""
        return self.degree // 2

    @classmethod
    def dirac(cls, alpha, degree: int) -> "MomentSequence":
        alpha = np.asarray(alpha, dtype=float)
        idx = multi_index_enumerate(alpha.shape[0], degree)
        vals = [float(np.prod(alpha ** np.asarray(g))) for g in idx]
        return cls(alpha.shape[0], degree, np.array(vals))

    @classmethod
    def mixture(cls, points, weights, degree: int) -> "MomentSequence":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        weights = np.asarray(weights, dtype=float)
        parts = [cls.dirac(p, degree).values for p in points]
        return cls(points.shape[1], degree, weights @ np.array(parts))

    def first_moments(self) -> np.ndarray:
        return np.array([self[tuple(1 if k == i else 0 for k in range(self.n))] for i in range(self.n)])


def _positions(n: int, t: int, shift, index: IndexMap) -> np.ndarray:
    basis = multi_index_enumerate(n, t)
    k = len(basis)
    pos = np.empty((k, k), dtype=np.int64)
    for a, ga in enumerate(basis):
        base = add_indices(ga, shift)
        for b in range(a, k):
            key = add_indices(base, basis[b])
            if key not in index:
                raise MissingMomentError(key)
            pos[a, b] = pos[b, a] = index[key]
    return pos


def moment_matrix(w: MomentSequence, t: int) -> np.ndarray:
    """M_t(w)[gamma, beta] = w_{gamma + beta} over the graded-lex basis of degree <= t."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    pos = _positions(w.n, t, (0,) * w.n, w.index)
    return w.values[pos]


def localizing_matrix(w: MomentSequence, g: dict, t: int) -> np.ndarray:
    """M_t(g w)[gamma, beta] = sum_zeta g_zeta w_{zeta + gamma + beta}."""
    k = math.comb(w.n + t, w.n)
    out = np.zeros((k, k))
    for zeta, coef in g.items():
        if coef == 0:
            continue
        out += coef * w.values[_positions(w.n, t, tuple(zeta), w.index)]
    return out


# ---------------------------------------------------------------------------
# relaxation


@dataclass
class SdpBlock:
    """Matrix sum_k coef_k * w[pos_k] constrained PSD."""

    name: str
    size: int
    terms: list[tuple[float, np.ndarray]]

    def evaluate(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros((self.size, self.size))
        for coef, pos in self.terms:
            out += coef * values[pos]
        return out


Poly = dict  # exponent tuple -> coefficient


def _poly_mul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for ga, ca in a.items():
        for gb, cb in b.items():
            key = add_indices(ga, gb)
            out[key] = out.get(key, 0.0) + ca * cb
    return out


def compose_linear(poly: Poly, T: np.ndarray) -> Poly:
    """poly(T beta) as a polynomial in beta; row i of T writes alpha_i."""
    n, m = T.shape
    forms = [{tuple(1 if k == j else 0 for k in range(m)): float(T[i, j]) for j in range(m) if T[i, j] != 0}
             for i in range(n)]
    powers: dict[tuple[int, int], Poly] = {}

    def power(i: int, e: int) -> Poly:
        if e == 0:
            return {(0,) * m: 1.0}
        if (i, e) not in powers:
            powers[(i, e)] = _poly_mul(power(i, e - 1), forms[i])
        return powers[(i, e)]

    out: Poly = {}
    for gamma, coef in poly.items():
        term: Poly = {(0,) * m: float(coef)}
        for i, e in enumerate(gamma):
            if e:
                term = _poly_mul(term, power(i, e))
        for key, val in term.items():
            out[key] = out.get(key, 0.0) + val
    return {k: v for k, v in out.items() if v != 0.0}


@dataclass
class SdpProblem:
    """min L_w(-F) s.t. M_t(w) >= 0, M_{t-1}(g w) >= 0 for each constraint g, w_0 = 1.

    ``objective`` holds the polynomial -F; ``constraints`` the (name, g)
    pairs. ``label`` is y when the pair +-y.alpha is among the constraints.
    ``tiebreak`` is an optional nonnegative quadratic that vanishes on no
    direction F depends on; the low-rank solve adds a multiple of it so
    ties among maximizers resolve to one point.
    """

    n: int
    t: int
    objective: Poly
    constraints: list[tuple[str, Poly]]
    label: np.ndarray | None = None
    tiebreak: Poly | None = None
    index: IndexMap = field(init=False, repr=False)
    blocks: list[SdpBlock] = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_moments > MAX_MOMENTS:
            raise SdpSizeError(f"{self.n_moments} moments exceed the limit {MAX_MOMENTS}")
        if math.comb(self.n + self.t, self.n) > MAX_BLOCK:
            raise SdpSizeError(
                f"moment matrix of size {math.comb(self.n + self.t, self.n)} exceeds {MAX_BLOCK}"
            )
        self.index = IndexMap(multi_index_enumerate(self.n, 2 * self.t))
        zero = (0,) * self.n
        self.blocks = [self._block("moment", self.t, {zero: 1.0})]
        for name, g in self.constraints:
            self.blocks.append(self._block(name, self.t - 1, g))

    def _block(self, name: str, order: int, g: Poly) -> SdpBlock:
        terms = [(float(c), _positions(self.n, order, tuple(z), self.index)) for z, c in g.items() if c != 0]
        return SdpBlock(name, math.comb(self.n + order, self.n), terms)

    @property
    def n_moments(self) -> int:
        return math.comb(self.n + 2 * self.t, self.n)

    def objective_vector(self) -> np.ndarray:
        return self._vector(self.objective)

    def _vector(self, poly: Poly) -> np.ndarray:
        c = np.zeros(self.n_moments)
        for gamma, coef in poly.items():
            c[self.index[tuple(gamma)]] += coef
        return c

    def compile(self):
        """(c, G, h, A, b, dims) in the conic solver's standard form."""
        N = self.n_moments
        sizes = [blk.size for blk in self.blocks]
        m = sum(svec_dim(k) for k in sizes)
        G = np.zeros((m, N))
        row = 0
        for blk in self.blocks:
            k = blk.size
            rows, cols = np.tril_indices(k)
            scale = np.where(rows == cols, 1.0, math.sqrt(2.0))
            sl = np.arange(row, row + rows.size)
            for coef, pos in blk.terms:
                np.add.at(G, (sl, pos[rows, cols]), -coef * scale)
            row += rows.size
        A = np.zeros((1, N))
        A[0, 0] = 1.0
        return self.objective_vector(), G, np.zeros(m), A, np.ones(1), ConeDims(s=tuple(sizes))

    def eliminate_label(self) -> tuple["SdpProblem", np.ndarray]:
        """Substitute alpha_k = -y_k sum_{i != k} y_i alpha_i (k the last index).

        The pair +-y.alpha >= 0 admits no interior point; the reduced problem
        over n - 1 variables does. Returns it with the map T (alpha = T beta).
        """
        if self.label is None:
            raise ValueError("problem has no label equality")
        y = self.label
        n = self.n
        k = n - 1
        T = np.zeros((n, n - 1))
        T[:k, :] = np.eye(n - 1)
        T[k, :] = -y[k] * y[:k]
        cons = [(name, compose_linear(g, T)) for name, g in self.constraints if not name.startswith("label")]
        cons = [(name, g) for name, g in cons if g]
        tie = None if self.tiebreak is None else compose_linear(self.tiebreak, T)
        return SdpProblem(n - 1, self.t, compose_linear(self.objective, T), cons, tiebreak=tie), T

    def linear_rows(self) -> list[str]:
        """Each constraint read on first-order moments, L_w(g) >= 0; the
        label pair is printed once as an equality."""
        out = []
        for name, g in self.constraints:
            if name == "label-":
                continue
            op = "=" if name == "label+" else ">="
            out.append(f"{_wform(g)}{op}0")
        return out

    def to_text(self) -> str:
        """Plain text dump: sizes, objective, normalization, then one line per
        PSD block with its order, size and multiplier polynomial."""
        lines = [f"sdp n={self.n} t={self.t} moments={self.n_moments} blocks={len(self.blocks)}"]
        lines.append(f"objective min {_wform(self.objective)}")
        lines.append("equality w_{" + "0" * self.n + "}=1")
        lines.append(f"block moment order={self.t} size={self.blocks[0].size}")
        for (name, g), blk in zip(self.constraints, self.blocks[1:]):
            lines.append(f"block {name} order={self.t - 1} size={blk.size} g: {_wform(g)}")
        return "\n".join(lines) + "\n"


def _wform(p: Poly) -> str:
    """sum_zeta g_zeta w_zeta written out, unit coefficients dropped."""
    parts = []
    for gamma in sorted(p, key=lambda g: (sum(g), tuple(-v for v in g))):
        c = float(p[gamma])
        if c == 0:
            continue
        name = "w_{" + "".join(str(v) for v in gamma) + "}"
        mag = abs(c)
        body = name if mag == 1 else f"{mag!r}*{name}"
        parts.append(("-" if c < 0 else "+") + body)
    if not parts:
        return "0"
    s = "".join(parts)
    return s[1:] if s.startswith("+") else s


def build_relaxation(
    poly: HomogeneousPoly,
    cell: SignCell | None,
    y,
    C: float,
    t: int,
    *,
    scale: float = 1.0,
    linear=None,
    ties=None,
) -> SdpProblem:
    """Relaxation of max F(alpha) = scale * poly(alpha) + linear . alpha over
    H_y and the cell; the SDP minimizes L_w(-F).

    ``ties`` is an n x k orthonormal basis of directions along which F is
    constant; it becomes the tie-break quadratic |ties' alpha|^2.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    t0 = max(1, math.ceil(poly.degree / 2))
    if t < t0:
        raise OrderTooLowError(f"relaxation order {t} is below ceil({poly.degree}/2) = {t0}")
    linear = np.ones(n) if linear is None else np.asarray(linear, dtype=float)
    zero = (0,) * n
    unit = [tuple(1 if k == i else 0 for k in range(n)) for i in range(n)]

    obj: Poly = {}
    for gamma, coef in zip(poly.exponents, poly.coefficients):
        if coef == 0.0:
            continue
        key = tuple(int(v) for v in gamma)
        obj[key] = obj.get(key, 0.0) - scale * coef
    for i in range(n):
        obj[unit[i]] = obj.get(unit[i], 0.0) - linear[i]

    cons: list[tuple[str, Poly]] = []
    if cell is not None and not cell.free:
        for j, row in zip(np.flatnonzero(~cell.trivial), cell.active_rows):
            cons.append((f"cell[{j}]", {unit[i]: float(row[i]) for i in range(n) if row[i] != 0}))
    eq = {unit[i]: float(y[i]) for i in range(n)}
    cons.append(("label+", eq))
    cons.append(("label-", {k: -v for k, v in eq.items()}))
    for i in range(n):
        cons.append((f"lower[{i}]", {unit[i]: 1.0}))
        cons.append((f"upper[{i}]", {zero: float(C), unit[i]: -1.0}))
    tie = None
    if ties is not None and np.size(ties):
        Q = np.asarray(ties) @ np.asarray(ties).T
        tie = {}
        for i in range(n):
            for j in range(i, n):
                v = Q[i, j] * (1.0 if i == j else 2.0)
                if abs(v) > 1e-14:
                    tie[add_indices(unit[i], unit[j])] = float(v)
    return SdpProblem(n, t, obj, cons, label=y, tiebreak=tie)


def relaxation_for_dual(ds, norm: NormParam, C: float, cell: SignCell | None, t: int) -> SdpProblem:
    """Relaxation of the integer-q dual restricted to one cell."""
    from .dual import expand_homogeneous

    if norm.s != 1:
        raise ValueError("the moment hierarchy here covers integer q only")
    poly = expand_homogeneous(ds, cell, norm.r)
    # F depends on alpha only through X'(y*alpha) and sum(alpha); on H_y the
    # remaining directions are ties
    y = ds.y
    B = np.vstack([(ds.X * y[:, None]).T, np.ones_like(y), y])
    ties = null_space(B)
    return build_relaxation(poly, cell, y, C, t, scale=norm.dual_coefficient, ties=ties)


# ---------------------------------------------------------------------------
# solving and extraction


@dataclass
class SdpResult:
    rho: float
    w: MomentSequence
    status: str
    iterations: int = 0
    gap: float = float("nan")


def _lift_moments(values: np.ndarray, reduced: SdpProblem, T: np.ndarray, n: int) -> np.ndarray:
    """Full moments L(alpha^gamma) from the reduced ones through alpha = T beta."""
    full = multi_index_enumerate(n, 2 * reduced.t)
    out = np.empty(len(full))
    for a, gamma in enumerate(full):
        poly = compose_linear({gamma: 1.0}, T)
        out[a] = sum(c * values[reduced.index[g]] for g, c in poly.items())
    return out


TIE_WEIGHT = 1e-2


def _min_trace_completion(prob: SdpProblem, c: np.ndarray, w: np.ndarray, tol, max_iter) -> np.ndarray:
    """Re-complete the top-degree moments that only M_t(w) sees.

    Those entries affect neither the objective nor any localizing block, so
    any completion keeping M_t(w) PSD is another optimal point; the one of
    least trace has the smallest rank the lower moments allow.
    """
    top = np.array([sum(g) == 2 * prob.t for g in prob.index.indices])
    used = np.zeros(prob.n_moments, dtype=bool)
    used[np.abs(c) > 0] = True
    for blk in prob.blocks[1:]:
        for _, pos in blk.terms:
            used[pos.ravel()] = True
    free = np.flatnonzero(top & ~used)
    if free.size == 0:
        return w
    moment = prob.blocks[0]
    k = moment.size
    rows, cols = np.tril_indices(k)
    scale = np.where(rows == cols, 1.0, math.sqrt(2.0))
    pos = moment.terms[0][1]
    lookup = {int(f): j for j, f in enumerate(free)}
    G = np.zeros((rows.size, free.size))
    h = scale * w[pos[rows, cols]]
    for e, (a, b) in enumerate(zip(rows, cols)):
        j = lookup.get(int(pos[a, b]))
        if j is not None:
            G[e, j] = -scale[e]
            h[e] = 0.0
    obj = np.zeros(free.size)
    for a in range(k):
        j = lookup.get(int(pos[a, a]))
        if j is not None:
            obj[j] += 1.0
    res = solve_conic(obj, G, h, ConeDims(s=(k,)), tol=tol, max_iter=max_iter)
    if res.status != STATUS_OPTIMAL:
        return w
    out = w.copy()
    out[free] = res.x
    return out


def _solve_compiled(prob: SdpProblem, tol, max_iter, low_rank):
    c, G, h, A, b, dims = prob.compile()
    res = solve_conic(c, G, h, dims, A, b, tol=tol, max_iter=max_iter)
    w, iters = res.x, res.iterations
    if res.status == STATUS_OPTIMAL and low_rank:
        if prob.tiebreak:
            pen = prob._vector(prob.tiebreak)
            weight = TIE_WEIGHT * max(1.0, float(np.max(np.abs(c))))
            res2 = solve_conic(c + weight * pen, G, h, dims, A, b, tol=0.1 * tol, max_iter=max_iter)
            iters += res2.iterations
            if res2.status == STATUS_OPTIMAL:
                w = res2.x
        w = _min_trace_completion(prob, c, w, tol, max_iter)
    return res, w, iters


def solve_sdp(
    prob: SdpProblem,
    tol: float = 1e-7,
    *,
    max_iter: int = 200,
    low_rank: bool = True,
    eliminate: bool = True,
) -> SdpResult:
    """Solve the relaxation; rho is the optimal value of min L_w(-F).

    With ``eliminate`` the label equality is substituted out first, since
    its pair of blocks leaves no strictly feasible point. With ``low_rank``
    and a tie-break quadratic present, a second solve adds a small multiple
    of it to the objective; rho still comes from the first solve.
    """
    if eliminate and prob.label is not None and prob.n > 1:
        reduced, T = prob.eliminate_label()
        res, w, iters = _solve_compiled(reduced, tol, max_iter, low_rank)
        w = _lift_moments(w, reduced, T, prob.n)
    else:
        res, w, iters = _solve_compiled(prob, tol, max_iter, low_rank)
    seq = MomentSequence(prob.n, 2 * prob.t, w)
    return SdpResult(float(res.primal_objective), seq, res.status, iters, res.gap)


def numerical_rank(M: np.ndarray, rank_tol: float = 1e-6) -> int:
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv >= rank_tol * sv[0]))


@dataclass
class Extraction:
    alpha: np.ndarray
    certified: bool
    ranks: tuple[int, int]


def extract_solution(w: MomentSequence, t: int, rank_tol: float = 1e-6) -> Extraction:
    """First moments as alpha; certified iff rank M_t(w) == rank M_{t-1}(w)."""
    alpha = w.first_moments()
    hi = numerical_rank(moment_matrix(w, t), rank_tol)
    lo = numerical_rank(moment_matrix(w, t - 1), rank_tol) if t >= 1 else hi
    return Extraction(alpha, hi == lo, (hi, lo))

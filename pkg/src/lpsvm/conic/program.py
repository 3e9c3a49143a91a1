"""Modelling layer: affine expressions, cone constraints, and the power tower."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cones import ConeDims, svec, svec_dim
from .ipm import STATUS_INFEASIBLE, STATUS_ITERATION_LIMIT, STATUS_OPTIMAL, solve_conic

__all__ = [
    "Affine",
    "ConicProgram",
    "ConicSolution",
    "RotatedCone",
    "SolverFailure",
    "power_tower",
    "tower_leaves",
    "STATUS_OPTIMAL",
    "STATUS_INFEASIBLE",
    "STATUS_ITERATION_LIMIT",
]


class SolverFailure(RuntimeError):
    """Raised when a conic solve does not reach an optimal status."""

    def __init__(self, status: str, message: str = ""):
        super().__init__(message or f"conic solver finished with status {status!r}")
        self.status = status


class Affine:
    """Sparse affine expression ``sum_k coef[k] * x[k] + const``."""

    __slots__ = ("coef", "const")

    def __init__(self, coef: dict[int, float] | None = None, const: float = 0.0):
        self.coef = dict(coef or {})
        self.const = float(const)

    @classmethod
    def constant(cls, value: float) -> "Affine":
        return cls({}, value)

    def _combine(self, other, sign):
        if not isinstance(other, Affine):
            return Affine(self.coef, self.const + sign * float(other))
        out = dict(self.coef)
        for k, v in other.coef.items():
            out[k] = out.get(k, 0.0) + sign * v
        return Affine(out, self.const + sign * other.const)

    def __add__(self, other):
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-self)._combine(other, 1.0)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, a):
        a = float(a)
        return Affine({k: a * v for k, v in self.coef.items()}, a * self.const)

    __rmul__ = __mul__

    def value(self, x: np.ndarray) -> float:
        return self.const + sum(v * x[k] for k, v in self.coef.items())

    @property
    def is_constant(self) -> bool:
        return not any(self.coef.values())

    def __repr__(self):
        terms = " + ".join(f"{v:g}*x{k}" for k, v in sorted(self.coef.items()))
        return f"Affine({terms or '0'} + {self.const:g})"


@dataclass(frozen=True)
class RotatedCone:
    """2 * u * v >= ||w||^2 with u, v >= 0."""

    u: Affine
    v: Affine
    w: tuple[Affine, ...]


@dataclass
class ConicSolution:
    status: str
    x: np.ndarray
    objective: float
    dual_objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    gap: float
    # duals: one entry per constraint group, in insertion order
    duals: dict = field(default_factory=dict)
    infeasibility: str | None = None

    def value(self, expr) -> float | np.ndarray:
        if isinstance(expr, Affine):
            return expr.value(self.x)
        return np.array([e.value(self.x) for e in expr])


class ConicProgram:
    """Incrementally built conic program: minimize an affine objective.

    Constraints are grouped by kind so they can be compiled into a single
    ``G x + s = h, A x = b`` system over (orthant, SOC..., PSD...).
    """

    def __init__(self):
        self.n_vars = 0
        self.names: list[str] = []
        self.objective = Affine()
        self._eq: list[tuple[str, Affine]] = []
        self._ineq: list[tuple[str, Affine]] = []
        self._soc: list[tuple[str, list[Affine]]] = []
        self._psd: list[tuple[str, int, list[Affine]]] = []

    # variables ---------------------------------------------------------
    def add_var(self, name: str = "") -> Affine:
        k = self.n_vars
        self.n_vars += 1
        self.names.append(name or f"x{k}")
        return Affine({k: 1.0})

    def add_vars(self, count: int, name: str = "x") -> list[Affine]:
        return [self.add_var(f"{name}[{i}]") for i in range(count)]

    # constraints -------------------------------------------------------
    def minimize(self, expr) -> None:
        self.objective = expr if isinstance(expr, Affine) else Affine.constant(expr)

    def add_eq(self, expr: Affine, tag: str = "eq") -> None:
        """expr == 0"""
        self._eq.append((tag, expr))

    def add_ge(self, expr: Affine, tag: str = "ge") -> None:
        """expr >= 0"""
        self._ineq.append((tag, expr))

    def add_soc(self, head: Affine, tail: list[Affine], tag: str = "soc") -> None:
        """head >= ||tail||"""
        self._soc.append((tag, [head, *tail]))

    def add_rotated(self, cone: RotatedCone, tag: str = "rsoc") -> None:
        u, v = cone.u, cone.v
        self.add_soc(u + v, [u - v, *(w * math.sqrt(2.0) for w in cone.w)], tag)

    def add_hyperbolic(self, x: Affine, y: Affine, t: Affine, tag: str = "hyp") -> None:
        """x * y >= t^2 with x, y >= 0, i.e. ||(x - y, 2t)|| <= x + y."""
        self.add_soc(x + y, [x - y, 2.0 * t], tag)

    def add_psd(self, entries: list[list[Affine]], tag: str = "psd") -> None:
        """Symmetric matrix of affine expressions constrained PSD."""
        k = len(entries)
        rows, cols = np.tril_indices(k)
        packed = []
        for i, j in zip(rows, cols):
            scale = 1.0 if i == j else math.sqrt(2.0)
            packed.append(entries[i][j] * scale)
        self._psd.append((tag, k, packed))

    @property
    def cone_counts(self) -> dict[str, int]:
        return {
            "eq": len(self._eq),
            "nonneg": len(self._ineq),
            "soc": len(self._soc),
            "psd": len(self._psd),
        }

    # compilation -------------------------------------------------------
    def compile(self):
        n = self.n_vars
        exprs: list[Affine] = [e for _, e in self._ineq]
        for _, block in self._soc:
            exprs.extend(block)
        for _, _, block in self._psd:
            exprs.extend(block)
        dims = ConeDims(
            l=len(self._ineq),
            q=tuple(len(b) for _, b in self._soc),
            s=tuple(k for _, k, _ in self._psd),
        )
        G = np.zeros((len(exprs), n))
        h = np.zeros(len(exprs))
        # s = expr = a.x + c  ->  -a.x + s = c
        for row, e in enumerate(exprs):
            for k, v in e.coef.items():
                G[row, k] -= v
            h[row] = e.const
        A = np.zeros((len(self._eq), n))
        b = np.zeros(len(self._eq))
        for row, (_, e) in enumerate(self._eq):
            for k, v in e.coef.items():
                A[row, k] += v
            b[row] = -e.const
        c = np.zeros(n)
        for k, v in self.objective.coef.items():
            c[k] += v
        return c, G, h, A, b, dims

    def solve(self, tol: float = 1e-8, max_iter: int = 200) -> ConicSolution:
        c, G, h, A, b, dims = self.compile()
        res = solve_conic(c, G, h, dims, A, b, tol=tol, max_iter=max_iter)
        const = self.objective.const
        duals = {"eq": res.y}
        z = res.z
        pos = dims.l
        duals["nonneg"] = z[:pos]
        soc_duals = []
        for k in dims.q:
            soc_duals.append(z[pos : pos + k])
            pos += k
        duals["soc"] = soc_duals
        psd_duals = []
        for k in dims.s:
            m = svec_dim(k)
            psd_duals.append(z[pos : pos + m])
            pos += m
        duals["psd"] = psd_duals
        return ConicSolution(
            status=res.status,
            x=res.x,
            objective=res.primal_objective + const,
            dual_objective=res.dual_objective + const,
            iterations=res.iterations,
            primal_residual=res.primal_residual,
            dual_residual=res.dual_residual,
            gap=res.gap,
            duals=duals,
            infeasibility=res.infeasibility,
        )


# ---------------------------------------------------------------------------
# power tower: u^(r-s) >= v^r through O(log r) hyperbolic cones


MAX_TOWER_R = 64


def tower_leaves(r: int, s: int) -> list[str]:
    """Leaf labels of the repeated-squaring tree for v^r <= u^(r-s).

    With 2^k >= r the leaves are (r - s) copies of ``u``, s copies of the
    constant ``1`` and (2^k - r) copies of ``v``; the tree's root then bounds v
    by the geometric mean of all leaves.
    """
    if not r > s >= 1:
        raise ValueError(f"need r > s >= 1, got r={r}, s={s}")
    if r > MAX_TOWER_R:
        raise ValueError(f"r={r} exceeds the tower limit {MAX_TOWER_R}")
    size = 1
    while size < r:
        size *= 2
    return ["u"] * (r - s) + ["1"] * s + ["v"] * (size - r)


def power_tower(
    prog: ConicProgram, u: Affine, v: Affine, r: int, s: int, tag: str = "tower"
) -> tuple[list[Affine], list[RotatedCone]]:
    """Add constraints enforcing u^(r-s) >= v^r (u, v >= 0).

    Returns the auxiliary variables and the rotated cones that were added.
    Only nodes of the tree that mix leaf labels need a cone, so the count is
    at most about 2 log2(r).
    """
    leaves = tower_leaves(r, s)
    values = {"u": u, "v": v, "1": Affine.constant(1.0)}
    aux: list[Affine] = []
    cones: list[RotatedCone] = []

    def build(lo: int, hi: int, out: Affine | None) -> Affine:
        labels = set(leaves[lo:hi])
        if len(labels) == 1 and out is None:
            return values[leaves[lo]]
        mid = (lo + hi) // 2
        left = build(lo, mid, None)
        right = build(mid, hi, None)
        if out is None:
            out = prog.add_var(f"{tag}.aux{len(aux)}")
            aux.append(out)
        # left * right >= out^2  as  2 * left * (right / 2) >= out^2
        cone = RotatedCone(left, right * 0.5, (out,))
        prog.add_rotated(cone, tag)
        cones.append(cone)
        return out

    build(0, len(leaves), v)
    return aux, cones

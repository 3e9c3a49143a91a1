"""Cone algebra for the interior-point solver.

Vectors in the product cone are laid out as ``[nonneg | soc blocks | psd
blocks]``; PSD blocks use the ``svec`` packing (lower triangle, off-diagonals
scaled by sqrt(2)) so the trace inner product is the Euclidean one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

SQRT2 = np.sqrt(2.0)


@lru_cache(maxsize=64)
def _tril(k: int):
    rows, cols = np.tril_indices(k)
    scale = np.where(rows == cols, 1.0, SQRT2)
    return rows, cols, scale


def svec(M: np.ndarray) -> np.ndarray:
    rows, cols, scale = _tril(M.shape[-1])
    return M[..., rows, cols] * scale


def smat(v: np.ndarray, k: int) -> np.ndarray:
    rows, cols, scale = _tril(k)
    v = np.asarray(v)
    out = np.zeros(v.shape[:-1] + (k, k))
    vals = v / scale
    out[..., rows, cols] = vals
    out[..., cols, rows] = vals
    return out


def svec_dim(k: int) -> int:
    return k * (k + 1) // 2


@dataclass(frozen=True)
class ConeDims:
    l: int = 0
    q: tuple[int, ...] = ()
    s: tuple[int, ...] = ()

    @property
    def size(self) -> int:
        return self.l + sum(self.q) + sum(svec_dim(k) for k in self.s)

    @property
    def degree(self) -> int:
        return self.l + len(self.q) + sum(self.s)

    def slices(self):
        """Yield (kind, slice, block size) for every cone block."""
        pos = 0
        if self.l:
            yield "l", slice(0, self.l), self.l
            pos = self.l
        for k in self.q:
            yield "q", slice(pos, pos + k), k
            pos += k
        for k in self.s:
            m = svec_dim(k)
            yield "s", slice(pos, pos + m), k
            pos += m


def identity(dims: ConeDims) -> np.ndarray:
    e = np.zeros(dims.size)
    for kind, sl, k in dims.slices():
        if kind == "l":
            e[sl] = 1.0
        elif kind == "q":
            e[sl.start] = 1.0
        else:
            e[sl] = svec(np.eye(k))
    return e


def min_eig(dims: ConeDims, x: np.ndarray) -> float:
    """Smallest 'eigenvalue' of x in the Jordan-algebra sense (>0 iff interior)."""
    vals = [np.inf]
    for kind, sl, k in dims.slices():
        u = x[sl]
        if kind == "l":
            vals.append(u.min())
        elif kind == "q":
            vals.append(u[0] - np.linalg.norm(u[1:]))
        else:
            vals.append(np.linalg.eigvalsh(smat(u, k))[0])
    return float(min(vals))


def jordan_prod(dims: ConeDims, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.empty_like(u)
    for kind, sl, k in dims.slices():
        a, b = u[sl], v[sl]
        if kind == "l":
            out[sl] = a * b
        elif kind == "q":
            out[sl.start] = a @ b
            out[sl.start + 1 : sl.stop] = a[0] * b[1:] + b[0] * a[1:]
        else:
            A, B = smat(a, k), smat(b, k)
            P = A @ B
            out[sl] = svec(0.5 * (P + P.T))
    return out


@dataclass
class NTScaling:
    """Nesterov-Todd scaling W with W z = W^{-T} s = lam."""

    dims: ConeDims
    lam: np.ndarray
    blocks: list = field(default_factory=list)

    @classmethod
    def compute(cls, dims: ConeDims, s: np.ndarray, z: np.ndarray) -> "NTScaling":
        lam = np.empty_like(s)
        blocks = []
        for kind, sl, k in dims.slices():
            sb, zb = s[sl], z[sl]
            if kind == "l":
                w = np.sqrt(sb / zb)
                lam[sl] = np.sqrt(sb * zb)
                blocks.append(w)
            elif kind == "q":
                sdet = sb[0] ** 2 - sb[1:] @ sb[1:]
                zdet = zb[0] ** 2 - zb[1:] @ zb[1:]
                sdet = max(sdet, 1e-300)
                zdet = max(zdet, 1e-300)
                sbar = sb / np.sqrt(sdet)
                zbar = zb / np.sqrt(zdet)
                gamma = np.sqrt(max(0.5 * (1.0 + sbar @ zbar), 1e-300))
                jz = zbar.copy()
                jz[1:] *= -1.0
                wbar = (sbar + jz) / (2.0 * gamma)
                beta = (sdet / zdet) ** 0.25
                v = wbar.copy()
                v[0] += 1.0
                v /= np.sqrt(2.0 * (wbar[0] + 1.0))
                J = -np.eye(k)
                J[0, 0] = 1.0
                W = beta * (2.0 * np.outer(v, v) - J)
                Jv = J @ v
                Winv = (2.0 * np.outer(Jv, Jv) - J) / beta
                lam[sl] = W @ zb
                blocks.append((W, Winv))
            else:
                S, Z = smat(sb, k), smat(zb, k)
                Ls = _chol(S)
                Lz = _chol(Z)
                U, sv, Vt = np.linalg.svd(Lz.T @ Ls)
                R = Ls @ Vt.T / np.sqrt(sv)
                Rinv = (np.sqrt(sv)[:, None] * Vt) @ sla.solve_triangular(
                    Ls, np.eye(k), lower=True
                )
                lam[sl] = svec(np.diag(sv))
                blocks.append((R, Rinv, sv))
        return cls(dims, lam, blocks)

    # W applied to a vector or to the columns of a matrix (rows = cone coords)
    def _apply(self, x: np.ndarray, mode: str) -> np.ndarray:
        out = np.empty_like(x, dtype=float)
        vec = x.ndim == 1
        for (kind, sl, k), blk in zip(self.dims.slices(), self.blocks):
            xb = x[sl]
            if kind == "l":
                w = blk if mode in ("W", "WT") else 1.0 / blk
                out[sl] = w * xb if vec else w[:, None] * xb
            elif kind == "q":
                W, Winv = blk
                M = W if mode in ("W", "WT") else Winv
                out[sl] = M @ xb
            else:
                R, Rinv, _ = blk
                mats = smat(xb if vec else xb.T, k)
                if mode == "W":  # R^T X R
                    res = R.T @ mats @ R
                elif mode == "WT":  # R X R^T
                    res = R @ mats @ R.T
                elif mode == "Winv":  # R^{-T} X R^{-1}
                    res = Rinv.T @ mats @ Rinv
                else:  # WinvT: R^{-1} X R^{-T}
                    res = Rinv @ mats @ Rinv.T
                packed = svec(res)
                out[sl] = packed if vec else packed.T
        return out

    def W(self, x):
        return self._apply(x, "W")

    def WT(self, x):
        return self._apply(x, "WT")

    def Winv(self, x):
        return self._apply(x, "Winv")

    def WinvT(self, x):
        return self._apply(x, "WinvT")

    def lam_div(self, u: np.ndarray) -> np.ndarray:
        """Solve lam o w = u for w."""
        out = np.empty_like(u)
        lam = self.lam
        for (kind, sl, k), blk in zip(self.dims.slices(), self.blocks):
            ub, lb = u[sl], lam[sl]
            if kind == "l":
                out[sl] = ub / lb
            elif kind == "q":
                det = lb[0] ** 2 - lb[1:] @ lb[1:]
                w0 = (lb[0] * ub[0] - lb[1:] @ ub[1:]) / det
                out[sl.start] = w0
                out[sl.start + 1 : sl.stop] = (ub[1:] - w0 * lb[1:]) / lb[0]
            else:
                sv = blk[2]
                U = smat(ub, k)
                out[sl] = svec(2.0 * U / (sv[:, None] + sv[None, :]))
        return out

    def lam_sq(self) -> np.ndarray:
        return jordan_prod(self.dims, self.lam, self.lam)

    def max_step(self, d: np.ndarray) -> float:
        """Largest a with lam + a d in the cone (scaled coordinates)."""
        best = np.inf
        lam = self.lam
        for (kind, sl, k), blk in zip(self.dims.slices(), self.blocks):
            db, lb = d[sl], lam[sl]
            if kind == "l":
                neg = db < 0
                if np.any(neg):
                    best = min(best, float(np.min(-lb[neg] / db[neg])))
            elif kind == "q":
                best = min(best, _soc_step(lb, db))
            else:
                sv = blk[2]
                isq = 1.0 / np.sqrt(sv)
                D = smat(db, k) * isq[:, None] * isq[None, :]
                ev = np.linalg.eigvalsh(D)[0]
                if ev < 0:
                    best = min(best, -1.0 / ev)
        return best


def _soc_step(x: np.ndarray, d: np.ndarray) -> float:
    a = d[0] ** 2 - d[1:] @ d[1:]
    b = 2.0 * (x[0] * d[0] - x[1:] @ d[1:])
    c = x[0] ** 2 - x[1:] @ x[1:]
    if c <= 0:
        return 0.0
    roots = []
    if abs(a) < 1e-300:
        if b < 0:
            roots.append(-c / b)
    else:
        disc = b * b - 4.0 * a * c
        if disc >= 0:
            sq = np.sqrt(disc)
            qv = -0.5 * (b + np.copysign(sq, b))
            for rt in (qv / a, c / qv if qv != 0 else np.inf):
                if rt > 0:
                    roots.append(rt)
    # the head may also hit zero first for degenerate directions
    if d[0] < 0:
        roots.append(-x[0] / d[0])
    return float(min(roots)) if roots else np.inf


def _chol(M: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(0.5 * (M + M.T))
        w = np.maximum(w, 1e-300)
        # QR of (V sqrt(w))^T gives a triangular factor of the same Gram matrix
        _, Rq = np.linalg.qr((V * np.sqrt(w)).T)
        return Rq.T

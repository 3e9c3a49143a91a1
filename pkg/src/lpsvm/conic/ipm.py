"""Homogeneous self-dual interior-point method for conic programs.

Solves

    minimize    c'x
    subject to  G x + s = h,  A x = b,  s in K

with K a product of nonnegative orthants, second-order cones and PSD cones,
together with the dual

    maximize    -h'z - b'y
    subject to  G'z + A'y + c = 0,  z in K.

Each iteration uses Nesterov-Todd scaling and a Mehrotra predictor-corrector
step on the self-dual embedding, so infeasible or unbounded problems are
detected through certificates instead of diverging.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .cones import ConeDims, NTScaling, identity, jordan_prod, min_eig

REG = 1e-15
STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_ITERATION_LIMIT = "iteration_limit"


@dataclass
class IPMResult:
    status: str
    x: np.ndarray
    s: np.ndarray
    y: np.ndarray
    z: np.ndarray
    primal_objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    # "primal" when the certificate proves the primal infeasible,
    # "dual" when it proves the dual infeasible (primal unbounded)
    infeasibility: str | None = None


def _norm(v):
    return float(np.linalg.norm(v)) if v.size else 0.0


class _Kkt:
    """Factorized Newton system for one scaling (reused by predictor and corrector)."""

    def __init__(self, c, G, h, A, b, W: NTScaling, tau, kappa):
        n = c.shape[0]
        p = A.shape[0]
        self.n, self.p = n, p
        self.G, self.A, self.b, self.c, self.h = G, A, b, c, h
        self.W = W
        Gs = W.WinvT(G)
        hs = W.WinvT(h)
        self.Gs, self.hs = Gs, hs
        self.tau = tau
        self.kappa = kappa
        Gth = Gs.T @ hs
        K = np.zeros((n + p + 1, n + p + 1))
        K[:n, :n] = Gs.T @ Gs
        K[:n, n : n + p] = A.T
        K[:n, -1] = c - Gth
        K[n : n + p, :n] = A
        K[n : n + p, -1] = -b
        K[-1, :n] = -(c + Gth)
        K[-1, n : n + p] = -b
        K[-1, -1] = hs @ hs + kappa / tau
        # small diagonal regularization keeps the factorization usable when
        # free directions (or dependent equality rows) make K singular
        scale = max(1.0, float(np.max(np.abs(K))))
        self.reg = REG * scale
        K[:n, :n] += self.reg * np.eye(n)
        K[n : n + p, n : n + p] -= self.reg * np.eye(p)
        self.K = K
        self.lu = sla.lu_factor(K, check_finite=False)

    def _reduced(self, dx, dy, dz, dtau, ds, dkappa):
        W = self.W
        n, p = self.n, self.p
        wdz = W.WinvT(dz)
        rhs = np.empty(n + p + 1)
        rhs[:n] = dx - self.Gs.T @ (ds + wdz)
        rhs[n : n + p] = -dy
        rhs[-1] = dtau + dkappa / self.tau + self.hs @ (ds + wdz)
        sol = sla.lu_solve(self.lu, rhs, check_finite=False)
        ux, uy, utau = sol[:n], sol[n : n + p], sol[-1]
        # scaled steps; ds_scaled + dz_scaled = ds
        dz_s = ds + self.Gs @ ux - utau * self.hs + wdz
        ds_s = ds - dz_s
        ukappa = (dkappa - self.kappa * utau) / self.tau
        return ux, uy, utau, ds_s, dz_s, ukappa

    def solve(self, dx, dy, dz, dtau, ds, dkappa, refine: int = 3):
        """Newton step for right-hand side d (ds is the scaled complementarity rhs).

        The reduced solve is followed by iterative refinement on the full
        (unreduced) linear system, which recovers the accuracy lost to the
        squared conditioning of G' W^-1 W^-T G near the optimum.
        """
        W, G, A, b, c, h = self.W, self.G, self.A, self.b, self.c, self.h
        step = list(self._reduced(dx, dy, dz, dtau, ds, dkappa))
        target = np.sqrt(
            dx @ dx + dy @ dy + dz @ dz + dtau**2 + ds @ ds + dkappa**2
        )
        for _ in range(refine):
            ux, uy, utau, ds_s, dz_s, ukappa = step
            Dz = W.Winv(dz_s)
            Ds = W.WT(ds_s)
            e1 = dx - (A.T @ uy + G.T @ Dz + c * utau)
            e2 = dy - (-A @ ux + b * utau)
            e3 = dz - (-G @ ux + h * utau - Ds)
            e4 = dtau - (-c @ ux - b @ uy - h @ Dz - ukappa)
            e5 = ds - (ds_s + dz_s)
            e6 = dkappa - (self.kappa * utau + self.tau * ukappa)
            err = np.sqrt(e1 @ e1 + e2 @ e2 + e3 @ e3 + e4**2 + e5 @ e5 + e6**2)
            if err <= 1e-15 * max(1.0, target):
                break
            corr = self._reduced(e1, e2, e3, e4, e5, e6)
            step = [a + d for a, d in zip(step, corr)]
        return tuple(step)


def solve_conic(
    c,
    G,
    h,
    dims: ConeDims,
    A=None,
    b=None,
    *,
    tol: float = 1e-8,
    max_iter: int = 200,
    trace=None,
) -> IPMResult:
    c = np.asarray(c, dtype=float)
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    n = c.shape[0]
    if A is None:
        A = np.zeros((0, n))
        b = np.zeros(0)
    A = np.asarray(A, dtype=float).reshape(-1, n)
    b = np.asarray(b, dtype=float).ravel()
    m = dims.size
    if G.shape != (m, n) or h.shape != (m,):
        raise ValueError("G/h do not match the cone dimensions")
    abstol = reltol = feastol = tol

    e = identity(dims)
    resx0 = max(1.0, _norm(c))
    resy0 = max(1.0, _norm(b))
    resz0 = max(1.0, _norm(h))

    # initial point: least-norm primal and dual, shifted into the cone
    K0 = _initial_kkt(G, A)
    sol = sla.lu_solve(K0, np.concatenate([G.T @ h, b]), check_finite=False)
    x = sol[:n]
    s = h - G @ x
    sol = sla.lu_solve(K0, np.concatenate([-c, np.zeros(A.shape[0])]), check_finite=False)
    y = sol[n:]
    z = G @ sol[:n]
    s = _shift_interior(dims, s, e)
    z = _shift_interior(dims, z, e)
    tau, kappa = 1.0, 1.0

    best = None
    result_status = STATUS_ITERATION_LIMIT
    infeas = None
    it = 0
    for it in range(max_iter + 1):
        rx = A.T @ y + G.T @ z + c * tau
        ry = -A @ x + b * tau
        rz = -G @ x + h * tau - s
        cx, by, hz = c @ x, b @ y, h @ z
        rtau = -cx - by - hz - kappa
        gap_raw = s @ z
        mu = (gap_raw + tau * kappa) / (dims.degree + 1)

        pcost = cx / tau
        dcost = -(by + hz) / tau
        pres = max(_norm(ry) / resy0, _norm(rz) / resz0) / tau
        dres = _norm(rx) / resx0 / tau
        gap = gap_raw / tau**2
        if pcost < 0:
            relgap = gap / -pcost
        elif dcost > 0:
            relgap = gap / dcost
        else:
            relgap = np.inf

        # infeasibility certificates (normalised by the certificate's objective)
        pinfres = dinfres = np.inf
        if hz + by < 0:
            pinfres = _norm(A.T @ y + G.T @ z) / resx0 / -(hz + by)
        if cx < 0:
            dinfres = max(_norm(A @ x) / resy0, _norm(G @ x + s) / resz0) / -cx

        snap = (x / tau, s / tau, y / tau, z / tau, pcost, dcost, gap, pres, dres)
        score = max(pres, dres, min(gap, relgap if np.isfinite(relgap) else gap))
        if best is None or score < best[0]:
            best = (score, snap)

        if trace is not None:
            trace(it, pcost, dcost, pres, dres, gap, tau, kappa)
        if pres <= feastol and dres <= feastol and (gap <= abstol or relgap <= reltol):
            result_status = STATUS_OPTIMAL
            best = (score, snap)
            break
        if pinfres <= feastol:
            result_status, infeas = STATUS_INFEASIBLE, "primal"
            scale = -(hz + by)
            best = (score, (x * 0, s * 0, y / scale, z / scale, np.inf, np.inf, np.nan, pres, dres))
            break
        if dinfres <= feastol:
            result_status, infeas = STATUS_INFEASIBLE, "dual"
            scale = -cx
            best = (score, (x / scale, s / scale, y * 0, z * 0, -np.inf, -np.inf, np.nan, pres, dres))
            break
        if it == max_iter:
            break

        try:
            W = NTScaling.compute(dims, s, z)
            kkt = _Kkt(c, G, h, A, b, W, tau, kappa)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError):
            break
        lam = W.lam
        lamsq = W.lam_sq()

        # predictor (affine scaling) direction: sigma = 0
        ds_aff = -lam  # lam \ (-lam o lam)
        dk_aff = -tau * kappa
        step = kkt.solve(-rx, -ry, -rz, -rtau, ds_aff, dk_aff)
        ux, uy, utau, ds_s, dz_s, ukappa = step
        a_aff = _step_length(W, ds_s, dz_s, tau, utau, kappa, ukappa)
        sigma = (1.0 - min(a_aff, 1.0)) ** 3

        # combined direction with second-order correction
        corr = jordan_prod(dims, ds_s, dz_s)
        ds_c = W.lam_div(-lamsq - corr + sigma * mu * e)
        dk_c = -tau * kappa - utau * ukappa + sigma * mu
        f = 1.0 - sigma
        ux, uy, utau, ds_s, dz_s, ukappa = kkt.solve(
            -f * rx, -f * ry, -f * rz, -f * rtau, ds_c, dk_c
        )
        alpha = _step_length(W, ds_s, dz_s, tau, utau, kappa, ukappa)
        alpha = min(1.0, 0.99 * alpha)
        if not np.isfinite(alpha) or alpha <= 1e-14:
            break

        x = x + alpha * ux
        y = y + alpha * uy
        s = s + alpha * W.WT(ds_s)
        z = z + alpha * W.Winv(dz_s)
        tau = tau + alpha * utau
        kappa = kappa + alpha * ukappa
        if min_eig(dims, s) <= 0 or min_eig(dims, z) <= 0 or tau <= 0 or kappa <= 0:
            # numerical loss of interiority; stop with the best iterate so far
            break

    _, (xs, ss, ys, zs, pcost, dcost, gap, pres, dres) = best
    return IPMResult(
        status=result_status,
        x=xs,
        s=ss,
        y=ys,
        z=zs,
        primal_objective=float(pcost),
        dual_objective=float(dcost),
        gap=float(gap),
        primal_residual=float(pres),
        dual_residual=float(dres),
        iterations=it,
        infeasibility=infeas,
    )


def _initial_kkt(G, A):
    n = G.shape[1]
    p = A.shape[0]
    K = np.zeros((n + p, n + p))
    K[:n, :n] = G.T @ G
    K[:n, n:] = A.T
    K[n:, :n] = A
    scale = max(1.0, float(np.max(np.abs(K), initial=0.0)))
    K[:n, :n] += 1e-12 * scale * np.eye(n)
    K[n:, n:] -= 1e-12 * scale * np.eye(p)
    return sla.lu_factor(K, check_finite=False)


def _shift_interior(dims, v, e):
    t = -min_eig(dims, v)
    if t >= -1e-8 * max(1.0, _norm(v)):
        v = v + (1.0 + t) * e
    return v


def _step_length(W: NTScaling, ds, dz, tau, dtau, kappa, dkappa):
    a = min(W.max_step(ds), W.max_step(dz))
    if dtau < 0:
        a = min(a, -tau / dtau)
    if dkappa < 0:
        a = min(a, -kappa / dkappa)
    return a

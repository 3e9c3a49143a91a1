import math

import numpy as np
import pytest

from lpsvm.conic import (
    STATUS_INFEASIBLE,
    STATUS_ITERATION_LIMIT,
    STATUS_OPTIMAL,
    Affine,
    ConicProgram,
    power_tower,
    solve_conic,
    tower_leaves,
)

COPRIME_PAIRS = [(r, s) for r in range(2, 9) for s in range(1, r) if math.gcd(r, s) == 1]


def tower_vmax(u0: float, r: int, s: int) -> float:
    """Largest v with (u0, v) inside the tower, found by the solver.

    Only called with u0 > 0: at u0 = 0 the section is the single point
    v = 0, which has no interior.
    """
    prog = ConicProgram()
    u, v = prog.add_var("u"), prog.add_var("v")
    prog.add_eq(u - u0)
    prog.add_ge(v)
    power_tower(prog, u, v, r, s)
    prog.minimize(-1.0 * v)
    sol = prog.solve(tol=1e-10)
    assert sol.status == STATUS_OPTIMAL
    return float(sol.value(v))


def tower_feasible(u0: float, v0: float, r: int, s: int) -> bool:
    prog = ConicProgram()
    u, v = prog.add_var("u"), prog.add_var("v")
    prog.add_eq(u - u0)
    prog.add_eq(v - v0)
    power_tower(prog, u, v, r, s)
    prog.minimize(Affine())
    return prog.solve().status == STATUS_OPTIMAL


class TestSmallPrograms:
    def test_euclidean_epigraph(self):
        prog = ConicProgram()
        t = prog.add_var("t")
        x = prog.add_vars(2)
        prog.add_eq(x[0] - 3.0)
        prog.add_eq(x[1] - 4.0)
        prog.add_soc(t, x)
        prog.minimize(t)
        sol = prog.solve()
        assert sol.status == STATUS_OPTIMAL
        assert sol.objective == pytest.approx(5.0, abs=1e-7)

    def test_lp_without_cones(self):
        prog = ConicProgram()
        x = prog.add_var()
        prog.add_ge(x - 7.0)
        prog.minimize(x)
        sol = prog.solve()
        assert sol.status == STATUS_OPTIMAL
        assert sol.value(x) == pytest.approx(7.0, abs=1e-7)
        assert prog.cone_counts["soc"] == 0

    def test_objective_constant_carried(self):
        prog = ConicProgram()
        x = prog.add_var()
        prog.add_ge(x - 1.0)
        prog.minimize(x + 2.5)
        assert prog.solve().objective == pytest.approx(3.5, abs=1e-7)

    def test_rotated_cone(self):
        # 2 u v >= w^2 with v = 1/2 and w = 3 -> u >= 9
        prog = ConicProgram()
        u, v, w = prog.add_vars(3)
        prog.add_eq(v - 0.5)
        prog.add_eq(w - 3.0)
        from lpsvm.conic import RotatedCone

        prog.add_rotated(RotatedCone(u, v, (w,)))
        prog.minimize(u)
        assert prog.solve().objective == pytest.approx(9.0, abs=1e-6)

    def test_psd_block(self):
        # min x s.t. [[x, 1], [1, x]] PSD -> x = 1
        prog = ConicProgram()
        x = prog.add_var()
        one = Affine.constant(1.0)
        prog.add_psd([[x, one], [one, x]])
        prog.minimize(x)
        assert prog.solve().objective == pytest.approx(1.0, abs=1e-6)

    def test_kkt_residuals_within_tolerance(self):
        prog = ConicProgram()
        x = prog.add_vars(3)
        t = prog.add_var()
        prog.add_soc(t, x)
        prog.add_ge(x[0] + x[1] + x[2] - 1.0)
        prog.minimize(t)
        sol = prog.solve(tol=1e-9)
        assert sol.status == STATUS_OPTIMAL
        assert sol.primal_residual <= 1e-9
        assert sol.dual_residual <= 1e-9
        assert sol.objective == pytest.approx(1 / math.sqrt(3), abs=1e-7)

    def test_deterministic(self):
        def run():
            prog = ConicProgram()
            x = prog.add_vars(3)
            t = prog.add_var()
            prog.add_soc(t, [x[0] - 1.0, x[1] + 2.0, x[2]])
            prog.add_ge(x[2] - 0.5)
            prog.minimize(t + 0.1 * x[0])
            return prog.solve()

        a, b = run(), run()
        assert np.array_equal(a.x, b.x)
        assert a.iterations == b.iterations


class TestStatuses:
    def test_primal_infeasible(self):
        prog = ConicProgram()
        x = prog.add_var()
        prog.add_ge(x - 2.0)
        prog.add_ge(1.0 - x)
        prog.minimize(x)
        sol = prog.solve()
        assert sol.status == STATUS_INFEASIBLE
        assert sol.infeasibility == "primal"

    def test_unbounded_reported_as_dual_infeasible(self):
        prog = ConicProgram()
        x = prog.add_var()
        prog.add_ge(1.0 - x)
        prog.minimize(x)
        sol = prog.solve()
        assert sol.status == STATUS_INFEASIBLE
        assert sol.infeasibility == "dual"

    def test_soc_infeasible(self):
        prog = ConicProgram()
        t = prog.add_var()
        x = prog.add_vars(2)
        prog.add_soc(t, x)
        prog.add_eq(x[0] - 3.0)
        prog.add_ge(1.0 - t)
        prog.minimize(t)
        assert prog.solve().status == STATUS_INFEASIBLE

    def test_iteration_limit(self):
        prog = ConicProgram()
        x = prog.add_vars(3)
        t = prog.add_var()
        prog.add_soc(t, x)
        prog.add_ge(x[0] + x[1] + x[2] - 1.0)
        prog.minimize(t)
        assert prog.solve(max_iter=1).status == STATUS_ITERATION_LIMIT

    def test_shape_mismatch(self):
        from lpsvm.conic import ConeDims

        with pytest.raises(ValueError):
            solve_conic(np.ones(2), np.ones((3, 2)), np.ones(2), ConeDims(l=3))


class TestWeakDuality:
    """HSD iterates are infeasible early on; the comparison uses those
    iterates that satisfy the feasibility tolerance."""

    @pytest.mark.parametrize("seed", range(6))
    def test_iterates(self, seed):
        rng = np.random.default_rng(seed)
        tol = 1e-8
        prog = ConicProgram()
        x = prog.add_vars(3)
        t = prog.add_var()
        prog.add_soc(t, [x[k] - float(rng.normal()) for k in range(3)])
        prog.add_ge(x[0] + x[1] - float(rng.uniform(1, 2)))
        prog.add_ge(2.0 - x[2])
        prog.minimize(t + float(rng.uniform(0, 0.5)) * x[2])
        c, G, h, A, b, dims = prog.compile()
        log = []
        res = solve_conic(c, G, h, dims, A, b, tol=tol, trace=lambda *row: log.append(row))
        assert res.status == STATUS_OPTIMAL
        feasible = [row for row in log if max(row[3], row[4]) <= tol]
        assert feasible
        for _, pcost, dcost, _, _, gap, _, _ in log:
            assert gap >= 0.0
        for _, pcost, dcost, *_ in feasible:
            assert pcost - dcost >= -10 * tol * (1 + abs(pcost))

    def test_final_point(self):
        prog = ConicProgram()
        x = prog.add_vars(2)
        t = prog.add_var()
        prog.add_soc(t, [x[0] - 1.0, x[1] - 1.0])
        prog.add_ge(-1.0 * x[0] - x[1])
        prog.minimize(t)
        sol = prog.solve()
        assert sol.objective >= sol.dual_objective - 1e-8
        assert sol.objective == pytest.approx(math.sqrt(2), abs=1e-7)


class TestRandomOracle:
    @staticmethod
    def random_socp(rng, n):
        """min c.x  s.t. ||x - a|| <= rad, l <= x <= u: strictly feasible at a."""
        a = rng.uniform(-1, 1, n)
        rad = float(rng.uniform(0.5, 1.5))
        c = rng.normal(size=n)
        lo = a - rng.uniform(0.1, 1.0, n)
        return a, rad, c, lo

    def solve_ours(self, a, rad, c, lo):
        prog = ConicProgram()
        x = prog.add_vars(len(a))
        prog.add_soc(Affine.constant(rad), [x[k] - float(a[k]) for k in range(len(a))])
        for k in range(len(a)):
            prog.add_ge(x[k] - float(lo[k]))
        prog.minimize(sum((float(c[k]) * x[k] for k in range(len(a))), Affine()))
        sol = prog.solve()
        assert sol.status == STATUS_OPTIMAL
        return sol.objective

    @pytest.mark.parametrize("seed", range(10))
    def test_against_cvxpy(self, seed):
        cp = pytest.importorskip("cvxpy")
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(1, 5))
        a, rad, c, lo = self.random_socp(rng, n)
        x = cp.Variable(n)
        ref = cp.Problem(cp.Minimize(c @ x), [cp.norm(x - a) <= rad, x >= lo])
        ref.solve()
        assert self.solve_ours(a, rad, c, lo) == pytest.approx(ref.value, abs=1e-4)

    @pytest.mark.parametrize("seed", range(5))
    def test_against_grid(self, seed):
        rng = np.random.default_rng(200 + seed)
        a, rad, c, lo = self.random_socp(rng, 2)
        # the optimum lies on the disc boundary or on a bound: scan the boundary finely
        theta = np.linspace(0, 2 * np.pi, 400001)
        pts = a[None, :] + rad * np.c_[np.cos(theta), np.sin(theta)]
        for k in range(2):
            span = np.linspace(-rad, rad, 200001)
            edge = np.tile(a, (span.size, 1))
            edge[:, k] = lo[k]
            edge[:, 1 - k] = a[1 - k] + span
            pts = np.vstack([pts, edge])
        ok = (pts >= lo - 1e-12).all(axis=1) & (np.linalg.norm(pts - a, axis=1) <= rad + 1e-12)
        best = float((pts[ok] @ c).min())
        assert self.solve_ours(a, rad, c, lo) == pytest.approx(best, abs=1e-4)


class TestPowerTower:
    def test_three_halves_has_one_auxiliary(self):
        prog = ConicProgram()
        u, v = prog.add_var("u"), prog.add_var("v")
        aux, cones = power_tower(prog, u, v, 3, 1)
        assert len(aux) == 1
        assert len(cones) == 2
        assert prog.cone_counts["soc"] == 2

    def test_quadratic_single_cone(self):
        prog = ConicProgram()
        u, v = prog.add_var("u"), prog.add_var("v")
        aux, cones = power_tower(prog, u, v, 2, 1)
        assert aux == []
        assert len(cones) == 1

    def test_leaves(self):
        assert tower_leaves(3, 1) == ["u", "u", "1", "v"]
        assert tower_leaves(4, 3) == ["u", "1", "1", "1"]

    @pytest.mark.parametrize("r", [5, 16, 33, 64])
    def test_logarithmic_cone_count(self, r):
        prog = ConicProgram()
        u, v = prog.add_var(), prog.add_var()
        _, cones = power_tower(prog, u, v, r, 1)
        assert len(cones) <= 2 * math.ceil(math.log2(r)) + 1

    def test_rejects_deep_tower(self):
        prog = ConicProgram()
        u, v = prog.add_var(), prog.add_var()
        with pytest.raises(ValueError):
            power_tower(prog, u, v, 65, 2)

    @pytest.mark.parametrize("r, s", [(2, 2), (3, 4), (3, 0)])
    def test_rejects_bad_exponents(self, r, s):
        with pytest.raises(ValueError):
            tower_leaves(r, s)

    def test_quartic_examples(self):
        assert tower_feasible(16.0, 2.0, 4, 3)
        assert not tower_feasible(1.0, 2.0, 4, 3)

    @pytest.mark.parametrize("r, s", COPRIME_PAIRS)
    def test_membership_grid(self, r, s):
        """The v-section of the tower at fixed u > 0 is [0, vmax(u)], so the
        50x50 membership grid reduces to one maximisation per u value. The
        u = 0 row is checked point by point."""
        grid = np.linspace(0.0, 4.0, 50)
        vmax = np.array([tower_vmax(u0, r, s) for u0 in grid[1:]])
        np.testing.assert_allclose(vmax, grid[1:] ** ((r - s) / r), atol=1e-7)
        vmax = np.r_[0.0, vmax]
        assert tower_feasible(0.0, 0.0, r, s)
        assert not tower_feasible(0.0, grid[1], r, s)
        inside_tower = grid[None, :] <= vmax[:, None] + 1e-7
        # v^r <= u^(r-s) written in the v scale so both sides share the tolerance
        inside_direct = grid[None, :] <= grid[:, None] ** ((r - s) / r) + 1e-7
        assert np.array_equal(inside_tower, inside_direct)

    @pytest.mark.parametrize("r, s", [(3, 1), (5, 2), (7, 3), (8, 5)])
    def test_boundary_points(self, r, s):
        for u0 in (0.5, 1.7, 3.2):
            edge = u0 ** ((r - s) / r)
            assert tower_feasible(u0, edge * (1 - 1e-4), r, s)
            assert not tower_feasible(u0, edge * (1 + 1e-3), r, s)

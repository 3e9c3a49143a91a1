import json

import numpy as np
import pytest

from lpsvm import Dataset, NormParam, TrainingDataError
from lpsvm.conic import SolverFailure
from lpsvm.dual import recover_omega, solve_dual
from lpsvm.feature_maps import TransformSpec
from lpsvm.primal import (
    build_primal,
    classify,
    dump_model,
    load_model,
    model_from_dict,
    train_primal,
)

from .conftest import TOY_X, TOY_Y, random_instance

CBRT2 = 2.0 ** (1.0 / 3.0)


def pnorm_power(omega, p):
    return float(np.sum(np.abs(omega) ** p))


@pytest.fixture
def two_points():
    return Dataset(np.array([[1.0], [-1.0]]), np.array([1.0, -1.0]))


class TestBuild:
    def test_quadratic_norm_one_cone_per_feature(self, toy):
        prog = build_primal(toy, NormParam(2), 1.0)
        assert prog.cone_counts["soc"] == toy.d
        assert prog.aux == []

    def test_variable_layout(self, toy):
        prog = build_primal(toy, NormParam(3), 1.0, TransformSpec.quadratic(3))
        assert len(prog.omega) == 3
        assert len(prog.xi) == toy.n
        assert len(prog.u) == len(prog.v) == 3
        assert len(prog.aux) == 3

    def test_classification_rows(self, toy):
        """The fourth row reads -w1 - 2^(1/3) w2 - w3 - b + xi4 >= 1."""
        prog = build_primal(toy, NormParam(3), 10.0, TransformSpec.quadratic(3))
        rows = [e for tag, e in prog._ineq if tag == "classify"]
        assert len(rows) == 6
        w = [next(iter(v.coef)) for v in prog.omega]
        b = next(iter(prog.b.coef))
        xi4 = next(iter(prog.xi[3].coef))
        row = rows[3]
        assert [row.coef.get(k, 0.0) for k in w] == pytest.approx([-1.0, -CBRT2, -1.0])
        assert row.coef[b] == -1.0
        assert row.coef[xi4] == 1.0
        assert row.const == -1.0
        # the first point is the origin: only b and xi remain
        assert set(rows[0].coef) == {b, next(iter(prog.xi[0].coef))}

    def test_objective_weights(self, toy):
        prog = build_primal(toy, NormParam(3), 10.0)
        t = next(iter(prog.t.coef))
        assert prog.objective.coef[t] == 1.0
        for x in prog.xi:
            assert prog.objective.coef[next(iter(x.coef))] == 10.0

    def test_one_class_rejected(self):
        ds = Dataset(np.eye(3), np.ones(3))
        with pytest.raises(TrainingDataError):
            build_primal(ds, NormParam(2), 1.0)

    @pytest.mark.parametrize("C", [0.0, -1.0])
    def test_nonpositive_C(self, toy, C):
        with pytest.raises(ValueError):
            build_primal(toy, NormParam(2), C)


class TestToyProblem:
    def test_quadratic_transform(self, toy, cubic):
        model = train_primal(toy, cubic, 10.0, TransformSpec.quadratic(3))
        np.testing.assert_allclose(model.omega, [-2.0, 0.0, -2.0], atol=1e-4)
        assert model.b == pytest.approx(3.0, abs=1e-4)
        np.testing.assert_allclose(model.slack, 0.0, atol=1e-6)
        assert model.objective == pytest.approx(4 * np.sqrt(2), abs=1e-4)

    def test_cubic_monomials(self, toy, cubic):
        model = train_primal(toy, cubic, 10.0, TransformSpec.monomial(3))
        expected = [0, 0.1117, 0.1117, -1.3295, 0.4469, -1.3295, 0.1117, -0.6704, -0.6704, 0.1117]
        np.testing.assert_allclose(model.omega, expected, atol=1e-3)
        assert model.b == pytest.approx(2.1060, abs=1e-3)
        assert np.array_equal(model.predict(TOY_X), TOY_Y)

    def test_points_classified(self, toy, cubic):
        model = train_primal(toy, cubic, 10.0, TransformSpec.quadratic(3))
        assert [classify(model, x) for x in TOY_X] == [1, 1, 1, -1, -1, -1]

    def test_margin_value(self, toy, cubic):
        model = train_primal(toy, cubic, 10.0, TransformSpec.quadratic(3))
        assert model.margin_value == pytest.approx(2.0 / (2 * 2.0 ** (2 / 3)), rel=1e-5)

    def test_linear_kernel_cannot_separate(self, toy):
        model = train_primal(toy, NormParam(2), 10.0)
        assert model.slack.sum() > 0.5


class TestTwoPoints:
    @pytest.mark.parametrize("r", [2, 3, 4])
    def test_symmetric_solution(self, two_points, r):
        model = train_primal(two_points, NormParam(r), 1e3)
        assert model.omega[0] == pytest.approx(1.0, abs=1e-6)
        assert model.b == pytest.approx(0.0, abs=1e-6)

    def test_brute_force(self, two_points):
        # objective |w|^2 + C (max(0, 1 - w - b) + max(0, 1 - w + b)) on a grid
        C = 0.3
        w = np.linspace(-2, 2, 801)[:, None]
        b = np.linspace(-2, 2, 801)[None, :]
        obj = w**2 + C * (np.maximum(0, 1 - w - b) + np.maximum(0, 1 - w + b))
        model = train_primal(two_points, NormParam(2), C)
        assert model.objective == pytest.approx(obj.min(), abs=1e-4)

    def test_classify_sign(self, two_points):
        model = train_primal(two_points, NormParam(2), 1e3)
        for z in (-3.0, -0.2, 0.4, 7.0):
            assert classify(model, [z]) == (1 if z > 0 else -1)

    def test_tie_goes_positive(self, two_points):
        model = train_primal(two_points, NormParam(2), 1e3)
        z = -model.b / model.omega[0]
        assert classify(model, [z]) == 1


class TestProperties:
    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("norm", [NormParam(2), NormParam(3), NormParam(4, 3)])
    def test_objective_consistency(self, seed, norm):
        ds = random_instance(np.random.default_rng(seed))
        model = train_primal(ds, norm, 2.0)
        hinge = np.maximum(0.0, 1.0 - ds.y * model.decision_function(ds.X))
        expected = pnorm_power(model.omega, norm.p) + 2.0 * hinge.sum()
        assert model.objective == pytest.approx(expected, rel=1e-6, abs=1e-8)

    @pytest.mark.parametrize("seed", range(5))
    def test_slack_feasibility(self, seed):
        ds = random_instance(np.random.default_rng(seed))
        model = train_primal(ds, NormParam(3), 1.0)
        margins = ds.y * model.decision_function(ds.X)
        assert np.all(margins >= 1 - model.slack - 1e-6)
        assert np.all(model.slack >= 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_monotone_in_C(self, seed):
        ds = random_instance(np.random.default_rng(50 + seed))
        values = [train_primal(ds, NormParam(3), C).objective for C in (1, 2, 4, 8)]
        assert all(b >= a - 1e-7 for a, b in zip(values, values[1:]))

    def test_separable_large_C(self, rng):
        X = np.r_[rng.normal(2, 0.3, (6, 2)), rng.normal(-2, 0.3, (6, 2))]
        ds = Dataset(X, np.r_[np.ones(6), -np.ones(6)])
        model = train_primal(ds, NormParam(4, 3), 1e4)
        np.testing.assert_allclose(model.slack, 0.0, atol=1e-6)
        assert np.all(ds.y * model.decision_function(X) >= 1 - 1e-6)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_dual(self, seed):
        rng = np.random.default_rng(300 + seed)
        ds = random_instance(rng)
        norm = NormParam(2) if seed % 2 else NormParam(4)
        C = 1.0 if seed < 4 else 10.0
        primal = train_primal(ds, norm, C)
        dual = solve_dual(ds, norm, C)
        assert primal.objective == pytest.approx(dual.value, abs=1e-4 * (1 + abs(primal.objective)))
        np.testing.assert_allclose(recover_omega(dual.alpha, ds, norm), primal.omega, atol=1e-3)


class TestStandardize:
    def test_predict_uses_training_scale(self, rng):
        X = np.r_[rng.normal(50, 3, (5, 2)), rng.normal(60, 3, (5, 2))]
        ds = Dataset(X, np.r_[np.ones(5), -np.ones(5)])
        model = train_primal(ds, NormParam(2), 10.0, standardize=True)
        assert model.standardizer is not None
        np.testing.assert_allclose(model.standardizer.mean, X.mean(axis=0))
        assert np.mean(model.predict(X) == ds.y) >= 0.9


class TestSerialization:
    def test_round_trip(self, toy, cubic):
        model = train_primal(toy, cubic, 10.0, TransformSpec.quadratic(3), standardize=True)
        again = load_model(dump_model(model))
        assert again.norm == model.norm
        assert again.transform == model.transform
        np.testing.assert_array_equal(again.omega, model.omega)
        np.testing.assert_array_equal(again.predict(TOY_X), model.predict(TOY_X))

    def test_json_fields(self, two_points):
        doc = json.loads(dump_model(train_primal(two_points, NormParam(2), 1.0)))
        assert {"r", "s", "C", "transform", "eta", "sigma", "omega", "b"} <= set(doc)

    def test_missing_keys(self):
        with pytest.raises(ValueError, match="omega"):
            model_from_dict({"r": 2, "s": 1, "C": 1.0, "transform": "identity", "eta": 1, "sigma": 1.0, "b": 0})


def test_solver_failure_propagates(toy, monkeypatch):
    from lpsvm.conic import ConicSolution

    def fake_solve(self, tol=1e-8, max_iter=200):
        return ConicSolution("iteration_limit", np.zeros(self.n_vars), 0.0, 0.0, max_iter, 1.0, 1.0, 1.0)

    monkeypatch.setattr("lpsvm.primal.PrimalProgram.solve", fake_solve)
    with pytest.raises(SolverFailure):
        train_primal(toy, NormParam(2), 1.0)

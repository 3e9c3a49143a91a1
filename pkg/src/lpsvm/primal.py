"""Primal l_p-SVM: assemble the conic program, train, classify, serialize."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .conic import STATUS_OPTIMAL, Affine, ConicProgram, SolverFailure, power_tower
from .core import Dataset, Hyperplane, NormParam, sign_with_tie
from .feature_maps import Standardizer, TransformSpec, apply_transform, transform_matrix

MODEL_KEYS = ("r", "s", "C", "transform", "eta", "sigma", "omega", "b")


class PrimalProgram(ConicProgram):
    """ConicProgram with handles to the SVM variables."""

    omega: list[Affine]
    b: Affine
    t: Affine
    xi: list[Affine]
    u: list[Affine]
    v: list[Affine]
    aux: list[Affine]


def build_primal(ds: Dataset, norm: NormParam, C: float, spec: TransformSpec | None = None) -> PrimalProgram:
    """min t + C sum(xi) over (omega, b, t, xi, u, v) with

    y_i (omega . phi(x_i) + b) >= 1 - xi_i,  xi >= 0,
    v_j >= |omega_j|,  t >= sum(u),  u_j^(r-s) >= v_j^r.
    """
    ds.check_trainable()
    if not C > 0:
        raise ValueError("C must be positive")
    spec = spec or TransformSpec.identity()
    feats = apply_transform(ds, spec)
    X, y = feats.X, feats.y
    n, D = X.shape

    prog = PrimalProgram()
    prog.omega = prog.add_vars(D, "omega")
    prog.b = prog.add_var("b")
    prog.t = prog.add_var("t")
    prog.xi = prog.add_vars(n, "xi")
    prog.u = prog.add_vars(D, "u")
    prog.v = prog.add_vars(D, "v")
    prog.aux = []

    for i in range(n):
        row = Affine({k: y[i] * X[i, k] for k in range(D) if X[i, k] != 0.0})
        margin = row + y[i] * prog.b + prog.xi[i] - 1.0
        prog.add_ge(margin, "classify")
    for i in range(n):
        prog.add_ge(prog.xi[i], "slack")
    for j in range(D):
        prog.add_ge(prog.v[j] - prog.omega[j], "abs")
        prog.add_ge(prog.v[j] + prog.omega[j], "abs")
    prog.add_ge(prog.t - sum(prog.u, Affine()), "epigraph")
    for j in range(D):
        aux, _ = power_tower(prog, prog.u[j], prog.v[j], norm.r, norm.s, tag=f"tower{j}")
        prog.aux.extend(aux)

    prog.minimize(prog.t + C * sum(prog.xi, Affine()))
    return prog


@dataclass(frozen=True)
class PrimalModel:
    hyperplane: Hyperplane
    slack: np.ndarray
    norm: NormParam
    C: float
    transform: TransformSpec = field(default_factory=TransformSpec.identity)
    objective: float = float("nan")
    solve_time: float = 0.0
    standardizer: Standardizer | None = None

    @property
    def omega(self) -> np.ndarray:
        return self.hyperplane.omega

    @property
    def b(self) -> float:
        return self.hyperplane.b

    @property
    def margin_value(self) -> float:
        """2 / ||omega||_p."""
        nrm = float(np.sum(np.abs(self.omega) ** self.norm.p) ** (1.0 / self.norm.p))
        return 2.0 / nrm if nrm > 0 else float("inf")

    def features(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if self.standardizer is not None:
            Z = self.standardizer.apply(Z)
        return transform_matrix(Z, self.transform)

    def decision_function(self, Z) -> np.ndarray:
        return self.hyperplane.decision(self.features(Z))

    def predict(self, Z) -> np.ndarray:
        return sign_with_tie(self.decision_function(Z))


def train_primal(
    ds: Dataset,
    norm: NormParam,
    C: float,
    spec: TransformSpec | None = None,
    tol: float = 1e-8,
    *,
    standardize: bool = False,
    max_iter: int = 200,
) -> PrimalModel:
    """Fit the l_p-SVM by solving the conic primal.

    With ``standardize`` the z-score is fitted on ``ds`` and applied before
    the transform; it is stored on the model and reused by ``predict``.
    """
    spec = spec or TransformSpec.identity()
    scaler = None
    if standardize:
        scaler = Standardizer.fit(ds.X)
        ds = ds.with_features(scaler.apply(ds.X))
    prog = build_primal(ds, norm, C, spec)
    start = time.perf_counter()
    sol = prog.solve(tol=tol, max_iter=max_iter)
    elapsed = time.perf_counter() - start
    if sol.status != STATUS_OPTIMAL:
        raise SolverFailure(sol.status)
    omega = sol.value(prog.omega)
    b = sol.value(prog.b)
    xi = np.maximum(sol.value(prog.xi), 0.0)
    return PrimalModel(
        hyperplane=Hyperplane(omega, b),
        slack=xi,
        norm=norm,
        C=float(C),
        transform=spec,
        objective=float(sol.objective),
        solve_time=elapsed,
        standardizer=scaler,
    )


def classify(model: PrimalModel, z) -> int:
    return int(model.predict(np.asarray(z, dtype=float)[None, :])[0])


# serialization -------------------------------------------------------------


def model_to_dict(model: PrimalModel) -> dict[str, Any]:
    spec = model.transform
    doc: dict[str, Any] = {
        "r": model.norm.r,
        "s": model.norm.s,
        "C": model.C,
        "transform": spec.kind,
        "eta": spec.eta,
        "sigma": spec.sigma,
        "omega": [float(w) for w in model.omega],
        "b": model.b,
        "transform_r": spec.r,
    }
    if model.standardizer is not None:
        doc["mean"] = [float(v) for v in model.standardizer.mean]
        doc["scale"] = [float(v) for v in model.standardizer.scale]
    return doc


def model_from_dict(doc: dict[str, Any]) -> PrimalModel:
    missing = [k for k in MODEL_KEYS if k not in doc]
    if missing:
        raise ValueError(f"model document lacks keys: {', '.join(missing)}")
    spec = TransformSpec(
        doc["transform"], eta=doc["eta"], sigma=doc["sigma"], r=doc.get("transform_r", doc["r"])
    )
    scaler = None
    if "mean" in doc:
        scaler = Standardizer(np.asarray(doc["mean"], dtype=float), np.asarray(doc["scale"], dtype=float))
    return PrimalModel(
        hyperplane=Hyperplane(doc["omega"], doc["b"]),
        slack=np.zeros(0),
        norm=NormParam(doc["r"], doc["s"]),
        C=float(doc["C"]),
        transform=spec,
        standardizer=scaler,
    )


def dump_model(model: PrimalModel) -> str:
    return json.dumps(model_to_dict(model), indent=2)


def load_model(text: str) -> PrimalModel:
    return model_from_dict(json.loads(text))

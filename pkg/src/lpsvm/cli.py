"""Command-line entry point: ``lpsvm <command> ...``.

Exit status is 0 on success, 2 for unreadable arguments or input files and
3 when a solver does not reach an optimal point.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

import numpy as np

from .conic import SolverFailure
from .core import NormParam, TrainingDataError
from .feature_maps import TransformSpec

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_SOLVER = 3


class _UsageError(Exception):
    pass


def parse_p(text: str) -> NormParam:
    """``--p 3/2`` or ``--p 2``: the primal norm exponent, rational and > 1."""
    try:
        value = Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"{text!r} is not a rational number") from None
    try:
        return NormParam.from_p(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _p_list(text: str) -> list[NormParam]:
    return [parse_p(part) for part in text.split(",") if part.strip()]


def _float_list(text: str) -> list[float]:
    try:
        return [float(Fraction(part.strip())) for part in text.split(",") if part.strip()]
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"{text!r} is not a list of numbers") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a list of integers") from None


def _spec(args, norm: NormParam) -> TransformSpec:
    kind = args.transform
    if kind == "identity":
        return TransformSpec.identity()
    if kind == "quadratic":
        return TransformSpec.quadratic(norm.r)
    if kind == "monomial":
        return TransformSpec.monomial(args.eta)
    return TransformSpec.gaussian(args.eta, args.sigma, max(norm.r, 2))


def _load(args):
    from .experiments.data import load_dataset

    return load_dataset(args.data, args.format)


def _vec(v) -> str:
    return " ".join(repr(float(x)) for x in np.atleast_1d(v))


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    from .primal import dump_model, train_primal

    ds = _load(args)
    model = train_primal(ds, args.p, args.C, _spec(args, args.p), standardize=args.standardize)
    text = dump_model(model)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    print(f"objective {model.objective!r}  solve {model.solve_time:.3f}s", file=sys.stderr)
    return EXIT_OK


def cmd_predict(args) -> int:
    from .experiments.cv import accuracy
    from .primal import load_model

    try:
        with open(args.model) as fh:
            model = load_model(fh.read())
    except (OSError, ValueError, KeyError) as exc:
        raise _UsageError(f"cannot read model: {exc}") from exc
    ds = _load(args)
    pred = model.predict(ds.X)
    for label in pred:
        print(int(label))
    print(f"accuracy {accuracy(pred, ds.y):.2f}%", file=sys.stderr)
    return EXIT_OK


def _config(args, Cs, sigmas):
    from .experiments.cv import ExperimentConfig

    return ExperimentConfig(
        norms=tuple(args.p),
        transform=args.transform,
        etas=tuple(args.eta),
        sigmas=tuple(sigmas),
        Cs=tuple(Cs),
        folds=args.folds,
        seed=args.seed,
        standardize=args.standardize,
    )


def cmd_cv(args) -> int:
    from .experiments.cv import cross_validate
    from .experiments.report import emit_report

    ds = _load(args)
    rows = cross_validate(ds, _config(args, args.C, args.sigma))
    sys.stdout.write(emit_report(rows, args.report, include_time=not args.no_time))
    return EXIT_OK


def cmd_gridsearch(args) -> int:
    from .experiments.cv import grid_search, default_grid
    from .experiments.report import emit_report

    ds = _load(args)
    Cs = args.C or default_grid()
    sigmas = args.sigma or (default_grid() if args.transform == "gaussian" else (1.0,))
    result = grid_search(ds, _config(args, Cs, sigmas))
    sys.stdout.write(emit_report(list(result.rows), args.report, include_time=not args.no_time))
    best = result.best
    print(f"best C={best.C!r} sigma={best.sigma!r} acc_test={best.acc_test:.2f}", file=sys.stderr)
    return EXIT_OK


def cmd_dual(args) -> int:
    from .dual import NoSupportVectorError, recover_hyperplane, solve_dual
    from .feature_maps import apply_transform

    ds = apply_transform(_load(args), _spec(args, args.p))
    sol = solve_dual(ds, args.p, args.C, method=args.method)
    print(f"value {sol.value!r}")
    print(f"alpha {_vec(sol.alpha)}")
    try:
        hp = recover_hyperplane(sol.alpha, ds, args.p, args.C)
    except NoSupportVectorError as exc:
        print(f"hyperplane unavailable: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"omega {_vec(hp.omega)}")
    print(f"b {hp.b!r}")
    return EXIT_OK


def cmd_moment(args) -> int:
    from .dual import NoSupportVectorError, enumerate_cells, recover_hyperplane
    from .feature_maps import apply_transform
    from .moment_sdp import extract_solution, relaxation_for_dual, solve_sdp

    norm = args.p
    if norm.s != 1:
        raise _UsageError("the moment hierarchy needs integer q (p = q/(q-1))")
    ds = apply_transform(_load(args), _spec(args, norm))
    t = args.t or -(-norm.r // 2)
    best = None
    for k, cell in enumerate(enumerate_cells(ds, norm.r)):
        prob = relaxation_for_dual(ds, norm, args.C, cell, t)
        if args.show_sdp:
            sys.stdout.write(prob.to_text())
        res = solve_sdp(prob, tol=args.tol)
        if res.status != "optimal":
            raise SolverFailure(res.status, f"cell {k}")
        ext = extract_solution(res.w, t, args.rank_tol)
        print(f"cell {k} signs {_vec(cell.signs)}")
        print(f"  rho {res.rho!r}")
        print(f"  alpha {_vec(ext.alpha)}")
        print(f"  ranks {ext.ranks[0]} {ext.ranks[1]} certified {'yes' if ext.certified else 'no'}")
        if best is None or res.rho < best[0]:
            best = (res.rho, ext.alpha)
    try:
        hp = recover_hyperplane(best[1], ds, norm, args.C)
        print(f"omega {_vec(hp.omega)}")
        print(f"b {hp.b!r}")
    except NoSupportVectorError as exc:
        print(f"hyperplane unavailable: {exc}", file=sys.stderr)
    return EXIT_OK


def cmd_tensor(args) -> int:
    from .kernel_tensor import als_decompose, cauchy_tensor, read_tensor

    if args.tensor:
        try:
            with open(args.tensor) as fh:
                T = read_tensor(fh.read())
        except (OSError, ValueError) as exc:
            raise _UsageError(f"cannot read tensor: {exc}") from exc
    else:
        if args.data is None:
            raise _UsageError("give a tensor file or a data file")
        ds = _load(args)
        T = cauchy_tensor(ds.X, args.r)
    print(f"order {T.order} dim {T.dim} frobenius {T.frobenius()!r}")
    if T.order == 2:
        print(f"psd {'yes' if T.is_psd() else 'no'}")
    dec = als_decompose(T, args.max_rank, restarts=args.restarts, seed=args.seed)
    print(f"rank {dec.rank} residual {dec.residual!r}")
    print(f"psi {_vec(dec.psi)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpsvm", description="lp-norm support vector machines")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_args(p, required=True):
        if required:
            p.add_argument("data", help="training or test file")
        else:
            p.add_argument("--data", help="data file")
        p.add_argument("--format", choices=("csv", "libsvm"), default="csv")

    def model_args(p, multi=False):
        if multi:
            p.add_argument("--p", type=_p_list, default=[NormParam(2)],
                           help="comma-separated norm exponents, e.g. 4/3,3/2,2,3")
        else:
            p.add_argument("--p", type=parse_p, default=NormParam(2), help="norm exponent, e.g. 3/2")
        p.add_argument("--transform", choices=("identity", "monomial", "gaussian", "quadratic"),
                       default="identity")
        if multi:
            p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True,
                           help="z-score features on each training fold (default on)")
        else:
            p.add_argument("--standardize", action="store_true")

    p = sub.add_parser("train", help="fit a model and write it as JSON")
    data_args(p)
    model_args(p)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--eta", type=int, default=1)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="label a data file with a saved model")
    p.add_argument("model")
    data_args(p)
    p.set_defaults(func=cmd_predict)

    for name, func, helptext in (
        ("cv", cmd_cv, "cross-validate every parameter combination"),
        ("gridsearch", cmd_gridsearch, "pick C (and sigma) by cross-validated accuracy"),
    ):
        p = sub.add_parser(name, help=helptext)
        data_args(p)
        model_args(p, multi=True)
        default_C = [1.0] if name == "cv" else None
        default_sigma = [1.0] if name == "cv" else None
        p.add_argument("--C", type=_float_list, default=default_C, help="comma-separated values")
        p.add_argument("--eta", type=_int_list, default=[1])
        p.add_argument("--sigma", type=_float_list, default=default_sigma)
        p.add_argument("--folds", type=int, default=10)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--report", choices=("markdown", "csv"), default="markdown")
        p.add_argument("--no-time", action="store_true", help="omit timings (byte-stable output)")
        p.set_defaults(func=func)

    p = sub.add_parser("dual", help="solve the dual and recover the hyperplane")
    data_args(p)
    model_args(p)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--eta", type=int, default=1)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--method", choices=("auto", "projected_gradient", "cellwise"), default="auto")
    p.set_defaults(func=cmd_dual)

    p = sub.add_parser("moment", help="solve the moment relaxation on every sign cell")
    data_args(p)
    model_args(p)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--eta", type=int, default=1)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--t", type=int, default=None, help="relaxation order (default ceil(r/2))")
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--rank-tol", type=float, default=1e-6)
    p.add_argument("--show-sdp", action="store_true", help="print each assembled SDP")
    p.set_defaults(func=cmd_moment)

    p = sub.add_parser("tensor", help="decompose a symmetric tensor")
    p.add_argument("tensor", nargs="?", help="tensor text file")
    data_args(p, required=False)
    p.add_argument("--r", type=int, default=2, help="order of the Cauchy tensor built from --data")
    p.add_argument("--max-rank", type=int, default=4)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_tensor)
    return parser


def main(argv=None) -> int:
    from .dual import DualNonconvergenceError
    from .experiments.data import DataFormatError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (DataFormatError, TrainingDataError, _UsageError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (SolverFailure, DualNonconvergenceError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

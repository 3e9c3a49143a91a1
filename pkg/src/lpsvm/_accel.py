"""Select the compiled kernels when available, else the numpy fallback.

Set ``LPSVM_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("LPSVM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _pykernels


def project_box_hyperplane(z, y, C):
    return _impl.project_box_hyperplane(
        np.ascontiguousarray(z, dtype=float), np.ascontiguousarray(y, dtype=float), float(C)
    )


def monomial_features(X, E):
    return _impl.monomial_features(
        np.ascontiguousarray(X, dtype=float), np.ascontiguousarray(E, dtype=np.int64)
    )


def homogeneous_coefficients(E, mult, y, X, weights):
    """``y`` must hold +-1 labels (the compiled kernel uses parity for y^E)."""
    return _impl.homogeneous_coefficients(
        np.ascontiguousarray(E, dtype=np.int64),
        np.ascontiguousarray(mult, dtype=float),
        np.ascontiguousarray(y, dtype=float),
        np.ascontiguousarray(X, dtype=float),
        np.ascontiguousarray(weights, dtype=float),
    )


def poly_eval(E, coef, alpha):
    return float(
        _impl.poly_eval(
            np.ascontiguousarray(E, dtype=np.int64),
            np.ascontiguousarray(coef, dtype=float),
            np.ascontiguousarray(alpha, dtype=float),
        )
    )

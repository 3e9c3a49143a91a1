"""Pure-Python/numpy versions of the compiled kernels in ``_ckernels.pyx``.

Both modules expose the same four functions; ``lpsvm._accel`` picks one at
import time.
"""

import numpy as np


def project_box_hyperplane(z, y, C, max_iter=200):
    """Euclidean projection of z onto {a : 0 <= a <= C, y . a = 0}.

    Bisection on the multiplier theta of the equality, where
    a(theta) = clip(z - theta * y, 0, C) makes y . a(theta) nonincreasing.
    The final theta is recomputed exactly from the free coordinates.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    span = float(np.max(np.abs(z))) + C + 1.0
    lo, hi = -span, span
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        h = float(y @ np.clip(z - mid * y, 0.0, C))
        if h > 0.0:
            lo = mid
        elif h < 0.0:
            hi = mid
        else:
            lo = hi = mid
            break
    theta = 0.5 * (lo + hi)
    a = np.clip(z - theta * y, 0.0, C)
    free = (a > 0.0) & (a < C)
    if np.any(free):
        fixed_part = float(y[~free] @ a[~free])
        theta = (float(y[free] @ z[free]) + fixed_part) / float(np.count_nonzero(free))
        a_free = z[free] - theta * y[free]
        if np.all((a_free >= 0.0) & (a_free <= C)):
            a[free] = a_free
    return a


def monomial_features(X, E):
    """Row-wise monomials: out[i, k] = prod_j X[i, j] ** E[k, j]."""
    X = np.asarray(X, dtype=float)
    E = np.asarray(E, dtype=np.int64)
    n, d = X.shape
    out = np.ones((n, E.shape[0]))
    for j in range(d):
        col = X[:, j]
        powers = np.ones((n, int(E[:, j].max(initial=0)) + 1))
        for e in range(1, powers.shape[1]):
            powers[:, e] = powers[:, e - 1] * col
        out *= powers[:, E[:, j]]
    return out


def homogeneous_coefficients(E, mult, y, X, weights):
    """coef[k] = mult[k] * y^E[k] * sum_j weights[j] * prod_i X[i, j] ** E[k, i].

    ``E`` is M x n (one exponent row per monomial in alpha), ``X`` is n x D.
    """
    E = np.asarray(E, dtype=np.int64)
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    weights = np.asarray(weights, dtype=float)
    # columns of X become "observations" of n variables
    feat = monomial_features(X.T, E)  # D x M
    ypow = monomial_features(y[None, :], E)[0]
    return np.asarray(mult, dtype=float) * ypow * (weights @ feat)


def poly_eval(E, coef, alpha):
    """sum_k coef[k] * prod_i alpha[i] ** E[k, i]."""
    alpha = np.asarray(alpha, dtype=float)
    return float(monomial_features(alpha[None, :], E)[0] @ np.asarray(coef, dtype=float))

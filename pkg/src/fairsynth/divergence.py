"""Empirical H-divergence between two samples and the resulting gap bounds.

The empirical divergence is the proxy A-distance: train a linear domain
classifier to tell the samples apart and map its held-out error e to
``2 * (1 - 2e)``, floored at 0.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InsufficientSampleError
from .models import LogRegParams, train_logreg
from .tabular import Dataset

LAMBDA_NOTE = "unobservable: ideal joint-hypothesis error is not estimated"


def empirical_h_divergence(U_a, U_b, seed: int = 0, params: LogRegParams | None = None) -> float:
    """Proxy A-distance between row samples ``U_a`` and ``U_b``.

    Both sides are subsampled (without replacement) to the smaller size m,
    each side is split in half for training and held-out evaluation, and a
    logistic domain classifier is fit on the training halves.
    """
    A = np.atleast_2d(np.asarray(U_a, dtype=float))
    B = np.atleast_2d(np.asarray(U_b, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError("samples must have the same number of columns")
    if len(A) < 4 or len(B) < 4:
        raise InsufficientSampleError(
            f"each sample needs at least 4 rows, got {len(A)} and {len(B)}")
    m = min(len(A), len(B))
    rng = np.random.default_rng(seed)
    A = A[rng.permutation(len(A))[:m]]
    B = B[rng.permutation(len(B))[:m]]
    half = m // 2
    X_tr = np.vstack([A[:half], B[:half]])
    y_tr = np.r_[np.zeros(half), np.ones(half)]
    X_te = np.vstack([A[half:], B[half:]])
    y_te = np.r_[np.zeros(m - half), np.ones(m - half)]
    n_tr = len(y_tr)
    model = train_logreg(Dataset(X_tr, y_tr, np.zeros(n_tr), np.ones(n_tr)), params)
    err = float(np.mean((model.score(X_te) >= 0.5) != (y_te == 1)))
    return max(0.0, 2.0 * (1.0 - 2.0 * err))


def complexity_term(d: int, m: int, delta: float) -> float:
    """``4 * sqrt((d ln(2m) + ln(2/delta)) / m)``, natural logarithms."""
    if d < 1 or m < 1:
        raise ValueError("d and m must be positive integers")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return 4.0 * math.sqrt((d * math.log(2 * m) + math.log(2 / delta)) / m)


@dataclass(frozen=True)
class DivergenceReport:
    empirical_h_divergence: float
    complexity_term: float
    vc_dim: int
    m: int
    delta: float
    favorable_gap_bound: float
    error_gap_bound_ex_lambda: float
    lambda_term: str = LAMBDA_NOTE

    def as_dict(self) -> dict:
        return asdict(self)


def bounds_report(U_p, U_u, vc_dim: int | None = None, delta: float = 0.05,
                  seed: int = 0, params: LogRegParams | None = None) -> DivergenceReport:
    """Bound terms for the favorable-prediction gap and the error gap.

    ``vc_dim`` defaults to (number of features + 1), the VC dimension of
    linear threshold functions. The error-gap bound excludes the unknown
    ideal joint error, which is reported as a labeled unknown.
    """
    U_p = np.atleast_2d(np.asarray(U_p, dtype=float))
    U_u = np.atleast_2d(np.asarray(U_u, dtype=float))
    if vc_dim is None:
        vc_dim = U_p.shape[1] + 1
    d_hat = empirical_h_divergence(U_p, U_u, seed, params)
    m = min(len(U_p), len(U_u))
    comp = complexity_term(vc_dim, m, delta)
    bound = 0.5 * d_hat + 0.5 * comp
    return DivergenceReport(d_hat, comp, int(vc_dim), m, delta, bound, bound)


def group_bounds_report(ds: Dataset, delta: float = 0.05, seed: int = 0, vc_dim: int | None = None,
                        params: LogRegParams | None = None) -> DivergenceReport:
    """bounds_report between the privileged and unprivileged rows of ``ds``.

    The protected indicator column (when the schema includes one) is
    dropped, so the domain classifier only sees situational features.
    """
    priv = ds.g == 1
    X = ds.situational_X
    return bounds_report(X[priv], X[~priv], vc_dim, delta, seed, params)

"""Pure numpy versions of the hot ECM kernels.

Same signatures and semantics as the compiled ``_kernels`` module; used
when the extension is unavailable or ``UNKSIZE_PURE_PYTHON`` is set.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln


def log_factorials(y):
    return gammaln(np.asarray(y, dtype=float) + 1.0)


def estep(y, h, alphas, lambdas, lgy=None):
    """Responsibilities ``pi`` (r x K) and the mixture log-likelihood."""
    yf = np.asarray(y, dtype=float)
    h = np.asarray(h, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    if lgy is None:
        lgy = gammaln(yf + 1.0)
    with np.errstate(divide="ignore"):
        log_a = np.log(np.asarray(alphas, dtype=float))
    lp = (
        log_a[None, :]
        + yf[:, None] * (np.log(lam)[None, :] + np.log(h)[:, None])
        - lam[None, :] * h[:, None]
        - lgy[:, None]
    )
    m = lp.max(axis=1, keepdims=True)
    pi = np.exp(lp - m)
    s = pi.sum(axis=1, keepdims=True)
    pi /= s
    return pi, float(np.sum(m[:, 0] + np.log(s[:, 0])))


def index_newton_terms(X, y, h, d1, d2, lam_bar):
    """Gradient and Hessian of T2 for a single-index link ``h = F(X beta)``.

    ``d1``, ``d2`` are ``F'`` and ``F''`` at the linear predictor and
    ``lam_bar[i] = sum_j pi_ij lambda_j``.
    """
    yf = np.asarray(y, dtype=float)
    resid = yf / h - lam_bar
    grad = X.T @ (resid * d1)
    w = resid * d2 - yf * np.square(d1 / h)
    hess = (X * w[:, None]).T @ X
    return grad, hess


def t2_beta_part(y, h, lam_bar):
    """The beta-dependent part of T2: ``sum_i y_i log h_i - lam_bar_i h_i``."""
    yf = np.asarray(y, dtype=float)
    return float(np.sum(yf * np.log(h) - lam_bar * h))

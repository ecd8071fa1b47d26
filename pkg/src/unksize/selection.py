"""Choosing the number of support points by BIC."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .ecm import EcmConfig, ecm_fit
from .errors import OptimizationError
from .links import LOGIT, LinkSpec
from .model import Dataset, FitResult, MixingDistribution, Theta, n_parameters

log = logging.getLogger(__name__)

DEFAULT_K_MAX = 8


def bic(fit: FitResult, r: int | None = None, rho: int | None = None) -> float:
    """``-2 loglik + log(r) (2K - 1 + rho)`` using the fit's final K."""
    r = fit.r if r is None else r
    rho = fit.theta.beta.size if rho is None else rho
    return -2.0 * fit.loglik + math.log(r) * n_parameters(fit.K, rho)


@dataclass(frozen=True)
class SelectionResult:
    """Fits for K = 1..K_max and the BIC minimizer.

    ``per_K`` holds ``(K, fit, bic)`` triples; ``fit`` is None and ``bic``
    is ``inf`` where every start failed for that K.
    """

    per_K: tuple[tuple[int, FitResult | None, float], ...]
    chosen_K: int
    chosen_fit: FitResult

    def table(self) -> list[dict]:
        rows = []
        for K, fit, b in self.per_K:
            rows.append({
                "K": K,
                "bic": b,
                "loglik": None if fit is None else fit.loglik,
                "alphas": None if fit is None else fit.mixing.alphas.tolist(),
                "lambdas": None if fit is None else fit.mixing.lambdas.tolist(),
                "chosen": K == self.chosen_K,
            })
        return rows


def split_largest(theta: Theta, spread: float = 0.1) -> Theta:
    """Warm start for K+1: the heaviest component split at ``lambda (1 +- spread)``."""
    a = theta.mixing.alphas.copy()
    lam = theta.mixing.lambdas.copy()
    j = int(np.argmax(a))
    new_a = np.concatenate([np.delete(a, j), [a[j] / 2, a[j] / 2]])
    new_lam = np.concatenate([np.delete(lam, j), [lam[j] * (1 - spread), lam[j] * (1 + spread)]])
    return Theta(theta.beta, MixingDistribution(new_a, new_lam))


def select_K(data: Dataset, link: LinkSpec = LOGIT, config: EcmConfig | None = None,
             K_max: int = DEFAULT_K_MAX) -> SelectionResult:
    """Fit every K in ``1..K_max`` and keep the one with the smallest BIC.

    Each K > 1 also starts from the previous solution with its heaviest
    component split in two. BICs within ``config.tie_tol`` count as tied and
    go to the fit with fewer effective components; ``chosen_K`` reports that
    effective count.
    """
    if K_max < 1:
        raise ValueError("K_max must be >= 1")
    config = config or EcmConfig()
    per_K = []
    previous: FitResult | None = None
    for K in range(1, K_max + 1):
        extra = ()
        if previous is not None and previous.K == K - 1:
            extra = (split_largest(previous.theta),)
        try:
            fit = ecm_fit(data, K, link, config, extra_starts=extra)
        except OptimizationError as exc:
            log.warning("K=%d: all starts failed (%s)", K, exc)
            per_K.append((K, None, math.inf))
            continue
        per_K.append((K, fit, bic(fit, data.r, data.rho)))
        previous = fit
    ok = [(K, f, b) for K, f, b in per_K if f is not None]
    if not ok:
        raise OptimizationError("no K could be fitted")
    # BICs within tie_tol are equal up to convergence noise; prefer fewer
    # effective components (a pruned K+1 fit can land on the K solution).
    best = min(b for _, _, b in ok)
    tied = [t for t in ok if t[2] <= best + config.tie_tol]
    _, chosen_fit, _ = min(tied, key=lambda t: (t[1].K, t[0]))
    return SelectionResult(tuple(per_K), chosen_fit.K, chosen_fit)

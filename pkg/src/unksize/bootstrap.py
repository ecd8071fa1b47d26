"""Bootstrap percentile intervals for the regression coefficients.

Two resampling schemes are offered. ``parametric`` keeps the design fixed
and redraws every response from the fitted model; ``pairs`` resamples
(y, x) rows with replacement, which suits random designs.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .ecm import EcmConfig, fit_from_starts, jittered_starts
from .errors import InferenceUnreliableError, OptimizationError
from .links import LOGIT, LinkSpec
from .model import Dataset, FitResult
from .simulate import draw_responses

MODES = ("parametric", "pairs")


@dataclass(frozen=True)
class BootstrapConfig:
    n_resamples: int = 200
    level: float = 0.95
    mode: str = "parametric"
    seed: int = 0
    n_jitter: int = 3
    max_failure_fraction: float = 0.2
    n_jobs: int = 1
    # False reuses the master seed for every replicate (all resamples identical).
    independent_streams: bool = True

    def __post_init__(self):
        if self.n_resamples < 2:
            raise ValueError("n_resamples must be >= 2")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    """Successful replicate estimates (one row each) and their summaries."""

    replicate_betas: NDArray
    se: NDArray
    ci: NDArray
    n_failed: int
    n_resamples: int
    level: float

    @classmethod
    def from_replicates(cls, betas: NDArray, n_failed: int, n_resamples: int,
                        level: float) -> BootstrapResult:
        betas = np.atleast_2d(betas)
        se = betas.std(axis=0, ddof=1) if betas.shape[0] > 1 else np.zeros(betas.shape[1])
        ci = np.quantile(betas, [(1 - level) / 2, (1 + level) / 2], axis=0, method="linear").T
        return cls(betas, se, ci, n_failed, n_resamples, level)


def parametric_resample(data: Dataset, fit: FitResult, link: LinkSpec,
                        rng: np.random.Generator) -> Dataset:
    """Same design; each response redrawn with ``lambda_i ~ G-hat``."""
    y = draw_responses(data.X, fit.beta, fit.mixing, link, rng)
    return data.with_responses(y)


def pairs_resample(data: Dataset, rng: np.random.Generator) -> Dataset:
    idx = rng.integers(0, data.r, size=data.r)
    return data.subset(idx)


def _replicate(args):
    data, fit, link, config, ecm_config, seed_seq, index = args
    rng = np.random.default_rng(seed_seq)
    if config.mode == "parametric":
        sample = parametric_resample(data, fit, link, rng)
    else:
        sample = pairs_resample(data, rng)
    starts = [fit.theta] + jittered_starts(
        fit.theta, config.n_jitter, [config.seed, index, 1], ecm_config
    )
    try:
        refit = fit_from_starts(sample, starts, link, ecm_config)
    except OptimizationError:
        return None
    return refit.beta if refit.converged else None


def bootstrap_ci(data: Dataset, fit: FitResult, link: LinkSpec = LOGIT,
                 config: BootstrapConfig | None = None,
                 ecm_config: EcmConfig | None = None) -> BootstrapResult:
    """Bootstrap standard errors and percentile intervals for beta.

    Every replicate is refitted with K fixed at ``fit.K``, starting from the
    full-data estimate plus ``n_jitter`` perturbations of it. Replicates
    that fail to converge are dropped and counted; if more than
    ``max_failure_fraction`` fail, :class:`InferenceUnreliableError` is
    raised with the partial result attached.
    """
    config = config or BootstrapConfig()
    ecm_config = ecm_config or EcmConfig()
    n = config.n_resamples
    master = np.random.SeedSequence(config.seed)
    seeds = master.spawn(n) if config.independent_streams else [np.random.SeedSequence(config.seed)] * n
    jobs = [(data, fit, link, config, ecm_config, seeds[i], i) for i in range(n)]
    if config.n_jobs == 1:
        results = [_replicate(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            results = list(pool.map(_replicate, jobs, chunksize=4))
    ok = [b for b in results if b is not None]
    n_failed = n - len(ok)
    if len(ok) < 2:
        raise InferenceUnreliableError(f"{n_failed} of {n} bootstrap replicates failed")
    result = BootstrapResult.from_replicates(np.vstack(ok), n_failed, n, config.level)
    if n_failed > config.max_failure_fraction * n:
        raise InferenceUnreliableError(
            f"{n_failed} of {n} bootstrap replicates failed", partial=result
        )
    return result

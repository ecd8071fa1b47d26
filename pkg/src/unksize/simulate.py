"""Synthetic data from the Poisson-mixture size model and Monte Carlo studies."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .ecm import EcmConfig, ecm_fit
from .errors import OptimizationError
from .links import LOGIT, LinkSpec
from .model import Dataset, MixingDistribution

# Table of the 2^3 factorial design: setting -> (slope, weights, support points).
STUDY_SETTINGS: dict[int, tuple[float, tuple[float, float], tuple[float, float]]] = {
    1: (1.0, (0.5, 0.5), (100.0, 300.0)),
    2: (1.0, (0.25, 0.75), (100.0, 300.0)),
    3: (1.0, (0.5, 0.5), (450.0, 650.0)),
    4: (1.0, (0.25, 0.75), (450.0, 650.0)),
    5: (2.0, (0.5, 0.5), (100.0, 300.0)),
    6: (2.0, (0.25, 0.75), (100.0, 300.0)),
    7: (2.0, (0.5, 0.5), (450.0, 650.0)),
    8: (2.0, (0.25, 0.75), (450.0, 650.0)),
}


def draw_responses(X: NDArray, beta: ArrayLike, mixing: MixingDistribution,
                   link: LinkSpec, rng: np.random.Generator) -> NDArray:
    """One count per design row: pick ``lambda`` from ``mixing``, then Poisson."""
    h = link.evaluate(X, beta)
    comp = rng.choice(mixing.K, size=h.size, p=mixing.alphas)
    return rng.poisson(mixing.lambdas[comp] * h)


@dataclass(frozen=True, eq=False)
class SimDesign:
    """Design points (rows of covariates) each repeated ``replications`` times."""

    design_points: NDArray
    replications: NDArray
    beta: NDArray
    mixing: MixingDistribution
    n_samples: int = 800
    seed: int = 0
    column_names: tuple[str, ...] = ()

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.design_points, dtype=float))
        reps = np.broadcast_to(np.asarray(self.replications, dtype=int), (pts.shape[0],)).copy()
        if np.any(reps < 1):
            raise ValueError("replication counts must be >= 1")
        beta = np.asarray(self.beta, dtype=float)
        if beta.size != pts.shape[1]:
            raise ValueError("beta length must match the design columns")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        object.__setattr__(self, "design_points", pts)
        object.__setattr__(self, "replications", reps)
        object.__setattr__(self, "beta", beta)

    @property
    def X(self) -> NDArray:
        return np.repeat(self.design_points, self.replications, axis=0)

    @property
    def r(self) -> int:
        return int(self.replications.sum())


def study_design(setting: int, n_samples: int = 800, seed: int = 0) -> SimDesign:
    """One cell of the factorial study: intercept 1, x = -5..5 with 10 replicates each."""
    slope, alphas, lambdas = STUDY_SETTINGS[setting]
    x = np.arange(-5, 6, dtype=float)
    pts = np.column_stack([np.ones_like(x), x])
    return SimDesign(pts, np.full(x.size, 10), np.array([1.0, slope]),
                     MixingDistribution(alphas, lambdas), n_samples, seed,
                     column_names=("intercept", "x"))


def generate_dataset(design: SimDesign, rng: np.random.Generator,
                     link: LinkSpec = LOGIT) -> Dataset:
    X = design.X
    y = draw_responses(X, design.beta, design.mixing, link, rng)
    return Dataset(y, X, design.column_names)


@dataclass(frozen=True, eq=False)
class SimSummary:
    """Per-coefficient bias, sd, mse and central 95% quantile interval."""

    truth: NDArray
    estimates: NDArray
    bias: NDArray
    sd: NDArray
    mse: NDArray
    qi: NDArray
    n_failed: int
    column_names: tuple[str, ...] = ()
    qi_level: float = 0.95

    @classmethod
    def from_estimates(cls, estimates: NDArray, truth: NDArray, n_failed: int = 0,
                       column_names=(), level: float = 0.95) -> SimSummary:
        est = np.atleast_2d(np.asarray(estimates, dtype=float))
        truth = np.asarray(truth, dtype=float)
        dev = est - truth
        q = np.quantile(est, [(1 - level) / 2, (1 + level) / 2], axis=0).T
        sd = est.std(axis=0, ddof=1) if est.shape[0] > 1 else np.zeros(truth.size)
        return cls(truth, est, dev.mean(axis=0), sd, np.mean(dev**2, axis=0), q,
                   n_failed, tuple(column_names), level)

    @property
    def n_ok(self) -> int:
        return self.estimates.shape[0]

    def as_dict(self) -> dict:
        names = self.column_names or tuple(f"beta{k}" for k in range(self.truth.size))
        return {
            "n_ok": self.n_ok,
            "n_failed": self.n_failed,
            "coefficients": {
                name: {
                    "true": float(self.truth[k]),
                    "bias": float(self.bias[k]),
                    "sd": float(self.sd[k]),
                    "qi": [float(self.qi[k, 0]), float(self.qi[k, 1])],
                    "mse": float(self.mse[k]),
                }
                for k, name in enumerate(names)
            },
        }


def _study_replicate(args):
    design, link, config, fit_K, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    data = generate_dataset(design, rng, link)
    try:
        fit = ecm_fit(data, fit_K, link, config)
    except OptimizationError:
        return None
    return fit.beta if fit.converged else None


def run_study(design: SimDesign, link: LinkSpec = LOGIT, ecm_config: EcmConfig | None = None,
              fit_K: int | None = None, n_jobs: int = 1) -> SimSummary:
    """Generate ``design.n_samples`` datasets, fit each with K fixed, summarize.

    Dataset ``i`` is drawn from its own stream spawned off ``design.seed``,
    so results do not depend on ``n_jobs``.
    """
    config = ecm_config or EcmConfig()
    fit_K = design.mixing.K if fit_K is None else fit_K
    seeds = np.random.SeedSequence(design.seed).spawn(design.n_samples)
    jobs = [(design, link, config, fit_K, s) for s in seeds]
    if n_jobs == 1:
        results = [_study_replicate(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_study_replicate, jobs, chunksize=8))
    ok = [b for b in results if b is not None]
    if not ok:
        raise OptimizationError("every simulated dataset failed to fit")
    return SimSummary.from_estimates(np.vstack(ok), design.beta,
                                     n_failed=len(results) - len(ok),
                                     column_names=design.column_names)

"""Domain types and likelihood evaluation for the Poisson-mixture size model.

Each count ``y_i`` is Poisson with mean ``lambda_i * h(x_i; beta)`` where the
latent Poisson mean ``lambda_i`` of the unknown size is drawn from a discrete
mixing distribution ``G = sum_j alpha_j delta(lambda_j)``. Everything is
evaluated in the log domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import gammaln, logsumexp

from .errors import DomainError, ValidationError
from .links import LOGIT, LinkSpec


def _frozen(a: NDArray) -> NDArray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Observation:
    y: int
    x: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class Dataset:
    """``r`` count responses ``y`` with an explicit ``(r, rho)`` design ``X``.

    No intercept column is added implicitly.
    """

    y: NDArray[np.int64]
    X: NDArray[np.float64]
    column_names: tuple[str, ...] = ()

    def __post_init__(self):
        y = np.asarray(self.y)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if y.ndim != 1 or y.size == 0:
            raise ValidationError("y must be a non-empty 1-d array")
        if not np.all(np.isfinite(y)) or np.any(y < 0) or np.any(y != np.round(y)):
            raise ValidationError("y must hold nonnegative integer counts")
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ValidationError(
                f"X must be 2-d with {y.size} rows, got shape {X.shape}"
            )
        if not np.all(np.isfinite(X)):
            raise ValidationError("covariates must be finite")
        names = tuple(self.column_names) or tuple(f"x{k}" for k in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValidationError("column_names length does not match X")
        object.__setattr__(self, "y", _frozen(y.astype(np.int64)))
        object.__setattr__(self, "X", _frozen(np.ascontiguousarray(X)))
        object.__setattr__(self, "column_names", names)

    @classmethod
    def from_observations(cls, observations: Iterable[Observation], column_names=()):
        obs = list(observations)
        if not obs:
            raise ValidationError("dataset needs at least one observation")
        rho = len(obs[0].x)
        if any(len(o.x) != rho for o in obs):
            raise ValidationError("all observations must share the covariate length")
        return cls(
            np.array([o.y for o in obs]),
            np.array([o.x for o in obs], dtype=float).reshape(len(obs), rho),
            column_names,
        )

    @property
    def r(self) -> int:
        return self.y.size

    @property
    def rho(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.r

    def __getitem__(self, i: int) -> Observation:
        return Observation(int(self.y[i]), tuple(float(v) for v in self.X[i]))

    @property
    def observations(self) -> list[Observation]:
        return [self[i] for i in range(self.r)]

    def subset(self, index: ArrayLike) -> Dataset:
        index = np.asarray(index)
        return Dataset(self.y[index], self.X[index], self.column_names)

    def with_responses(self, y: ArrayLike) -> Dataset:
        return Dataset(np.asarray(y), self.X, self.column_names)


@dataclass(frozen=True, eq=False)
class MixingDistribution:
    """Discrete ``G`` with weights ``alphas`` at support points ``lambdas``.

    Components are stored sorted by support point (ties by weight), so two
    labelings of the same distribution compare equal.
    """

    alphas: NDArray[np.float64]
    lambdas: NDArray[np.float64]

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alphas, dtype=float))
        lam = np.atleast_1d(np.asarray(self.lambdas, dtype=float))
        if a.ndim != 1 or a.shape != lam.shape or a.size == 0:
            raise DomainError("alphas and lambdas must be non-empty vectors of equal length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(lam))):
            raise DomainError("mixing parameters must be finite")
        if np.any(a < 0):
            raise DomainError("mixing weights must be nonnegative")
        if np.any(lam <= 0):
            raise DomainError("support points must be positive")
        total = a.sum()
        if abs(total - 1.0) > 1e-6:
            raise DomainError(f"mixing weights sum to {total}, not 1")
        order = np.lexsort((a, lam))
        a = a[order] / total
        object.__setattr__(self, "alphas", _frozen(a))
        object.__setattr__(self, "lambdas", _frozen(lam[order].copy()))

    @property
    def K(self) -> int:
        return self.alphas.size

    @property
    def mean(self) -> float:
        return float(self.alphas @ self.lambdas)

    def __eq__(self, other):
        if not isinstance(other, MixingDistribution):
            return NotImplemented
        return np.array_equal(self.alphas, other.alphas) and np.array_equal(
            self.lambdas, other.lambdas
        )

    def __repr__(self):
        terms = " + ".join(f"{a:.4g}*delta({l:.4g})" for a, l in zip(self.alphas, self.lambdas))
        return f"MixingDistribution({terms})"


@dataclass(frozen=True, eq=False)
class Theta:
    beta: NDArray[np.float64]
    mixing: MixingDistribution

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.beta, dtype=float)).copy()
        if b.ndim != 1 or not np.all(np.isfinite(b)):
            raise DomainError("beta must be a finite vector")
        if not isinstance(self.mixing, MixingDistribution):
            raise DomainError("mixing must be a MixingDistribution")
        object.__setattr__(self, "beta", _frozen(b))

    @classmethod
    def from_arrays(cls, beta: ArrayLike, alphas: ArrayLike, lambdas: ArrayLike) -> Theta:
        return cls(np.asarray(beta, dtype=float), MixingDistribution(alphas, lambdas))

    @property
    def K(self) -> int:
        return self.mixing.K

    def __eq__(self, other):
        if not isinstance(other, Theta):
            return NotImplemented
        return np.array_equal(self.beta, other.beta) and self.mixing == other.mixing


def n_parameters(K: int, rho: int) -> int:
    """Free parameters: K-1 weights, K support points, rho coefficients."""
    return 2 * K - 1 + rho


def bic_value(loglik: float, r: int, K: int, rho: int) -> float:
    return -2.0 * loglik + math.log(r) * n_parameters(K, rho)


@dataclass(frozen=True, eq=False)
class FitResult:
    """Outcome of one ECM fit.

    ``events`` records structural changes made during fitting (pruned or
    merged components) as ``(iteration, description)`` pairs; ``warnings``
    holds advisory messages such as a request for more components than
    distinct counts.
    """

    theta: Theta
    loglik: float
    r: int
    iterations: int
    converged: bool
    loglik_trace: tuple[float, ...]
    link: str = "logit"
    events: tuple[tuple[int, str], ...] = ()
    warnings: tuple[str, ...] = ()
    start_index: int = 0
    bic: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "loglik_trace", tuple(float(v) for v in self.loglik_trace))
        object.__setattr__(
            self, "bic", bic_value(self.loglik, self.r, self.theta.K, self.theta.beta.size)
        )

    @property
    def K(self) -> int:
        return self.theta.K

    @property
    def beta(self) -> NDArray:
        return self.theta.beta

    @property
    def mixing(self) -> MixingDistribution:
        return self.theta.mixing


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

def poisson_log_pmf(y: ArrayLike, mean: ArrayLike) -> NDArray | float:
    """``y log(mean) - mean - log(y!)``, elementwise."""
    y_arr = np.asarray(y)
    m = np.asarray(mean, dtype=float)
    if np.any(~np.isfinite(m)) or np.any(m <= 0):
        raise DomainError("Poisson mean must be positive and finite")
    if np.any(y_arr < 0) or np.any(y_arr != np.floor(y_arr)):
        raise DomainError("Poisson count must be a nonnegative integer")
    y_f = y_arr.astype(float)
    out = y_f * np.log(m) - m - gammaln(y_f + 1.0)
    return float(out) if out.ndim == 0 else out


def component_log_density(
    obs: Observation, beta: ArrayLike, lam: float, link: LinkSpec = LOGIT
) -> float:
    if not (np.isfinite(lam) and lam > 0):
        raise DomainError("support point must be positive")
    h = float(link.evaluate(np.asarray(obs.x, dtype=float), beta))
    return poisson_log_pmf(obs.y, lam * h)


def component_log_matrix(
    y: NDArray, h: NDArray, alphas: NDArray, lambdas: NDArray
) -> NDArray:
    """``log alpha_j + log f(y_i; lambda_j h_i)`` as an ``(r, K)`` array."""
    yf = y.astype(float)
    with np.errstate(divide="ignore"):
        log_a = np.log(alphas)
    return (
        log_a[None, :]
        + yf[:, None] * np.log(lambdas[None, :] * h[:, None])
        - lambdas[None, :] * h[:, None]
        - gammaln(yf + 1.0)[:, None]
    )


def mixture_log_density(obs: Observation, theta: Theta, link: LinkSpec = LOGIT) -> float:
    h = np.atleast_1d(link.evaluate(np.asarray(obs.x, dtype=float), theta.beta))
    lp = component_log_matrix(
        np.array([obs.y]), h, theta.mixing.alphas, theta.mixing.lambdas
    )
    return float(logsumexp(lp[0]))


def log_likelihood(data: Dataset, theta: Theta, link: LinkSpec = LOGIT) -> float:
    if theta.beta.size != data.rho:
        raise DomainError(f"beta has length {theta.beta.size}, data has rho={data.rho}")
    from .kernels import estep

    h = link.evaluate(data.X, theta.beta)
    _, ll = estep(data.y, h, theta.mixing.alphas, theta.mixing.lambdas)
    return ll


def fitted_means(data: Dataset, theta: Theta, link: LinkSpec = LOGIT) -> NDArray:
    """Marginal mean ``E[y_i] = (sum_j alpha_j lambda_j) h(x_i; beta)``."""
    return theta.mixing.mean * link.evaluate(data.X, theta.beta)


def group_means(data: Dataset) -> NDArray:
    """Mean response among observations that share a design row."""
    _, inverse = np.unique(data.X, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    sums = np.bincount(inverse, weights=data.y.astype(float))
    counts = np.bincount(inverse)
    return (sums / counts)[inverse]


def distinct_counts(y: Sequence[int]) -> int:
    return int(np.unique(np.asarray(y)).size)

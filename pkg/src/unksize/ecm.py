"""Expectation conditional maximization for the Poisson-mixture size model.

One outer iteration runs an E-step (component responsibilities), then three
conditional maximizations in sequence: mixing weights in closed form,
support points in closed form given the current coefficients, and finally
the regression coefficients by a safeguarded Newton-Raphson ascent on the
beta/lambda part of the expected complete-data log-likelihood (``T2``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import kernels
from .errors import DegenerateComponentError, DomainError, OptimizationError
from .links import LOGIT, IndexLink, LinkSpec
from .model import Dataset, FitResult, MixingDistribution, Theta, distinct_counts

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EcmConfig:
    """Tuning knobs for :func:`ecm_fit`.

    ``tie_tol`` is the log-likelihood band within which fits from different
    starts count as equally good; the earliest start in the band wins.
    """

    max_outer_iterations: int = 5000
    loglik_rel_tol: float = 1e-9
    newton_max_iterations: int = 50
    newton_grad_tol: float = 1e-8
    n_starts: int = 10
    seed: int = 0
    min_weight: float = 1e-6
    merge_tol: float = 1e-4
    tie_tol: float = 1e-4
    jitter_lambda_sd: float = 0.3
    jitter_beta_sd: float = 0.1

    def __post_init__(self):
        for name in ("max_outer_iterations", "newton_max_iterations", "n_starts"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("loglik_rel_tol", "newton_grad_tol", "min_weight", "merge_tol", "tie_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


# ---------------------------------------------------------------------------
# E-step and closed-form CM-steps
# ---------------------------------------------------------------------------

def _check_responsibilities(pi: ArrayLike) -> NDArray:
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 2:
        raise DomainError("responsibilities must be an (r, K) matrix")
    if np.any(pi < 0) or np.any(pi > 1) or not np.allclose(pi.sum(axis=1), 1.0, atol=1e-8):
        raise DomainError("responsibility rows must be probability vectors")
    return pi


def e_step(data: Dataset, theta: Theta, link: LinkSpec = LOGIT) -> NDArray:
    """Posterior component probabilities, one row per observation."""
    h = link.evaluate(data.X, theta.beta)
    pi, _ = kernels.estep(data.y, h, theta.mixing.alphas, theta.mixing.lambdas)
    return pi


def cm_alpha(pi: ArrayLike) -> NDArray:
    pi = _check_responsibilities(pi)
    a = pi.mean(axis=0)
    return a / a.sum()


def _lambda_update(pi: NDArray, y: NDArray, h: NDArray) -> tuple[NDArray, NDArray]:
    num = pi.T @ y.astype(float)
    den = pi.T @ h
    bad = (num <= 0) | (den <= 0) | ~np.isfinite(num) | ~np.isfinite(den)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(bad, 0.0, num / np.where(den > 0, den, 1.0))
    return lam, bad


def cm_lambda(pi: ArrayLike, data: Dataset, beta: ArrayLike, link: LinkSpec = LOGIT) -> NDArray:
    """Support points maximizing T2 with the coefficients held at ``beta``.

    Raises :class:`DegenerateComponentError` for components whose update is
    not strictly positive (no responsibility mass on positive counts).
    """
    pi = _check_responsibilities(pi)
    lam, bad = _lambda_update(pi, data.y, link.evaluate(data.X, beta))
    if bad.any():
        idx = [int(j) for j in np.flatnonzero(bad)]
        raise DegenerateComponentError(f"components {idx} have no positive support", idx)
    return lam


# ---------------------------------------------------------------------------
# T2 and its derivatives in beta
# ---------------------------------------------------------------------------

def _t2_constant(pi: NDArray, y: NDArray, lambdas: NDArray) -> float:
    return float(y.astype(float) @ (pi @ np.log(lambdas)))


def _t2_derivs(beta, X, y, lam_bar, link: LinkSpec):
    """Gradient and Hessian of T2 in beta given per-observation mean support."""
    if isinstance(link, IndexLink):
        h, d1, d2 = link.derivatives(X @ beta)
        return kernels.index_newton_terms(X, y, h, d1, d2, lam_bar)
    h = link.evaluate(X, beta)
    dh = link.gradient(X, beta)
    d2h = link.hessian(X, beta)
    yf = y.astype(float)
    resid = yf / h - lam_bar
    grad = dh.T @ resid
    hess = np.einsum("i,ijk->jk", resid, d2h) - (dh * (yf / h**2)[:, None]).T @ dh
    return grad, hess


def t2_objective(beta, pi, data: Dataset, lambdas, link: LinkSpec = LOGIT) -> float:
    """``sum_ij pi_ij {y_i log lambda_j + y_i log h_i - lambda_j h_i}``."""
    pi = _check_responsibilities(pi)
    lambdas = np.asarray(lambdas, dtype=float)
    beta = np.asarray(beta, dtype=float)
    h = link.evaluate(data.X, beta)
    return _t2_constant(pi, data.y, lambdas) + kernels.t2_beta_part(data.y, h, pi @ lambdas)


def t2_gradient(beta, pi, data: Dataset, lambdas, link: LinkSpec = LOGIT) -> NDArray:
    pi = _check_responsibilities(pi)
    lam_bar = pi @ np.asarray(lambdas, dtype=float)
    return _t2_derivs(np.asarray(beta, dtype=float), data.X, data.y, lam_bar, link)[0]


def t2_hessian(beta, pi, data: Dataset, lambdas, link: LinkSpec = LOGIT) -> NDArray:
    pi = _check_responsibilities(pi)
    lam_bar = pi @ np.asarray(lambdas, dtype=float)
    return _t2_derivs(np.asarray(beta, dtype=float), data.X, data.y, lam_bar, link)[1]


# ---------------------------------------------------------------------------
# Newton-Raphson CM-step for beta
# ---------------------------------------------------------------------------

def _ascent_direction(H: NDArray, g: NDArray, mu0: float = 0.0) -> tuple[NDArray, float]:
    """Solve ``(mu I - H) d = g`` with ``mu`` grown until ``mu I - H`` is PD."""
    p = g.size
    scale = max(1.0, float(np.max(np.abs(np.diag(H)))))
    mu = mu0
    A = -H
    for _ in range(200):
        try:
            L = np.linalg.cholesky(A + mu * np.eye(p))
        except np.linalg.LinAlgError:
            mu = max(2.0 * mu, 1e-10 * scale)
            continue
        z = np.linalg.solve(L, g)
        return np.linalg.solve(L.T, z), mu
    raise OptimizationError("could not regularize the T2 Hessian")


def _newton_beta(beta, X, y, lam_bar, link: LinkSpec, config: EcmConfig):
    """Safeguarded Newton ascent on T2; returns ``(beta, n_steps, trace)``."""

    def value(b):
        return kernels.t2_beta_part(y, link.evaluate(X, b), lam_bar)

    beta = np.array(beta, dtype=float)
    f0 = value(beta)
    trace = [f0]
    if not np.isfinite(f0):
        raise OptimizationError("T2 is not finite at the starting coefficients", trace)
    steps = 0
    for steps in range(1, config.newton_max_iterations + 1):
        g, H = _t2_derivs(beta, X, y, lam_bar, link)
        if not np.all(np.isfinite(g)) or not np.all(np.isfinite(H)):
            raise OptimizationError("non-finite T2 derivatives", trace)
        if np.max(np.abs(g)) < config.newton_grad_tol:
            steps -= 1
            break
        mu = 0.0
        accepted = False
        saw_finite = False
        for _ in range(4):
            d, mu = _ascent_direction(H, g, mu)
            s = 1.0
            for _ in range(31):
                cand = beta + s * d
                fc = value(cand)
                if np.isfinite(fc):
                    saw_finite = True
                    if fc >= f0:
                        accepted = True
                        break
                s *= 0.5
            if accepted:
                break
            # Halving failed; lean harder towards steepest ascent.
            mu = max(10.0 * mu, 1e-6 * max(1.0, float(np.max(np.abs(np.diag(H))))))
        if not accepted:
            if not saw_finite:
                raise OptimizationError("T2 not finite at any trial step", trace)
            break
        moved = np.max(np.abs(cand - beta)) > 1e-15 * (1.0 + np.max(np.abs(beta)))
        beta, gain, f0 = cand, fc - f0, fc
        trace.append(f0)
        if not moved or gain == 0.0:
            break
    return beta, steps, trace


def cm_beta(beta_init, pi, data: Dataset, lambdas, link: LinkSpec = LOGIT,
            config: EcmConfig | None = None) -> NDArray:
    """Coefficients maximizing T2 for fixed responsibilities and support points.

    Never returns a point with lower T2 than ``beta_init``.
    """
    config = config or EcmConfig()
    pi = _check_responsibilities(pi)
    lam_bar = pi @ np.asarray(lambdas, dtype=float)
    beta, _, _ = _newton_beta(beta_init, data.X, data.y, lam_bar, link, config)
    return beta


# ---------------------------------------------------------------------------
# starting values
# ---------------------------------------------------------------------------

def quantile_support(data: Dataset, beta: NDArray, K: int, link: LinkSpec) -> NDArray:
    """Support points at the ``(j - 1/2)/K`` quantiles of ``y / h(x; beta)``."""
    ratio = data.y / link.evaluate(data.X, beta)
    lam = np.quantile(ratio, (np.arange(K) + 0.5) / K)
    floor = max(1e-3, 0.1 * float(np.mean(ratio)))
    lam = np.maximum(lam, floor)
    for j in range(1, K):
        if lam[j] <= lam[j - 1] * (1 + 1e-3):
            lam[j] = lam[j - 1] * 1.1
    return lam


def poisson_start_beta(data: Dataset, link: LinkSpec = LOGIT, iterations: int = 25) -> NDArray:
    """Coefficients from a log-linear Poisson regression, mapped onto ``h``.

    Fitted Poisson means are rescaled so their average sits at ``h = 1/2``
    and then regressed on the design through the link.
    """
    X = data.X
    yf = data.y.astype(float)
    mu = np.full(yf.size, max(yf.mean(), 0.5))
    gamma = np.linalg.lstsq(X, np.log(mu), rcond=None)[0]
    for _ in range(iterations):
        eta = np.clip(X @ gamma, -30, 30)
        mu = np.exp(eta)
        z = eta + (yf - mu) / mu
        w = mu
        gamma_new = np.linalg.lstsq(X * np.sqrt(w)[:, None], z * np.sqrt(w), rcond=None)[0]
        if np.max(np.abs(gamma_new - gamma)) < 1e-10:
            gamma = gamma_new
            break
        gamma = gamma_new
    mu = np.exp(np.clip(X @ gamma, -30, 30))
    p = np.clip(mu / (2.0 * mu.mean()), 0.02, 0.98)
    target = _inverse_link(p, link)
    return np.linalg.lstsq(X, target, rcond=None)[0]


def _inverse_link(p: NDArray, link: LinkSpec) -> NDArray:
    if link.kind == "probit":
        from scipy.special import ndtri

        return ndtri(p)
    return np.log(p / (1 - p))


def default_starts(data: Dataset, K: int, link: LinkSpec = LOGIT,
                   config: EcmConfig | None = None,
                   extra: Sequence[Theta] = ()) -> list[Theta]:
    """Deterministic list of starting points for a K-component fit.

    Order matters: ties between equally good fits go to the earlier start.
    The first start puts every linear predictor at zero (``h = 1/2`` for
    symmetric links) with quantile support points and uniform weights;
    then any caller-supplied ``extra`` starts; then a start from a Poisson
    regression; the rest are seeded lognormal/normal jitters of the first.
    """
    config = config or EcmConfig()
    beta0 = np.zeros(data.rho)
    lam0 = quantile_support(data, beta0, K, link)
    alpha0 = np.full(K, 1.0 / K)
    starts = [Theta(beta0, MixingDistribution(alpha0, lam0))]
    starts.extend(extra)
    if len(starts) < config.n_starts:
        try:
            bp = poisson_start_beta(data, link)
            starts.append(Theta(bp, MixingDistribution(alpha0, quantile_support(data, bp, K, link))))
        except (np.linalg.LinAlgError, DomainError, FloatingPointError):
            pass
    n_jitter = config.n_starts - len(starts)
    if n_jitter > 0:
        seeds = np.random.SeedSequence([config.seed, K]).spawn(n_jitter)
        for ss in seeds:
            rng = np.random.default_rng(ss)
            lam = lam0 * np.exp(rng.normal(0.0, config.jitter_lambda_sd, K))
            b = beta0 + rng.normal(0.0, config.jitter_beta_sd, data.rho)
            starts.append(Theta(b, MixingDistribution(alpha0, lam)))
    return starts[: max(config.n_starts, 1 + len(extra))]


def jittered_starts(theta: Theta, n: int, seed, config: EcmConfig | None = None) -> list[Theta]:
    """``n`` seeded perturbations of ``theta`` (support points lognormal, beta normal)."""
    config = config or EcmConfig()
    out = []
    for ss in np.random.SeedSequence(seed).spawn(n):
        rng = np.random.default_rng(ss)
        K = theta.K
        lam = theta.mixing.lambdas * np.exp(rng.normal(0.0, config.jitter_lambda_sd, K))
        b = theta.beta + rng.normal(0.0, config.jitter_beta_sd, theta.beta.size)
        a = theta.mixing.alphas
        a = np.where(a > 0, a, 1.0 / K)
        out.append(Theta(b, MixingDistribution(a / a.sum(), lam)))
    return out


# ---------------------------------------------------------------------------
# the ECM loop
# ---------------------------------------------------------------------------

def _merge_close(alphas: NDArray, lambdas: NDArray, tol: float):
    order = np.argsort(lambdas, kind="stable")
    a, lam = list(alphas[order]), list(lambdas[order])
    j = 0
    merged = 0
    while j < len(lam) - 1:
        if (lam[j + 1] - lam[j]) / lam[j] < tol:
            w = a[j] + a[j + 1]
            lam[j] = (a[j] * lam[j] + a[j + 1] * lam[j + 1]) / w if w > 0 else lam[j]
            a[j] = w
            del a[j + 1], lam[j + 1]
            merged += 1
        else:
            j += 1
    return np.array(a), np.array(lam), merged


def _run_ecm(data: Dataset, start: Theta, link: LinkSpec, config: EcmConfig,
             lgy: NDArray, start_index: int = 0) -> FitResult:
    X, y = data.X, data.y
    beta = np.array(start.beta, dtype=float)
    if beta.size != data.rho:
        raise DomainError(f"start has {beta.size} coefficients, data has rho={data.rho}")
    alphas = np.array(start.mixing.alphas, dtype=float)
    lambdas = np.array(start.mixing.lambdas, dtype=float)
    trace: list[float] = []
    events: list[tuple[int, str]] = []
    converged = False
    prev = None
    evaluated = False
    for it in range(config.max_outer_iterations + 1):
        h = link.evaluate(X, beta)
        pi, ll = kernels.estep(y, h, alphas, lambdas, lgy)
        if not np.isfinite(ll):
            raise OptimizationError("log-likelihood became non-finite", trace)
        trace.append(ll)
        evaluated = True
        if prev is not None and abs(ll - prev) / (abs(ll) + 1.0) < config.loglik_rel_tol:
            converged = True
            break
        if it == config.max_outer_iterations:
            break
        prev = ll
        new_alphas = pi.mean(axis=0)
        new_lambdas, bad = _lambda_update(pi, y, h)
        drop = bad | (new_alphas < config.min_weight)
        if drop.any():
            keep = ~drop
            if not keep.any():
                raise OptimizationError("every mixture component degenerated", trace)
            events.append((it, f"pruned {int(drop.sum())} component(s) at lambda={lambdas[drop].round(6).tolist()}"))
            alphas = alphas[keep] / alphas[keep].sum()
            lambdas = lambdas[keep]
            prev = None
            continue
        alphas = new_alphas / new_alphas.sum()
        lambdas = new_lambdas
        beta, _, _ = _newton_beta(beta, X, y, pi @ lambdas, link, config)
        evaluated = False
    if not evaluated:
        h = link.evaluate(X, beta)
        _, ll = kernels.estep(y, h, alphas, lambdas, lgy)
        trace.append(ll)
    loglik = trace[-1]
    a2, l2, merged = _merge_close(alphas, lambdas, config.merge_tol)
    if merged:
        events.append((len(trace) - 1, f"merged {merged} near-duplicate support point(s)"))
        alphas, lambdas = a2, l2
        _, loglik = kernels.estep(y, link.evaluate(X, beta), alphas, lambdas, lgy)
    theta = Theta(beta, MixingDistribution(alphas, lambdas))
    return FitResult(
        theta=theta,
        loglik=float(loglik),
        r=data.r,
        iterations=len(trace) - 1,
        converged=converged,
        loglik_trace=tuple(trace),
        link=link.kind,
        events=tuple(events),
        start_index=start_index,
    )


def fit_from_starts(data: Dataset, starts: Sequence[Theta], link: LinkSpec = LOGIT,
                    config: EcmConfig | None = None) -> FitResult:
    """Run ECM from each start and keep the best fit.

    Fits within ``config.tie_tol`` of the best log-likelihood are treated as
    tied and the earliest start among them is returned. Failed starts are
    skipped; if all fail :class:`OptimizationError` is raised.
    """
    config = config or EcmConfig()
    lgy = kernels.log_factorials(data.y)
    fits: list[FitResult] = []
    failures = []
    for i, start in enumerate(starts):
        try:
            fits.append(_run_ecm(data, start, link, config, lgy, start_index=i))
        except (OptimizationError, DomainError, np.linalg.LinAlgError) as exc:
            log.debug("start %d failed: %s", i, exc)
            failures.append((i, str(exc)))
    if not fits:
        raise OptimizationError(f"all {len(starts)} starts failed", failures)
    best_ll = max(f.loglik for f in fits)
    tied = [f for f in fits if f.loglik >= best_ll - config.tie_tol]
    converged_tied = [f for f in tied if f.converged]
    return min(converged_tied or tied, key=lambda f: f.start_index)


def ecm_fit(data: Dataset, K: int, link: LinkSpec = LOGIT, config: EcmConfig | None = None,
            init: Theta | None = None, extra_starts: Sequence[Theta] = ()) -> FitResult:
    """Maximum-likelihood fit with a K-point mixing distribution.

    With ``init`` the ECM runs from that single point; otherwise it runs
    from :func:`default_starts` (plus ``extra_starts``) and keeps the best.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    config = config or EcmConfig()
    if init is not None:
        if init.K != K:
            raise ValueError(f"init has {init.K} components, expected {K}")
        starts = [init]
    else:
        starts = default_starts(data, K, link, config, extra=extra_starts)
    fit = fit_from_starts(data, starts, link, config)
    warnings = list(fit.warnings)
    n_distinct = distinct_counts(data.y)
    if K > n_distinct:
        warnings.append(
            f"K={K} exceeds the {n_distinct} distinct response values; expect redundant components"
        )
    if fit.K < K:
        warnings.append(f"fit reduced from K={K} to K={fit.K}")
    if warnings:
        from dataclasses import replace

        fit = replace(fit, warnings=tuple(warnings))
    return fit

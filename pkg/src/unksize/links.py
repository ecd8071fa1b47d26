"""Inverse link functions h(x; beta) with their first and second derivatives in beta.

A :class:`LinkSpec` describes an arbitrary success-probability model
``p = h(x; beta)``. Most models of interest are single-index ones,
``h(x; beta) = F(x'beta)``, and :class:`IndexLink` implements those from
the scalar function ``F`` and its first two derivatives. The fitting code
recognises index links and takes a fused fast path for them; any other
``LinkSpec`` subclass goes through the generic gradient/Hessian route.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import expit, ndtr

# Probabilities are kept away from 0 and 1 so that lambda * h never hits 0
# during wild Newton trial steps.
H_MIN = 1e-12
H_MAX = 1.0 - 1e-12


def clamp_probability(p: NDArray) -> NDArray:
    return np.clip(p, H_MIN, H_MAX)


class LinkSpec(abc.ABC):
    """Success probability ``h(x; beta)`` and its derivatives in ``beta``.

    ``x`` may be a single covariate vector of length rho or an ``(r, rho)``
    design matrix; the returned arrays gain a leading observation axis in
    the second case.
    """

    kind: str

    @abc.abstractmethod
    def evaluate(self, x: ArrayLike, beta: ArrayLike) -> NDArray:
        """Clamped probability ``h(x; beta)``."""

    @abc.abstractmethod
    def gradient(self, x: ArrayLike, beta: ArrayLike) -> NDArray:
        """``d h / d beta``, shape ``(rho,)`` or ``(r, rho)``."""

    @abc.abstractmethod
    def hessian(self, x: ArrayLike, beta: ArrayLike) -> NDArray:
        """``d^2 h / d beta d beta'``, shape ``(rho, rho)`` or ``(r, rho, rho)``."""


@dataclass(frozen=True)
class IndexLink(LinkSpec):
    """Single-index model ``h(x; beta) = F(x' beta)``.

    ``cdf``, ``pdf`` and ``dpdf`` are ``F``, ``F'`` and ``F''`` evaluated
    elementwise on the linear predictor.
    """

    kind: str
    cdf: Callable[[NDArray], NDArray] = field(repr=False)
    pdf: Callable[[NDArray], NDArray] = field(repr=False)
    dpdf: Callable[[NDArray], NDArray] = field(repr=False)

    def derivatives(self, eta: NDArray) -> tuple[NDArray, NDArray, NDArray]:
        """Clamped ``F(eta)`` plus ``F'(eta)`` and ``F''(eta)``."""
        return clamp_probability(self.cdf(eta)), self.pdf(eta), self.dpdf(eta)

    def evaluate(self, x, beta):
        eta = np.asarray(x, dtype=float) @ np.asarray(beta, dtype=float)
        return clamp_probability(self.cdf(eta))

    def gradient(self, x, beta):
        x = np.asarray(x, dtype=float)
        d1 = self.pdf(x @ np.asarray(beta, dtype=float))
        return d1[..., None] * x

    def hessian(self, x, beta):
        x = np.asarray(x, dtype=float)
        d2 = self.dpdf(x @ np.asarray(beta, dtype=float))
        return d2[..., None, None] * x[..., :, None] * x[..., None, :]


def _logistic_pdf(eta):
    p = expit(eta)
    return p * (1.0 - p)


def _logistic_dpdf(eta):
    p = expit(eta)
    return p * (1.0 - p) * (1.0 - 2.0 * p)


def _normal_pdf(eta):
    return np.exp(-0.5 * np.square(eta)) / np.sqrt(2.0 * np.pi)


def _normal_dpdf(eta):
    return -eta * _normal_pdf(eta)


LOGIT = IndexLink("logit", expit, _logistic_pdf, _logistic_dpdf)
PROBIT = IndexLink("probit", ndtr, _normal_pdf, _normal_dpdf)

_REGISTRY: dict[str, LinkSpec] = {"logit": LOGIT, "probit": PROBIT}


def register_link(link: LinkSpec) -> None:
    """Make a user-defined link available by name (CLI and saved fits)."""
    _REGISTRY[link.kind] = link


def get_link(kind: str | LinkSpec) -> LinkSpec:
    if isinstance(kind, LinkSpec):
        return kind
    try:
        return _REGISTRY[kind]
    except KeyError:
        raise ValueError(
            f"unknown link {kind!r}; available: {sorted(_REGISTRY)}"
        ) from None

"""Priors and coordinate transforms for the single-player model.

Sampler coordinates are ``(C, mu2, D)`` with ``mu1 = C mu2`` and ``L = D mu2``,
which enforces ``mu1 <= mu2`` and ``L <= mu2`` by construction.  Priors are
``C ~ Beta(1, 2)``, ``D ~ Beta(1, 5)`` and ``mu2`` lognormal with median 25 and
log-scale sd 0.75.  Every coordinate also has a quantile function, so the
nested sampler can work in the unit cube.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .model import L_FLOOR, BattingParams
from .summary import SummaryRow, summarize_params

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# keeps lognormal quantiles finite at the cube faces
_U_EPS = 1e-300


@dataclass(frozen=True)
class LogNormalByMedian:
    """Lognormal distribution parameterized by its median and the sd of the log."""

    median: float
    log_sd: float

    def __post_init__(self):
        if not (self.median > 0 and self.log_sd > 0):
            raise ValueError(f"median and log_sd must be positive, got {self.median}, {self.log_sd}")

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log(x) - math.log(self.median)) / self.log_sd
            out = -0.5 * z * z - np.log(x) - math.log(self.log_sd) - _LOG_SQRT_2PI
        out = np.where(x > 0, out, -np.inf)
        return float(out) if out.ndim == 0 else out

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def ppf(self, q):
        return self.median * np.exp(self.log_sd * special.ndtri(q))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return special.ndtr((np.log(x) - math.log(self.median)) / self.log_sd)

    def mean(self) -> float:
        return self.median * math.exp(0.5 * self.log_sd**2)

    def sample(self, rng: np.random.Generator, size=None):
        return self.median * np.exp(self.log_sd * rng.standard_normal(size))


MU2_PRIOR = LogNormalByMedian(25.0, 0.75)
CONSTANT_MU_PRIOR = LogNormalByMedian(20.0, 0.75)
C_BETA = (1.0, 2.0)
D_BETA = (1.0, 5.0)


@dataclass(frozen=True)
class InternalParams:
    C: float
    mu2: float
    D: float

    def __post_init__(self):
        if not (0.0 <= self.C <= 1.0 and 0.0 <= self.D <= 1.0 and self.mu2 > 0.0):
            raise ValueError(f"invalid internal parameters {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.C, self.mu2, self.D])


def to_natural(q: InternalParams) -> BattingParams:
    # the floor never exceeds mu2, so L <= mu2 holds even at vanishing mu2
    return BattingParams(q.C * q.mu2, q.mu2, max(q.D * q.mu2, min(L_FLOOR, q.mu2)))


def natural_arrays(C, mu2, D):
    """Vectorized ``to_natural`` returning ``(mu1, mu2, L)`` arrays."""
    C, mu2, D = (np.asarray(v, dtype=float) for v in (C, mu2, D))
    return C * mu2, mu2, np.maximum(D * mu2, np.minimum(L_FLOOR, mu2))


def _beta_1b_logpdf(x, b):
    # Beta(1, b) density is b (1 - x)^(b - 1) on [0, 1]
    if not 0.0 <= x <= 1.0:
        return -math.inf
    if b == 1.0:
        return 0.0
    if x == 1.0:
        return -math.inf
    return math.log(b) + (b - 1.0) * math.log1p(-x)


def prior_log_density(q: InternalParams | tuple) -> float:
    """Joint prior log-density of ``(C, mu2, D)``; ``-inf`` outside the support."""
    C, mu2, D = (q.C, q.mu2, q.D) if isinstance(q, InternalParams) else q
    if not (0.0 <= C <= 1.0 and 0.0 <= D <= 1.0) or mu2 <= 0.0:
        return -math.inf
    return _beta_1b_logpdf(C, C_BETA[1]) + MU2_PRIOR.logpdf(mu2) + _beta_1b_logpdf(D, D_BETA[1])


def prior_sample(rng: np.random.Generator) -> InternalParams:
    C = rng.beta(*C_BETA)
    mu2 = MU2_PRIOR.sample(rng)
    D = rng.beta(*D_BETA)
    return InternalParams(float(C), float(mu2), float(D))


def prior_sample_arrays(rng: np.random.Generator, n: int, mu2_prior: LogNormalByMedian = MU2_PRIOR):
    """``n`` joint prior draws of ``(C, mu2, D)`` as three arrays."""
    C = rng.beta(*C_BETA, size=n)
    mu2 = mu2_prior.sample(rng, n)
    D = rng.beta(*D_BETA, size=n)
    return C, mu2, D


def unit_to_internal(u: np.ndarray) -> np.ndarray:
    """Map a unit-cube point ``(u_C, u_mu2, u_D)`` to ``(C, mu2, D)`` via prior quantiles."""
    uc, um, ud = u
    um = min(max(um, _U_EPS), 1.0 - 1e-16)
    return np.array([
        -math.expm1(math.log1p(-uc) / C_BETA[1]) if uc < 1.0 else 1.0,
        MU2_PRIOR.median * math.exp(MU2_PRIOR.log_sd * special.ndtri(um)),
        -math.expm1(math.log1p(-ud) / D_BETA[1]) if ud < 1.0 else 1.0,
    ])


def internal_to_unit(theta) -> np.ndarray:
    C, mu2, D = theta
    return np.array([
        1.0 - (1.0 - C) ** C_BETA[1],
        float(MU2_PRIOR.cdf(mu2)),
        1.0 - (1.0 - D) ** D_BETA[1],
    ])


def constant_unit_to_mu(u: np.ndarray) -> np.ndarray:
    um = min(max(u[0], _U_EPS), 1.0 - 1e-16)
    return np.array([CONSTANT_MU_PRIOR.median * math.exp(CONSTANT_MU_PRIOR.log_sd * special.ndtri(um))])


def natural_prior_summaries(rng: np.random.Generator, n: int = 1_000_000,
                            fix_C: float | None = None,
                            fix_D: float | None = None) -> dict[str, SummaryRow]:
    """Monte Carlo prior summaries of ``mu1``, ``mu2`` and ``L``.

    ``fix_C`` / ``fix_D`` pin the fractional coordinates, which is mostly useful
    for checking the transform at its corners.
    """
    C, mu2, D = prior_sample_arrays(rng, n)
    if fix_C is not None:
        C = np.full(n, float(fix_C))
    if fix_D is not None:
        D = np.full(n, float(fix_D))
    mu1, mu2, L = natural_arrays(C, mu2, D)
    return summarize_params({"mu1": mu1, "mu2": mu2, "L": L})

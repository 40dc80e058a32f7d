"""Population model for equilibrium averages, built by reweighting per-player posteriors.

Each player's ``mu2`` is given a lognormal population prior with median ``nu``
(runs) and log-scale sd ``sigma``.  Because every player was fitted under the
same interim prior ``pi``, the hyperposterior on a grid of ``(nu, sigma)`` is

    p(nu, sigma | data) ~ prod_i mean_s[ f(mu2_is | nu, sigma) / pi(mu2_is) ]

with the expectation taken over player ``i``'s posterior draws and a flat
hyperprior on the grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .player import PARAMS, PlayerPosterior
from .priors import C_BETA, D_BETA, MU2_PRIOR, LogNormalByMedian, natural_arrays
from .summary import LOWER_PCT, UPPER_PCT, SummaryRow

NU_RANGE = (1.0, 100.0)
SIGMA_RANGE = (0.0, 10.0)
DEFAULT_GRID = (200, 200)
SIGMA_GRID_MIN = 0.01


class HierarchicalError(RuntimeError):
    pass


class BoundaryCellError(HierarchicalError):
    """Raised for a zero-width population prior, where the density ratio is singular."""


class DegenerateCovarianceError(ValueError):
    pass


def _log_ratio(log_mu2: np.ndarray, nu, sigma, prior: LogNormalByMedian) -> np.ndarray:
    # log f(m | nu, sigma) - log pi(m); the 1/m Jacobian factors cancel
    z_f = (log_mu2 - np.log(nu)) / sigma
    z_p = (log_mu2 - np.log(prior.median)) / prior.log_sd
    return np.log(prior.log_sd / sigma) - 0.5 * z_f * z_f + 0.5 * z_p * z_p


def log_reweight_term(post: PlayerPosterior | np.ndarray, nu: float, sigma: float,
                      prior: LogNormalByMedian = MU2_PRIOR) -> float:
    """Log of the posterior mean of ``f(mu2 | nu, sigma) / pi(mu2)`` for one player."""
    mu2 = post.mu2 if isinstance(post, PlayerPosterior) else np.asarray(post, dtype=float)
    if mu2.size == 0:
        raise ValueError("posterior has no samples")
    if sigma <= 0.0:
        if np.all(mu2 == mu2[0]):
            raise BoundaryCellError(f"sigma={sigma} with identical mu2 samples is a singular boundary cell")
        return -math.inf
    terms = _log_ratio(np.log(mu2), nu, sigma, prior)
    # np.log to match logsumexp, so the f = pi identity is bit-exact
    return float(logsumexp(terms) - np.log(mu2.size))


def reweight_term(post, nu: float, sigma: float, prior: LogNormalByMedian = MU2_PRIOR) -> float:
    return math.exp(log_reweight_term(post, nu, sigma, prior))


def _grid_quantiles(axis: np.ndarray, mass: np.ndarray, qs) -> np.ndarray:
    # cells act as point masses; interpolate the CDF through cell midpoints
    cdf = np.cumsum(mass) - 0.5 * mass
    return np.interp(qs, cdf, axis)


@dataclass
class HyperGrid:
    nu_axis: np.ndarray
    sigma_axis: np.ndarray
    log_mass: np.ndarray
    normalized_mass: np.ndarray

    @property
    def nu_marginal(self) -> np.ndarray:
        return self.normalized_mass.sum(axis=1)

    @property
    def sigma_marginal(self) -> np.ndarray:
        return self.normalized_mass.sum(axis=0)

    def _summary(self, axis, mass) -> SummaryRow:
        lo, med, hi = _grid_quantiles(axis, mass, [LOWER_PCT / 100, 0.5, UPPER_PCT / 100])
        return SummaryRow(float(med), float(hi - med), float(med - lo), (float(lo), float(hi)))

    def nu_summary(self) -> SummaryRow:
        return self._summary(self.nu_axis, self.nu_marginal)

    def sigma_summary(self) -> SummaryRow:
        return self._summary(self.sigma_axis, self.sigma_marginal)

    def mode(self) -> tuple[float, float]:
        i, j = np.unravel_index(np.argmax(self.normalized_mass), self.normalized_mass.shape)
        return float(self.nu_axis[i]), float(self.sigma_axis[j])


def default_axes(n_nu: int = DEFAULT_GRID[0], n_sigma: int = DEFAULT_GRID[1]):
    return (np.linspace(*NU_RANGE, n_nu), np.linspace(SIGMA_GRID_MIN, SIGMA_RANGE[1], n_sigma))


def _check_axis(axis: np.ndarray, lo: float, hi: float, name: str, open_lower: bool):
    if axis.ndim != 1 or axis.size < 1:
        raise ValueError(f"{name} axis must be a non-empty 1-D array")
    if np.any(np.diff(axis) <= 0):
        raise ValueError(f"{name} axis must be strictly increasing")
    below = axis[0] <= lo if open_lower else axis[0] < lo
    if below or axis[-1] > hi:
        raise ValueError(f"{name} axis must lie within the hyperprior support [{lo}, {hi}]")


def grid_from_log_mass(nu_axis, sigma_axis, log_mass) -> HyperGrid:
    log_mass = np.asarray(log_mass, dtype=float)
    if not np.isfinite(log_mass).any():
        raise HierarchicalError("every grid cell has zero posterior mass; widen the grid")
    norm = np.exp(log_mass - logsumexp(log_mass))
    norm /= norm.sum()
    return HyperGrid(np.asarray(nu_axis, float), np.asarray(sigma_axis, float), log_mass, norm)


def player_log_terms(post: PlayerPosterior, nu_axis: np.ndarray, sigma_axis: np.ndarray,
                     prior: LogNormalByMedian = MU2_PRIOR) -> np.ndarray:
    """``log_reweight_term`` over the whole grid, shape ``(len(nu), len(sigma))``."""
    log_mu2 = np.log(post.mu2)[:, None]
    log_nu = np.log(nu_axis)[None, :]
    z_p = (log_mu2 - np.log(prior.median)) / prior.log_sd
    base = 0.5 * z_p * z_p
    diff = log_mu2 - log_nu
    out = np.empty((len(nu_axis), len(sigma_axis)))
    log_s = np.log(len(post.mu2))
    for j, sigma in enumerate(sigma_axis):
        terms = base - 0.5 * (diff / sigma) ** 2
        out[:, j] = logsumexp(terms, axis=0) + np.log(prior.log_sd / sigma) - log_s
    return out


def hyper_posterior(players: Sequence[PlayerPosterior], nu_axis=None, sigma_axis=None,
                    prior: LogNormalByMedian = MU2_PRIOR) -> HyperGrid:
    """Grid posterior over ``(nu, sigma)`` under flat hyperpriors."""
    if not players:
        raise ValueError("at least one player posterior is required")
    d_nu, d_sigma = default_axes()
    nu_axis = d_nu if nu_axis is None else np.asarray(nu_axis, dtype=float)
    sigma_axis = d_sigma if sigma_axis is None else np.asarray(sigma_axis, dtype=float)
    _check_axis(nu_axis, *NU_RANGE, "nu", open_lower=False)
    _check_axis(sigma_axis, *SIGMA_RANGE, "sigma", open_lower=True)
    log_mass = np.zeros((len(nu_axis), len(sigma_axis)))
    for post in players:
        log_mass += player_log_terms(post, nu_axis, sigma_axis, prior)
    return grid_from_log_mass(nu_axis, sigma_axis, log_mass)


@dataclass
class NextPlayerPrediction:
    internal: np.ndarray
    natural: np.ndarray
    summary: dict[str, SummaryRow]


def predict_next_player(grid: HyperGrid, n_draws: int, rng: np.random.Generator) -> NextPlayerPrediction:
    """Population-predictive draws of ``(mu1, mu2, L)`` for an unseen player."""
    flat = grid.normalized_mass.ravel()
    cum = np.cumsum(flat)
    cum /= cum[-1]
    cells = np.minimum(np.searchsorted(cum, rng.random(n_draws), side="right"), flat.size - 1)
    i, j = np.unravel_index(cells, grid.normalized_mass.shape)
    nu, sigma = grid.nu_axis[i], grid.sigma_axis[j]
    mu2 = nu * np.exp(sigma * rng.standard_normal(n_draws))
    C = rng.beta(*C_BETA, size=n_draws)
    D = rng.beta(*D_BETA, size=n_draws)
    natural = np.column_stack(natural_arrays(C, mu2, D))
    summary = {name: SummaryRow.from_values(natural[:, k]) for k, name in enumerate(PARAMS)}
    return NextPlayerPrediction(np.column_stack([C, mu2, D]), natural, summary)


@dataclass(frozen=True)
class Ellipse:
    center: tuple[float, float]
    semi_axes: tuple[float, float]
    angle: float
    level: float

    def mahalanobis2(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, float)) - np.asarray(self.center)
        c, s = math.cos(self.angle), math.sin(self.angle)
        u = p[:, 0] * c + p[:, 1] * s
        v = -p[:, 0] * s + p[:, 1] * c
        return (u / self.semi_axes[0]) ** 2 + (v / self.semi_axes[1]) ** 2

    def contains(self, points) -> np.ndarray:
        return self.mahalanobis2(points) <= 1.0

    def boundary(self, n: int = 181) -> np.ndarray:
        t = np.linspace(0.0, 2.0 * math.pi, n)
        c, s = math.cos(self.angle), math.sin(self.angle)
        a, b = self.semi_axes
        x, y = a * np.cos(t), b * np.sin(t)
        return np.column_stack([self.center[0] + x * c - y * s, self.center[1] + x * s + y * c])


def credible_ellipse(points, level: float) -> Ellipse:
    """Gaussian-approximation credible ellipse for 2-D samples.

    Semi-axes are ``sqrt(q * lambda_k)`` with ``lambda_k`` the eigenvalues of the
    sample covariance and ``q`` the chi-square(2) quantile at ``level``; the
    angle is that of the major axis measured from the first coordinate.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("need at least 3 two-dimensional points")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    center = pts.mean(axis=0)
    cov = np.cov(pts, rowvar=False)
    evals, evecs = np.linalg.eigh(cov)
    scale = max(float(np.trace(cov)), np.finfo(float).tiny)
    if evals[0] <= 1e-12 * scale or not np.all(np.isfinite(evals)) or np.trace(cov) <= 0:
        raise DegenerateCovarianceError("sample covariance is singular; points are collinear or identical")
    q = stats.chi2.ppf(level, df=2)
    major = evecs[:, 1]
    angle = math.atan2(major[1], major[0])
    # fold into (-pi/2, pi/2]; an axis has no direction
    if angle <= -math.pi / 2:
        angle += math.pi
    elif angle > math.pi / 2:
        angle -= math.pi
    return Ellipse((float(center[0]), float(center[1])),
                   (math.sqrt(q * evals[1]), math.sqrt(q * evals[0])), angle, level)

"""Discrete hazard model for a batsman's score in a single innings.

The effective average ``mu(x)`` rises exponentially from ``mu1`` at score 0
towards ``mu2`` with e-folding scale ``L``.  The hazard (probability of being
dismissed on score ``x`` given the batsman reached ``x``) is
``H(x) = 1 / (mu(x) + 1)``, the survival function is
``G(x) = prod_{a<x} (1 - H(a))`` and the score pmf is ``H(x) G(x)``.
Not-out innings are right-censored and contribute ``G(y)`` to the likelihood.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

L_FLOOR = 1e-9


@dataclass(frozen=True)
class BattingParams:
    """Natural parameters: initial average, equilibrium average, e-folding scale."""

    mu1: float
    mu2: float
    L: float

    def __post_init__(self):
        if not (0.0 <= self.mu1 <= self.mu2):
            raise ValueError(f"need 0 <= mu1 <= mu2, got mu1={self.mu1}, mu2={self.mu2}")
        if not (0.0 < self.L <= self.mu2 or (self.mu2 == 0.0 and self.L > 0.0)):
            raise ValueError(f"need 0 < L <= mu2, got L={self.L}, mu2={self.mu2}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.mu1, self.mu2, self.L)


@dataclass(frozen=True)
class InningsRecord:
    score: int
    not_out: bool = False

    def __post_init__(self):
        if int(self.score) != self.score or self.score < 0:
            raise ValueError(f"score must be a non-negative integer, got {self.score!r}")

    def __str__(self):
        return f"{self.score}*" if self.not_out else str(self.score)


def effective_average(x, p: BattingParams):
    """``mu2 + (mu1 - mu2) exp(-x / L)``; accepts scalars or arrays of real ``x``."""
    L = max(p.L, L_FLOOR)
    return p.mu2 + (p.mu1 - p.mu2) * np.exp(-np.asarray(x, dtype=float) / L)


def hazard(x, p: BattingParams):
    return 1.0 / (effective_average(x, p) + 1.0)


def survival(x: int, p: BattingParams) -> float:
    """P(X >= x), the product of (1 - H(a)) over a = 0 .. x-1."""
    if x <= 0:
        return 1.0
    return float(np.exp(log_survival_curve(x, p)[x]))


def log_survival_curve(x_max: int, p: BattingParams) -> np.ndarray:
    """log G(x) for x = 0 .. x_max, accumulated as a running sum of log(1 - H)."""
    a = np.arange(x_max, dtype=float)
    mu = effective_average(a, p)
    with np.errstate(divide="ignore"):
        steps = np.log(mu) - np.log1p(mu)
    out = np.empty(x_max + 1)
    out[0] = 0.0
    np.cumsum(steps, out=out[1:])
    return out


def score_pmf(x, p: BattingParams):
    """P(X = x) = H(x) G(x) for integer ``x`` (scalar or array)."""
    xs = np.atleast_1d(np.asarray(x))
    if xs.size == 0:
        return np.empty(0)
    if np.any(xs < 0) or np.any(xs != np.floor(xs)):
        raise ValueError("scores must be non-negative integers")
    xs = xs.astype(np.int64)
    log_g = log_survival_curve(int(xs.max()), p)
    mu = effective_average(xs, p)
    out = np.exp(log_g[xs] - np.log1p(mu))
    if np.ndim(x) == 0:
        return float(out[0])
    return out


def score_pmf_table(x_max: int, p: BattingParams) -> np.ndarray:
    """pmf over x = 0 .. x_max."""
    return score_pmf(np.arange(x_max + 1), p)


class InningsCounts:
    """Sufficient statistics of a set of innings for the hazard likelihood.

    With ``dismissed[x]`` the number of dismissals on score ``x`` and
    ``at_risk[a]`` the number of innings whose score exceeds ``a``, the
    log-likelihood is ``sum_x dismissed[x] log H(x) + sum_a at_risk[a] log(1 - H(a))``.
    Evaluation is O(max score) rather than O(total runs).
    """

    def __init__(self, records: Iterable[InningsRecord]):
        records = list(records)
        if not records:
            raise ValueError("at least one innings is required")
        scores = np.array([r.score for r in records], dtype=np.int64)
        outs = np.array([not r.not_out for r in records])
        self.n_innings = len(records)
        self.n_not_out = int((~outs).sum())
        self.total_runs = int(scores.sum())
        top = int(scores.max())
        self.max_score = top
        self.dismissed = np.bincount(scores[outs], minlength=top + 1).astype(float)
        # at_risk[a] = #{i : score_i > a}
        ge = np.bincount(scores, minlength=top + 1)[::-1].cumsum()[::-1]
        self.at_risk = np.append(ge[1:], 0).astype(float)
        self.n_dismissed = int(outs.sum())

        self._log_mu_idx = np.flatnonzero(self.at_risk > 0)
        self._log_mu_w = self.at_risk[self._log_mu_idx]
        both = self.dismissed + self.at_risk
        self._log1p_idx = np.flatnonzero(both > 0)
        self._log1p_w = both[self._log1p_idx]
        self._grid = np.arange(top + 1, dtype=float)

    def log_likelihood(self, mu1: float, mu2: float, L: float) -> float:
        mu = mu2 + (mu1 - mu2) * np.exp(-self._grid / max(L, L_FLOOR))
        # log H = -log1p(mu); log(1 - H) = log(mu) - log1p(mu)
        with np.errstate(divide="ignore"):
            pos = np.log(mu[self._log_mu_idx]) @ self._log_mu_w if self._log_mu_w.size else 0.0
        neg = np.log1p(mu[self._log1p_idx]) @ self._log1p_w
        val = pos - neg
        return float(val) if not math.isnan(val) else -math.inf


def log_likelihood(data: Sequence[InningsRecord] | InningsCounts, p: BattingParams) -> float:
    """Censored log-likelihood of a set of innings under ``p``."""
    counts = data if isinstance(data, InningsCounts) else InningsCounts(data)
    return counts.log_likelihood(p.mu1, p.mu2, p.L)


def constant_log_likelihood(data: Sequence[InningsRecord] | InningsCounts, mu: float) -> float:
    """Log-likelihood under a constant hazard ``1/(mu+1)``.

    Collapses to ``R log mu - (R + D) log(1 + mu)`` with ``R`` total runs and
    ``D`` the number of dismissals.
    """
    counts = data if isinstance(data, InningsCounts) else InningsCounts(data)
    runs, dis = counts.total_runs, counts.n_dismissed
    if mu <= 0.0:
        return 0.0 if runs == 0 else -math.inf
    return runs * math.log(mu) - (runs + dis) * math.log1p(mu)

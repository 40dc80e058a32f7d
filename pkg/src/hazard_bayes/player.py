"""Per-player inference: posterior samples, summaries, predictive curves and comparisons."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import nested
from .model import L_FLOOR, BattingParams, InningsCounts, InningsRecord, constant_log_likelihood
from .nested import NSConfig, NSRun
from .priors import InternalParams, constant_unit_to_mu, natural_arrays, unit_to_internal
from .summary import SummaryRow

PARAMS = ("mu1", "mu2", "L")
DEFAULT_POSTERIOR_SAMPLES = 2000
MIN_SUMMARY_SAMPLES = 100
ALL_PAIRS_LIMIT = 2000
RANDOM_PAIRS = 1_000_000
SURVIVAL_FLOOR = 1e-300

# stream labels for seeds derived from a run's master seed
_STREAM_CONSTANT = 1
_STREAM_RESAMPLE = 2


class InsufficientSamplesError(ValueError):
    pass


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed for an independent random stream."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1, np.uint64)[0])


@dataclass
class PlayerPosterior:
    """Equal-weight posterior draws of ``(C, mu2, D)`` for one player plus evidence."""

    player_id: str
    internal: np.ndarray
    log_evidence: float = math.nan
    log_evidence_err: float = math.nan
    n_innings: int = 0
    n_not_out: int = 0
    config: NSConfig | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.internal = np.asarray(self.internal, dtype=float).reshape(-1, 3)
        if len(self.internal) == 0:
            raise ValueError("posterior must contain at least one sample")

    def __len__(self):
        return len(self.internal)

    @property
    def C(self):
        return self.internal[:, 0]

    @property
    def D(self):
        return self.internal[:, 2]

    @property
    def natural(self) -> np.ndarray:
        """``(S, 3)`` array of ``(mu1, mu2, L)``."""
        return np.column_stack(natural_arrays(self.internal[:, 0], self.internal[:, 1], self.internal[:, 2]))

    @property
    def mu1(self):
        return self.natural[:, 0]

    @property
    def mu2(self):
        return self.internal[:, 1]

    @property
    def L(self):
        return self.natural[:, 2]

    def param(self, name: str) -> np.ndarray:
        if name in PARAMS:
            return getattr(self, name)
        if name in ("C", "D"):
            return getattr(self, name)
        raise KeyError(f"unknown parameter {name!r}")

    def batting_params(self) -> list[BattingParams]:
        return [BattingParams(*row) for row in self.natural]

    def internal_params(self) -> list[InternalParams]:
        return [InternalParams(*row) for row in self.internal]

    @classmethod
    def from_natural(cls, player_id: str, mu1, mu2, L, **kw) -> "PlayerPosterior":
        """Build a posterior from natural-parameter draws (inverse of ``to_natural``)."""
        mu1, mu2, L = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (mu1, mu2, L))
        internal = np.column_stack([mu1 / mu2, mu2, L / mu2])
        return cls(player_id, internal, **kw)


def player_loglike(counts: InningsCounts):
    """Log-likelihood of ``(C, mu2, D)`` for a fixed set of innings."""
    def loglike(theta):
        C, mu2, D = theta
        return counts.log_likelihood(C * mu2, mu2, max(D * mu2, L_FLOOR))
    return loglike


def constant_loglike(counts: InningsCounts):
    def loglike(theta):
        return constant_log_likelihood(counts, theta[0])
    return loglike


def _as_counts(data) -> InningsCounts:
    if isinstance(data, InningsCounts):
        return data
    data = list(data)
    if not data:
        raise ValueError("at least one innings is required")
    return InningsCounts(data)


def run_varying(data, config: NSConfig) -> NSRun:
    return nested.run(player_loglike(_as_counts(data)), unit_to_internal, 3, config)


def run_constant(data, config: NSConfig) -> NSRun:
    """Nested sampling run for the one-parameter constant-hazard model."""
    return nested.run(constant_loglike(_as_counts(data)), constant_unit_to_mu, 1, config)


def posterior_from_run(run: NSRun, player_id: str, n_samples: int, seed: int,
                       counts: InningsCounts | None = None, config: NSConfig | None = None) -> PlayerPosterior:
    rng = np.random.default_rng(derive_seed(seed, _STREAM_RESAMPLE))
    samples = nested.resample_equal(run, n_samples, rng)
    _, ess = nested.posterior_weights(run)
    return PlayerPosterior(
        player_id=player_id,
        internal=samples,
        log_evidence=run.log_evidence,
        log_evidence_err=run.log_evidence_err,
        n_innings=counts.n_innings if counts else 0,
        n_not_out=counts.n_not_out if counts else 0,
        config=config,
        diagnostics={
            "iterations": run.iterations,
            "converged": run.converged,
            "information": run.information,
            "ess": ess,
            "mean_acceptance": float(run.acceptance.mean()) if run.acceptance.size else math.nan,
        },
    )


def analyze_player(data: Sequence[InningsRecord] | InningsCounts, config: NSConfig,
                   player_id: str = "player", n_samples: int = DEFAULT_POSTERIOR_SAMPLES) -> PlayerPosterior:
    """Fit the varying-hazard model to one player's innings."""
    counts = _as_counts(data)
    run = run_varying(counts, config)
    return posterior_from_run(run, player_id, n_samples, config.seed, counts, config)


class EvidenceComparison(NamedTuple):
    log_z: float
    log_z0: float
    log_bayes_factor: float
    log_z_err: float
    log_z0_err: float

    @property
    def log_bayes_factor_err(self) -> float:
        return math.hypot(self.log_z_err, self.log_z0_err)


def constant_config(config: NSConfig) -> NSConfig:
    return replace(config, seed=derive_seed(config.seed, _STREAM_CONSTANT))


def bayes_factor_vs_constant(data, config: NSConfig, varying: NSRun | PlayerPosterior | None = None) -> EvidenceComparison:
    """Evidence of the varying-hazard model against a constant hazard.

    Pass an existing ``varying`` run or posterior to avoid refitting the
    three-parameter model.
    """
    counts = _as_counts(data)
    if varying is None:
        varying = run_varying(counts, config)
    const = run_constant(counts, constant_config(config))
    return EvidenceComparison(
        varying.log_evidence, const.log_evidence,
        varying.log_evidence - const.log_evidence,
        varying.log_evidence_err, const.log_evidence_err,
    )


def summarize(post: PlayerPosterior) -> dict[str, SummaryRow]:
    """Median and 16/84 percentile offsets of ``mu1``, ``mu2`` and ``L``."""
    if len(post) < MIN_SUMMARY_SAMPLES:
        raise InsufficientSamplesError(
            f"{len(post)} samples; at least {MIN_SUMMARY_SAMPLES} needed for percentile summaries")
    nat = post.natural
    return {name: SummaryRow.from_values(nat[:, i]) for i, name in enumerate(PARAMS)}


@dataclass
class PredictiveCurve:
    x: np.ndarray
    predictive: np.ndarray
    hazard: np.ndarray
    median: np.ndarray
    lo68: np.ndarray
    hi68: np.ndarray
    lo95: np.ndarray
    hi95: np.ndarray


def sample_curves(natural: np.ndarray, x_max: int):
    """Per-sample ``mu(x)`` and ``log G(x)`` on x = 0 .. x_max."""
    x = np.arange(x_max + 1, dtype=float)
    mu1, mu2, L = natural[:, 0:1], natural[:, 1:2], np.maximum(natural[:, 2:3], L_FLOOR)
    mu = mu2 + (mu1 - mu2) * np.exp(-x / L)
    with np.errstate(divide="ignore"):
        step = np.log(mu) - np.log1p(mu)
    log_g = np.zeros_like(mu)
    np.cumsum(step[:, :-1], axis=1, out=log_g[:, 1:])
    return mu, log_g


def predictive_effective_average(post: PlayerPosterior, x_max: int = 300) -> PredictiveCurve:
    """Effective average implied by the posterior predictive score distribution.

    The predictive hazard is ``P(x) / G(x)`` for the sample-averaged pmf and
    survival; the effective average is its ``1/H - 1`` transform, evaluated
    as ``sum G_i (1 - H_i) / sum G_i H_i`` to avoid cancellation.  Samples
    whose survival has underflowed below 1e-300 are left out at that score.
    """
    if x_max < 0:
        raise ValueError("x_max must be non-negative")
    mu, log_g = sample_curves(post.natural, x_max)
    g = np.exp(log_g)
    g[g < SURVIVAL_FLOOR] = 0.0
    h = 1.0 / (mu + 1.0)
    dismissed = (g * h).sum(axis=0)
    survive = (g * (mu * h)).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu_pred = survive / dismissed
        h_pred = dismissed / g.sum(axis=0)
    lo95, lo68, med, hi68, hi95 = np.percentile(mu, [2.5, 16.0, 50.0, 84.0, 97.5], axis=0)
    return PredictiveCurve(np.arange(x_max + 1), mu_pred, h_pred, med, lo68, hi68, lo95, hi95)


def _prob_greater(a: np.ndarray, b: np.ndarray) -> float:
    # P(a > b) over all pairs, ties counted as one half
    b_sorted = np.sort(b)
    less = np.searchsorted(b_sorted, a, side="left").sum()
    less_eq = np.searchsorted(b_sorted, a, side="right").sum()
    return float((less + 0.5 * (less_eq - less)) / (len(a) * len(b)))


def compare_players(a: PlayerPosterior, b: PlayerPosterior, param: str = "mu2", seed: int = 0) -> float:
    """Posterior probability that ``param`` of ``a`` exceeds that of ``b``.

    Uses every sample pair when both posteriors have at most 2000 samples and
    a seeded subsample of 10^6 pairs otherwise.
    """
    xa, xb = a.param(param), b.param(param)
    if len(xa) <= ALL_PAIRS_LIMIT and len(xb) <= ALL_PAIRS_LIMIT:
        return _prob_greater(xa, xb)
    rng = np.random.default_rng(seed)
    ia = rng.integers(len(xa), size=RANDOM_PAIRS)
    ib = rng.integers(len(xb), size=RANDOM_PAIRS)
    pa, pb = xa[ia], xb[ib]
    return float(np.mean(pa > pb) + 0.5 * np.mean(pa == pb))


def credible_interval(values, level: float) -> tuple[float, float]:
    tail = 50.0 * (1.0 - level)
    lo, hi = np.percentile(values, [tail, 100.0 - tail])
    return float(lo), float(hi)

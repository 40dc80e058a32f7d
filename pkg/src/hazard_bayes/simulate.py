"""Synthetic careers drawn from the hazard model, and a parameter-recovery harness."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import L_FLOOR, BattingParams, InningsRecord, log_survival_curve
from .nested import NSConfig
from .player import PARAMS, analyze_player, credible_interval, derive_seed

_TAIL_LOG_MASS = math.log(1e-18)
MECHANISMS = ("closure", "at_score")


@dataclass(frozen=True)
class CensorModel:
    """Right-censoring of simulated innings.

    ``mechanism="closure"`` (the default) models the team innings closing: with
    probability ``censor_prob`` an innings is exposed to closure at a score
    ``c`` drawn from a geometric distribution with mean ``closure_mean``,
    independently of the dismissal score ``X``.  If ``c <= X`` the batsman
    finishes ``c`` not out, otherwise the innings ends in dismissal on ``X``.
    A not-out then contributes ``P(X >= c)`` to the likelihood, so fits are
    unbiased, and ``censor_prob`` is an upper bound on the not-out rate.

    ``mechanism="at_score"`` flags a ``censor_prob`` fraction of innings not
    out at their realized dismissal score.  The flag is independent of the
    score, but the recorded score is not a closure point, so the likelihood
    over-credits those innings; the constant-hazard estimate ``R/D`` tends to
    ``mu / (1 - censor_prob)``.  Kept for comparison.
    """

    censor_prob: float = 0.0
    closure_mean: float = 25.0
    mechanism: str = "closure"

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"mechanism must be one of {MECHANISMS}")
        if not 0.0 <= self.censor_prob < 1.0:
            raise ValueError("censor_prob must be in [0, 1)")
        if not self.closure_mean >= 0.0:
            raise ValueError("closure_mean must be non-negative")

    def closure_scores(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Closure score per innings; ``-1`` where the innings is not exposed."""
        exposed = rng.random(n) < self.censor_prob
        c = rng.geometric(1.0 / (self.closure_mean + 1.0), size=n) - 1
        return np.where(exposed, c, -1)

    def not_out_rate(self, p: BattingParams) -> float:
        """Expected fraction of not-outs, ``censor_prob * E[G(c)]`` under closure."""
        if self.censor_prob == 0.0 or self.mechanism == "at_score":
            return self.censor_prob
        g = np.exp(_survival_table(p))
        q = 1.0 / (self.closure_mean + 1.0)
        c = np.arange(len(g))
        return float(self.censor_prob * np.sum(q * (1.0 - q) ** c * g))


def simulate_innings(p: BattingParams, rng: np.random.Generator) -> int:
    """One innings: at each score ``a`` the batsman is out with probability ``H(a)``."""
    L = max(p.L, L_FLOOR)
    gap = p.mu1 - p.mu2
    a = 0
    while rng.random() >= 1.0 / (p.mu2 + gap * math.exp(-a / L) + 1.0):
        a += 1
    return a


def _survival_table(p: BattingParams) -> np.ndarray:
    # extend until the remaining tail mass is negligible
    n = max(64, int(8 * (p.mu2 + 1)))
    while True:
        log_g = log_survival_curve(n, p)
        if log_g[-1] < _TAIL_LOG_MASS or not np.isfinite(log_g[-1]):
            return log_g
        n *= 2


def simulate_scores(p: BattingParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` innings scores by inverse-CDF sampling; same law as :func:`simulate_innings`."""
    g = np.exp(_survival_table(p))
    # X >= x+1 iff G(x+1) > 1 - U, so X = #{x >= 1 : G(x) > 1 - U}
    u = rng.random(n)
    desc = g[1:]
    return np.searchsorted(-desc, -(1.0 - u), side="left").astype(np.int64)


def simulate_career(p: BattingParams, n_innings: int, censor: CensorModel,
                    rng: np.random.Generator) -> list[InningsRecord]:
    if n_innings < 1:
        raise ValueError("n_innings must be at least 1")
    scores = simulate_scores(p, n_innings, rng)
    if censor.mechanism == "at_score":
        flags = rng.random(n_innings) < censor.censor_prob
        return [InningsRecord(int(s), bool(f)) for s, f in zip(scores, flags)]
    closure = censor.closure_scores(n_innings, rng)
    flags = (closure >= 0) & (closure <= scores)
    observed = np.where(flags, closure, scores)
    return [InningsRecord(int(s), bool(f)) for s, f in zip(observed, flags)]


@dataclass
class RecoveryRow:
    repeat: int
    seed: int
    truth: tuple[float, float, float]
    medians: dict[str, float]
    ci68: dict[str, tuple[float, float]]
    ci95: dict[str, tuple[float, float]]

    def covered(self, level: int) -> dict[str, bool]:
        ci = self.ci68 if level == 68 else self.ci95
        return {k: ci[k][0] <= t <= ci[k][1] for k, t in zip(PARAMS, self.truth)}

    def width(self, level: int) -> dict[str, float]:
        ci = self.ci68 if level == 68 else self.ci95
        return {k: ci[k][1] - ci[k][0] for k in PARAMS}


@dataclass
class RecoveryReport:
    rows: list[RecoveryRow]

    def coverage(self, level: int) -> dict[str, float]:
        return {k: float(np.mean([r.covered(level)[k] for r in self.rows])) for k in PARAMS}

    def covered_count(self, level: int) -> dict[str, int]:
        return {k: int(sum(r.covered(level)[k] for r in self.rows)) for k in PARAMS}

    def median_width(self, level: int) -> dict[str, float]:
        return {k: float(np.median([r.width(level)[k] for r in self.rows])) for k in PARAMS}


def _recovery_repeat(args) -> RecoveryRow:
    repeat, seed, true_p, n_innings, censor, config = args
    rng = np.random.default_rng(seed)
    career = simulate_career(true_p, n_innings, censor, rng)
    cfg = NSConfig(config.n_particles, config.mcmc_steps, config.termination_log_tol,
                   config.max_iterations, derive_seed(seed, 0))
    post = analyze_player(career, cfg, player_id=f"repeat{repeat}")
    nat = post.natural
    return RecoveryRow(
        repeat, seed, true_p.as_tuple(),
        medians={k: float(np.median(nat[:, i])) for i, k in enumerate(PARAMS)},
        ci68={k: credible_interval(nat[:, i], 0.68) for i, k in enumerate(PARAMS)},
        ci95={k: credible_interval(nat[:, i], 0.95) for i, k in enumerate(PARAMS)},
    )


def recovery_experiment(true_p: BattingParams, n_innings: int, config: NSConfig, repeats: int,
                        rng: np.random.Generator, censor: CensorModel = CensorModel(0.1),
                        workers: int = 1) -> RecoveryReport:
    """Simulate-and-refit coverage check of the 68% and 95% credible intervals.

    Each repeat gets its own seed drawn from ``rng``, so results do not depend
    on ``workers``.
    """
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    seeds = rng.integers(0, 2**63 - 1, size=repeats)
    jobs = [(i, int(s), true_p, n_innings, censor, config) for i, s in enumerate(seeds)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_recovery_repeat, jobs))
    else:
        rows = [_recovery_repeat(j) for j in jobs]
    return RecoveryReport(rows)

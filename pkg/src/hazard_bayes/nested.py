"""Nested sampling with constrained Metropolis-Hastings particle updates.

The sampler works in the unit hypercube; ``prior_transform`` maps a cube point
to model parameters through the prior quantile functions, so the prior is
uniform in the coordinates the random walk moves in.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

log = logging.getLogger(__name__)

MAX_STEP_SCALE = 0.5
STEP_SCALE_DECADES = 2.0


class NestedSamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class NSConfig:
    n_particles: int = 1000
    mcmc_steps: int = 1000
    termination_log_tol: float = 1e-6
    max_iterations: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 2:
            raise ValueError("n_particles must be at least 2")
        if self.mcmc_steps < 1:
            raise ValueError("mcmc_steps must be at least 1")
        if not self.termination_log_tol > 0:
            raise ValueError("termination_log_tol must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")

    @property
    def iteration_cap(self) -> int:
        return self.max_iterations if self.max_iterations is not None else 100 * self.n_particles


@dataclass
class NSRun:
    """Output of a nested sampling run.

    ``unit_points``/``points`` hold the dead points in discard order followed
    by the final live set; ``log_mass`` is the log prior mass assigned to each.
    """

    unit_points: np.ndarray
    points: np.ndarray
    logl: np.ndarray
    log_mass: np.ndarray
    log_evidence: float
    log_evidence_err: float
    information: float
    iterations: int
    n_particles: int
    converged: bool
    acceptance: np.ndarray = field(repr=False)

    @property
    def log_x(self) -> np.ndarray:
        """Enclosed prior mass X_i = exp(-i/n) after each discard."""
        return -np.arange(1, self.iterations + 1) / self.n_particles

    def __len__(self):
        return len(self.logl)


def reflect_unit(x: np.ndarray) -> np.ndarray:
    """Fold real coordinates back into [0, 1] by mirror reflection at the faces."""
    inside = (x >= 0.0) & (x <= 1.0)
    # fold only the escaped coordinates so interior points are untouched bit-for-bit
    return np.where(inside, x, np.abs((x + 1.0) % 2.0 - 1.0))


def draw_step_scales(rng: np.random.Generator, size) -> np.ndarray:
    return MAX_STEP_SCALE * 10.0 ** (-STEP_SCALE_DECADES * rng.random(size))


def constrained_mh_step(u: np.ndarray, logl: float, threshold: float,
                        loglike_unit: Callable[[np.ndarray], float],
                        rng: np.random.Generator, step_scale=None):
    """One random-walk move in the cube, accepted only above ``threshold``.

    The prior is uniform in cube coordinates and the reflected walk is
    symmetric, so the acceptance rule reduces to the likelihood constraint.
    Returns ``(u, logl, accepted)``.
    """
    d = len(u)
    scale = draw_step_scales(rng, d) if step_scale is None else step_scale
    prop = reflect_unit(u + scale * rng.standard_normal(d))
    if np.array_equal(prop, u):
        return u, logl, False
    ll = loglike_unit(prop)
    if ll > threshold:
        return prop, ll, True
    return u, logl, False


def _evolve(u, logl, tie, threshold, tie_star, loglike_unit, rng, steps):
    # the tie-break label walks alongside the point, so the constraint is on
    # the pair (logl, label) and plateaus in the likelihood still shrink
    d = len(u)
    moves = draw_step_scales(rng, (steps, d + 1)) * rng.standard_normal((steps, d + 1))
    accepted = 0
    for k in range(steps):
        prop = reflect_unit(u + moves[k, :d])
        prop_tie = float(reflect_unit(tie + moves[k, d]))
        ll = loglike_unit(prop)
        if ll > threshold or (ll == threshold and prop_tie > tie_star):
            u, logl, tie = prop, ll, prop_tie
            accepted += 1
    return u, logl, tie, accepted


def _check_loglike(value: float, where: str) -> float:
    value = float(value)
    if math.isnan(value) or value == math.inf:
        raise NestedSamplingError(f"log-likelihood returned {value} at {where}")
    return value


def run(loglike: Callable[[np.ndarray], float],
        prior_transform: Callable[[np.ndarray], np.ndarray],
        ndim: int, config: NSConfig) -> NSRun:
    """Run nested sampling and return dead points, evidence and diagnostics.

    Parameters
    ----------
    loglike : callable
        Log-likelihood of a parameter point (the output of ``prior_transform``).
        ``-inf`` marks zero likelihood; NaN or ``+inf`` aborts the run.
    prior_transform : callable
        Maps a point of the unit cube to parameter space.
    ndim : int
        Dimension of the cube.
    config : NSConfig
    """
    n = config.n_particles
    rng = np.random.default_rng(config.seed)

    def loglike_unit(u):
        return loglike(prior_transform(u))

    live_u = rng.random((n, ndim))
    live_t = rng.random(n)
    live_l = np.empty(n)
    for i in range(n):
        live_l[i] = _check_loglike(loglike_unit(live_u[i]), f"prior draw {live_u[i]}")
    if not np.isfinite(live_l).any():
        raise NestedSamplingError(f"none of the {n} prior draws has finite likelihood")

    dead_u, dead_l, dead_m, accept = [], [], [], []
    # mass between successive X_i = exp(-i/n): log(X_{i-1} - X_i) = -(i-1)/n + log(1 - e^{-1/n})
    log_shell = math.log(-math.expm1(-1.0 / n))
    log_z = -math.inf
    log_tol = math.log(config.termination_log_tol)
    converged = False
    it = 0
    cap = config.iteration_cap
    while it < cap:
        log_x_prev = -it / n
        if log_z > -math.inf and live_l.max() + log_x_prev < log_tol + log_z:
            converged = True
            break
        it += 1
        worst = int(np.lexsort((live_t, live_l))[0])
        l_star, t_star = live_l[worst], live_t[worst]
        log_m = log_x_prev + log_shell
        dead_u.append(live_u[worst].copy())
        dead_l.append(l_star)
        dead_m.append(log_m)
        if l_star > -math.inf:
            log_z = np.logaddexp(log_z, log_m + l_star)

        copy = int(rng.integers(n - 1))
        if copy >= worst:
            copy += 1
        u_new, l_new, t_new, n_acc = _evolve(live_u[copy].copy(), live_l[copy], live_t[copy],
                                             l_star, t_star, loglike_unit, rng, config.mcmc_steps)
        if n_acc == 0:
            log.debug("iteration %d: no accepted move; particle duplicated", it)
        live_u[worst] = u_new
        live_l[worst] = _check_loglike(l_new, f"iteration {it}")
        live_t[worst] = t_new
        accept.append(n_acc / config.mcmc_steps)

    if not converged:
        log.warning("nested sampling stopped at the iteration cap (%d) before convergence", cap)

    # remaining live particles share the final enclosed mass equally
    log_final = -it / n - math.log(n)
    order = np.lexsort((live_t, live_l))
    unit = np.vstack([np.array(dead_u).reshape(-1, ndim), live_u[order]])
    logl = np.concatenate([np.array(dead_l, dtype=float), live_l[order]])
    log_mass = np.concatenate([np.array(dead_m, dtype=float), np.full(n, log_final)])

    finite = np.isfinite(logl)
    if not finite.any():
        raise NestedSamplingError("no finite-likelihood particle found")
    log_wl = np.where(finite, log_mass + np.where(finite, logl, 0.0), -np.inf)
    log_evidence = float(logsumexp(log_wl))
    post = np.exp(log_wl - log_evidence)
    information = float(np.sum(post[finite] * (logl[finite] - log_evidence)))
    information = max(information, 0.0)
    points = np.array([prior_transform(x) for x in unit])
    return NSRun(
        unit_points=unit,
        points=points,
        logl=logl,
        log_mass=log_mass,
        log_evidence=log_evidence,
        log_evidence_err=math.sqrt(information / n),
        information=information,
        iterations=it,
        n_particles=n,
        converged=converged,
        acceptance=np.array(accept),
    )


def posterior_weights(run: NSRun) -> tuple[np.ndarray, float]:
    """Normalized posterior weights of the stored samples and their effective sample size."""
    with np.errstate(invalid="ignore"):
        log_w = np.where(np.isfinite(run.logl), run.log_mass + run.logl, -np.inf)
    w = np.exp(log_w - logsumexp(log_w))
    w /= w.sum()
    ess = 1.0 / np.sum(w * w)
    return w, float(ess)


def systematic_indices(weights: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    if n == 0:
        return np.empty(0, dtype=np.int64)
    positions = (rng.random() + np.arange(n)) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions, side="right")


def resample_equal(run: NSRun, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` equally weighted parameter points by systematic resampling."""
    w, _ = posterior_weights(run)
    idx = systematic_indices(w, n, rng)
    return run.points[idx]

"""Simulation estimators of the effective key length.

* :func:`mc_effective_keylength` is the plain Monte Carlo average of an
  equivalence indicator over random (or attacker-estimated) test keys.
* :func:`estimate_equivalence_angle` measures the half-angle of the cone of
  equivalent keys from the 2-D projections of watermarked contents, and
  :func:`keylength_from_angle` turns it into a cap probability.
* :func:`rare_event_keylength_geometric` and
  :func:`rare_event_keylength_blackbox` run last-particle adaptive multilevel
  splitting on the uniform test-key distribution.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import EstimateResult, InvalidParameterError, Method, Side, check_epsilon
from .rng import blocks, substream
from .schemes import (Scheme, SpreadSpectrum, _map, _signs, attacker_estimate_batch,
                      gen_host, gen_key, gen_keys, gen_messages, watermarked_contents)
from .theory import equivalence_angle, log_cap_probability

log = logging.getLogger(__name__)

# memory bound (in float64 entries) for one simulated block
BLOCK_ENTRIES = 4_000_000


class EstimationError(RuntimeError):
    """The angle-window search found no feasible window."""


class EmptyRegionError(EstimationError):
    """The true key itself fails at this epsilon: no key is equivalent."""


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, partial: EstimateResult):
        super().__init__(message)
        self.partial = partial


def int_round(x: float) -> int:
    """Closest integer, halves away from zero."""
    return int(math.floor(x + 0.5))


# --- Monte Carlo ---------------------------------------------------------------

@dataclass(frozen=True)
class MonteCarloConfig:
    """Trial counts for the Monte Carlo estimator.

    ``indicator`` selects how a test key is judged: ``"cone"`` compares its
    angle with the cone of equivalent keys, ``"counting"`` decodes ``n_t``
    watermarked contents with it.
    """

    n1: int = 1
    n2: int = 100_000
    n_t: int = 10_000
    seed: int = 0
    indicator: str = "cone"
    side: Side = Side.DECODE
    workers: int = 1

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1 or self.n_t < 1:
            raise InvalidParameterError("n1, n2 and n_t must all be >= 1")
        if self.indicator not in ("cone", "counting"):
            raise InvalidParameterError(f"unknown indicator {self.indicator!r}")


def equivalence_test_counting(k_test, k_secret, scheme: Scheme, epsilon: float, n_t: int,
                              rng: np.random.Generator, side: Side = Side.DECODE) -> bool:
    """True iff more than (1 - epsilon) n_t fresh contents are handled correctly.

    Decode side: contents embedded with ``k_secret`` and decoded with
    ``k_test``. Encode side: the roles of the two keys are swapped.
    """
    check_epsilon(epsilon)
    if n_t < 1:
        raise InvalidParameterError(f"n_t must be >= 1, got {n_t}")
    emb, dec = (k_secret, k_test) if side is Side.DECODE else (k_test, k_secret)
    y, m = watermarked_contents(scheme, np.asarray(emb), n_t, rng)
    correct = _correct_counts(y, m, np.asarray(dec)[None, :])[0]
    return bool(correct > (1.0 - epsilon) * n_t)


def _correct_counts(y: np.ndarray, m: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Number of contents decoded correctly by each row of ``keys``."""
    s = y @ keys.T
    ok = np.where((m == 0)[:, None], s > 0, s <= 0)
    return ok.sum(axis=0)


def _test_keys(scheme: Scheme, k: np.ndarray, n_o: int, count: int,
               rng: np.random.Generator) -> np.ndarray:
    n_v = scheme.params.n_v
    if n_o == 0:
        return gen_keys(n_v, count, rng)
    x = gen_host(scheme.params, rng, (count, n_o))
    m = gen_messages(rng, (count, n_o))
    return attacker_estimate_batch(scheme.embed(x, m, k), m)


def mc_effective_keylength(scheme: Scheme, epsilon: float, n_o: int, cfg: MonteCarloConfig,
                           cos_theta: float | None = None) -> EstimateResult:
    """Monte Carlo estimate of the probability that a test key is equivalent.

    With ``n_o == 0`` test keys are uniform on the sphere, otherwise each
    trial draws ``n_o`` fresh observations and uses the attacker's averaged
    estimate. The cone indicator needs ``cos_theta``; for SS it defaults to
    the closed form.
    """
    check_epsilon(epsilon)
    if n_o < 0:
        raise InvalidParameterError(f"n_o must be >= 0, got {n_o}")
    params = scheme.params
    n_v = params.n_v
    total = cfg.n1 * cfg.n2
    if cfg.indicator == "cone" and cos_theta is None:
        if not isinstance(scheme, SpreadSpectrum):
            raise InvalidParameterError("the cone indicator needs cos_theta for this scheme")
        cos_theta = equivalence_angle(params, epsilon).cos_theta
    if cfg.indicator == "cone" and cos_theta > 1.0:
        return EstimateResult.from_probability(0.0, Method.MONTE_CARLO, trials=total,
                                               seed=cfg.seed, empty_region=True)
    per_key = max(n_o, 1) * n_v
    if cfg.indicator == "counting":
        per_key += cfg.n_t * n_v
    block = max(1, min(20_000, BLOCK_ENTRIES // per_key))
    threshold = (1.0 - epsilon) * cfg.n_t
    hits = 0
    for i in range(cfg.n1):
        k = np.asarray(gen_key(n_v, substream(cfg.seed, "secret-key", i)))

        def run(blk, i=i, k=k):
            b, n = blk
            keys = _test_keys(scheme, k, n_o, n, substream(cfg.seed, "test-keys", i, b))
            if cfg.indicator == "cone":
                return int(np.count_nonzero(keys @ k >= cos_theta))
            # every test key gets its own n_t fresh contents
            crng = substream(cfg.seed, "contents", i, b)
            x = gen_host(params, crng, (n, cfg.n_t))
            m = gen_messages(crng, (n, cfg.n_t))
            if cfg.side is Side.DECODE:
                s = np.einsum("btv,bv->bt", scheme.embed(x, m, k), keys)
            else:
                s = scheme.embed(x, m, keys[:, None, :]) @ k
            correct = np.where(m == 0, s > 0, s <= 0).sum(axis=1)
            return int(np.count_nonzero(correct > threshold))

        hits += sum(_map(run, blocks(cfg.n2, block), cfg.workers))
    p = hits / total
    return EstimateResult.from_probability(p, Method.MONTE_CARLO,
                                           std_error=math.sqrt(p * (1 - p) / total),
                                           trials=total, seed=cfg.seed, hits=hits)


# --- equivalence angle ---------------------------------------------------------

@dataclass(frozen=True)
class AngleEstimate:
    theta_hat: float
    n_t: int
    epsilon: float

    @property
    def cos_theta(self) -> float:
        return math.cos(self.theta_hat)


def projected_angles(scheme: Scheme, n_t: int, rng: np.random.Generator) -> np.ndarray:
    """Signed angles between k and contents embedded with message 0, in the plane (k, u).

    ``u`` is one fixed unit vector orthogonal to the secret key.
    """
    n_v = scheme.params.n_v
    k = np.asarray(gen_key(n_v, rng))
    u = rng.standard_normal(n_v)
    u -= (u @ k) * k
    u /= np.linalg.norm(u)
    basis = np.stack([k, u], axis=1)
    block = max(1, BLOCK_ENTRIES // n_v)
    phis = []
    for _, n in blocks(n_t, block):
        y = scheme.embed(gen_host(scheme.params, rng, n), np.zeros(n, dtype=np.int64), k)
        ac = y @ basis
        phis.append(np.arctan2(ac[:, 1], ac[:, 0]))
    return np.concatenate(phis)


def widest_window_angle(phi: np.ndarray, epsilon: float) -> float:
    """Largest theta whose half-plane window [theta - pi/2, theta + pi/2] holds
    int((1 - epsilon) n) of the angles ``phi``.

    The optimum has its lower edge on a sample, so every sorted angle is tried
    as a lower edge and the count inside the width-pi arc is read off with a
    binary search on the circularly extended array.
    """
    n = phi.size
    need = int_round((1.0 - epsilon) * n)
    s = np.sort(phi)
    ext = np.concatenate([s, s + 2 * np.pi])
    counts = np.searchsorted(ext, s + np.pi, side="right") - np.arange(n)
    theta = s + np.pi / 2
    ok = (counts >= need) & (theta <= np.pi)
    if not ok.any():
        # no half-plane at all holds enough contents, so neither does the true key's
        raise EmptyRegionError(f"no window holds {need} of {n} contents")
    best = float(theta[ok].max())
    if best < 0.0:
        raise EmptyRegionError("empirical error rate of the true key already exceeds epsilon")
    return best


def estimate_equivalence_angle(scheme: Scheme, epsilon: float, n_t: int,
                               rng: np.random.Generator) -> AngleEstimate:
    check_epsilon(epsilon)
    if n_t < 100:
        raise InvalidParameterError(f"n_t must be >= 100, got {n_t}")
    phi = projected_angles(scheme, n_t, rng)
    return AngleEstimate(theta_hat=widest_window_angle(phi, epsilon), n_t=n_t, epsilon=epsilon)


def keylength_from_angle(est: AngleEstimate, n_v: int, seed: int = 0) -> EstimateResult:
    return EstimateResult.from_log_probability(
        log_cap_probability(est.cos_theta, n_v), Method.ANGLE_APPROX, trials=est.n_t,
        seed=seed, theta_hat=est.theta_hat)


# --- adaptive multilevel splitting ---------------------------------------------

@dataclass(frozen=True)
class RareEventConfig:
    """Splitting settings.

    ``mu`` is the initial move strength. Unless ``fixed_mu`` is set it is
    rescaled between iterations so that the recent acceptance rate stays in
    ACCEPT_BAND; every clone still runs a chain with one fixed kernel.
    """

    n_particles: int = 80
    mu: float = 0.3
    moves_per_level: int = 20
    max_levels: int = 200_000
    seed: int = 0
    fixed_mu: bool = False

    def __post_init__(self):
        if self.n_particles < 2:
            raise InvalidParameterError(f"need at least 2 particles, got {self.n_particles}")
        if not self.mu > 0:
            raise InvalidParameterError(f"mu must be positive, got {self.mu!r}")
        if self.moves_per_level < 1 or self.max_levels < 1:
            raise InvalidParameterError("moves_per_level and max_levels must be >= 1")


ACCEPT_BAND = (0.2, 0.8)
# smoothing of the acceptance rate that drives the mu adaptation
_ACCEPT_SMOOTHING = 0.05


def _adapt_mu(mu: float, rate: float, cfg: RareEventConfig) -> float:
    lo, hi = ACCEPT_BAND
    if rate < lo:
        mu *= 0.95
    elif rate > hi:
        mu *= 1.05
    return min(max(mu, cfg.mu * 1e-3), cfg.mu * 4.0)


def gaussian_move(w: np.ndarray, noise: np.ndarray, mu: float) -> np.ndarray:
    """(W + mu N) / sqrt(1 + mu^2): leaves the standard normal law invariant."""
    return (w + mu * noise) / math.sqrt(1.0 + mu * mu)


@dataclass
class SplittingRun:
    log_p: float
    iterations: int
    proposed: int
    accepted: int
    final_mu: float = math.nan

    @property
    def p_hat(self) -> float:
        return math.exp(self.log_p)

    @property
    def acceptance(self) -> float:
        return self.accepted / self.proposed if self.proposed else math.nan


def last_particle_splitting(score, accepts, n_v: int, cfg: RareEventConfig,
                            rng: np.random.Generator, method: Method) -> SplittingRun:
    """Estimate P(score(W) > 0) for W standard normal in R^n_v.

    ``score(w)`` returns the score of an unnormalised Gaussian vector;
    ``accepts(w, level)`` answers ``score(w) > level`` and may do so more
    cheaply. The lowest particle is replaced by a moved clone of a survivor
    until every particle scores above 0; the estimate is (1 - 1/n)^q.
    Particles tied at the lowest score are all replaced in one iteration,
    which contributes a factor (1 - K/n) instead.
    """
    n = cfg.n_particles
    w = rng.standard_normal((n, n_v))
    scores = np.array([score(x) for x in w])
    log_p = 0.0
    q = proposed = accepted = 0
    mu = cfg.mu
    rate = 0.5 * (ACCEPT_BAND[0] + ACCEPT_BAND[1])
    while scores.min() <= 0.0:
        level = scores.min()
        dead = np.flatnonzero(scores <= level)
        above = np.flatnonzero(scores > level)
        if q >= cfg.max_levels or above.size == 0:
            partial = EstimateResult.from_log_probability(log_p, method, seed=cfg.seed,
                                                          iterations=q)
            why = "no particle above the level" if above.size == 0 else f"{q} iterations"
            raise NonConvergenceError(f"splitting stopped ({why}) at level {level:.6g}", partial)
        level_accepted = 0
        for i in dead:
            j = int(above[rng.integers(above.size)])
            x = w[j].copy()
            s = scores[j]
            noise = rng.standard_normal((cfg.moves_per_level, n_v))
            for t in range(cfg.moves_per_level):
                cand = gaussian_move(x, noise[t], mu)
                if accepts(cand, level):
                    x = cand
                    s = None
                    level_accepted += 1
            w[i] = x
            scores[i] = score(x) if s is None else s
        level_proposed = dead.size * cfg.moves_per_level
        proposed += level_proposed
        accepted += level_accepted
        log_p += math.log1p(-dead.size / n)
        q += 1
        if not cfg.fixed_mu:
            rate += _ACCEPT_SMOOTHING * (level_accepted / level_proposed - rate)
            mu = _adapt_mu(mu, rate, cfg)
    run = SplittingRun(log_p=log_p, iterations=q, proposed=proposed, accepted=accepted,
                      final_mu=mu)
    lo, hi = ACCEPT_BAND
    if proposed and not lo <= run.acceptance <= hi:
        log.warning("splitting move acceptance %.3f outside [%g, %g] (final mu=%g)",
                    run.acceptance, lo, hi, mu)
    else:
        log.info("splitting: %d iterations, acceptance %.3f, final mu %g", q,
                 run.acceptance, mu)
    return run


def _splitting_result(run: SplittingRun, cfg: RareEventConfig, method: Method,
                      **extra) -> EstimateResult:
    n = cfg.n_particles
    log_p = run.log_p
    rel = math.sqrt(-log_p / n) if log_p < 0 else 0.0
    return EstimateResult.from_log_probability(
        log_p, method, std_error=math.exp(log_p) * rel, trials=run.iterations,
        seed=cfg.seed, relative_error=rel, acceptance=run.acceptance,
        final_mu=run.final_mu, **extra)


def rare_event_keylength_geometric(cos_theta_eps: float, n_v: int,
                                   cfg: RareEventConfig) -> EstimateResult:
    """Splitting with the score K'.k - cos(theta_eps)."""
    method = Method.RARE_EVENT_GEOMETRIC
    if cos_theta_eps >= 1.0:
        return EstimateResult.from_probability(0.0, method, seed=cfg.seed)
    rng = substream(cfg.seed, "splitting-geometric")
    k = np.asarray(gen_key(n_v, rng))
    c = float(cos_theta_eps)

    def score(w):
        return float(w @ k) / math.sqrt(float(w @ w)) - c

    def accepts(w, level):
        return score(w) > level

    run = last_particle_splitting(score, accepts, n_v, cfg, rng, method)
    return _splitting_result(run, cfg, method)


def rare_event_keylength_blackbox(scheme: Scheme, epsilon: float, n_t: int,
                                  cfg: RareEventConfig) -> EstimateResult:
    """Splitting whose score is the int(epsilon n_t)-th smallest sign-corrected
    correlation between the test key and ``n_t`` contents watermarked with k.

    The score is positive exactly when fewer than int(epsilon n_t) contents
    are decoded wrongly.
    """
    check_epsilon(epsilon)
    if n_t < 100:
        raise InvalidParameterError(f"n_t must be >= 100, got {n_t}")
    method = Method.RARE_EVENT_BLACKBOX
    n_v = scheme.params.n_v
    rng = substream(cfg.seed, "splitting-blackbox")
    k = np.asarray(gen_key(n_v, rng))
    y, m = watermarked_contents(scheme, k, n_t, substream(cfg.seed, "splitting-contents"))
    z = np.ascontiguousarray(_signs(m)[:, None] * y)
    r = max(1, int_round(epsilon * n_t))
    if np.count_nonzero(z @ k <= 0.0) >= r:
        # the true key fails on its own contents; report the empty region
        return EstimateResult.from_probability(0.0, method, seed=cfg.seed, n_t=n_t, rank=r,
                                               empty_region=True)

    def score(w):
        v = z @ w
        return float(np.partition(v, r - 1)[r - 1]) / math.sqrt(float(w @ w))

    def accepts(w, level):
        thr = level * math.sqrt(float(w @ w))
        return int(np.count_nonzero(z @ w <= thr)) < r

    run = last_particle_splitting(score, accepts, n_v, cfg, rng, method)
    return _splitting_result(run, cfg, method, n_t=n_t, rank=r)


__all__ = [
    "AngleEstimate", "EmptyRegionError", "EstimationError", "MonteCarloConfig", "NonConvergenceError",
    "RareEventConfig", "equivalence_test_counting", "estimate_equivalence_angle",
    "gaussian_move", "keylength_from_angle", "last_particle_splitting",
    "mc_effective_keylength", "projected_angles", "rare_event_keylength_blackbox",
    "rare_event_keylength_geometric", "widest_window_angle",
]

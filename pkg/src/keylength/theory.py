"""Closed-form key lengths of additive spread spectrum.

All probabilities are computed as natural logs first; ``EstimateResult``
objects built from them keep an exact bit count even when the probability
itself underflows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import (EstimateResult, InvalidParameterError, Method, SchemeParams,
                   check_epsilon)
from .special import (FDistParams, log_reg_inc_beta_pair, log_std_normal_sf,
                      noncentral_f_logsf, std_normal_cdf, std_normal_quantile)


@dataclass(frozen=True)
class EquivalenceCone:
    """Half-angle of the cone of equivalent keys, stored as its cosine.

    ``cos_theta > 1`` means no key is equivalent (epsilon below the
    noiseless error rate); ``cos_theta < -1`` means every key is.
    """

    cos_theta: float

    @property
    def empty(self) -> bool:
        return self.cos_theta > 1.0

    @property
    def theta(self) -> float:
        if self.empty:
            return math.nan
        return math.acos(max(self.cos_theta, -1.0))


@dataclass(frozen=True)
class KeyLengthQuery:
    params: SchemeParams
    epsilon: float
    n_o: int = 0

    def __post_init__(self):
        check_epsilon(self.epsilon)
        if self.n_o < 0:
            raise InvalidParameterError(f"n_o must be >= 0, got {self.n_o}")


def ser_theory(params: SchemeParams, sigma_n: float = 0.0) -> float:
    """Symbol error rate of SS with the true key under AWGN of std ``sigma_n``."""
    if sigma_n < 0:
        raise InvalidParameterError(f"sigma_n must be >= 0, got {sigma_n!r}")
    return std_normal_cdf(-params.alpha / math.sqrt(params.sigma_x**2 + sigma_n**2))


def equivalence_angle(params: SchemeParams, epsilon: float) -> EquivalenceCone:
    check_epsilon(epsilon)
    return EquivalenceCone(-std_normal_quantile(epsilon) * params.sigma_x / params.alpha)


def noncentrality(params: SchemeParams, n_o: int) -> float:
    """Noncentrality of the averaged-observation attack, n_v n_o 10^(-DWR/10)."""
    return params.n_v * n_o / 10.0 ** (params.dwr_db / 10.0)


# --- cap probabilities -------------------------------------------------------

def _log1mexp(v: float) -> float:
    if v == -math.inf:
        return 0.0
    if v > -math.log(2.0):
        return math.log(-math.expm1(v))
    return math.log1p(-math.exp(v))


def log_cap_probability(cos_theta: float, n_v: int) -> float:
    """log P(K'.k > cos_theta) for K' uniform on the n_v-sphere."""
    if n_v < 2:
        raise InvalidParameterError(f"n_v must be >= 2, got {n_v}")
    tau = cos_theta
    if tau >= 1.0:
        return -math.inf
    if tau <= -1.0:
        return 0.0
    if tau == 0.0:
        return -math.log(2.0)
    t = abs(tau)
    # 1 - tau^2 without cancellation near |tau| = 1
    upper = log_reg_inc_beta_pair(t * t, 0.5, (n_v - 1) / 2.0, (1.0 - t) * (1.0 + t))[1]
    half_tail = upper - math.log(2.0)
    return half_tail if tau > 0 else _log1mexp(half_tail)


def cap_probability(cos_theta: float, n_v: int) -> float:
    return math.exp(log_cap_probability(cos_theta, n_v))


def log_noncentral_cone_probability(cos_theta: float, n_v: int, lam: float) -> float:
    """log of P(D > tau) ~ P(D^2 > tau^2) P(D > 0) for the noncentral case.

    For negative tau the same factorisation is applied to the complement
    event D < tau.
    """
    if n_v < 2:
        raise InvalidParameterError(f"n_v must be >= 2, got {n_v}")
    if lam < 0:
        raise InvalidParameterError(f"noncentrality must be >= 0, got {lam!r}")
    tau = cos_theta
    if lam == 0.0:
        return log_cap_probability(tau, n_v)
    if tau >= 1.0:
        return -math.inf
    if tau <= -1.0:
        return 0.0
    t = abs(tau)
    x = (n_v - 1) * t * t / ((1.0 - t) * (1.0 + t))
    two_sided = noncentral_f_logsf(x, FDistParams(1, n_v - 1, lam))
    if tau >= 0:
        return two_sided + math.log(std_normal_cdf(math.sqrt(lam)))
    return _log1mexp(two_sided + log_std_normal_sf(math.sqrt(lam)))


def noncentral_cone_probability(cos_theta: float, n_v: int, lam: float) -> float:
    return math.exp(log_noncentral_cone_probability(cos_theta, n_v, lam))


# --- key lengths -------------------------------------------------------------

def basic_keylength(params: SchemeParams, epsilon: float) -> EstimateResult:
    """Key length with no observations: the spherical cap of equivalent keys."""
    cone = equivalence_angle(params, epsilon)
    log_p = -math.inf if cone.empty else log_cap_probability(cone.cos_theta, params.n_v)
    return EstimateResult.from_log_probability(log_p, Method.CLOSED_FORM,
                                               cos_theta=cone.cos_theta)


def asymptotic_keylength(dwr_db: float, epsilon: float) -> EstimateResult:
    """Limit of the basic key length as n_v grows without bound."""
    check_epsilon(epsilon)
    kappa = -std_normal_quantile(epsilon) * 10.0 ** (dwr_db / 20.0)
    return EstimateResult.from_log_probability(log_std_normal_sf(kappa), Method.CLOSED_FORM,
                                               kappa=kappa)


def kma_keylength(query: KeyLengthQuery) -> EstimateResult:
    """Key length after ``n_o`` known-message observations (noncentral-F approximation)."""
    params = query.params
    cone = equivalence_angle(params, query.epsilon)
    lam = noncentrality(params, query.n_o)
    if cone.empty:
        log_p = -math.inf
    else:
        log_p = log_noncentral_cone_probability(cone.cos_theta, params.n_v, lam)
    return EstimateResult.from_log_probability(log_p, Method.CLOSED_FORM,
                                               cos_theta=cone.cos_theta, lam=lam)

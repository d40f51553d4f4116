"""Spread-spectrum (SS) and improved spread-spectrum (ISS) watermarking.

Signals are numpy arrays whose last axis has length ``n_v``; the scheme
objects embed and decode whole batches at once. The free functions
``ss_embed``, ``iss_embed`` and ``decode`` are the single-content forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import InvalidParameterError, Message, Observation, SchemeParams, SecretKey
from .rng import blocks, substream

BLOCK = 20_000


@dataclass(frozen=True)
class IssParams:
    beta: float
    gamma: float

    def check(self, params: SchemeParams) -> None:
        lhs = self.beta**2 + self.gamma**2 * params.sigma_x**2
        if abs(lhs - params.alpha**2) > 1e-9 * max(1.0, params.alpha**2):
            raise InvalidParameterError(
                f"ISS parameters break the distortion constraint: {lhs!r} != {params.alpha**2!r}")


@dataclass(frozen=True)
class ChannelParams:
    sigma_n: float
    wnr_db: float


def iss_from_rejection(params: SchemeParams, gamma: float) -> IssParams:
    """ISS parameters with host-rejection ``gamma`` at the distortion of ``params``."""
    gmax = params.alpha / params.sigma_x
    if not 0.0 <= gamma <= gmax * (1 + 1e-12):
        raise InvalidParameterError(f"gamma must lie in [0, {gmax!r}], got {gamma!r}")
    gamma = min(float(gamma), gmax)
    if gamma == 0.0:
        return IssParams(beta=params.alpha, gamma=0.0)
    beta = math.sqrt(max(params.alpha**2 - gamma**2 * params.sigma_x**2, 0.0))
    return IssParams(beta=beta, gamma=gamma)


def channel_from_wnr(params: SchemeParams, wnr_db: float) -> ChannelParams:
    """AWGN channel at a watermark-to-noise ratio; ``wnr_db = inf`` means no noise."""
    if wnr_db == math.inf:
        return ChannelParams(0.0, math.inf)
    sigma_n = math.sqrt(params.watermark_power / 10.0 ** (wnr_db / 10.0))
    return ChannelParams(sigma_n=sigma_n, wnr_db=float(wnr_db))


def channel_from_sigma(params: SchemeParams, sigma_n: float) -> ChannelParams:
    if sigma_n < 0:
        raise InvalidParameterError(f"sigma_n must be >= 0, got {sigma_n!r}")
    wnr = math.inf if sigma_n == 0 else 10 * math.log10(params.watermark_power / sigma_n**2)
    return ChannelParams(sigma_n=float(sigma_n), wnr_db=wnr)


def _check_dims(x: np.ndarray, k: np.ndarray):
    if x.shape[-1] != k.shape[-1]:
        raise InvalidParameterError(f"dimension mismatch: {x.shape[-1]} vs {k.shape[-1]}")


def _signs(m) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(m, dtype=np.float64)


@dataclass(frozen=True)
class SpreadSpectrum:
    """y = x + (-1)^m alpha k."""

    params: SchemeParams
    name = "ss"

    @property
    def gamma(self) -> float:
        return 0.0

    def embed(self, x: np.ndarray, m, k) -> np.ndarray:
        """Batch embedding; ``m`` is an int array broadcastable to ``x.shape[:-1]``."""
        k = np.asarray(k)
        _check_dims(x, k)
        s = _signs(m)
        return x + (s * self.params.alpha)[..., None] * k


@dataclass(frozen=True)
class ImprovedSpreadSpectrum:
    """y = x + ((-1)^m beta - gamma x.k) k.

    The host-rejection term does not flip with the message, so the
    sign-corrected correlation (-1)^m y.k = beta + (1 - gamma)(-1)^m x.k has
    the same law for both bits.
    """

    params: SchemeParams
    iss: IssParams
    name = "iss"

    def __post_init__(self):
        self.iss.check(self.params)

    @property
    def gamma(self) -> float:
        return self.iss.gamma

    def embed(self, x: np.ndarray, m, k) -> np.ndarray:
        k = np.asarray(k)
        _check_dims(x, k)
        s = _signs(m)
        corr = x @ k if k.ndim == 1 else np.einsum("...i,...i->...", x, k)
        return x + (s * self.iss.beta - self.iss.gamma * corr)[..., None] * k


Scheme = SpreadSpectrum | ImprovedSpreadSpectrum


def make_scheme(params: SchemeParams, kind: str = "ss", gamma: float = 0.0) -> Scheme:
    if kind == "ss":
        return SpreadSpectrum(params)
    if kind == "iss":
        return ImprovedSpreadSpectrum(params, iss_from_rejection(params, gamma))
    raise InvalidParameterError(f"unknown scheme {kind!r}")


# --- single-content operations --------------------------------------------

def ss_embed(x, m: Message, k: SecretKey, alpha: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(k)
    _check_dims(x, k)
    return x + m.sign * alpha * k


def iss_embed(x, m: Message, k: SecretKey, iss: IssParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(k)
    _check_dims(x, k)
    return x + (m.sign * iss.beta - iss.gamma * (x @ k)) * k


def decode(y, k) -> Message:
    """0 if y.k > 0, else 1 (ties decode to 1)."""
    y = np.asarray(y, dtype=np.float64)
    k = np.asarray(k)
    _check_dims(y, k)
    return Message(0 if float(y @ k) > 0 else 1)


def decode_batch(y: np.ndarray, k) -> np.ndarray:
    return np.where(y @ np.asarray(k) > 0, 0, 1)


# --- random generation -----------------------------------------------------

def gen_host(params: SchemeParams, rng: np.random.Generator, size=None) -> np.ndarray:
    shape = (params.n_v,) if size is None else tuple(np.atleast_1d(size)) + (params.n_v,)
    return params.sigma_x * rng.standard_normal(shape)


def gen_key(n_v: int, rng: np.random.Generator) -> SecretKey:
    if n_v < 2:
        raise InvalidParameterError(f"n_v must be >= 2, got {n_v}")
    while True:
        w = rng.standard_normal(n_v)
        norm = np.linalg.norm(w)
        if norm > 0:
            return SecretKey(w / norm)


def gen_keys(n_v: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` uniform unit vectors as rows of an array."""
    w = rng.standard_normal((count, n_v))
    norms = np.linalg.norm(w, axis=1)
    bad = norms == 0
    while bad.any():
        w[bad] = rng.standard_normal((int(bad.sum()), n_v))
        norms = np.linalg.norm(w, axis=1)
        bad = norms == 0
    return w / norms[:, None]


def gen_messages(rng: np.random.Generator, size) -> np.ndarray:
    return rng.integers(0, 2, size=size)


def awgn(y, sigma_n: float, rng: np.random.Generator) -> np.ndarray:
    if sigma_n < 0:
        raise InvalidParameterError(f"sigma_n must be >= 0, got {sigma_n!r}")
    y = np.asarray(y, dtype=np.float64)
    if sigma_n == 0:
        return y
    return y + sigma_n * rng.standard_normal(y.shape)


def watermarked_contents(scheme: Scheme, k, count: int, rng: np.random.Generator,
                         message: int | None = None):
    """``count`` fresh hosts embedded with ``k``; returns (signals, messages).

    Messages are uniform bits unless ``message`` fixes them.
    """
    x = gen_host(scheme.params, rng, count)
    if message is None:
        m = gen_messages(rng, count)
    else:
        m = np.full(count, int(message))
    return scheme.embed(x, m, k), m


def gen_observations(params: SchemeParams, scheme: Scheme, n_o: int, k: SecretKey,
                     rng: np.random.Generator) -> list[Observation]:
    if n_o < 0:
        raise InvalidParameterError(f"n_o must be >= 0, got {n_o}")
    if n_o == 0:
        return []
    y, m = watermarked_contents(scheme, k, n_o, rng)
    return [Observation(y[i], Message(int(m[i]))) for i in range(n_o)]


def attacker_estimate(obs: list[Observation]) -> SecretKey:
    """Normalised average of the sign-corrected observations."""
    if not obs:
        raise InvalidParameterError("the attacker needs at least one observation")
    y = np.stack([o.signal for o in obs])
    s = np.array([o.message.sign for o in obs])
    mean = (s[:, None] * y).mean(axis=0)
    if not np.any(mean):
        raise InvalidParameterError("observations average to the zero vector")
    return SecretKey.from_vector(mean)


def attacker_estimate_batch(y: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Vectorised attacker: ``y`` has shape (trials, n_o, n_v), ``m`` (trials, n_o)."""
    mean = (_signs(m)[..., None] * y).mean(axis=1)
    return mean / np.linalg.norm(mean, axis=1, keepdims=True)


# --- robustness ------------------------------------------------------------

@dataclass(frozen=True)
class SerEstimate:
    ser: float
    std_error: float
    trials: int
    errors: int


def ser_mc(scheme: Scheme, channel: ChannelParams, trials: int, seed: int,
           k: SecretKey | None = None, workers: int = 1) -> SerEstimate:
    """Empirical symbol error rate of decode(awgn(embed(x, m, k)), k)."""
    if trials < 1:
        raise InvalidParameterError(f"trials must be >= 1, got {trials}")
    params = scheme.params
    if k is None:
        k = gen_key(params.n_v, substream(seed, "secret-key"))
    kv = np.asarray(k)

    def run(block):
        b, n = block
        rng = substream(seed, "ser", b)
        y, m = watermarked_contents(scheme, kv, n, rng)
        z = awgn(y, channel.sigma_n, rng)
        return int(np.count_nonzero(decode_batch(z, kv) != m))

    errors = sum(_map(run, blocks(trials, BLOCK), workers))
    p = errors / trials
    return SerEstimate(ser=p, std_error=math.sqrt(p * (1 - p) / trials), trials=trials,
                       errors=errors)


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


__all__ = [
    "ChannelParams", "ImprovedSpreadSpectrum", "IssParams", "Scheme", "SerEstimate",
    "SpreadSpectrum", "attacker_estimate", "attacker_estimate_batch", "awgn",
    "channel_from_sigma", "channel_from_wnr", "decode", "decode_batch", "gen_host", "gen_key",
    "gen_keys", "gen_messages", "gen_observations", "iss_embed", "iss_from_rejection",
    "make_scheme", "ser_mc", "ss_embed",
    "watermarked_contents",
]

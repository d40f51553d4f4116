"""Shared value types: scheme parameters, keys, observations and estimate results."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class InvalidParameterError(ValueError):
    """Raised when a parameter violates its documented domain."""


class Side(enum.Enum):
    DECODE = "decode"
    ENCODE = "encode"


class Method(enum.Enum):
    CLOSED_FORM = "closed_form"
    MONTE_CARLO = "monte_carlo"
    RARE_EVENT_GEOMETRIC = "rare_event_geometric"
    RARE_EVENT_BLACKBOX = "rare_event_blackbox"
    ANGLE_APPROX = "angle_approx"


@dataclass(frozen=True)
class SchemeParams:
    """Host dimension, host standard deviation and document-to-watermark ratio.

    ``alpha`` is derived and always equals ``sqrt(n_v) * sigma_x * 10**(-dwr_db / 20)``.
    Use :func:`make_params` rather than the constructor.
    """

    n_v: int
    sigma_x: float
    dwr_db: float
    alpha: float

    @property
    def watermark_power(self) -> float:
        """Per-sample watermark power alpha**2 / n_v."""
        return self.alpha**2 / self.n_v


def make_params(n_v: int, sigma_x: float = 1.0, dwr_db: float = 10.0) -> SchemeParams:
    if int(n_v) != n_v or n_v < 2:
        raise InvalidParameterError(f"n_v must be an integer >= 2, got {n_v!r}")
    if not sigma_x > 0 or not math.isfinite(sigma_x):
        raise InvalidParameterError(f"sigma_x must be positive, got {sigma_x!r}")
    if not math.isfinite(dwr_db):
        raise InvalidParameterError(f"dwr_db must be finite, got {dwr_db!r}")
    n_v = int(n_v)
    alpha = math.sqrt(n_v) * sigma_x * 10.0 ** (-dwr_db / 20.0)
    return SchemeParams(n_v=n_v, sigma_x=float(sigma_x), dwr_db=float(dwr_db), alpha=alpha)


@dataclass(frozen=True, eq=False)
class SecretKey:
    """A unit vector on the n_v-dimensional hypersphere."""

    components: np.ndarray

    def __post_init__(self):
        c = np.array(self.components, dtype=np.float64)
        if c.ndim != 1 or c.size < 2:
            raise InvalidParameterError("key must be a vector of length >= 2")
        norm = float(np.linalg.norm(c))
        if abs(norm - 1.0) > 1e-12:
            raise InvalidParameterError(f"key must have unit norm, got {norm!r}")
        c.setflags(write=False)
        object.__setattr__(self, "components", c)

    @classmethod
    def from_vector(cls, v) -> "SecretKey":
        v = np.asarray(v, dtype=np.float64)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise InvalidParameterError("cannot normalise the zero vector")
        return cls(v / norm)

    @property
    def n_v(self) -> int:
        return self.components.size

    def __array__(self, dtype=None, copy=None):
        return self.components if dtype is None else self.components.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, SecretKey):
            return NotImplemented
        return np.array_equal(self.components, other.components)

    __hash__ = None


@dataclass(frozen=True)
class Message:
    bit: int

    def __post_init__(self):
        if self.bit not in (0, 1):
            raise InvalidParameterError(f"message bit must be 0 or 1, got {self.bit!r}")

    @property
    def sign(self) -> float:
        """(-1)**bit."""
        return -1.0 if self.bit else 1.0


@dataclass(frozen=True, eq=False)
class Observation:
    """One known-message observation: a watermarked signal and its message."""

    signal: np.ndarray
    message: Message

    def __post_init__(self):
        s = np.array(self.signal, dtype=np.float64)
        s.setflags(write=False)
        object.__setattr__(self, "signal", s)


@dataclass(frozen=True)
class EquivalenceQuery:
    epsilon: float
    side: Side = Side.DECODE

    def __post_init__(self):
        check_epsilon(self.epsilon)


def check_epsilon(epsilon: float) -> float:
    if not 0.0 < epsilon < 1.0:
        raise InvalidParameterError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    return float(epsilon)


@dataclass(frozen=True)
class EstimateResult:
    """A probability estimate together with its key length in bits.

    ``bits`` is ``-log2(p_hat)`` and ``math.inf`` when ``p_hat == 0``.
    ``std_error`` is on the probability scale.
    """

    p_hat: float
    bits: float
    std_error: float
    method: Method
    trials: int = 0
    seed: int = 0
    extra: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_probability(cls, p: float, method: Method, std_error: float = 0.0,
                         trials: int = 0, seed: int = 0, **extra) -> "EstimateResult":
        return cls(p_hat=float(p), bits=bits_from_probability(p), std_error=float(std_error),
                   method=method, trials=int(trials), seed=int(seed), extra=extra)

    @classmethod
    def from_log_probability(cls, log_p: float, method: Method, std_error: float = 0.0,
                             trials: int = 0, seed: int = 0, **extra) -> "EstimateResult":
        """Build from a natural-log probability so that tiny p keeps its bit count."""
        if log_p > 0:
            raise InvalidParameterError(f"log-probability must be <= 0, got {log_p!r}")
        bits = math.inf if log_p == -math.inf else -log_p / math.log(2.0)
        return cls(p_hat=math.exp(log_p), bits=bits + 0.0, std_error=float(std_error),
                   method=method, trials=int(trials), seed=int(seed), extra=extra)

    @property
    def relative_error(self) -> float:
        return self.std_error / self.p_hat if self.p_hat > 0 else math.inf


def bits_from_probability(p: float) -> float:
    """Key length in bits, ``-log2(p)``; ``inf`` for ``p == 0``."""
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"probability must lie in [0, 1], got {p!r}")
    if p == 0.0:
        return math.inf
    # +0.0 turns -0.0 (p == 1) into 0.0
    return -math.log2(p) + 0.0

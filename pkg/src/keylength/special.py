"""Numerical special functions used by the closed-form key lengths.

Everything here is scalar, pure and deterministic. The incomplete beta
function is evaluated in log space so that cap probabilities far below
double precision (several hundred bits) keep their relative accuracy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

from .core import InvalidParameterError

_SQRT2 = math.sqrt(2.0)
_STD_NORMAL = NormalDist()

CF_TOL = 1e-15
CF_MAX_ITER = 300
POISSON_TAIL = 1e-12
_FPMIN = 1e-300


class ConvergenceError(ArithmeticError):
    pass


# --- normal distribution ---------------------------------------------------

def std_normal_cdf(x: float) -> float:
    """Standard normal CDF, accurate in both tails."""
    return 0.5 * math.erfc(-x / _SQRT2)


def std_normal_sf(x: float) -> float:
    return 0.5 * math.erfc(x / _SQRT2)


def log_std_normal_sf(x: float) -> float:
    """log(1 - Phi(x)); switches to the asymptotic expansion where erfc underflows."""
    if x < 30.0:
        return math.log(std_normal_sf(x))
    x2 = x * x
    series = 1.0 - 1.0 / x2 + 3.0 / x2**2 - 15.0 / x2**3 + 105.0 / x2**4
    return -0.5 * x2 - math.log(x) - 0.5 * math.log(2.0 * math.pi) + math.log(series)


def std_normal_quantile(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise InvalidParameterError(f"quantile needs p in (0, 1), got {p!r}")
    return _STD_NORMAL.inv_cdf(p)


def erf(x: float) -> float:
    return math.erf(x)


def erfc(x: float) -> float:
    return math.erfc(x)


# --- incomplete beta -------------------------------------------------------

# Bernoulli coefficients B_2k / (2k (2k-1)) of the Stirling series
_STIRLING = (1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188, -691 / 360360)


def _stirling_tail(x: float) -> float:
    x2 = x * x
    s = 0.0
    xp = x
    for c in _STIRLING:
        s += c / xp
        xp *= x2
    return s


def log_beta(a: float, b: float) -> float:
    """log B(a, b).

    When one argument is large and the other small the textbook
    ``lgamma(a) + lgamma(b) - lgamma(a + b)`` cancels badly, so the large
    pair is combined through the Stirling series instead.
    """
    small, big = (a, b) if a <= b else (b, a)
    if big < 100.0:
        return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    # lgamma(big) - lgamma(big + small)
    diff = (-small * math.log(big) - (big + small - 0.5) * math.log1p(small / big) + small
            + _stirling_tail(big) - _stirling_tail(big + small))
    return math.lgamma(small) + diff


def _log_cf(x: float, y: float, a: float, b: float) -> float:
    """log I_x(a, b) by the continued fraction; needs x < (a+1)/(a+b+2)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < CF_TOL:
            break
    else:
        raise ConvergenceError(f"incomplete beta continued fraction did not converge "
                               f"(x={x!r}, a={a!r}, b={b!r})")
    return a * math.log(x) + b * math.log(y) - log_beta(a, b) - math.log(a) + math.log(h)


def _log1mexp(v: float) -> float:
    """log(1 - exp(v)) for v <= 0."""
    if v == -math.inf:
        return 0.0
    if v > -math.log(2.0):
        return math.log(-math.expm1(v))
    return math.log1p(-math.exp(v))


def _check_beta_args(x, a, b):
    if not (a > 0 and b > 0) or not (math.isfinite(a) and math.isfinite(b)):
        raise InvalidParameterError(f"incomplete beta needs a, b > 0, got a={a!r}, b={b!r}")
    if not 0.0 <= x <= 1.0:
        raise InvalidParameterError(f"incomplete beta needs x in [0, 1], got {x!r}")


def log_reg_inc_beta_pair(x: float, a: float, b: float, y: float | None = None):
    """Return ``(log I_x(a,b), log(1 - I_x(a,b)))``.

    ``y`` may carry an accurately computed ``1 - x``. The side that is small
    comes straight out of the continued fraction; the other is its log-complement.
    """
    _check_beta_args(x, a, b)
    if y is None:
        y = 1.0 - x
    if x == 0.0:
        return -math.inf, 0.0
    if y == 0.0:
        return 0.0, -math.inf
    if x < (a + 1.0) / (a + b + 2.0):
        lo = _log_cf(x, y, a, b)
        return lo, _log1mexp(lo)
    hi = _log_cf(y, x, b, a)
    return _log1mexp(hi), hi


def reg_inc_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    return math.exp(log_reg_inc_beta_pair(x, a, b)[0])


def reg_inc_beta_complement(x: float, a: float, b: float, y: float | None = None) -> float:
    """1 - I_x(a, b) without cancellation."""
    return math.exp(log_reg_inc_beta_pair(x, a, b, y)[1])


# --- F distributions -------------------------------------------------------

@dataclass(frozen=True)
class FDistParams:
    nu1: int
    nu2: int
    lam: float = 0.0

    def __post_init__(self):
        if self.nu1 < 1 or self.nu2 < 1:
            raise InvalidParameterError(f"degrees of freedom must be >= 1, got {self.nu1}, {self.nu2}")
        if not self.lam >= 0 or not math.isfinite(self.lam):
            raise InvalidParameterError(f"noncentrality must be >= 0, got {self.lam!r}")


def _beta_args(x: float, p: FDistParams):
    """Map an F quantile to the incomplete beta argument and its complement."""
    if math.isinf(x):
        return 1.0, 0.0
    den = p.nu1 * x + p.nu2
    return p.nu1 * x / den, p.nu2 / den


def _log_poisson(j: int, half_lam: float) -> float:
    if half_lam == 0.0:
        return 0.0 if j == 0 else -math.inf
    return -half_lam + j * math.log(half_lam) - math.lgamma(j + 1.0)


def _poisson_terms(half_lam: float):
    """Yield (j, weight) from the mode outwards until the tail mass < POISSON_TAIL."""
    mode = int(half_lam)
    yield mode, math.exp(_log_poisson(mode, half_lam))
    covered = math.exp(_log_poisson(mode, half_lam))
    up, down = mode + 1, mode - 1
    while 1.0 - covered >= POISSON_TAIL:
        w_up = math.exp(_log_poisson(up, half_lam))
        w_down = math.exp(_log_poisson(down, half_lam)) if down >= 0 else 0.0
        if w_up == 0.0 and w_down == 0.0:
            break
        if w_up >= w_down:
            yield up, w_up
            covered += w_up
            up += 1
        else:
            yield down, w_down
            covered += w_down
            down -= 1


def central_f_cdf(x: float, nu1: int, nu2: int) -> float:
    return noncentral_f_cdf(x, FDistParams(nu1, nu2, 0.0))


def noncentral_f_cdf(x: float, params: FDistParams) -> float:
    """CDF of the noncentral F distribution as a Poisson mixture of incomplete betas."""
    if not x >= 0:
        raise InvalidParameterError(f"F quantile must be >= 0, got {x!r}")
    if x == 0.0:
        return 0.0
    u, v = _beta_args(x, params)
    a, b = params.nu1 / 2.0, params.nu2 / 2.0
    total = 0.0
    for j, w in _poisson_terms(params.lam / 2.0):
        total += w * math.exp(log_reg_inc_beta_pair(u, a + j, b, v)[0])
    return min(max(total, 0.0), 1.0)


def noncentral_f_logsf(x: float, params: FDistParams) -> float:
    """log(1 - F(x; nu1, nu2, lam)), accurate deep into the upper tail.

    Terms are summed in log space. The series is walked away from the
    Poisson mode in both directions and each direction stops once a bound
    on everything it has left is negligible relative to the running sum.
    """
    if not x >= 0:
        raise InvalidParameterError(f"F quantile must be >= 0, got {x!r}")
    if x == 0.0:
        return 0.0
    u, v = _beta_args(x, params)
    if v == 0.0:
        return -math.inf
    a, b = params.nu1 / 2.0, params.nu2 / 2.0
    h = params.lam / 2.0

    def log_term(j):
        return _log_poisson(j, h) + log_reg_inc_beta_pair(u, a + j, b, v)[1]

    mode = int(h)
    logs = [log_term(mode)]
    rel = math.log(1e-17)

    def running():
        m = max(logs)
        return m + math.log(sum(math.exp(t - m) for t in logs))

    # upward: the term's beta factor is <= 1 and the Poisson tail beyond j is
    # bounded by a geometric series once j + 1 > h
    j = mode + 1
    while True:
        logs.append(log_term(j))
        lw = _log_poisson(j + 1, h)
        ratio = h / (j + 2)
        if ratio < 1.0:
            bound = lw - math.log1p(-ratio)
            if bound < running() + rel:
                break
        j += 1
    # downward: both the weight and the beta factor shrink as j decreases
    j = mode - 1
    while j >= 0:
        t = log_term(j)
        logs.append(t)
        ratio = j / h if h > 0 else 0.0
        if ratio < 1.0 and t - math.log1p(-ratio) < running() + rel:
            break
        j -= 1
    return min(running(), 0.0)


def noncentral_f_sf(x: float, params: FDistParams) -> float:
    return math.exp(noncentral_f_logsf(x, params))

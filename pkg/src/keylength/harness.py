"""Experiment grids, figure presets and CSV output."""
from __future__ import annotations

import io
import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .core import EstimateResult, InvalidParameterError, Method, make_params
from .estimators import (EmptyRegionError, EstimationError, MonteCarloConfig, NonConvergenceError,
                         RareEventConfig, estimate_equivalence_angle, keylength_from_angle, mc_effective_keylength,
                         rare_event_keylength_blackbox, rare_event_keylength_geometric)
from .rng import substream
from .schemes import channel_from_wnr, make_scheme, ser_mc
from .theory import (KeyLengthQuery, asymptotic_keylength, basic_keylength,
                     equivalence_angle, kma_keylength, ser_theory)

COLUMNS = ("scheme", "n_v", "dwr_db", "epsilon", "n_o", "gamma", "wnr_db", "method", "p_hat",
           "bits", "std_error", "trials", "seed", "wall_time_ms")

COMMANDS = ("theory", "mc", "rare-event", "angle", "ser", "sweep")

# desk-scale defaults and the large counts restored by --full
DEFAULTS = {"trials": 100_000, "nt": 100_000, "nt_blackbox": 10_000}
FULL = {"trials": 1_000_000, "nt": 1_000_000, "nt_blackbox": 50_000}


@dataclass
class ExperimentSpec:
    command: str
    n_v: list = field(default_factory=lambda: [300])
    dwr_db: list = field(default_factory=lambda: [10.0])
    epsilon: list = field(default_factory=lambda: [0.01])
    n_o: list = field(default_factory=lambda: [0])
    gamma: list = field(default_factory=lambda: [0.0])
    wnr_db: list = field(default_factory=lambda: [math.inf])
    scheme: str = "ss"
    methods: tuple = ()
    trials: int | None = None
    n_t: int | None = None
    n_t_blackbox: int | None = None
    n1: int = 1
    particles: int = 80
    mu: float = 0.3
    moves: int = 20
    max_levels: int = 200_000
    fixed_mu: bool = False
    indicator: str = "cone"
    score: str = "geometric"
    asymptote: bool = False
    seed: int = 0
    threads: int = 1
    out: str | None = None
    seed_bits: int | None = None
    full: bool = False
    timing: bool = False
    fig: int | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidParameterError(f"unknown command {self.command!r}")
        for name in ("n_v", "dwr_db", "epsilon", "n_o", "gamma", "wnr_db"):
            if not getattr(self, name):
                raise InvalidParameterError(f"axis {name} is empty")
        if self.scheme not in ("ss", "iss"):
            raise InvalidParameterError(f"unknown scheme {self.scheme!r}")
        if self.threads < 1:
            raise InvalidParameterError("threads must be >= 1")
        if self.seed_bits is not None and self.seed_bits <= 0:
            raise InvalidParameterError("seed-bits must be positive")

    def resolved(self, key: str) -> int:
        explicit = {"trials": self.trials, "nt": self.n_t, "nt_blackbox": self.n_t_blackbox}[key]
        if explicit is not None:
            return explicit
        return (FULL if self.full else DEFAULTS)[key]


@dataclass(frozen=True)
class Point:
    """One grid point; ``method`` names the computation."""

    method: str
    scheme: str
    n_v: float
    dwr_db: float
    epsilon: float | None = None
    n_o: int | None = None
    gamma: float | None = None
    wnr_db: float | None = None

    def label(self) -> str:
        parts = [f"{k}={v}" for k, v in self.__dict__.items() if v is not None]
        return " ".join(parts)


class PointFailure(RuntimeError):
    def __init__(self, point: Point, cause: Exception):
        super().__init__(f"numerical failure at [{point.label()}]: {cause}")
        self.point = point
        self.cause = cause


def clamp_to_seed_bits(result: EstimateResult, seed_bits: int) -> EstimateResult:
    """Cap the key length at the size of the generator seed."""
    if seed_bits <= 0:
        raise InvalidParameterError(f"seed_bits must be positive, got {seed_bits}")
    if result.bits <= seed_bits:
        return result
    return replace(result, bits=float(seed_bits), p_hat=max(result.p_hat, 2.0**-seed_bits))


# --- grid construction -----------------------------------------------------

def _scheme_gammas(spec: ExperimentSpec):
    return spec.gamma if spec.scheme == "iss" else [None]


def command_points(spec: ExperimentSpec) -> list[Point]:
    cmd = spec.command
    if cmd == "sweep":
        return figure_points(spec)
    pts = []
    if cmd == "theory":
        if spec.scheme != "ss":
            raise InvalidParameterError("closed forms exist only for the ss scheme")
        if spec.asymptote:
            for d, e in itertools.product(spec.dwr_db, spec.epsilon):
                pts.append(Point("asymptotic", "ss", math.inf, d, e, 0))
            return pts
        for nv, d, e, no in itertools.product(spec.n_v, spec.dwr_db, spec.epsilon, spec.n_o):
            pts.append(Point("closed_form", "ss", nv, d, e, no))
        return pts
    if cmd == "ser":
        for nv, d, g, w in itertools.product(spec.n_v, spec.dwr_db, _scheme_gammas(spec),
                                             spec.wnr_db):
            if spec.scheme == "ss":
                pts.append(Point("ser_closed_form", "ss", nv, d, None, None, g, w))
            pts.append(Point("ser_monte_carlo", spec.scheme, nv, d, None, None, g, w))
        return pts
    method = {"mc": "monte_carlo", "angle": "angle_approx",
              "rare-event": f"rare_event_{'blackbox' if spec.score == 'blackbox' else 'geometric'}"}[cmd]
    n_os = spec.n_o if cmd == "mc" else [0]
    for nv, d, e, no, g in itertools.product(spec.n_v, spec.dwr_db, spec.epsilon, n_os,
                                             _scheme_gammas(spec)):
        pts.append(Point(method, spec.scheme, nv, d, e, no, g))
    return pts


FIGURES = (3, 4, 5, 6, 7, 8, 9)
FIG3_NV = (8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096)
# the black-box score holds n_t x n_v contents in memory
FIG3_BLACKBOX = 64
FIG3_BLACKBOX_FULL = 512
# the equivalent region is empty beyond gamma ~ 1.9 at this operating point
FIG9_GAMMA = tuple(round(0.2 * i, 10) for i in range(10))


def figure_points(spec: ExperimentSpec) -> list[Point]:
    """Preset figure grids; explicit axis flags other than --wnr (fig 9) are not consulted."""
    fig = spec.fig
    eps = 0.01
    pts = []
    if fig == 3:
        for d in (8.0, 10.0, 12.0):
            pts.append(Point("asymptotic", "ss", math.inf, d, eps, 0))
            for nv in FIG3_NV:
                pts.append(Point("closed_form", "ss", nv, d, eps, 0))
                pts.append(Point("angle_approx", "ss", nv, d, eps, 0))
                pts.append(Point("rare_event_geometric", "ss", nv, d, eps, 0))
                if nv <= (FIG3_BLACKBOX_FULL if spec.full else FIG3_BLACKBOX):
                    pts.append(Point("rare_event_blackbox", "ss", nv, d, eps, 0))
    elif fig == 4:
        for e in (0.1, 0.01, 0.001):
            for d in range(0, 21):
                pts.append(Point("asymptotic", "ss", math.inf, float(d), e, 0))
    elif fig in (5, 6):
        n_o = 1 if fig == 5 else 10
        for d in (8.0, 10.0, 12.0):
            for nv in (16, 32, 64, 128, 256, 512, 1024):
                pts.append(Point("closed_form", "ss", nv, d, eps, n_o))
                pts.append(Point("monte_carlo", "ss", nv, d, eps, n_o))
    elif fig == 7:
        for nv in (64, 128, 256, 512, 1024):
            for d in range(0, 21):
                pts.append(Point("ser_closed_form", "ss", nv, float(d), None, None, None, math.inf))
                pts.append(Point("closed_form", "ss", nv, float(d), eps, 0))
    elif fig == 8:
        for d in (4.0, 6.0, 8.0, 10.0, 12.0):
            for nv in (16, 32, 64, 128, 256, 512, 1024, 2048, 4096):
                pts.append(Point("ser_closed_form", "ss", nv, d, None, None, None, math.inf))
                pts.append(Point("closed_form", "ss", nv, d, eps, 0))
    elif fig == 9:
        wnrs = [w for w in spec.wnr_db if w != math.inf] or [-10.0]
        for w in wnrs:
            for g in FIG9_GAMMA:
                pts.append(Point("ser_monte_carlo", "iss", 80, 10.0, None, None, g, w))
                pts.append(Point("angle_approx", "iss", 80, 10.0, eps, 0, g))
                pts.append(Point("rare_event_blackbox", "iss", 80, 10.0, eps, 0, g))
    else:
        raise InvalidParameterError(f"--fig must be one of {FIGURES}, got {fig!r}")
    return pts


# --- evaluation --------------------------------------------------------------

def _scheme_for(point: Point):
    params = make_params(int(point.n_v), 1.0, point.dwr_db)
    return params, make_scheme(params, point.scheme, point.gamma or 0.0)


def _cos_theta(scheme, point: Point, spec: ExperimentSpec) -> float:
    """Cone of equivalent keys: closed form for SS, angle estimate otherwise.

    An empty region comes back as a cosine above 1.
    """
    if point.scheme == "ss":
        return equivalence_angle(scheme.params, point.epsilon).cos_theta
    try:
        est = estimate_equivalence_angle(scheme, point.epsilon, spec.resolved("nt"),
                                         substream(spec.seed, "angle"))
    except EmptyRegionError:
        return math.inf
    return est.cos_theta


def evaluate(point: Point, spec: ExperimentSpec, workers: int = 1) -> EstimateResult:
    m = point.method
    seed = spec.seed
    rare = RareEventConfig(n_particles=spec.particles, mu=spec.mu, moves_per_level=spec.moves,
                           max_levels=spec.max_levels, seed=seed, fixed_mu=spec.fixed_mu)
    if m == "asymptotic":
        return asymptotic_keylength(point.dwr_db, point.epsilon)
    params, scheme = _scheme_for(point)
    if m == "closed_form":
        if point.n_o:
            return kma_keylength(KeyLengthQuery(params, point.epsilon, point.n_o))
        return basic_keylength(params, point.epsilon)
    if m == "ser_closed_form":
        channel = channel_from_wnr(params, point.wnr_db)
        return EstimateResult.from_probability(ser_theory(params, channel.sigma_n),
                                               method=Method.CLOSED_FORM, seed=seed)
    if m == "ser_monte_carlo":
        channel = channel_from_wnr(params, point.wnr_db)
        est = ser_mc(scheme, channel, spec.resolved("trials"), seed, workers=workers)
        return EstimateResult.from_probability(est.ser, method=Method.MONTE_CARLO,
                                               std_error=est.std_error, trials=est.trials,
                                               seed=seed)
    if m == "monte_carlo":
        cfg = MonteCarloConfig(n1=spec.n1, n2=spec.resolved("trials"), n_t=spec.resolved("nt"),
                               seed=seed, indicator=spec.indicator, workers=workers)
        cos = _cos_theta(scheme, point, spec) if spec.indicator == "cone" else None
        return mc_effective_keylength(scheme, point.epsilon, point.n_o or 0, cfg, cos_theta=cos)
    if m == "angle_approx":
        try:
            est = estimate_equivalence_angle(scheme, point.epsilon, spec.resolved("nt"),
                                             substream(seed, "angle"))
        except EmptyRegionError:
            return EstimateResult.from_probability(0.0, Method.ANGLE_APPROX,
                                                   trials=spec.resolved("nt"), seed=seed)
        return keylength_from_angle(est, params.n_v, seed=seed)
    if m == "rare_event_geometric":
        return rare_event_keylength_geometric(_cos_theta(scheme, point, spec), params.n_v, rare)
    if m == "rare_event_blackbox":
        return rare_event_keylength_blackbox(scheme, point.epsilon, spec.resolved("nt_blackbox"),
                                             rare)
    raise InvalidParameterError(f"unknown method {m!r}")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v)) if v != 0 or math.copysign(1, v) > 0 else "0"
    return repr(v)


def result_row(point: Point, result: EstimateResult, spec: ExperimentSpec,
               wall_ms: float | None) -> list[str]:
    nv = point.n_v if math.isinf(point.n_v) else int(point.n_v)
    vals = [point.scheme, nv, point.dwr_db, point.epsilon, point.n_o,
            point.gamma if point.scheme == "iss" else None, point.wnr_db, point.method,
            result.p_hat, result.bits, result.std_error, result.trials, spec.seed,
            None if wall_ms is None else round(wall_ms, 3)]
    return [_fmt(v) for v in vals]


def run(spec: ExperimentSpec) -> tuple[list[Point], list[list[str]]]:
    """Evaluate every grid point; rows come back in grid order."""
    points = command_points(spec)
    grid_workers = spec.threads if len(points) > 1 else 1
    inner_workers = 1 if grid_workers > 1 else spec.threads

    def one(point):
        t0 = time.perf_counter()
        try:
            res = evaluate(point, spec, workers=inner_workers)
        except (ArithmeticError, NonConvergenceError, EstimationError) as exc:
            raise PointFailure(point, exc) from exc
        if spec.seed_bits is not None:
            res = clamp_to_seed_bits(res, spec.seed_bits)
        wall = (time.perf_counter() - t0) * 1e3 if spec.timing else None
        return result_row(point, res, spec, wall)

    if grid_workers > 1:
        with ThreadPoolExecutor(max_workers=grid_workers) as pool:
            rows = list(pool.map(one, points))
    else:
        rows = [one(p) for p in points]
    return points, rows


def to_csv(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    buf.write(",".join(COLUMNS) + "\n")
    for r in rows:
        buf.write(",".join(r) + "\n")
    return buf.getvalue()

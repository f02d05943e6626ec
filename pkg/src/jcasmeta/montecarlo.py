"""Monte Carlo simulator of the joint communication and sensing network.

Base stations form a PPP on a square window centred at the origin.  The
typical user and the typical sensed object both sit at the origin.  Every
link's LoS state is drawn once per realization and frozen.  Fading is either
averaged out exactly (``SEMI_ANALYTIC``) or sampled (``FADING_DRAWS``).

All randomness flows from ``SeedSequence(base_seed, spawn_key=(index, ...))``
through Philox streams, so a realization depends only on ``(base_seed, index)``
and batches reduce identically regardless of worker count or completion order.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .analytic.params import NetworkParams, SirThresholds
from .propagation import LinkState, los_probability

log = logging.getLogger(__name__)

MIN_GUARD = 500.0

# stream purposes under a realization seed
_BS_POINTS, _UE_STATES, _SO_STATES, _PAIR_STATES, _UE_FADING, _SO_FADING = range(6)

# fading draws are generated in blocks of at most this many variates
_DRAW_BLOCK = 4_000_000


class EstimatorMode(enum.Enum):
    SEMI_ANALYTIC = "semi_analytic"
    FADING_DRAWS = "fading_draws"


@dataclass(frozen=True)
class SimConfig:
    params: NetworkParams = field(default_factory=NetworkParams)
    bs_window_half_width: float = 2000.0
    eval_window_half_width: float = 500.0
    n_realizations: int = 100
    n_fading_draws: int = 1000
    estimator_mode: EstimatorMode = EstimatorMode.SEMI_ANALYTIC
    base_seed: int = 0

    def __post_init__(self) -> None:
        if not self.eval_window_half_width > 0:
            raise ValueError("eval_window_half_width must be positive")
        if self.eval_window_half_width > self.bs_window_half_width - MIN_GUARD:
            raise ValueError(
                f"bs_window_half_width must exceed eval_window_half_width by at least {MIN_GUARD:g} m"
            )
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if self.n_fading_draws < 1:
            raise ValueError("n_fading_draws must be >= 1")
        if not 0 <= self.base_seed < 2**64:
            raise ValueError("base_seed must be a 64-bit unsigned integer")
        if not isinstance(self.estimator_mode, EstimatorMode):
            object.__setattr__(self, "estimator_mode", EstimatorMode(self.estimator_mode))


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for ``(seed, key...)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def realization_seed(base_seed: int, index: int) -> int:
    lo, hi = np.random.SeedSequence(base_seed, spawn_key=(index,)).generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def sample_ppp(density: float, half_width: float, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous PPP on the square ``[-half_width, half_width]^2``; shape (n, 2)."""
    if density < 0:
        raise ValueError("density must be non-negative")
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    n = rng.poisson(density * (2.0 * half_width) ** 2)
    return rng.uniform(-half_width, half_width, size=(n, 2))


@dataclass(frozen=True)
class NetworkRealization:
    """One frozen topology.

    ``ue_los[k]`` and ``so_los[k]`` are the LoS states of base station k seen
    from the typical user and object.  ``so_serving`` is the nearest base
    station LoS to the object (-1 when none), and ``pair_los[k]`` the state of
    base station k as seen from that serving station.
    """

    bs_points: np.ndarray
    ue_los: np.ndarray
    so_los: np.ndarray
    so_serving: int
    pair_los: np.ndarray
    realization_seed: int
    params: NetworkParams

    @property
    def distances(self) -> np.ndarray:
        return np.hypot(self.bs_points[:, 0], self.bs_points[:, 1])

    def link_state(self, role: str, k: int) -> LinkState:
        states = {"ue": self.ue_los, "so": self.so_los, "pair": self.pair_los}[role]
        return LinkState.LOS if states[k] else LinkState.NLOS


def build_realization(cfg: SimConfig, index: int) -> NetworkRealization:
    if not 0 <= index < cfg.n_realizations:
        raise ValueError(f"realization index {index} outside [0, {cfg.n_realizations})")
    seed = realization_seed(cfg.base_seed, index)
    params = cfg.params
    beta = params.channel.beta
    pts = sample_ppp(params.lambda_b, cfg.bs_window_half_width, stream(seed, _BS_POINTS))
    d = np.hypot(pts[:, 0], pts[:, 1])
    ue_los = stream(seed, _UE_STATES).random(d.size) < los_probability(d, beta)
    so_los = stream(seed, _SO_STATES).random(d.size) < los_probability(d, beta)
    serving = -1
    pair_los = np.zeros(d.size, dtype=bool)
    if so_los.any():
        cand = np.flatnonzero(so_los)
        serving = int(cand[np.argmin(d[cand])])
        dk = np.hypot(*(pts - pts[serving]).T)
        pair_los = stream(seed, _PAIR_STATES).random(d.size) < los_probability(dk, beta)
        pair_los[serving] = True
    return NetworkRealization(pts, ue_los, so_los, serving, pair_los, seed, params)


def _fading_fraction(signal: float, interf: np.ndarray, theta: float, n_draws: int, rng, signal_fading: bool = True) -> float:
    """Fraction of draws with h0 signal / sum h_k interf_k > theta (h unit exponential)."""
    hits = 0
    per = max(1, _DRAW_BLOCK // max(1, interf.size))
    done = 0
    while done < n_draws:
        m = min(per, n_draws - done)
        h0 = rng.exponential(size=m) if signal_fading else np.ones(m)
        total = rng.exponential(size=(m, interf.size)) @ interf if interf.size else np.zeros(m)
        hits += int(np.count_nonzero(h0 * signal > theta * total))
        done += m
    return hits / n_draws


def _ue_losses(rz: NetworkRealization) -> np.ndarray:
    ch = rz.params.channel
    d = rz.distances
    k = np.where(rz.ue_los, ch.k_los, ch.k_nlos)
    a = np.where(rz.ue_los, ch.alpha_los, ch.alpha_nlos)
    return k * d ** (-a)


def ue_conditional_coverage(
    rz: NetworkRealization,
    theta_c: float,
    mode: EstimatorMode = EstimatorMode.SEMI_ANALYTIC,
    n_draws: int = 1000,
    rng: np.random.Generator | None = None,
) -> float:
    """Fading-conditional coverage of the typical user served by its strongest base station."""
    if rz.bs_points.shape[0] == 0:
        raise ValueError("realization holds no base station")
    gain = _ue_losses(rz)
    k0 = int(np.argmax(gain))
    others = np.delete(gain, k0)
    if mode is EstimatorMode.SEMI_ANALYTIC:
        return float(np.exp(-np.sum(np.log1p(theta_c * others / gain[k0]))))
    rng = rng or stream(rz.realization_seed, _UE_FADING)
    return _fading_fraction(gain[k0], others, theta_c, n_draws, rng)


def so_conditional_coverage(
    rz: NetworkRealization,
    theta_s: float,
    mode: EstimatorMode = EstimatorMode.SEMI_ANALYTIC,
    n_draws: int = 1000,
    rng: np.random.Generator | None = None,
) -> float:
    """Fading and cross-section conditional coverage of the typical sensed object.

    Zero when no base station is LoS to the object.
    """
    if rz.so_serving < 0:
        return 0.0
    ch = rz.params.channel
    x0 = rz.bs_points[rz.so_serving]
    r0 = float(np.hypot(*x0))
    mask = np.ones(rz.bs_points.shape[0], dtype=bool)
    mask[rz.so_serving] = False
    dk = np.hypot(*(rz.bs_points[mask] - x0).T)
    los = rz.pair_los[mask]
    interf = np.where(los, ch.k_los, ch.k_nlos) * dk ** (-np.where(los, ch.alpha_los, ch.alpha_nlos))
    signal = ch.k_los * r0 ** (-2.0 * ch.alpha_los)
    if mode is EstimatorMode.SEMI_ANALYTIC:
        return float(np.exp(-np.sum(np.log1p(theta_s * interf / signal))))
    rng = rng or stream(rz.realization_seed, _SO_FADING)
    return _fading_fraction(signal, interf, theta_s, n_draws, rng)


@dataclass(frozen=True)
class RealizationOutcome:
    index: int
    seed: int
    p_c: float
    p_s: float
    error: str | None = None


def _run_one(args) -> RealizationOutcome:
    cfg, th, index = args
    seed = realization_seed(cfg.base_seed, index)
    try:
        rz = build_realization(cfg, index)
        pc = ue_conditional_coverage(rz, th.theta_c, cfg.estimator_mode, cfg.n_fading_draws)
        ps = so_conditional_coverage(rz, th.theta_s, cfg.estimator_mode, cfg.n_fading_draws)
        return RealizationOutcome(index, seed, pc, ps)
    except (ValueError, ArithmeticError) as exc:
        return RealizationOutcome(index, seed, math.nan, math.nan, str(exc))


def run_realizations(cfg: SimConfig, th: SirThresholds, threads: int = 1) -> list[RealizationOutcome]:
    """Per-realization coverages in index order; failures are recorded, not raised."""
    jobs = [(cfg, th, i) for i in range(cfg.n_realizations)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        out = [_run_one(j) for j in jobs]
    for o in out:
        if o.error:
            log.warning("realization %d (seed %d) failed: %s", o.index, o.seed, o.error)
    return out


def wilson_interval(successes: np.ndarray, n: int, confidence: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
    lo = np.empty(len(successes))
    hi = np.empty(len(successes))
    for i, k in enumerate(successes):
        ci = binomtest(int(k), n).proportion_ci(confidence_level=confidence, method="wilson")
        lo[i], hi[i] = ci.low, ci.high
    return lo, hi


@dataclass
class EmpiricalCurve:
    x: np.ndarray
    fraction: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n: int

    @property
    def half_width(self) -> np.ndarray:
        return 0.5 * (self.ci_high - self.ci_low)


def empirical_ccdf(samples: np.ndarray, x_grid) -> EmpiricalCurve:
    """Fraction of samples strictly above each x with 95% Wilson bands."""
    s = np.sort(np.asarray(samples, dtype=float))
    x = np.asarray(x_grid, dtype=float)
    n = s.size
    if n == 0:
        raise ValueError("no samples")
    above = n - np.searchsorted(s, x, side="right")
    lo, hi = wilson_interval(above, n)
    return EmpiricalCurve(x, above / n, lo, hi, n)


@dataclass
class EmpiricalMeta:
    """Per-realization coverages and empirical CCDFs for 'comm', 'sensing' and 'jcas'."""

    samples: dict[str, np.ndarray]
    curves: dict[str, EmpiricalCurve]
    estimator_mode: EstimatorMode
    outcomes: list[RealizationOutcome]

    @property
    def ccdf(self) -> EmpiricalCurve:
        return self.curves["jcas"]

    @property
    def failures(self) -> list[RealizationOutcome]:
        return [o for o in self.outcomes if o.error]


def empirical_meta(cfg: SimConfig, th: SirThresholds, x_grid, threads: int = 1) -> EmpiricalMeta:
    outcomes = run_realizations(cfg, th, threads)
    ok = [o for o in outcomes if o.error is None]
    if not ok:
        raise RuntimeError("every realization failed")
    w_u, w_s = cfg.params.weights
    pc = np.array([o.p_c for o in ok])
    ps = np.array([o.p_s for o in ok])
    samples = {"comm": pc, "sensing": ps, "jcas": w_u * pc + w_s * ps}
    curves = {k: empirical_ccdf(v, x_grid) for k, v in samples.items()}
    return EmpiricalMeta(samples, curves, cfg.estimator_mode, outcomes)

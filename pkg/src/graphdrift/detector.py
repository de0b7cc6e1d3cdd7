"""CUSUM-style sequential change detection on embedded graph windows.

The embedded stream is cut into non-overlapping windows of ``n`` vectors.
Each window mean is compared with the training mean through a Mahalanobis
distance ``s_w``; the cumulative statistic

    S_w = max(0, S_{w-1} + s_w - q),   S_0 = 0

raises an alarm when ``S_w > h_w``.  Thresholds ``h_w`` are calibrated by
Monte Carlo so that, under the null, an alarm fires with probability
``alpha = 1 / ARL0`` at every step given that none fired before.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .errors import DegeneratePrototypesError, InsufficientSimulationsError, InvalidInputError

COND_LIMIT = 1e12
SHRINK_EPS = 1e-6
CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class BaselineModel:
    """Training mean, covariance and the inverse window-difference covariance."""

    mean0: np.ndarray
    cov: np.ndarray
    scale: float
    sigma_inverse: np.ndarray
    shrunk: bool = False

    @property
    def M(self) -> int:
        return self.mean0.shape[0]

    @property
    def sigma(self) -> np.ndarray:
        """Covariance of the difference between training and window means."""
        return np.linalg.inv(self.sigma_inverse)


def fit_baseline(T_p, n: int) -> BaselineModel:
    """Estimate the nominal mean and covariance from embedded training vectors.

    The difference between the training mean and a window mean of ``n``
    vectors has covariance ``(1/|T_p| + 1/n) * cov``.  Ill-conditioned
    covariances are shrunk slightly towards a multiple of the identity; if that
    does not help, the prototypes are redundant and
    :class:`DegeneratePrototypesError` is raised.
    """
    Y = np.asarray(T_p, dtype=float)
    if Y.ndim != 2:
        raise InvalidInputError("T_p must be a 2-D array of dissimilarity vectors")
    size, M = Y.shape
    if size < M + 2:
        raise InvalidInputError(f"need at least M+2={M + 2} training vectors, got {size}")
    if n < 1:
        raise InvalidInputError("window size must be >= 1")
    mean0 = Y.mean(axis=0)
    cov = np.atleast_2d(np.cov(Y, rowvar=False, ddof=1))
    scale = 1.0 / size + 1.0 / n
    sigma = scale * cov
    shrunk = False
    if _ill_conditioned(sigma):
        cov = (1 - SHRINK_EPS) * cov + SHRINK_EPS * np.trace(cov) / M * np.eye(M)
        sigma = scale * cov
        shrunk = True
        if _ill_conditioned(sigma):
            raise DegeneratePrototypesError(
                "embedded training covariance is singular; prototypes are redundant")
    inv = np.linalg.inv(sigma)
    inv = (inv + inv.T) / 2
    return BaselineModel(mean0, cov, scale, inv, shrunk)


def _ill_conditioned(S: np.ndarray) -> bool:
    lam = np.linalg.eigvalsh((S + S.T) / 2)
    return not (lam[0] > 0 and lam[-1] / lam[0] <= COND_LIMIT)


def mahalanobis(diff, sigma_inverse: np.ndarray) -> np.ndarray:
    diff = np.asarray(diff, dtype=float)
    q = np.einsum("...i,ij,...j->...", diff, sigma_inverse, diff)
    return np.sqrt(np.maximum(q, 0.0))


def window_statistic(model: BaselineModel, window) -> float:
    """Mahalanobis distance between the training mean and the window mean."""
    W = np.atleast_2d(np.asarray(window, dtype=float))
    if W.shape[0] == 0:
        raise InvalidInputError("empty window")
    if W.shape[1] != model.M:
        raise InvalidInputError(f"window vectors have dimension {W.shape[1]}, expected {model.M}")
    return float(mahalanobis(model.mean0 - W.mean(axis=0), model.sigma_inverse))


def window_statistics(model: BaselineModel, stream, n: int) -> np.ndarray:
    """``s_w`` for every complete window of ``stream``; the remainder is dropped."""
    Y = np.asarray(stream, dtype=float)
    if Y.ndim != 2 or Y.shape[1] != model.M:
        raise InvalidInputError(f"stream must be (T, {model.M})")
    W = Y.shape[0] // n
    means = Y[: W * n].reshape(W, n, model.M).mean(axis=1)
    return mahalanobis(model.mean0 - means, model.sigma_inverse)


@dataclass(frozen=True)
class DetectorState:
    """Cumulative statistic, windows since the last reset, offset and alarms."""

    S: float = 0.0
    w: int = 0
    q: float = 0.0
    alarms: tuple[int, ...] = ()
    t: int = 0  # windows consumed since the start


def cusum_step(state: DetectorState, s_w: float, h_w: float) -> tuple[DetectorState, bool]:
    """One step of the recursion; on alarm the statistic and counter reset."""
    S = max(0.0, state.S + (s_w - state.q))
    t = state.t + 1
    if S > h_w:
        return replace(state, S=0.0, w=0, t=t, alarms=state.alarms + (t,)), True
    return replace(state, S=S, w=state.w + 1, t=t), False


def default_offset(M: int) -> float:
    """Square root of the third quartile of chi-square with ``M`` dof."""
    if M < 1:
        raise InvalidInputError("M must be >= 1")
    return float(np.sqrt(stats.chi2.ppf(0.75, M)))


@dataclass(frozen=True, eq=False)
class ThresholdTable:
    """Time-dependent thresholds ``h_1 .. h_W``; ``h_W`` is held beyond ``W``."""

    alpha: float
    horizon: int
    h: np.ndarray
    num_sims: int
    seed: int = 0
    q: float = 0.0
    M: int | None = None

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if h.shape != (self.horizon,) or not np.all(np.isfinite(h)) or np.any(h < 0):
            raise InvalidInputError("threshold table must hold `horizon` finite nonnegative values")
        object.__setattr__(self, "h", h)

    @property
    def arl0(self) -> float:
        return 1.0 / self.alpha

    def threshold(self, w: int) -> float:
        """Threshold for the ``w``-th window after a (re)start, ``w >= 1``."""
        return float(self.h[min(max(w, 1), self.horizon) - 1])

    def to_json(self) -> str:
        return json.dumps({"alpha": self.alpha, "horizon": self.horizon,
                           "num_sims": self.num_sims, "seed": self.seed, "q": self.q,
                           "M": self.M, "h": self.h.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "ThresholdTable":
        p = json.loads(text)
        return cls(float(p["alpha"]), int(p["horizon"]), np.array(p["h"], dtype=float),
                   int(p["num_sims"]), int(p.get("seed", 0)), float(p.get("q", 0.0)),
                   p.get("M"))


Sampler = Callable[[np.random.Generator, int], np.ndarray]


def chi_sampler(M: int) -> Sampler:
    """Draws of ``s = sqrt(chi2_M)``."""
    return lambda rng, size: np.sqrt(rng.chisquare(M, size))


def empirical_sampler(values) -> Sampler:
    """Bootstrap draws from a finite sample of statistic values."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise InvalidInputError("empty sample for the bootstrap sampler")
    return lambda rng, size: v[rng.integers(0, v.size, size)]


def simulate_thresholds(sampler: Sampler, q: float, arl0: float, num_sims: int,
                        horizon: int, seed: int = 0, threads: int = 1) -> np.ndarray:
    """Conditional ``1 - 1/arl0`` quantiles of ``S_w`` over simulated trajectories.

    At every step the trajectories exceeding the new threshold are dropped and
    replaced by copies of randomly chosen survivors, so the population keeps
    representing ``S_w`` conditioned on no earlier alarm.  Draws come from
    fixed-size chunks with their own seeded generators, hence the result does
    not depend on ``threads``.
    """
    alpha = 1.0 / arl0
    min_survivors = 100.0 / alpha
    root = np.random.SeedSequence(seed)
    n_chunks = -(-num_sims // CHUNK)
    chunk_seeds, resample_seed = root.spawn(n_chunks), root.spawn(1)[0]
    gens = [np.random.default_rng(s) for s in chunk_seeds]
    bounds = [(i * CHUNK, min(num_sims, (i + 1) * CHUNK)) for i in range(n_chunks)]
    resample = np.random.default_rng(resample_seed)
    S = np.zeros(num_sims)
    h = np.empty(horizon)
    pool = ThreadPoolExecutor(threads) if threads > 1 else None

    def advance(i):
        lo, hi = bounds[i]
        S[lo:hi] = np.maximum(0.0, S[lo:hi] + sampler(gens[i], hi - lo) - q)

    try:
        for w in range(horizon):
            if pool is None:
                for i in range(n_chunks):
                    advance(i)
            else:
                list(pool.map(advance, range(n_chunks)))
            h[w] = np.quantile(S, 1.0 - alpha)
            exceed = S > h[w]
            n_exc = int(exceed.sum())
            survivors = np.flatnonzero(~exceed)
            if survivors.size < min_survivors:
                raise InsufficientSimulationsError(
                    f"only {survivors.size} trajectories survive at w={w + 1}; "
                    f"need at least {min_survivors:.0f} (increase num_sims)")
            if n_exc:
                S[exceed] = S[survivors[resample.integers(0, survivors.size, n_exc)]]
    finally:
        if pool is not None:
            pool.shutdown()
    return h


def calibrate_thresholds(M: int, arl0: int = 200, num_sims: int = 1_000_000,
                         horizon: int | None = None, seed: int = 0,
                         q: float | None = None, threads: int = 1) -> ThresholdTable:
    """Monte-Carlo threshold table for ``s_w**2 ~ chi2_M`` under the null.

    ``horizon`` defaults to ``20 * arl0`` windows.
    """
    if arl0 < 2:
        raise InvalidInputError("arl0 must be >= 2")
    if num_sims < 10_000:
        raise InvalidInputError("num_sims must be >= 1e4")
    horizon = int(horizon or 20 * arl0)
    q = default_offset(M) if q is None else float(q)
    h = simulate_thresholds(chi_sampler(M), q, arl0, num_sims, horizon, seed, threads)
    return ThresholdTable(1.0 / arl0, horizon, h, num_sims, seed, q, M)


def first_threshold_closed_form(M: int, arl0: float, q: float | None = None) -> float:
    """Exact ``h_1 = max(0, sqrt(chi2_M^{-1}(1 - alpha)) - q)``."""
    q = default_offset(M) if q is None else q
    return max(0.0, float(np.sqrt(stats.chi2.ppf(1.0 - 1.0 / arl0, M))) - q)


@dataclass
class DetectionTrace:
    """Per-window statistic, cumulative sum, threshold used and alarms."""

    s: np.ndarray
    S: np.ndarray
    h: np.ndarray
    alarms: list[int] = field(default_factory=list)


def run_cusum(s, table: ThresholdTable, q: float) -> DetectionTrace:
    """Drive :func:`cusum_step` over a sequence of window statistics."""
    s = np.asarray(s, dtype=float)
    S_tr = np.empty(s.size)
    h_tr = np.empty(s.size)
    state = DetectorState(q=q)
    for k, sw in enumerate(s):
        h_w = table.threshold(state.w + 1)
        h_tr[k] = h_w
        # record the pre-reset value so alarms stay visible in plots
        S_tr[k] = max(0.0, state.S + sw - q)
        state, _ = cusum_step(state, float(sw), h_w)
    return DetectionTrace(s, S_tr, h_tr, list(state.alarms))


def run_detector(stream, model: BaselineModel, table: ThresholdTable, n: int,
                 q: float | None = None, return_trace: bool = False):
    """Alarm window indices (1-based) on an embedded stream.

    Consumes non-overlapping windows of ``n`` vectors; the trailing remainder
    shorter than ``n`` is discarded.  After an alarm the threshold table
    restarts at ``w = 1`` with the same baseline.
    """
    q = table.q if q is None else q
    s = window_statistics(model, stream, n)
    trace = run_cusum(s, table, q)
    return trace if return_trace else trace.alarms

"""Bootstrapped graph streams with an abrupt change, and detection metrics.

Time inside a stream is counted in graphs; the detector works in windows of
``n`` graphs.  Run lengths and delays are reported in windows, while false
alarms per thousand are normalised by the number of nominal graphs.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import InvalidConfigError, InvalidInputError


@dataclass(frozen=True)
class StreamConfig:
    """Sources, window size, target run length, change time and length.

    ``tau`` and ``length`` default to ``12 n arl0`` and ``20 n arl0`` graphs.
    """

    nominal: Sequence
    non_nominal: Sequence
    n: int
    arl0_target: int = 200
    tau: int | None = None
    length: int | None = None
    seed: int = 0

    def __post_init__(self):
        if len(self.nominal) == 0 or len(self.non_nominal) == 0:
            raise InvalidConfigError("stream collections must be non-empty")
        if self.n < 1 or self.arl0_target < 1:
            raise InvalidConfigError("n and arl0_target must be positive")
        if self.tau is None:
            object.__setattr__(self, "tau", 12 * self.n * self.arl0_target)
        if self.length is None:
            object.__setattr__(self, "length", 20 * self.n * self.arl0_target)
        if not 0 < self.tau <= self.length:
            raise InvalidConfigError(f"need 0 < tau <= length, got tau={self.tau}, length={self.length}")
        if _same_members(self.nominal, self.non_nominal):
            # allowed so that null experiments can be run on purpose
            warnings.warn("nominal and non-nominal collections are identical; no real change",
                          stacklevel=3)

    @property
    def tau_window(self) -> int:
        """Change time in windows, rounded down to a window boundary."""
        return self.tau // self.n

    @property
    def num_windows(self) -> int:
        return self.length // self.n


def _same_members(a: Sequence, b: Sequence) -> bool:
    if a is b:
        return True
    try:
        return set(map(id, a)) == set(map(id, b)) or set(a) == set(b)
    except TypeError:
        return False


def bootstrap_indices(cfg: StreamConfig) -> tuple[np.ndarray, np.ndarray]:
    """Source flags (0 nominal, 1 non-nominal) and positions in that source.

    Positions are drawn uniformly with replacement; graphs ``t < tau`` come
    from the nominal collection.
    """
    rng = np.random.default_rng(cfg.seed)
    pre = rng.integers(0, len(cfg.nominal), cfg.tau)
    post = rng.integers(0, len(cfg.non_nominal), cfg.length - cfg.tau)
    source = np.concatenate([np.zeros(cfg.tau, dtype=np.int8), np.ones(post.size, dtype=np.int8)])
    return source, np.concatenate([pre, post])


def bootstrap_stream(cfg: StreamConfig) -> list:
    source, idx = bootstrap_indices(cfg)
    pools = (cfg.nominal, cfg.non_nominal)
    return [pools[s][i] for s, i in zip(source, idx)]


@dataclass
class RunSample:
    """Metrics of one replicate; ``None`` marks an undefined quantity."""

    alarms: list[int]
    arl0_observed: float | None
    dod: float | None
    detected: bool
    fa1000: float
    run_id: int = 0
    seed: int = 0


def compute_metrics(alarms: Sequence[int], tau_window: int, horizon: int,
                    window_size: int = 1) -> RunSample:
    """Observed run length, delay, detection flag and false alarms per 1000.

    Alarms at windows ``<= tau_window`` are false alarms; their mean spacing
    counts from a virtual alarm at window 0.  The delay is the mean spacing of
    later alarms counted from ``tau_window``.  Alarms past ``horizon`` are
    ignored.  When no false alarm occurs the run length is undefined and the
    change counts as detected if the delay is shorter than ``tau_window``.
    """
    a = np.asarray(sorted(int(x) for x in alarms if x <= horizon), dtype=float)
    if not 0 <= tau_window <= horizon:
        raise InvalidInputError("tau_window must lie within the horizon")
    pre = a[a <= tau_window]
    post = a[a > tau_window]
    arl0 = float(np.diff(np.concatenate([[0.0], pre])).mean()) if pre.size else None
    dod = float(np.diff(np.concatenate([[float(tau_window)], post])).mean()) if post.size else None
    reference = arl0 if arl0 is not None else float(tau_window)
    detected = dod is not None and dod < reference
    steps = tau_window * window_size
    fa = pre.size * 1000.0 / steps if steps > 0 else 0.0
    return RunSample([int(x) for x in a], arl0, dod, bool(detected), fa)


@dataclass
class RunMetrics:
    """Aggregated replicate metrics with 95% intervals.

    ``*_ci`` are percentile-bootstrap intervals of the mean; ``*_range`` are
    the 2.5 and 97.5 percentiles of the per-replicate values.
    """

    replicates: int
    dcr: float
    dcr_ci: tuple[float, float]
    arl0: float | None
    arl0_ci: tuple[float, float] | None
    arl0_range: tuple[float, float] | None
    dod: float | None
    dod_ci: tuple[float, float] | None
    dod_range: tuple[float, float] | None
    fa1000: float
    fa1000_std: float
    defined: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def bootstrap_mean_ci(values, n_boot: int = 10_000, seed: int = 0,
                      level: float = 0.95) -> tuple[float, float]:
    """Percentile-bootstrap interval of the mean."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise InvalidInputError("no values")
    if x.size == 1 or np.all(x == x[0]):
        return float(x[0]), float(x[0])
    res = stats.bootstrap((x,), np.mean, n_resamples=n_boot, confidence_level=level,
                          method="percentile", random_state=np.random.default_rng(seed))
    ci = res.confidence_interval
    return float(ci.low), float(ci.high)


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(k, n).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


def _spread(x: np.ndarray) -> tuple[float, float]:
    lo, hi = np.percentile(x, [2.5, 97.5])
    return float(lo), float(hi)


def aggregate(samples: Sequence[RunSample], seed: int = 0, n_boot: int = 10_000,
              dcr_ci: str = "bootstrap") -> RunMetrics:
    """Means over replicates; undefined per-replicate values are skipped.

    ``dcr_ci`` selects ``"bootstrap"`` (percentile) or ``"clopper-pearson"``.
    """
    if len(samples) < 2:
        raise InvalidInputError("aggregation needs at least two replicates")
    if dcr_ci not in ("bootstrap", "clopper-pearson"):
        raise InvalidInputError(f"unknown DCR interval method {dcr_ci!r}")
    det = np.array([s.detected for s in samples], dtype=float)
    arl = np.array([s.arl0_observed for s in samples if s.arl0_observed is not None])
    dod = np.array([s.dod for s in samples if s.dod is not None])
    fa = np.array([s.fa1000 for s in samples])
    seeds = np.random.SeedSequence(seed).generate_state(3)
    if dcr_ci == "bootstrap":
        d_ci = bootstrap_mean_ci(det, n_boot, int(seeds[0]))
    else:
        d_ci = clopper_pearson(int(det.sum()), det.size)
    return RunMetrics(
        replicates=len(samples),
        dcr=float(det.mean()),
        dcr_ci=d_ci,
        arl0=float(arl.mean()) if arl.size else None,
        arl0_ci=bootstrap_mean_ci(arl, n_boot, int(seeds[1])) if arl.size else None,
        arl0_range=_spread(arl) if arl.size else None,
        dod=float(dod.mean()) if dod.size else None,
        dod_ci=bootstrap_mean_ci(dod, n_boot, int(seeds[2])) if dod.size else None,
        dod_range=_spread(dod) if dod.size else None,
        fa1000=float(fa.mean()),
        fa1000_std=float(fa.std(ddof=1)),
        defined={"arl0": int(arl.size), "dod": int(dod.size)},
    )


CSV_COLUMNS = ("run_id", "seed", "alarms", "arl0_observed", "dod", "detected", "fa1000")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def sample_row(s: RunSample) -> list[str]:
    return [str(s.run_id), str(s.seed), " ".join(map(str, s.alarms)),
            _fmt(s.arl0_observed), _fmt(s.dod), _fmt(s.detected), _fmt(s.fa1000)]


def samples_to_csv(samples: Sequence[RunSample]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for s in samples:
        w.writerow(sample_row(s))
    return buf.getvalue()


def samples_from_csv(text: str) -> list[RunSample]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(RunSample(
            alarms=[int(x) for x in row["alarms"].split()],
            arl0_observed=float(row["arl0_observed"]) if row["arl0_observed"] else None,
            dod=float(row["dod"]) if row["dod"] else None,
            detected=row["detected"] == "1",
            fa1000=float(row["fa1000"]),
            run_id=int(row["run_id"]),
            seed=int(row["seed"]),
        ))
    return out

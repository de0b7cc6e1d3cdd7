"""End-to-end change-detection experiments on bootstrapped graph streams.

One replicate draws the prototype-selection and covariance training sets from
the nominal collection, picks prototypes by k-Centres, fits the baseline,
bootstraps a stream with an abrupt change and runs the detector.  Randomness
flows from the experiment seed: replicate ``r`` uses the ``r``-th child of
``SeedSequence(seed)``, which spawns independent streams for the training
draw, k-Centres restarts and the stream bootstrap.
"""
from __future__ import annotations

import json
import os
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .baselines import feature_values, fit_scalar_baseline
from .datasets import SyntheticLetterSpec, generate_synthetic, load_gxl_collection
from .detector import ThresholdTable, calibrate_thresholds, fit_baseline, run_cusum, window_statistics
from .embedding import k_centres_from_matrix
from .errors import InvalidConfigError
from .ged import CostModel, GraphDistance
from .stream_sim import (RunSample, StreamConfig, aggregate, bootstrap_indices, compute_metrics,
                         samples_to_csv)

DETECTORS = ("main", "density", "spectral_gap", "M1")
DATA_ENV = "GRAPHDRIFT_DATA"


@dataclass(frozen=True)
class ExperimentSpec:
    """Dataset, class split and detector parameters of one experiment."""

    id: str
    dataset: dict
    nominal_classes: tuple[str, ...]
    non_nominal_classes: tuple[str, ...]
    M: int = 4
    n: int = 5
    arl0_target: int = 200
    replicates: int = 100
    seed: int = 0
    cost_model: dict = field(default_factory=dict)
    detector: str = "main"
    tc_size: int = 1000
    tp_size: int = 300
    kcentres_repeats: int = 20
    calibration_sims: int = 1_000_000
    calibration_seed: int = 0
    ged_method: str = "bipartite"
    dcr_ci: str = "bootstrap"

    def __post_init__(self):
        object.__setattr__(self, "nominal_classes", tuple(self.nominal_classes))
        object.__setattr__(self, "non_nominal_classes", tuple(self.non_nominal_classes))
        if not self.nominal_classes or not self.non_nominal_classes:
            raise InvalidConfigError("class lists must be non-empty")
        if self.replicates < 1:
            raise InvalidConfigError("replicates must be >= 1")
        if self.detector not in DETECTORS:
            raise InvalidConfigError(f"detector must be one of {DETECTORS}")
        if self.dataset.get("kind") not in ("iam", "synthetic"):
            raise InvalidConfigError("dataset.kind must be 'iam' or 'synthetic'")
        if self.M < 1 or self.n < 1 or self.arl0_target < 2:
            raise InvalidConfigError("M, n must be >= 1 and arl0_target >= 2")
        CostModel.from_dict(self.cost_model)

    @classmethod
    def from_dict(cls, payload: Mapping) -> "ExperimentSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise InvalidConfigError(f"unknown experiment fields {sorted(unknown)}")
        return cls(**payload)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["nominal_classes"] = list(self.nominal_classes)
        d["non_nominal_classes"] = list(self.non_nominal_classes)
        return d

    def normalized(self) -> "ExperimentSpec":
        """The single-prototype detector is the main one with ``M=1, n=25``;
        scalar detectors look at one graph per step."""
        if self.detector == "M1":
            return replace(self, detector="main", M=1, n=25)
        if self.detector in ("density", "spectral_gap"):
            return replace(self, n=1)
        return self


def list_presets() -> list[str]:
    folder = resources.files("graphdrift").joinpath("presets")
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def load_spec(config: str | os.PathLike, **overrides) -> ExperimentSpec:
    """Spec from a JSON file or a preset name, with optional field overrides."""
    p = Path(config)
    if p.suffix == ".json" and p.exists():
        payload = json.loads(p.read_text())
    else:
        try:
            payload = json.loads(resources.files("graphdrift").joinpath(
                "presets", f"{config}.json").read_text())
        except FileNotFoundError:
            raise InvalidConfigError(
                f"no config file or preset named {config!r}; presets: {list_presets()}") from None
    payload.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec.from_dict(payload)


def load_collections(spec: ExperimentSpec, dataset_root: str | os.PathLike | None = None):
    """Nominal and non-nominal pools, classes concatenated in the listed order."""
    ds = spec.dataset
    if ds["kind"] == "synthetic":
        coll = generate_synthetic(SyntheticLetterSpec.from_dict(ds.get("spec")), ds.get("seed", 0))
    else:
        root = dataset_root or os.environ.get(DATA_ENV)
        if root is None:
            raise InvalidConfigError(f"IAM data needs --dataset-root or ${DATA_ENV}")
        coll = load_gxl_collection(Path(root) / ds["path"], ds.get("class_index"),
                                   ds.get("schema", "letter"))
    missing = [c for c in (*spec.nominal_classes, *spec.non_nominal_classes) if c not in coll]
    if missing:
        raise InvalidConfigError(f"classes {missing} not in dataset (have {sorted(coll)})")
    nominal = [g for c in spec.nominal_classes for g in coll[c]]
    non_nominal = [g for c in spec.non_nominal_classes for g in coll[c]]
    return nominal, non_nominal


class DistanceCache:
    """Memoised distances between members of a fixed graph pool."""

    def __init__(self, pool: Sequence, d):
        self.pool = list(pool)
        self.d = d
        self._memo: dict[tuple[int, int], float] = {}
        self._lock = threading.Lock()

    def __call__(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        key = (i, j) if i < j else (j, i)
        v = self._memo.get(key)
        if v is None:
            v = float(self.d(self.pool[key[0]], self.pool[key[1]]))
            with self._lock:
                self._memo[key] = v
        return v

    def matrix(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        return np.array([[self(i, j) for j in cols] for i in rows]).reshape(len(rows), len(cols))

    def square(self, idx: Sequence[int]) -> np.ndarray:
        """Pairwise matrix of ``idx``, computing each distinct pair once."""
        uniq, inv = np.unique(np.asarray(idx), return_inverse=True)
        U = np.zeros((uniq.size, uniq.size))
        for a in range(uniq.size):
            for b in range(a + 1, uniq.size):
                U[a, b] = U[b, a] = self(int(uniq[a]), int(uniq[b]))
        return U[np.ix_(inv, inv)]


@dataclass
class ReplicateResult:
    sample: RunSample
    s: np.ndarray
    S: np.ndarray
    h: np.ndarray
    tau_window: int
    prototypes: list[int] = field(default_factory=list)


class Experiment:
    """Holds collections, caches and thresholds shared by the replicates."""

    def __init__(self, spec: ExperimentSpec, nominal: Sequence, non_nominal: Sequence,
                 threads: int = 1, threshold_dir: str | os.PathLike | None = None):
        self.spec = spec.normalized()
        self.nominal = list(nominal)
        self.non_nominal = list(non_nominal)
        if not self.nominal or not self.non_nominal:
            raise InvalidConfigError("empty collection")
        self.threads = max(1, int(threads))
        self.threshold_dir = Path(threshold_dir) if threshold_dir else None
        self.same = (len(self.nominal) == len(self.non_nominal)
                     and all(a is b for a, b in zip(self.nominal, self.non_nominal)))
        # one pool; the non-nominal part aliases the nominal one for null runs
        self.pool = self.nominal + ([] if self.same else self.non_nominal)
        self.non_offset = 0 if self.same else len(self.nominal)
        d = GraphDistance(self.spec.ged_method, CostModel.from_dict(self.spec.cost_model))
        self.dist = DistanceCache(self.pool, d)
        self._table: ThresholdTable | None = None
        self._features: np.ndarray | None = None

    # thresholds ---------------------------------------------------------
    def threshold_path(self) -> Path | None:
        if self.threshold_dir is None:
            return None
        s = self.spec
        return self.threshold_dir / f"thresholds_{s.M}_{s.arl0_target}.json"

    def thresholds(self) -> ThresholdTable:
        """Calibrated table for ``(M, arl0)``, read from or written to the cache file."""
        if self._table is not None:
            return self._table
        s = self.spec
        path = self.threshold_path()
        if path is not None and path.exists():
            t = ThresholdTable.from_json(path.read_text())
            if (t.M == s.M and t.num_sims == s.calibration_sims and t.seed == s.calibration_seed
                    and abs(t.alpha - 1.0 / s.arl0_target) < 1e-15):
                self._table = t
                return t
        t = calibrate_thresholds(s.M, s.arl0_target, s.calibration_sims,
                                 seed=s.calibration_seed, threads=self.threads)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(t.to_json())
        self._table = t
        return t

    # replicate ----------------------------------------------------------
    def replicate_seeds(self) -> list[np.random.SeedSequence]:
        return np.random.SeedSequence(self.spec.seed).spawn(self.spec.replicates)

    def run_replicate(self, r: int, ss: np.random.SeedSequence | None = None) -> ReplicateResult:
        s = self.spec
        ss = ss or self.replicate_seeds()[r]
        draw_ss, kc_ss, stream_ss = ss.spawn(3)
        rng = np.random.default_rng(draw_ss)
        N = len(self.nominal)
        tc = rng.integers(0, N, s.tc_size)
        tp = rng.integers(0, N, s.tp_size)
        stream_seed = int(stream_ss.generate_state(1)[0])
        cfg = StreamConfig(self.nominal, self.non_nominal, s.n, s.arl0_target,
                           seed=stream_seed) if not self.same else _null_config(self, s, stream_seed)
        source, idx = bootstrap_indices(cfg)
        pool_idx = np.where(source == 0, idx, idx + self.non_offset)

        if s.detector == "main":
            D = self.dist.square(tc)
            best, _ = k_centres_from_matrix(D, s.M, s.kcentres_repeats,
                                            int(kc_ss.generate_state(1)[0]))
            protos = [int(tc[c]) for c in best.centres]
            used = np.unique(np.concatenate([tp, pool_idx]))
            emb = np.zeros((len(self.pool), s.M))
            emb[used] = self.dist.matrix(used.tolist(), protos)
            model = fit_baseline(emb[tp], s.n)
            table = self.thresholds()
            stat = window_statistics(model, emb[pool_idx], s.n)
            trace = run_cusum(stat, table, table.q)
        else:
            protos = []
            phi = self.features()
            train = [self.pool[i] for i in tp]
            sm = fit_scalar_baseline(train, s.detector, s.arl0_target,
                                     num_sims=min(s.calibration_sims, 200_000),
                                     seed=int(kc_ss.generate_state(1)[0]),
                                     on_degenerate="zero", threads=1)
            stat = np.abs(phi[pool_idx] - sm.expected)
            trace = run_cusum(stat, sm.thresholds, sm.q_scalar)
        sample = compute_metrics(trace.alarms, cfg.tau_window, cfg.num_windows, s.n)
        sample.run_id = r
        sample.seed = int(ss.generate_state(1)[0])
        return ReplicateResult(sample, trace.s, trace.S, trace.h, cfg.tau_window, protos)

    def features(self) -> np.ndarray:
        if self._features is None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                self._features = feature_values(self.pool, self.spec.detector, "zero")
        return self._features

    def run(self, out_dir: str | os.PathLike | None = None) -> tuple[list[ReplicateResult], dict]:
        """All replicates, the aggregate, and (with ``out_dir``) the artifacts."""
        out = Path(out_dir) if out_dir else None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            if self.threshold_dir is None:
                self.threshold_dir = out
        if self.spec.detector == "main":
            self.thresholds()
        seeds = self.replicate_seeds()
        results: list[ReplicateResult] = []
        try:
            if self.threads > 1:
                with ThreadPoolExecutor(self.threads) as ex:
                    results = list(ex.map(self.run_replicate, range(len(seeds)), seeds))
            else:
                for r, ss in enumerate(seeds):
                    results.append(self.run_replicate(r, ss))
        finally:
            if out is not None:
                (out / "metrics.csv").write_text(samples_to_csv([x.sample for x in results]))
        summary = summarize(self.spec, [x.sample for x in results])
        if out is not None:
            (out / "summary.json").write_text(json.dumps(summary, indent=2))
            if results:
                write_trace_svg(results[0], out / "trace_0.svg", self.spec.n)
        return results, summary


def _null_config(exp: Experiment, s: ExperimentSpec, seed: int) -> StreamConfig:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return StreamConfig(exp.nominal, exp.non_nominal, s.n, s.arl0_target, seed=seed)


def summarize(spec: ExperimentSpec, samples: Sequence[RunSample]) -> dict:
    out = {"experiment": spec.to_dict(), "replicates": len(samples)}
    if len(samples) >= 2:
        out["metrics"] = aggregate(samples, seed=spec.seed, dcr_ci=spec.dcr_ci).to_dict()
    elif samples:
        s = samples[0]
        out["metrics"] = {"dcr": float(s.detected), "arl0": s.arl0_observed, "dod": s.dod,
                          "fa1000": s.fa1000}
    return out


def write_trace_svg(res: ReplicateResult, path: Path, n: int) -> None:
    """Cumulative statistic with its thresholds, the change time and alarms."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "graphdrift"
    fig, ax = plt.subplots(figsize=(9, 3.5))
    w = np.arange(1, res.S.size + 1)
    ax.plot(w, res.S, lw=0.7, label="S_w")
    ax.plot(w, res.h, lw=0.7, ls="--", label="h_w")
    ax.axvline(res.tau_window, color="k", lw=1.0, label="change")
    if res.sample.alarms:
        a = np.asarray(res.sample.alarms)
        ax.plot(a, res.S[a - 1], "rv", ms=4, label="alarm")
    ax.set_xlabel(f"window (n = {n})")
    ax.set_ylabel("cumulative statistic")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def run_experiment(spec: ExperimentSpec, out_dir=None, dataset_root=None, threads: int = 1,
                   collections=None):
    """Load the data for ``spec`` (unless given) and run every replicate."""
    nominal, non_nominal = collections or load_collections(spec, dataset_root)
    return Experiment(spec, nominal, non_nominal, threads).run(out_dir)

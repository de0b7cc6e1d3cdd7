"""Scalar topological-feature detectors used as reference methods.

Each graph is reduced to one number (edge density or Laplacian spectral gap)
and the statistic ``|phi(g_t) - E[phi]|`` drives the same cumulative-sum
recursion as the main detector, with window size one.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .detector import ThresholdTable, empirical_sampler, run_cusum, simulate_thresholds
from .errors import DegenerateGraphError, InvalidInputError
from .graph_core import AttributedGraph, laplacian


def edge_density(g: AttributedGraph) -> float:
    """``|E| / (|V| (|V| - 1))`` with undirected edges counted once."""
    n = g.num_vertices
    if n <= 1:
        raise DegenerateGraphError("edge density needs at least two vertices")
    return g.num_edges / (n * (n - 1))


def spectral_gap(g: AttributedGraph) -> float:
    """Gap between the two largest Laplacian eigenvalues in magnitude."""
    if g.num_vertices <= 1:
        raise DegenerateGraphError("spectral gap needs at least two vertices")
    lam = np.sort(np.abs(np.linalg.eigvalsh(laplacian(g))))[::-1]
    return float(max(0.0, lam[0] - lam[1]))


FEATURES: dict[str, Callable[[AttributedGraph], float]] = {
    "density": edge_density,
    "edge_density": edge_density,
    "spectral_gap": spectral_gap,
}


def feature_values(graphs: Sequence[AttributedGraph], feature: str,
                   on_degenerate: str = "raise") -> np.ndarray:
    """Feature of every graph; ``on_degenerate="zero"`` maps tiny graphs to 0."""
    if feature not in FEATURES:
        raise InvalidInputError(f"unknown feature {feature!r}")
    if on_degenerate not in ("raise", "zero"):
        raise InvalidInputError("on_degenerate must be 'raise' or 'zero'")
    fn = FEATURES[feature]
    out = np.empty(len(graphs))
    n_bad = 0
    for t, g in enumerate(graphs):
        try:
            out[t] = fn(g)
        except DegenerateGraphError:
            if on_degenerate == "raise":
                raise
            out[t] = 0.0
            n_bad += 1
    if n_bad:
        warnings.warn(f"{n_bad} graphs with fewer than two vertices mapped to {feature}=0",
                      stacklevel=2)
    return out


@dataclass(frozen=True, eq=False)
class ScalarBaselineModel:
    """Expected feature value, offset and thresholds of a scalar detector."""

    feature: str
    expected: float
    q_scalar: float
    thresholds: ThresholdTable
    on_degenerate: str = "raise"


def fit_scalar_baseline(training: Sequence[AttributedGraph], feature: str,
                        arl0: int = 200, num_sims: int = 100_000, horizon: int | None = None,
                        seed: int = 0, on_degenerate: str = "raise",
                        threads: int = 1) -> ScalarBaselineModel:
    """Estimate ``E[phi]`` and calibrate thresholds by bootstrap.

    The null law of ``|phi - E[phi]|`` is unknown, so the Monte-Carlo
    trajectories draw from the empirical training deviations.  The offset is
    their third quartile.
    """
    phi = feature_values(training, feature, on_degenerate)
    if phi.size < 2:
        raise InvalidInputError("need at least two training graphs")
    expected = float(phi.mean())
    dev = np.abs(phi - expected)
    q = float(np.quantile(dev, 0.75))
    horizon = int(horizon or 20 * arl0)
    h = simulate_thresholds(empirical_sampler(dev), q, arl0, num_sims, horizon, seed, threads)
    table = ThresholdTable(1.0 / arl0, horizon, h, num_sims, seed, q, 1)
    return ScalarBaselineModel(feature, expected, q, table, on_degenerate)


def scalar_statistics(stream: Sequence[AttributedGraph], model: ScalarBaselineModel) -> np.ndarray:
    return np.abs(feature_values(stream, model.feature, model.on_degenerate) - model.expected)


def run_scalar_baseline(stream: Sequence[AttributedGraph], model: ScalarBaselineModel,
                        return_trace: bool = False):
    """Alarm indices (1-based, one graph per step) of the scalar detector."""
    if len(stream) == 0:
        raise InvalidInputError("empty stream")
    trace = run_cusum(scalar_statistics(stream, model), model.thresholds, model.q_scalar)
    return trace if return_trace else trace.alarms

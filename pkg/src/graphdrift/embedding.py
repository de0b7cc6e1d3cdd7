"""Dissimilarity-space embedding of graphs.

A graph ``g`` is mapped to ``y = [d(g, r_1), ..., d(g, r_M)]`` against a
fixed set of prototype graphs chosen by k-Centres on nominal training data.
The identified-vertex variant (Frobenius distance, classical scaling and the
linear ``u`` transform) lives here as well.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import GeometryError, InvalidInputError
from .ged import GraphDistance
from .graph_core import AttributedGraph, IdentifiedGraph, common_schema

Distance = Callable[[AttributedGraph, AttributedGraph], float]


@dataclass(frozen=True, eq=False)
class PrototypeSet:
    """Reference graphs ``R`` with their cached pairwise distances."""

    prototypes: tuple[AttributedGraph, ...]
    pairwise: np.ndarray
    covering_radius: float = 0.0
    indices: tuple[int, ...] | None = None

    def __post_init__(self):
        P = np.asarray(self.pairwise, dtype=float)
        M = len(self.prototypes)
        if M < 1:
            raise InvalidInputError("a prototype set needs at least one graph")
        if P.shape != (M, M):
            raise InvalidInputError(f"pairwise matrix must be {M}x{M}")
        if not np.allclose(P, P.T) or np.any(np.diag(P) != 0):
            raise InvalidInputError("pairwise matrix must be symmetric with zero diagonal")
        P = P.copy()
        P.setflags(write=False)
        object.__setattr__(self, "pairwise", P)
        object.__setattr__(self, "prototypes", tuple(self.prototypes))

    @property
    def M(self) -> int:
        return len(self.prototypes)

    @classmethod
    def from_graphs(cls, graphs: Sequence[AttributedGraph], d: Distance,
                    covering_radius: float = 0.0) -> "PrototypeSet":
        M = len(graphs)
        P = np.zeros((M, M))
        for i in range(M):
            for j in range(i + 1, M):
                P[i, j] = P[j, i] = d(graphs[i], graphs[j])
        return cls(tuple(graphs), P, covering_radius)

    def to_json(self) -> str:
        return json.dumps({
            "prototypes": [g.to_dict() for g in self.prototypes],
            "pairwise": self.pairwise.tolist(),
            "covering_radius": self.covering_radius,
            "indices": list(self.indices) if self.indices is not None else None,
        })

    @classmethod
    def from_json(cls, text: str) -> "PrototypeSet":
        payload = json.loads(text)
        idx = payload.get("indices")
        return cls(tuple(AttributedGraph.from_dict(g) for g in payload["prototypes"]),
                   np.array(payload["pairwise"], dtype=float),
                   float(payload["covering_radius"]),
                   tuple(idx) if idx is not None else None)


def embed(g: AttributedGraph, R: PrototypeSet, d: Distance | None = None) -> np.ndarray:
    """Dissimilarity vector of ``g``: component ``m`` is ``d(g, r_m)``."""
    d = d or GraphDistance()
    common_schema([g, *R.prototypes[:1]])
    return np.array([d(g, r) for r in R.prototypes])


def embed_many(graphs: Sequence[AttributedGraph], R: PrototypeSet,
               d: Distance | None = None, threads: int = 1) -> np.ndarray:
    """Row ``t`` is :func:`embed` of ``graphs[t]``."""
    d = d or GraphDistance()
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(lambda g: embed(g, R, d), graphs))
    else:
        rows = [embed(g, R, d) for g in graphs]
    return np.array(rows).reshape(len(graphs), R.M)


def pairwise_distances(graphs: Sequence[AttributedGraph], d: Distance) -> np.ndarray:
    n = len(graphs)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = d(graphs[i], graphs[j])
    return D


@dataclass
class KCentresRun:
    """One k-Centres restart: final centres, radius and the objective trace."""

    centres: list[int]
    radius: float
    objective: list[float] = field(default_factory=list)


def _assign(D: np.ndarray, centres: list[int]) -> np.ndarray:
    # ties go to the lowest prototype position (argmin returns the first)
    return np.argmin(D[centres, :], axis=0)


def _radius(D: np.ndarray, centres: list[int], labels: np.ndarray) -> float:
    return float(max((D[c, labels == m].max(initial=0.0) for m, c in enumerate(centres)),
                     default=0.0))


def k_centres_run(D: np.ndarray, init: Sequence[int], max_iter: int = 100) -> KCentresRun:
    """Iterate the assign/recentre steps from ``init`` until a fixed point."""
    centres = list(int(c) for c in init)
    run = KCentresRun(centres, np.inf)
    for _ in range(max_iter):
        labels = _assign(D, centres)
        for m in range(len(centres)):
            if not np.any(labels == m):
                # empty cluster: move the centre to the worst-covered point
                far = int(np.argmax(D[centres, :].min(axis=0)))
                centres[m] = far
                labels = _assign(D, centres)
        run.objective.append(_radius(D, centres, labels))
        new = list(centres)
        for m in range(len(centres)):
            members = labels == m
            if not np.any(members):
                continue
            # first minimiser wins, i.e. the lowest training index
            new[m] = int(np.argmin(D[:, members].max(axis=1)))
        if new == centres:
            break
        centres = new
    labels = _assign(D, centres)
    run.centres = centres
    run.radius = _radius(D, centres, labels)
    return run


def k_centres_from_matrix(D: np.ndarray, M: int, repeats: int = 20,
                          seed: int = 0) -> tuple[KCentresRun, list[KCentresRun]]:
    """Best of ``repeats`` randomly initialised k-Centres runs on a distance matrix."""
    D = np.asarray(D, dtype=float)
    N = D.shape[0]
    if not 1 <= M <= N:
        raise InvalidInputError(f"need 1 <= M <= |T_c|, got M={M}, |T_c|={N}")
    if repeats < 1:
        raise InvalidInputError("repeats must be >= 1")
    runs = []
    for child in np.random.SeedSequence(seed).spawn(repeats):
        rng = np.random.default_rng(child)
        runs.append(k_centres_run(D, rng.choice(N, size=M, replace=False)))
    best = min(range(repeats), key=lambda i: (runs[i].radius, i))
    return runs[best], runs


def k_centres(T_c: Sequence[AttributedGraph], M: int, d: Distance | None = None,
              repeats: int = 20, seed: int = 0,
              dissimilarity: np.ndarray | None = None) -> PrototypeSet:
    """Select ``M`` prototypes covering ``T_c`` with balls of equal radius.

    ``dissimilarity`` may carry a precomputed ``|T_c| x |T_c|`` distance
    matrix; otherwise it is computed with ``d``.
    """
    if not 1 <= M <= len(T_c):
        raise InvalidInputError(f"need 1 <= M <= |T_c|, got M={M}, |T_c|={len(T_c)}")
    d = d or GraphDistance()
    D = pairwise_distances(T_c, d) if dissimilarity is None else np.asarray(dissimilarity)
    best, _ = k_centres_from_matrix(D, M, repeats, seed)
    idx = best.centres
    return PrototypeSet(tuple(T_c[i] for i in idx), D[np.ix_(idx, idx)],
                        best.radius, tuple(idx))


def frobenius_distance(g1: IdentifiedGraph, g2: IdentifiedGraph) -> float:
    """Frobenius norm of the difference of the full weight matrices."""
    if g1.universe_size != g2.universe_size:
        raise InvalidInputError("identified graphs live on different vertex universes")
    return float(np.linalg.norm(g1.weights - g2.weights))


@dataclass(frozen=True, eq=False)
class ScalingModel:
    """Classical-scaling coordinates ``X`` (k x M) of the prototypes."""

    X: np.ndarray
    eigenvalues: np.ndarray

    @property
    def k(self) -> int:
        return self.X.shape[0]

    @property
    def M(self) -> int:
        return self.X.shape[1]

    def gram(self) -> np.ndarray:
        return self.X @ self.X.T


def centering(M: int) -> np.ndarray:
    return np.eye(M) - np.full((M, M), 1.0 / M)


def classical_scaling(pairwise, tol: float = 1e-9, mass: float = 1 - 1e-6) -> ScalingModel:
    """Euclidean coordinates reproducing a Euclidean distance matrix.

    The squared distances are double centred and eigendecomposed.  Eigenvalues
    below ``tol`` times the largest are discarded, and of the rest only the
    leading ones carrying a fraction ``mass`` of the positive spectrum are kept.
    """
    D = np.asarray(pairwise, dtype=float)
    M = D.shape[0]
    if D.shape != (M, M) or not np.allclose(D, D.T) or np.any(np.diag(D) != 0):
        raise InvalidInputError("pairwise must be a symmetric matrix with zero diagonal")
    J = centering(M)
    B = -0.5 * J @ (D ** 2) @ J
    lam, V = np.linalg.eigh((B + B.T) / 2)
    order = np.argsort(lam)[::-1]
    lam, V = lam[order], V[:, order]
    top = lam[0] if M else 0.0
    if top <= 0:
        raise GeometryError("all prototypes coincide; no scaling dimension left")
    if lam[-1] < -tol * top:
        raise GeometryError(f"distance matrix is not Euclidean (eigenvalue {lam[-1]:.3g})")
    keep = lam > tol * top
    lam, V = lam[keep], V[:, keep]
    cum = np.cumsum(lam) / lam.sum()
    k = int(np.searchsorted(cum, mass) + 1)
    k = min(k, lam.size)
    lam, V = lam[:k], V[:, :k]
    X = (V * np.sqrt(lam)).T
    return ScalingModel(X, lam)


def u_transform(y, model: ScalingModel) -> np.ndarray:
    """``X J y**2``: linear image of the squared dissimilarities.

    Accepts a single M-vector or an ``(n, M)`` batch.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != model.M:
        raise InvalidInputError(f"dissimilarity vector has dimension {y.shape[-1]}, expected {model.M}")
    sq = y ** 2
    centred = sq - sq.mean(axis=-1, keepdims=True)
    return centred @ model.X.T


def identified_embedding(graphs: Sequence[IdentifiedGraph],
                         prototypes: Sequence[IdentifiedGraph]) -> np.ndarray:
    """Dissimilarity vectors under the Frobenius distance, one row per graph."""
    return np.array([[frobenius_distance(g, r) for r in prototypes] for g in graphs])

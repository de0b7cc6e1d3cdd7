"""Empirical checks of the inequalities that link graph and embedding spaces.

Every check returns a report with the constants involved and the number of
violating pairs, so it can be stored as JSON next to experiment results.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .embedding import PrototypeSet, ScalingModel, embed, frobenius_distance, u_transform
from .errors import GeometryError, InvalidInputError
from .ged import GraphDistance
from .graph_core import AttributedGraph, IdentifiedGraph

SLACK = 1e-9


@dataclass
class BoundReport:
    """Outcome of a two-sided or one-sided bound check over sampled pairs.

    ``constants`` holds whatever scalars define the bound (eigenvalue
    extremes, Lipschitz constants, ``M``).
    """

    bound_name: str
    pairs_tested: int
    violations: int
    constants: dict = field(default_factory=dict)
    worst_ratio: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _spd_inverse(sigma) -> tuple[np.ndarray, np.ndarray]:
    S = np.asarray(sigma, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or not np.allclose(S, S.T):
        raise InvalidInputError("sigma must be a symmetric square matrix")
    lam = np.linalg.eigvalsh(S)
    if lam[0] <= 0 or lam[-1] / lam[0] > 1e14:
        raise InvalidInputError("sigma must be positive definite")
    return np.linalg.inv(S), lam


def mahalanobis_distance(a, b, sigma_inverse) -> float:
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(np.sqrt(max(d @ sigma_inverse @ d, 0.0)))


def _embed_pairs(pairs, R: PrototypeSet, d):
    cache: dict[int, np.ndarray] = {}

    def z(g):
        k = id(g)
        if k not in cache:
            cache[k] = embed(g, R, d)
        return cache[k]

    return [(z(g), z(f)) for g, f in pairs]


def check_mahalanobis_lower_bound(pairs: Sequence[tuple[AttributedGraph, AttributedGraph]], R: PrototypeSet,
                 sigma, d=None, slack: float = SLACK) -> BoundReport:
    """``d(g, f) >= sqrt(lambda_min / M) * d_Sigma(zeta(g), zeta(f))`` per pair.

    Holds whenever ``d`` is a metric; use the exact edit distance for that.
    """
    d = d or GraphDistance("exact")
    inv, lam = _spd_inverse(sigma)
    M = R.M
    if inv.shape != (M, M):
        raise InvalidInputError(f"sigma must be {M}x{M}")
    k = np.sqrt(lam[0] / M)
    viol, worst = 0, 0.0
    for (g, f), (zg, zf) in zip(pairs, _embed_pairs(pairs, R, d)):
        lhs = d(g, f)
        rhs = k * mahalanobis_distance(zg, zf, inv)
        viol += lhs < rhs - slack * max(1.0, rhs)
        if lhs > 0:
            worst = max(worst, float(rhs / lhs))
    return BoundReport("lower_bound_graph_vs_mahalanobis", len(pairs), int(viol),
                       {"lambda_min": float(lam[0]), "lambda_max": float(lam[-1]), "M": M,
                        "factor": float(k)}, worst)


def check_lipschitz_chain(pairs, R: PrototypeSet, d=None, slack: float = SLACK) -> BoundReport:
    """``d(g, f) >= |dzeta|_inf >= |dzeta|_2 / sqrt(M)`` per pair."""
    d = d or GraphDistance("exact")
    M = R.M
    viol = 0
    for (g, f), (zg, zf) in zip(pairs, _embed_pairs(pairs, R, d)):
        diff = zg - zf
        dist = d(g, f)
        inf = float(np.abs(diff).max())
        two = float(np.linalg.norm(diff)) / np.sqrt(M)
        viol += (dist < inf - slack * max(1.0, inf)) or (inf < two - slack * max(1.0, two))
    return BoundReport("embedding_lipschitz_chain", len(pairs), int(viol), {"M": M})


def frobenius_bound_constants(model: ScalingModel, sigma) -> dict:
    """Lower/upper constants relating Frobenius and Mahalanobis distances.

    With ``G = X X^T`` the transform satisfies ``|du| = 2 |G dx|`` for graph
    differences in the span of the prototypes, which gives

        c = sqrt(lambda_min(Sigma)) / (2 lambda_max(G))
        C = sqrt(lambda_max(Sigma)) / (2 lambda_min(G)).

    ``c_alt`` keeps the alternative ``sqrt(lambda_min(Sigma) / (4 lambda_max(G)))``
    for comparison.
    """
    G = model.gram()
    g_lam = np.linalg.eigvalsh((G + G.T) / 2)
    if g_lam[0] <= 1e-12 * max(g_lam[-1], 1.0):
        raise GeometryError("X X^T is singular")
    _, s_lam = _spd_inverse(sigma)
    if s_lam.size != G.shape[0]:
        raise InvalidInputError(f"sigma must be {G.shape[0]}x{G.shape[0]}")
    return {
        "c": float(np.sqrt(s_lam[0]) / (2 * g_lam[-1])),
        "C": float(np.sqrt(s_lam[-1]) / (2 * g_lam[0])),
        "c_alt": float(np.sqrt(s_lam[0] / (4 * g_lam[-1]))),
        "C_alt": float(np.sqrt(s_lam[-1] / (4 * g_lam[0]))),
        "lambda_min": float(s_lam[0]), "lambda_max": float(s_lam[-1]),
        "gram_min": float(g_lam[0]), "gram_max": float(g_lam[-1]),
        "k": model.k, "M": model.M,
    }


def check_frobenius_bounds(pairs: Sequence[tuple[IdentifiedGraph, IdentifiedGraph]],
                 prototypes: Sequence[IdentifiedGraph], model: ScalingModel, sigma,
                 slack: float = SLACK) -> BoundReport:
    """``c d_Sigma(u1, u2) <= d_F(g1, g2) <= C d_Sigma(u1, u2)`` per pair.

    ``u`` is :func:`u_transform` of the Frobenius dissimilarity vector.  The
    report also counts violations of the alternative constants.
    """
    N = {g.universe_size for pair in pairs for g in pair} | {r.universe_size for r in prototypes}
    if len(N) > 1:
        raise InvalidInputError("all graphs must share one vertex universe")
    consts = frobenius_bound_constants(model, sigma)
    inv = np.linalg.inv(np.asarray(sigma, dtype=float))
    viol = viol_alt = 0
    for g1, g2 in pairs:
        y = np.array([[frobenius_distance(g, r) for r in prototypes] for g in (g1, g2)])
        u = u_transform(y, model)
        ds = mahalanobis_distance(u[0], u[1], inv)
        dF = frobenius_distance(g1, g2)
        tol = slack * max(1.0, dF)
        viol += consts["c"] * ds > dF + tol or dF > consts["C"] * ds + tol
        viol_alt += consts["c_alt"] * ds > dF + tol or dF > consts["C_alt"] * ds + tol
    consts["violations_alt_constants"] = int(viol_alt)
    return BoundReport("frobenius_vs_mahalanobis_two_sided", len(pairs), int(viol), consts)


@dataclass
class FrechetReport:
    """Minimiser check and the expected sample-variation identity."""

    n: int
    dim: int
    trials: int
    minimizer_violations: int
    mean_variation: float
    expected_variation: float
    standard_error: float

    @property
    def within_3se(self) -> bool:
        return abs(self.mean_variation - self.expected_variation) <= 3 * self.standard_error + 1e-12

    def to_dict(self) -> dict:
        out = asdict(self)
        out["within_3se"] = self.within_3se
        return out


def frechet_function(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Mean squared distance from the rows of ``x`` to each row of ``c``."""
    c = np.atleast_2d(c)
    return ((x[None, :, :] - c[:, None, :]) ** 2).sum(axis=2).mean(axis=1)


def check_frechet_euclidean(n: int, dim: int = 1, trials: int = 10_000, seed: int = 0,
                            candidates: int = 1000, minimizer_trials: int = 100) -> FrechetReport:
    """Sample mean minimises the Frechet function; ``E[V_n] = (1 - 1/n) V``.

    Data are standard Gaussian in ``dim`` dimensions, so the population
    variation is ``dim``.
    """
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((trials, n, dim))
    means = X.mean(axis=1)
    V = ((X - means[:, None, :]) ** 2).sum(axis=2).mean(axis=1)
    viol = 0
    for t in range(min(trials, minimizer_trials)):
        cand = means[t] + rng.standard_normal((candidates, dim)) * (1.0 + V[t])
        at_mean = frechet_function(X[t], means[t])[0]
        viol += int(np.any(frechet_function(X[t], cand) < at_mean - 1e-12))
    se = float(V.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return FrechetReport(n, dim, trials, viol, float(V.mean()), (1.0 - 1.0 / n) * dim, se)


@dataclass
class V2Report:
    """Plug-in constant of the concentration bound and its bootstrap audit."""

    v2: float
    var_graph: float
    var_embedded: float
    M: int
    medoid: int
    deltas: list[float]
    frequencies: list[float]
    bounds: list[float]
    violations: int

    def to_dict(self) -> dict:
        return asdict(self)


def estimate_v2(Q_sample: Sequence[AttributedGraph], R: PrototypeSet, d=None,
                n_boot: int = 1000, deltas=None, seed: int = 0) -> V2Report:
    """``v2 = M V[Q] - V[F] / 2`` with medoid-restricted graph variation.

    The graph-space Frechet mean is searched among the sample members only.
    Bootstrap resamples then estimate ``P(|ybar - zeta(mu)|^2 >= delta)``,
    which should not exceed ``v2 / delta``.
    """
    d = d or GraphDistance("exact")
    k = len(Q_sample)
    if k < 5:
        raise InvalidInputError("need at least 5 sample graphs")
    D = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            D[i, j] = D[j, i] = d(Q_sample[i], Q_sample[j])
    Y = np.array([embed(g, R, d) for g in Q_sample])
    D2 = D ** 2
    f = D2.mean(axis=1)
    medoid = int(np.argmin(f))
    var_q = float(f[medoid])
    var_f = float(((Y - Y.mean(axis=0)) ** 2).sum(axis=1).mean())
    v2 = R.M * var_q - 0.5 * var_f

    rng = np.random.default_rng(seed)
    idx = rng.integers(0, k, (n_boot, k))
    X = np.empty(n_boot)
    for b in range(n_boot):
        sel = idx[b]
        mu = int(np.argmin(D2[:, sel].mean(axis=1)))
        X[b] = float(((Y[sel].mean(axis=0) - Y[mu]) ** 2).sum())
    if deltas is None:
        deltas = [x for x in np.quantile(X, [0.5, 0.75, 0.9, 0.99]) if x > 0] or [1.0]
    deltas = [float(x) for x in deltas]
    freq = [float((X >= dl).mean()) for dl in deltas]
    bounds = [v2 / dl for dl in deltas]
    viol = sum(fr > bd for fr, bd in zip(freq, bounds))
    return V2Report(float(v2), var_q, var_f, R.M, medoid, deltas, freq, bounds, int(viol))


def frobenius_bound_setup(N: int = 6, M: int = 20, seed: int = 0, samples: int = 200):
    """Random prototypes spanning the weight space, their scaling and a covariance.

    Undirected graphs over ``N`` vertices live in ``N (N - 1) / 2`` dimensions,
    so ``M`` must exceed that for the two-sided bound to apply.
    """
    from .embedding import classical_scaling, identified_embedding
    from .graph_core import random_identified_graph

    rng = np.random.default_rng(seed)
    protos = [random_identified_graph(rng, N, 0.7) for _ in range(M)]
    P = identified_embedding(protos, protos)
    P = (P + P.T) / 2
    np.fill_diagonal(P, 0.0)
    model = classical_scaling(P)
    sample = [random_identified_graph(rng, N, 0.5) for _ in range(samples)]
    U = u_transform(identified_embedding(sample, protos), model)
    sigma = np.cov(U, rowvar=False)
    return protos, model, sigma, rng


def run_all_checks(pairs: int = 500, seed: int = 0) -> dict:
    """Every bound check on random tiny graphs; returns JSON-ready dicts."""
    from .datasets import random_graph

    rng = np.random.default_rng(seed)
    exact = GraphDistance("exact")
    graphs = [random_graph(rng, (1, 4)) for _ in range(2 * pairs)]
    gp = list(zip(graphs[::2], graphs[1::2]))
    R = PrototypeSet.from_graphs([random_graph(rng, (2, 4)) for _ in range(3)], exact)
    Y = np.array([embed(g, R, exact) for g in graphs[:100]])
    sigma = np.cov(Y, rowvar=False) + 1e-9 * np.eye(R.M)
    out = {
        "lower_bound_exact": check_mahalanobis_lower_bound(gp, R, sigma, exact).to_dict(),
        "lower_bound_bipartite": check_mahalanobis_lower_bound(gp, R, sigma, GraphDistance("bipartite")).to_dict(),
        "lipschitz_chain": check_lipschitz_chain(gp, R, exact).to_dict(),
    }
    protos, model, sig4, rng4 = frobenius_bound_setup(seed=seed)
    from .graph_core import random_identified_graph

    ip = [(random_identified_graph(rng4, 6), random_identified_graph(rng4, 6)) for _ in range(pairs)]
    out["frobenius_two_sided"] = check_frobenius_bounds(ip, protos, model, sig4).to_dict()
    for n in (2, 5, 20):
        out[f"frechet_n{n}"] = check_frechet_euclidean(n, 1, 10_000, seed).to_dict()
    out["v2"] = estimate_v2(graphs[:20], R, exact, 1000, seed=seed).to_dict()
    return out

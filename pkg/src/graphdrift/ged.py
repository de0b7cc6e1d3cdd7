"""Graph edit distance.

Two distances are provided:

* :func:`bipartite_ged` -- the polynomial upper bound obtained from one
  linear sum assignment over vertices whose cells carry local edge costs
  (Riesen & Bunke).  Used operationally.
* :func:`exact_ged` -- exhaustive branch-and-bound over partial vertex
  matchings.  Only feasible for tiny graphs; used as a test oracle.

Both evaluate a vertex matching with the same induced edit-path cost
(:func:`edit_path_cost`), so any matching found by the approximation is a
real edit path and its cost can never be below the exact distance.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError, SchemaError, SizeLimitError
from .graph_core import CATEGORICAL, NONE, NUMERIC, AttributedGraph, common_schema

SENTINEL_FACTOR = 1e6


@dataclass(frozen=True)
class CostModel:
    """Edit costs defining the graph metric.

    Substitution costs are ``scale * attribute_distance`` where the attribute
    distance is Euclidean for numeric vectors and 0/1 for categorical symbols.
    Insertion and deletion costs must agree, otherwise the distance is not
    symmetric.
    """

    node_insert: float = 1.0
    node_delete: float = 1.0
    node_subst: float = 1.0
    edge_insert: float = 1.0
    edge_delete: float = 1.0
    edge_subst: float = 1.0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not (value >= 0 and math.isfinite(value)):
                raise InvalidInputError(f"cost {name}={value} must be finite and nonnegative")
        if self.node_insert != self.node_delete or self.edge_insert != self.edge_delete:
            raise InvalidInputError("insertion and deletion costs must be equal")

    @classmethod
    def from_dict(cls, payload: dict | None) -> "CostModel":
        return cls(**(payload or {}))

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Assignment:
    """Perfect assignment ``row i -> permutation[i]`` and its total cost."""

    permutation: np.ndarray
    total_cost: float


def lsap_solve(cost_matrix) -> Assignment:
    """Minimum-cost perfect assignment of a square cost matrix.

    Forbidden cells should hold a large finite sentinel.  Backed by scipy's
    shortest-augmenting-path (Jonker-Volgenant family) solver.
    """
    C = np.asarray(cost_matrix, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise InvalidInputError(f"cost matrix must be square, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise InvalidInputError("cost matrix has non-finite entries")
    rows, cols = linear_sum_assignment(C)
    perm = np.empty(C.shape[0], dtype=int)
    perm[rows] = cols
    return Assignment(perm, float(C[rows, cols].sum()))


class _GraphView:
    """Index-based arrays derived from a graph, cached for repeated GED calls."""

    def __init__(self, g: AttributedGraph):
        self.n = g.num_vertices
        self.directed = g.directed
        s = g.schema
        self.node_kind = s.node_kind
        self.edge_kind = s.edge_kind
        if s.node_kind == NUMERIC:
            self.node_attr = np.array(g.vertex_attrs, dtype=float).reshape(self.n, -1)
        else:
            self.node_attr = list(g.vertex_attrs)
        # edge lookup: (i, j) -> attribute, both orientations when undirected
        self.emap = {}
        self.out = [[] for _ in range(self.n)]
        self.inc = [[] for _ in range(self.n)]
        for i, j, a in g.edge_index:
            self.emap[(i, j)] = a
            self.out[i].append(a)
            self.inc[j].append(a)
            if not g.directed:
                self.emap[(j, i)] = a
                self.out[j].append(a)
        self.num_edges = g.num_edges
        self.out_deg = np.array([len(x) for x in self.out], dtype=float)
        self.in_deg = np.array([len(x) for x in self.inc], dtype=float)
        self.out_labels = [Counter(x) for x in self.out]
        self.in_labels = [Counter(x) for x in self.inc]


def _view(g: AttributedGraph) -> _GraphView:
    v = g.__dict__.get("_ged_view")
    if v is None:
        v = _GraphView(g)
        g.__dict__["_ged_view"] = v
    return v


def _attr_dist(a, b) -> float:
    if a is None and b is None:
        return 0.0
    if isinstance(a, str) or isinstance(b, str):
        return 0.0 if a == b else 1.0
    return math.dist(a, b)


def _node_subst_matrix(v1: _GraphView, v2: _GraphView, cost: CostModel) -> np.ndarray:
    if v1.n == 0 or v2.n == 0:
        return np.zeros((v1.n, v2.n))
    kind = v1.node_kind if v1.node_kind != NONE else v2.node_kind
    if kind == NUMERIC:
        a, b = v1.node_attr, v2.node_attr
        D = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
    elif kind == CATEGORICAL:
        a = np.array(v1.node_attr, dtype=object)
        b = np.array(v2.node_attr, dtype=object)
        D = (a[:, None] != b[None, :]).astype(float)
    else:
        D = np.zeros((v1.n, v2.n))
    return cost.node_subst * D


def _edge_subst(a, b, cost: CostModel) -> float:
    # A substituted edge is never charged more than delete + insert.
    return min(cost.edge_subst * _attr_dist(a, b), cost.edge_delete + cost.edge_insert)


def _local_edge_cost(l1: list, l2: list, c1: Counter, c2: Counter, kind: str,
                     cost: CostModel) -> float:
    """Optimal assignment cost between two multisets of incident edges."""
    d1, d2 = len(l1), len(l2)
    indel = cost.edge_delete * max(0, d1 - d2) + cost.edge_insert * max(0, d2 - d1)
    if kind == NONE:
        return indel
    if kind == CATEGORICAL:
        common = sum((c1 & c2).values())
        mismatch = min(d1, d2) - common
        return indel + mismatch * min(cost.edge_subst, cost.edge_delete + cost.edge_insert)
    if d1 == 0 or d2 == 0:
        return indel
    k = d1 + d2
    C = np.zeros((k, k))
    big = SENTINEL_FACTOR * max(1.0, cost.edge_delete + cost.edge_insert)
    for i, a in enumerate(l1):
        for j, b in enumerate(l2):
            C[i, j] = _edge_subst(a, b, cost)
    C[:d1, d2:] = big
    C[np.arange(d1), d2 + np.arange(d1)] = cost.edge_delete
    C[d1:, :d2] = big
    C[d1 + np.arange(d2), np.arange(d2)] = cost.edge_insert
    return lsap_solve(C).total_cost


def _edge_block(v1: _GraphView, v2: _GraphView, cost: CostModel) -> np.ndarray:
    kind = v1.edge_kind if v1.edge_kind != NONE else v2.edge_kind
    if kind == NONE:
        E = (cost.edge_delete * np.maximum(0.0, v1.out_deg[:, None] - v2.out_deg[None, :])
             + cost.edge_insert * np.maximum(0.0, v2.out_deg[None, :] - v1.out_deg[:, None]))
        if v1.directed:
            E += (cost.edge_delete * np.maximum(0.0, v1.in_deg[:, None] - v2.in_deg[None, :])
                  + cost.edge_insert * np.maximum(0.0, v2.in_deg[None, :] - v1.in_deg[:, None]))
        return E
    E = np.zeros((v1.n, v2.n))
    for i in range(v1.n):
        for j in range(v2.n):
            E[i, j] = _local_edge_cost(v1.out[i], v2.out[j], v1.out_labels[i],
                                       v2.out_labels[j], kind, cost)
            if v1.directed:
                E[i, j] += _local_edge_cost(v1.inc[i], v2.inc[j], v1.in_labels[i],
                                            v2.in_labels[j], kind, cost)
    return E


def bipartite_cost_matrix(g1: AttributedGraph, g2: AttributedGraph,
                          cost: CostModel) -> np.ndarray:
    """The (n1+n2) x (n1+n2) node assignment matrix with local edge costs.

    Blocks: substitutions (top-left), deletions on the diagonal of the
    top-right block, insertions on the diagonal of the bottom-left block,
    zeros bottom-right.  Each edge is seen from both endpoints, so local edge
    costs are halved.
    """
    v1, v2 = _view(g1), _view(g2)
    n1, n2 = v1.n, v2.n
    half = 0.5
    S = _node_subst_matrix(v1, v2, cost) + half * _edge_block(v1, v2, cost)
    dele = cost.node_delete + half * cost.edge_delete * (v1.out_deg + (v1.in_deg if v1.directed else 0))
    ins = cost.node_insert + half * cost.edge_insert * (v2.out_deg + (v2.in_deg if v2.directed else 0))
    finite_max = max([1.0, S.max(initial=0.0), dele.max(initial=0.0), ins.max(initial=0.0)])
    big = SENTINEL_FACTOR * finite_max
    C = np.zeros((n1 + n2, n1 + n2))
    C[:n1, :n2] = S
    C[:n1, n2:] = big
    C[np.arange(n1), n2 + np.arange(n1)] = dele
    C[n1:, :n2] = big
    C[n1 + np.arange(n2), np.arange(n2)] = ins
    return C


def edit_path_cost(g1: AttributedGraph, g2: AttributedGraph, mapping,
                   cost: CostModel) -> float:
    """Cost of the edit path induced by a partial vertex matching.

    ``mapping[i]`` is the position in ``g2`` matched to vertex ``i`` of ``g1``,
    or ``-1`` when the vertex is deleted.  Unmatched vertices of ``g2`` are
    inserted; an edge survives as a substitution only when both endpoints are
    matched onto an existing edge.
    """
    v1, v2 = _view(g1), _view(g2)
    mapping = [int(m) for m in mapping]
    if len(mapping) != v1.n:
        raise InvalidInputError("mapping length differs from |V1|")
    used = [m for m in mapping if m >= 0]
    if len(set(used)) != len(used) or any(m >= v2.n for m in used):
        raise InvalidInputError("mapping is not injective into V2")
    total = 0.0
    for i, m in enumerate(mapping):
        if m >= 0:
            total += cost.node_subst * _attr_dist(v1.node_attr[i] if v1.node_kind != NUMERIC
                                                  else tuple(v1.node_attr[i]),
                                                  v2.node_attr[m] if v2.node_kind != NUMERIC
                                                  else tuple(v2.node_attr[m]))
        else:
            total += cost.node_delete
    total += cost.node_insert * (v2.n - len(used))
    matched_edges = 0
    for (i, j), a in v1.emap.items():
        if not v1.directed and i > j:
            continue
        mi, mj = mapping[i], mapping[j]
        b = v2.emap.get((mi, mj)) if mi >= 0 and mj >= 0 else None
        if mi >= 0 and mj >= 0 and (mi, mj) in v2.emap:
            total += _edge_subst(a, b, cost)
            matched_edges += 1
        else:
            total += cost.edge_delete
    total += cost.edge_insert * (v2.num_edges - matched_edges)
    return total


def _check_pair(g1: AttributedGraph, g2: AttributedGraph) -> None:
    if g1.directed != g2.directed:
        raise SchemaError("cannot compare a directed with an undirected graph")
    common_schema([g1, g2])


def _bipartite_mapping(g1, g2, cost) -> np.ndarray:
    n1, n2 = g1.num_vertices, g2.num_vertices
    perm = lsap_solve(bipartite_cost_matrix(g1, g2, cost)).permutation[:n1]
    return np.where(perm < n2, perm, -1)


def bipartite_ged(g1: AttributedGraph, g2: AttributedGraph,
                  cost: CostModel | None = None) -> float:
    """Bipartite (assignment-based) upper bound on the graph edit distance.

    The assignment is solved in both directions and the cheaper induced edit
    path is returned, which makes the value symmetric in its arguments.
    """
    cost = cost or CostModel()
    _check_pair(g1, g2)
    if g1 == g2:
        return 0.0
    n1, n2 = g1.num_vertices, g2.num_vertices
    if n1 == 0 or n2 == 0:
        return edit_path_cost(g1, g2, [-1] * n1, cost)
    fwd = edit_path_cost(g1, g2, _bipartite_mapping(g1, g2, cost), cost)
    back = _bipartite_mapping(g2, g1, cost)
    inverse = np.full(n1, -1)
    for j, i in enumerate(back):
        if i >= 0:
            inverse[i] = j
    bwd = edit_path_cost(g1, g2, inverse, cost)
    return min(fwd, bwd)


def exact_ged(g1: AttributedGraph, g2: AttributedGraph,
              cost: CostModel | None = None, max_total_vertices: int = 12) -> float:
    """Exact graph edit distance by exhaustive branch-and-bound.

    Enumerates every partial injective vertex map from ``g1`` into ``g2`` and
    minimizes the induced edit-path cost.  The search starts from the trivial
    delete-everything/insert-everything path, so it does not depend on any
    approximation.
    """
    cost = cost or CostModel()
    _check_pair(g1, g2)
    n1, n2 = g1.num_vertices, g2.num_vertices
    if n1 + n2 > max_total_vertices:
        raise SizeLimitError(f"exact GED capped at {max_total_vertices} vertices, got {n1 + n2}")
    v1, v2 = _view(g1), _view(g2)
    subst = _node_subst_matrix(v1, v2, cost)
    directed = g1.directed
    e1, e2 = v1.emap, v2.emap
    # g1 vertices visited in decreasing degree order tightens pruning early
    order = sorted(range(n1), key=lambda i: -(v1.out_deg[i] + v1.in_deg[i]))
    best = [edit_path_cost(g1, g2, [-1] * n1, cost)]
    phi = [-1] * n1
    used = [False] * n2
    ins_e, del_e = cost.edge_insert, cost.edge_delete

    def pair_cost(i, j, k):
        # edges between newly placed g1 vertex i (-> j) and earlier vertex k
        mk = phi[k]
        c = 0.0
        for a_key, b_key in (((i, k), (j, mk)), ((k, i), (mk, j))):
            a = e1.get(a_key)
            has_b = j >= 0 and mk >= 0 and b_key in e2
            if a is not None or a_key in e1:
                c += _edge_subst(a, e2.get(b_key), cost) if has_b else del_e
            elif has_b:
                c += ins_e
            if not directed:
                break
        return c

    def remaining_insert_cost():
        c = cost.node_insert * used.count(False)
        for (a, b) in e2:
            if not directed and a > b:
                continue
            if not (used[a] and used[b]):
                c += ins_e
        return c

    def rec(depth, acc):
        if acc >= best[0]:
            return
        if depth == n1:
            total = acc + remaining_insert_cost()
            if total < best[0]:
                best[0] = total
            return
        i = order[depth]
        placed = order[:depth]
        for j in range(n2):
            if used[j]:
                continue
            phi[i] = j
            used[j] = True
            c = subst[i, j]
            for k in placed:
                c += pair_cost(i, j, k)
            rec(depth + 1, acc + c)
            used[j] = False
        phi[i] = -1
        c = cost.node_delete
        for k in placed:
            c += pair_cost(i, -1, k)
        rec(depth + 1, acc + c)

    rec(0, 0.0)
    return float(best[0])


@dataclass(frozen=True)
class GraphDistance:
    """Picklable callable ``d(g1, g2)`` bundling a method with a cost model."""

    method: str = "bipartite"
    cost: CostModel = CostModel()

    @cached_property
    def _fn(self):
        if self.method == "bipartite":
            return bipartite_ged
        if self.method == "exact":
            return exact_ged
        raise InvalidInputError(f"unknown GED method {self.method!r}")

    def __call__(self, g1: AttributedGraph, g2: AttributedGraph) -> float:
        return self._fn(g1, g2, self.cost)

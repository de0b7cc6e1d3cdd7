"""Attributed graphs with variable size and heterogeneous labels.

A graph is immutable once built.  Vertex identifiers are opaque strings and
carry no meaning across graphs; only :class:`IdentifiedGraph` assumes a fixed
vertex universe.

Attribute values are one of

* a tuple of floats (numeric vector, e.g. 2-D coordinates),
* a string (categorical symbol),
* ``None`` (unlabelled).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError, SchemaError

AttributeValue = tuple | str | None

NUMERIC = "numeric"
CATEGORICAL = "categorical"
NONE = "none"


def attribute_kind(value: AttributeValue) -> str:
    if value is None:
        return NONE
    if isinstance(value, str):
        return CATEGORICAL
    if isinstance(value, tuple):
        return NUMERIC
    raise SchemaError(f"unsupported attribute value {value!r}")


def normalize_attribute(value: Any) -> AttributeValue:
    """Coerce user input to the canonical hashable attribute form."""
    if value is None or isinstance(value, str):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)):
        return (float(value),)
    if isinstance(value, (list, tuple, np.ndarray)):
        return tuple(float(v) for v in value)
    raise SchemaError(f"unsupported attribute value {value!r}")


@dataclass(frozen=True)
class Schema:
    """Attribute schema shared by every graph of a dataset."""

    node_kind: str = NONE
    node_dim: int = 0
    edge_kind: str = NONE
    edge_dim: int = 0
    node_alphabet: frozenset | None = None
    edge_alphabet: frozenset | None = None

    def validate(self, g: "AttributedGraph") -> None:
        _check_values(g.vertex_attrs, self.node_kind, self.node_dim,
                      self.node_alphabet, "vertex")
        _check_values([a for _, a in g.edges], self.edge_kind, self.edge_dim,
                      self.edge_alphabet, "edge")


def _check_values(values, kind, dim, alphabet, what):
    for v in values:
        k = attribute_kind(v)
        if k != kind:
            raise SchemaError(f"{what} attribute {v!r} is {k}, schema expects {kind}")
        if k == NUMERIC and len(v) != dim:
            raise SchemaError(f"{what} attribute {v!r} has length {len(v)}, expected {dim}")
        if k == CATEGORICAL and alphabet is not None and v not in alphabet:
            raise SchemaError(f"{what} symbol {v!r} not in the declared alphabet")


def _infer_kind(values) -> tuple[str, int]:
    kinds = {attribute_kind(v) for v in values}
    if not kinds:
        return NONE, 0
    if len(kinds) > 1:
        raise SchemaError(f"mixed attribute kinds {sorted(kinds)} in one graph")
    kind = kinds.pop()
    if kind == NUMERIC:
        dims = {len(v) for v in values}
        if len(dims) > 1:
            raise SchemaError(f"numeric attributes of different lengths {sorted(dims)}")
        return kind, dims.pop()
    return kind, 0


@dataclass(frozen=True)
class AttributedGraph:
    """Directed or undirected graph with labelled vertices and edges.

    ``edges`` holds ``((source, target), attribute)`` pairs.  Undirected edges
    are stored once, with endpoints ordered by vertex position.  Use
    :meth:`build` rather than the raw constructor.
    """

    vertex_ids: tuple[str, ...]
    vertex_attrs: tuple[AttributeValue, ...]
    edges: tuple[tuple[tuple[str, str], AttributeValue], ...]
    directed: bool = False

    def __post_init__(self):
        if len(self.vertex_ids) != len(self.vertex_attrs):
            raise InvalidInputError("vertex_ids and vertex_attrs differ in length")
        if len(set(self.vertex_ids)) != len(self.vertex_ids):
            raise InvalidInputError("duplicate vertex identifiers")
        pos = {v: i for i, v in enumerate(self.vertex_ids)}
        seen = set()
        for (u, v), _ in self.edges:
            if u not in pos or v not in pos:
                raise InvalidInputError(f"edge ({u}, {v}) has an undeclared endpoint")
            if u == v:
                raise InvalidInputError(f"self-loop on vertex {u} is not supported")
            if not self.directed and pos[u] > pos[v]:
                raise InvalidInputError("undirected edge not in canonical order; use build()")
            if (u, v) in seen:
                raise InvalidInputError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
        _infer_kind(self.vertex_attrs)
        _infer_kind([a for _, a in self.edges])

    @classmethod
    def build(cls, vertices: Mapping[str, Any] | Sequence[str],
              edges: Mapping[tuple[str, str], Any] | Iterable[tuple[str, str]] = (),
              directed: bool = False) -> "AttributedGraph":
        """Construct a graph from a vertex mapping and an edge mapping/list.

        ``vertices`` is either a sequence of ids (unlabelled) or a mapping from
        id to attribute; ``edges`` is either a sequence of pairs or a mapping
        from pair to attribute.
        """
        if isinstance(vertices, Mapping):
            ids = tuple(str(v) for v in vertices)
            attrs = tuple(normalize_attribute(a) for a in vertices.values())
        else:
            ids = tuple(str(v) for v in vertices)
            attrs = (None,) * len(ids)
        if isinstance(edges, Mapping):
            items = [((str(u), str(v)), normalize_attribute(a)) for (u, v), a in edges.items()]
        else:
            items = [((str(u), str(v)), None) for u, v in edges]
        pos = {v: i for i, v in enumerate(ids)}
        canon = []
        keys = set()
        for (u, v), a in items:
            if not directed and u in pos and v in pos and pos[u] > pos[v]:
                u, v = v, u
            if (u, v) in keys:
                raise InvalidInputError(f"duplicate edge ({u}, {v})")
            keys.add((u, v))
            canon.append(((u, v), a))
        canon.sort(key=lambda e: (pos.get(e[0][0], -1), pos.get(e[0][1], -1)))
        return cls(ids, attrs, tuple(canon), directed)

    @property
    def num_vertices(self) -> int:
        return len(self.vertex_ids)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.vertex_ids)}

    @cached_property
    def edge_index(self) -> tuple[tuple[int, int, AttributeValue], ...]:
        """Edges as ``(i, j, attribute)`` with vertex positions."""
        idx = self.index
        return tuple((idx[u], idx[v], a) for (u, v), a in self.edges)

    @cached_property
    def schema(self) -> Schema:
        nk, nd = _infer_kind(self.vertex_attrs)
        ek, ed = _infer_kind([a for _, a in self.edges])
        return Schema(nk, nd, ek, ed)

    def to_dict(self) -> dict:
        return {
            "directed": self.directed,
            "vertices": [[v, _attr_to_json(a)] for v, a in zip(self.vertex_ids, self.vertex_attrs)],
            "edges": [[u, v, _attr_to_json(a)] for (u, v), a in self.edges],
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "AttributedGraph":
        vertices = {v: _attr_from_json(a) for v, a in payload["vertices"]}
        edges = {(u, v): _attr_from_json(a) for u, v, a in payload["edges"]}
        return cls.build(vertices, edges, directed=bool(payload.get("directed", False)))


def _attr_to_json(a: AttributeValue):
    return list(a) if isinstance(a, tuple) else a


def _attr_from_json(a):
    return tuple(float(x) for x in a) if isinstance(a, list) else a


def common_schema(graphs: Iterable[AttributedGraph]) -> Schema:
    """Return the schema shared by ``graphs``; mixed schemas are rejected.

    Graphs without vertices (or edges) are compatible with any vertex (edge)
    schema.
    """
    node = edge = None
    directed = None
    for g in graphs:
        s = g.schema
        if directed is None:
            directed = g.directed
        elif g.directed != directed:
            raise SchemaError("directed and undirected graphs mixed in one collection")
        if g.num_vertices:
            cur = (s.node_kind, s.node_dim)
            if node is None:
                node = cur
            elif cur != node:
                raise SchemaError(f"vertex schema {cur} differs from {node}")
        if g.num_edges:
            cur = (s.edge_kind, s.edge_dim)
            if edge is None:
                edge = cur
            elif cur != edge:
                raise SchemaError(f"edge schema {cur} differs from {edge}")
    node = node or (NONE, 0)
    edge = edge or (NONE, 0)
    return Schema(node[0], node[1], edge[0], edge[1])


def adjacency_matrix(g: AttributedGraph,
                     weight_rule: Callable[[AttributeValue], float] | None = None) -> np.ndarray:
    """|V| x |V| adjacency matrix in ``g.vertex_ids`` order.

    ``weight_rule`` maps an edge attribute to a scalar weight; by default every
    edge has weight 1.  Undirected graphs yield symmetric matrices.
    """
    n = g.num_vertices
    A = np.zeros((n, n))
    for i, j, a in g.edge_index:
        w = 1.0 if weight_rule is None else float(weight_rule(a))
        A[i, j] = w
        if not g.directed:
            A[j, i] = w
    return A


def scalar_weight(a: AttributeValue) -> float:
    """Weight rule reading a one-component numeric attribute (``None`` -> 1)."""
    if a is None:
        return 1.0
    if isinstance(a, tuple) and len(a) == 1:
        return a[0]
    raise SchemaError(f"cannot read a scalar weight from {a!r}")


def from_adjacency(A: np.ndarray, directed: bool = False,
                   vertex_ids: Sequence[str] | None = None,
                   weighted: bool = True) -> AttributedGraph:
    """Inverse of :func:`adjacency_matrix` with :func:`scalar_weight`.

    Nonzero entries become edges; with ``weighted`` their value is stored as a
    one-component numeric edge attribute.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise InvalidInputError("adjacency matrix must be square")
    if not directed and not np.allclose(A, A.T):
        raise InvalidInputError("undirected graph needs a symmetric matrix")
    if np.any(np.diag(A) != 0):
        raise InvalidInputError("self-loops are not supported")
    ids = list(vertex_ids) if vertex_ids is not None else [str(i) for i in range(n)]
    edges = {}
    for i in range(n):
        for j in range(n):
            if A[i, j] != 0 and (directed or j > i):
                edges[(ids[i], ids[j])] = (float(A[i, j]),) if weighted else None
    return AttributedGraph.build(ids, edges, directed=directed)


def laplacian(g: AttributedGraph) -> np.ndarray:
    """Combinatorial Laplacian ``D - A`` of the unweighted undirected skeleton."""
    A = adjacency_matrix(g)
    S = ((A + A.T) > 0).astype(float)
    return np.diag(S.sum(axis=1)) - S


@dataclass(frozen=True, eq=False)
class IdentifiedGraph:
    """Graph over a fixed universe of ``N`` vertices, given by its weights.

    Row/column ``i`` always refers to the same vertex, so any permutation of
    the matrix is a different graph.
    """

    weights: np.ndarray
    directed: bool = False

    def __post_init__(self):
        W = np.array(self.weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] < 1:
            raise InvalidInputError("weights must be a non-empty square matrix")
        if np.any(W < 0) or np.any(W > 1) or not np.all(np.isfinite(W)):
            raise InvalidInputError("weights must lie in [0, 1]")
        if not self.directed and not np.array_equal(W, W.T):
            raise InvalidInputError("undirected identified graph needs symmetric weights")
        W.setflags(write=False)
        object.__setattr__(self, "weights", W)

    @property
    def universe_size(self) -> int:
        return self.weights.shape[0]

    def __eq__(self, other):
        return (isinstance(other, IdentifiedGraph) and self.directed == other.directed
                and np.array_equal(self.weights, other.weights))

    def __hash__(self):
        return hash((self.directed, self.weights.tobytes()))


def random_identified_graph(rng: np.random.Generator, N: int, density: float = 0.5,
                            directed: bool = False) -> IdentifiedGraph:
    """Random weighted graph over ``N`` identified vertices, no self-loops."""
    W = rng.uniform(0.0, 1.0, size=(N, N)) * (rng.uniform(size=(N, N)) < density)
    np.fill_diagonal(W, 0.0)
    if not directed:
        W = np.triu(W, 1)
        W = W + W.T
    return IdentifiedGraph(W, directed=directed)

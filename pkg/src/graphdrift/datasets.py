"""Graph collections: GXL/CXL ingestion and synthetic generators.

GXL files hold one graph each; a CXL index lists ``<print file=.. class=..>``
entries.  Which GXL attribute keys become vertex and edge labels is decided
by a small JSON schema (see ``graphdrift/schemas``).
"""
from __future__ import annotations

import json
import warnings
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import GXLParseError, InvalidInputError, SchemaError
from .graph_core import AttributedGraph

# fixed salt so synthetic class templates depend only on the class index
_TEMPLATE_SALT = 0x5EED


def load_schema(schema: str | Mapping | Path) -> dict:
    """A shipped schema by name, a JSON file path, or an already parsed mapping."""
    if isinstance(schema, Mapping):
        return dict(schema)
    p = Path(schema)
    if p.suffix == ".json" and p.exists():
        return json.loads(p.read_text())
    try:
        text = resources.files("graphdrift").joinpath("schemas", f"{schema}.json").read_text()
    except FileNotFoundError:
        raise SchemaError(f"unknown dataset schema {schema!r}") from None
    return json.loads(text)


def _value(attr: ET.Element, where: str):
    children = list(attr)
    if len(children) != 1:
        raise GXLParseError(f"{where}: attribute {attr.get('name')!r} has no single value")
    v = children[0]
    text = (v.text or "").strip()
    if v.tag in ("float", "double"):
        return float(text)
    if v.tag in ("int", "long"):
        return int(text)
    return text


def _label(values: dict, spec: dict, ignore: Iterable[str], where: str):
    keys = spec.get("keys", [])
    unknown = set(values) - set(keys) - set(ignore)
    if unknown:
        raise SchemaError(f"{where}: unknown attribute key(s) {sorted(unknown)}")
    missing = [k for k in keys if k not in values]
    if missing:
        raise SchemaError(f"{where}: missing attribute key(s) {missing}")
    kind = spec.get("kind", "none")
    if kind == "none":
        return None
    if kind == "numeric":
        return tuple(float(values[k]) for k in keys)
    if kind == "categorical":
        return "|".join(str(values[k]).strip() for k in keys)
    raise SchemaError(f"unknown attribute kind {kind!r}")


def parse_gxl(path: str | Path, schema: str | Mapping = "letter") -> AttributedGraph:
    """One GXL graph with labels extracted according to ``schema``."""
    path = Path(path)
    sch = load_schema(schema)
    try:
        root = ET.parse(path).getroot()
    except (ET.ParseError, OSError) as exc:
        raise GXLParseError(f"{path.name}: {exc}") from exc
    graph = root.find("graph") if root.tag != "graph" else root
    if graph is None:
        raise GXLParseError(f"{path.name}: no <graph> element")
    directed = graph.get("edgemode", "undirected") == "directed"
    ign = sch.get("ignore", {})
    vertices = {}
    for node in graph.iter("node"):
        vid = node.get("id")
        if vid is None:
            raise GXLParseError(f"{path.name}: node without id")
        vals = {a.get("name"): _value(a, path.name) for a in node.findall("attr")}
        vertices[vid] = _label(vals, sch["node"], ign.get("node", []), f"{path.name} node {vid}")
    edges = {}
    loops = 0
    for edge in graph.iter("edge"):
        u, v = edge.get("from"), edge.get("to")
        if u not in vertices or v not in vertices:
            raise GXLParseError(f"{path.name}: edge ({u}, {v}) has an undeclared endpoint")
        if u == v:
            loops += 1
            continue
        vals = {a.get("name"): _value(a, path.name) for a in edge.findall("attr")}
        key = (u, v) if directed or (v, u) not in edges else (v, u)
        # repeated edges keep their first label
        if key not in edges:
            edges[key] = _label(vals, sch["edge"], ign.get("edge", []), f"{path.name} edge ({u}, {v})")
    if loops:
        warnings.warn(f"{path.name}: dropped {loops} self-loop(s)", stacklevel=2)
    return AttributedGraph.build(vertices, edges, directed=directed)


def parse_cxl(path: str | Path) -> list[tuple[str, str]]:
    """``(file, class)`` entries of a CXL class index, in file order."""
    path = Path(path)
    try:
        root = ET.parse(path).getroot()
    except (ET.ParseError, OSError) as exc:
        raise GXLParseError(f"{path.name}: {exc}") from exc
    out = [(p.get("file"), p.get("class")) for p in root.iter("print")]
    if any(f is None or c is None for f, c in out):
        raise GXLParseError(f"{path.name}: <print> entry without file or class")
    return out


def load_gxl_collection(path: str | Path, class_index: str | Path | Sequence | None = None,
                        schema: str | Mapping = "letter") -> dict[str, list[AttributedGraph]]:
    """Graphs grouped by class label.

    ``class_index`` names one or more CXL files (relative to ``path`` or
    absolute); by default every ``*.cxl`` in ``path`` is used.  A file listed
    in several indices is loaded once.
    """
    path = Path(path)
    if class_index is None:
        indices = sorted(path.glob("*.cxl"))
        if not indices:
            raise GXLParseError(f"{path}: no CXL class index found")
    elif isinstance(class_index, (str, Path)):
        indices = [class_index]
    else:
        indices = list(class_index)
    sch = load_schema(schema)
    out: dict[str, list[AttributedGraph]] = {}
    seen = set()
    for idx in indices:
        idx = Path(idx)
        if not idx.is_absolute():
            idx = path / idx
        for fname, cls in parse_cxl(idx):
            if fname in seen:
                continue
            seen.add(fname)
            out.setdefault(cls, []).append(parse_gxl(path / fname, sch))
    return out


def collection_counts(collection: Mapping[str, Sequence]) -> dict[str, int]:
    return {k: len(v) for k, v in collection.items()}


@dataclass(frozen=True)
class SyntheticLetterSpec:
    """Geometric graphs built from per-class coordinate templates.

    Class ``c`` has a random template shape shifted by ``c * class_separation``
    along the first axis; every graph perturbs the template coordinates with
    Gaussian noise of scale ``coordinate_noise``.
    """

    num_classes: int = 15
    vertices_range: tuple[int, int] = (4, 6)
    coordinate_noise: float = 0.05
    class_separation: float = 1.0
    graphs_per_class: int = 150
    edge_radius: float = 0.8

    def __post_init__(self):
        lo, hi = self.vertices_range
        if self.num_classes < 1 or not 1 <= lo <= hi or self.graphs_per_class < 1:
            raise InvalidInputError("invalid synthetic letter spec")
        if self.class_separation <= 0 or self.coordinate_noise < 0:
            raise InvalidInputError("separation must be positive and noise nonnegative")

    @classmethod
    def from_dict(cls, payload: Mapping | None) -> "SyntheticLetterSpec":
        p = dict(payload or {})
        if "vertices_range" in p:
            p["vertices_range"] = tuple(p["vertices_range"])
        return cls(**p)


def class_label(c: int) -> str:
    """Letters ``A..Z`` then ``C26, C27, ...``."""
    return chr(ord("A") + c) if c < 26 else f"C{c}"


def class_template(spec: SyntheticLetterSpec, c: int) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Template coordinates and edges of class ``c``, independent of any seed."""
    rng = np.random.default_rng([_TEMPLATE_SALT, c])
    lo, hi = spec.vertices_range
    k = int(rng.integers(lo, hi + 1))
    xy = rng.uniform(0.0, 1.0, (k, 2))
    xy[:, 0] += c * spec.class_separation
    dist = np.linalg.norm(xy[:, None] - xy[None], axis=2)
    edges = [(i, j) for i in range(k) for j in range(i + 1, k) if dist[i, j] < spec.edge_radius]
    # chain consecutive vertices so that no template is edgeless
    edges = sorted(set(edges) | {(i, i + 1) for i in range(k - 1)})
    return xy, edges


def generate_synthetic(spec: SyntheticLetterSpec, seed: int = 0) -> dict[str, list[AttributedGraph]]:
    """``graphs_per_class`` noisy copies of each class template."""
    rng = np.random.default_rng(seed)
    out = {}
    for c in range(spec.num_classes):
        xy, edges = class_template(spec, c)
        ids = [str(i) for i in range(len(xy))]
        graphs = []
        for _ in range(spec.graphs_per_class):
            pts = xy + rng.normal(0.0, 1.0, xy.shape) * spec.coordinate_noise
            graphs.append(AttributedGraph.build(
                {v: tuple(p) for v, p in zip(ids, pts)},
                [(ids[i], ids[j]) for i, j in edges]))
        out[class_label(c)] = graphs
    return out


def random_graph(rng: np.random.Generator, n_vertices: int | tuple[int, int] = (1, 5),
                 edge_prob: float = 0.5, node_kind: str = "numeric", edge_kind: str = "none",
                 alphabet: Sequence[str] = ("C", "N", "O"), dim: int = 2,
                 directed: bool = False) -> AttributedGraph:
    """Small random labelled graph for audits and tests."""
    if isinstance(n_vertices, tuple):
        n = int(rng.integers(n_vertices[0], n_vertices[1] + 1))
    else:
        n = int(n_vertices)

    def label(kind):
        if kind == "numeric":
            return tuple(float(x) for x in np.round(rng.uniform(0, 2, dim), 3))
        if kind == "categorical":
            return str(alphabet[int(rng.integers(len(alphabet)))])
        return None

    ids = [f"v{i}" for i in range(n)]
    vertices = {v: label(node_kind) for v in ids}
    edges = {}
    for i in range(n):
        for j in range(n):
            if i == j or (not directed and j < i):
                continue
            if rng.uniform() < edge_prob:
                edges[(ids[i], ids[j])] = label(edge_kind)
    return AttributedGraph.build(vertices, edges, directed=directed)


def generate_density_graphs(rng: np.random.Generator, count: int, n_vertices: int,
                            density: float) -> list[AttributedGraph]:
    """Unlabelled Erdos-Renyi graphs with edge probability ``density``."""
    ids = [str(i) for i in range(n_vertices)]
    iu = np.triu_indices(n_vertices, 1)
    out = []
    for _ in range(count):
        keep = rng.uniform(size=iu[0].size) < density
        out.append(AttributedGraph.build(ids, [(ids[i], ids[j]) for i, j in
                                               zip(iu[0][keep], iu[1][keep])]))
    return out

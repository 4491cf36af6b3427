"""Undirected citation network, component census and topic-similarity weights."""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Mapping

import numpy as np

from .corpus import Corpus

log = logging.getLogger(__name__)

Node = Hashable


class GraphError(ValueError):
    pass


def _edge_key(u, v):
    return (u, v) if u <= v else (v, u)


@dataclass
class CitationGraph:
    """Undirected weighted graph keyed by node id.

    ``self_loops`` stays empty for citation graphs; it is populated only by
    community aggregation, where a super-node carries its internal weight.
    """

    nodes: dict = field(default_factory=dict)  # node -> attribute dict
    edges: dict = field(default_factory=dict)  # (u, v) with u < v -> weight
    self_loops: dict = field(default_factory=dict)  # node -> weight
    adj: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.adj:
            self._rebuild_adjacency()

    def _rebuild_adjacency(self):
        self.adj = {n: {} for n in self.nodes}
        for (u, v), w in self.edges.items():
            self.adj[u][v] = w
            self.adj[v][u] = w

    @classmethod
    def from_edges(cls, edges: Iterable[tuple], nodes: Iterable[Node] = (), attrs: Mapping | None = None) -> "CitationGraph":
        """Build from ``(u, v)`` or ``(u, v, w)`` tuples; repeated pairs keep the last weight."""
        g = cls()
        for n in nodes:
            g.nodes[n] = dict((attrs or {}).get(n, {}))
        for e in edges:
            u, v = e[0], e[1]
            w = float(e[2]) if len(e) > 2 else 1.0
            for n in (u, v):
                if n not in g.nodes:
                    g.nodes[n] = dict((attrs or {}).get(n, {}))
            if u == v:
                g.self_loops[u] = w
            else:
                g.edges[_edge_key(u, v)] = w
        g._rebuild_adjacency()
        return g

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def sorted_nodes(self) -> list:
        return sorted(self.nodes)

    def total_weight(self) -> float:
        return float(sum(self.edges.values()) + sum(self.self_loops.values()))

    def degree(self, node) -> float:
        return float(sum(self.adj[node].values()) + 2.0 * self.self_loops.get(node, 0.0))

    def validate(self) -> None:
        for (u, v), w in self.edges.items():
            if u == v:
                raise GraphError(f"self-loop stored as edge at {u!r}")
            if not u < v:
                raise GraphError(f"edge key {(u, v)!r} not ordered")
            if u not in self.nodes or v not in self.nodes:
                raise GraphError(f"edge {(u, v)!r} references unknown node")
            if not w >= 0:
                raise GraphError(f"edge {(u, v)!r} has negative weight {w}")
        if set(self.adj) != set(self.nodes):
            raise GraphError("adjacency index does not match node set")
        n_half = 0
        for u, nbrs in self.adj.items():
            for v, w in nbrs.items():
                if self.edges.get(_edge_key(u, v)) != w:
                    raise GraphError(f"adjacency entry {(u, v)!r} disagrees with edge set")
                n_half += 1
        if n_half != 2 * len(self.edges):
            raise GraphError("adjacency index has extra entries")

    def copy(self) -> "CitationGraph":
        return CitationGraph(
            {n: dict(a) for n, a in self.nodes.items()}, dict(self.edges), dict(self.self_loops)
        )

    def to_csr(self):
        """Return (nodes, indptr, indices, weights, loops) with nodes sorted."""
        order = self.sorted_nodes()
        pos = {n: i for i, n in enumerate(order)}
        n = len(order)
        deg = np.zeros(n + 1, dtype=np.int64)
        for u, v in self.edges:
            deg[pos[u] + 1] += 1
            deg[pos[v] + 1] += 1
        indptr = np.cumsum(deg)
        indices = np.empty(indptr[-1], dtype=np.int64)
        weights = np.empty(indptr[-1], dtype=np.float64)
        fill = indptr[:-1].copy()
        for (u, v), w in sorted(self.edges.items()):
            a, b = pos[u], pos[v]
            indices[fill[a]] = b
            weights[fill[a]] = w
            fill[a] += 1
            indices[fill[b]] = a
            weights[fill[b]] = w
            fill[b] += 1
        loops = np.array([self.self_loops.get(x, 0.0) for x in order], dtype=np.float64)
        return order, indptr, indices, weights, loops


@dataclass
class BuildSummary:
    citations: int = 0
    self_citations: int = 0
    duplicates: int = 0
    dangling: int = 0
    stubs: int = 0


def build_graph(corpus: Corpus, dangling: str = "drop", accumulate: bool = False) -> tuple[CitationGraph, BuildSummary]:
    """One node per document, one undirected edge per cited pair.

    With ``accumulate`` the weight counts how many citation records (in
    either direction) link the pair; otherwise every edge weighs 1.0.
    """
    if dangling not in ("drop", "stub"):
        raise ValueError("dangling policy must be 'drop' or 'stub'")
    summary = BuildSummary()
    g = CitationGraph()
    for doc in corpus:
        g.nodes[doc.case_id] = {"language": doc.language, "doc_type": doc.doc_type, "stub": False}
    multiplicity: Counter = Counter()
    for doc in corpus:
        seen = set()
        for cited in doc.cited_case_ids:
            summary.citations += 1
            if cited == doc.case_id:
                summary.self_citations += 1
                continue
            if cited in seen:
                summary.duplicates += 1
                continue
            seen.add(cited)
            if cited not in g.nodes:
                if dangling == "drop":
                    summary.dangling += 1
                    continue
                g.nodes[cited] = {"language": "", "doc_type": "", "stub": True}
                summary.stubs += 1
            key = _edge_key(doc.case_id, cited)
            if key in multiplicity and not accumulate:
                summary.duplicates += 1
            multiplicity[key] += 1
    g.edges = {k: (float(c) if accumulate else 1.0) for k, c in sorted(multiplicity.items())}
    g._rebuild_adjacency()
    if summary.dangling:
        log.info("dropped %d citations to cases outside the corpus", summary.dangling)
    return g, summary


@dataclass
class ComponentCensus:
    component_of: dict  # node -> component id
    sizes: list[int]  # indexed by component id, descending
    giant: int | None

    @property
    def n_components(self) -> int:
        return len(self.sizes)

    def members(self, cid: int) -> list:
        return sorted(n for n, c in self.component_of.items() if c == cid)

    def size_histogram(self) -> dict[int, int]:
        return dict(sorted(Counter(self.sizes).items()))


def components(graph: CitationGraph) -> ComponentCensus:
    """Label connected components.

    Component ids are assigned by descending size, ties by ascending
    smallest member, so id 0 is always the giant component.
    """
    seen = {}
    groups = []
    for start in graph.sorted_nodes():
        if start in seen:
            continue
        comp = [start]
        seen[start] = True
        stack = [start]
        while stack:
            u = stack.pop()
            for v in graph.adj[u]:
                if v not in seen:
                    seen[v] = True
                    comp.append(v)
                    stack.append(v)
        groups.append((len(comp), start, comp))  # start is the smallest member
    groups.sort(key=lambda t: (-t[0], t[1]))
    component_of = {}
    for cid, (_, _, comp) in enumerate(groups):
        for n in comp:
            component_of[n] = cid
    sizes = [s for s, _, _ in groups]
    return ComponentCensus(component_of, sizes, 0 if groups else None)


def subgraph(graph: CitationGraph, census: ComponentCensus, component_id: int) -> CitationGraph:
    if not 0 <= component_id < census.n_components:
        raise GraphError(f"unknown component id {component_id}")
    keep = {n for n, c in census.component_of.items() if c == component_id}
    return induced_subgraph(graph, keep)


def induced_subgraph(graph: CitationGraph, keep) -> CitationGraph:
    keep = set(keep)
    nodes = {n: dict(a) for n, a in graph.nodes.items() if n in keep}
    edges = {k: w for k, w in graph.edges.items() if k[0] in keep and k[1] in keep}
    loops = {n: w for n, w in graph.self_loops.items() if n in keep}
    return CitationGraph(nodes, edges, loops)


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


@dataclass
class WeightSummary:
    fallback: float
    n_vectored: int
    n_fallback: int


def weight_edges(graph: CitationGraph, thetas: Mapping[str, np.ndarray]) -> tuple[CitationGraph, WeightSummary]:
    """Replace edge weights by topic-vector cosine similarity.

    Edges whose endpoints both have a vector get their cosine; the median
    of those cosines is then given to every edge touching a node without a
    vector. English nodes must have vectors.
    """
    missing = sorted(n for n, a in graph.nodes.items() if a.get("language") == "en" and n not in thetas)
    if missing:
        shown = ", ".join(map(str, missing[:20]))
        more = f" (+{len(missing) - 20} more)" if len(missing) > 20 else ""
        raise GraphError(f"English nodes without topic vectors: {shown}{more}")

    out = graph.copy()
    for n, a in out.nodes.items():
        a["has_topic_vector"] = n in thetas

    vectored = {}
    for (u, v) in sorted(graph.edges):
        if u in thetas and v in thetas:
            vectored[(u, v)] = cosine(thetas[u], thetas[v])
    if not vectored:
        raise GraphError("no edge joins two nodes with topic vectors; the fallback median is undefined")
    fallback = float(np.median(np.sort(np.fromiter(vectored.values(), dtype=np.float64))))
    n_fallback = 0
    for key in out.edges:
        if key in vectored:
            out.edges[key] = vectored[key]
        else:
            out.edges[key] = fallback
            n_fallback += 1
    out._rebuild_adjacency()
    return out, WeightSummary(fallback, len(vectored), n_fallback)


def write_edges(graph: CitationGraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst", "weight"])
        for (u, v), wt in sorted(graph.edges.items()):
            w.writerow([u, v, repr(float(wt))])


def write_nodes(graph: CitationGraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "language", "doc_type", "has_topic_vector"])
        for n in graph.sorted_nodes():
            a = graph.nodes[n]
            w.writerow([n, a.get("language", ""), a.get("doc_type", ""), int(bool(a.get("has_topic_vector", False)))])


def write_graph(graph: CitationGraph, edge_path: str | Path, node_path: str | Path) -> None:
    """Edge list ``src,dst,weight`` plus a node attribute table."""
    write_edges(graph, edge_path)
    write_nodes(graph, node_path)


def read_graph(edge_path: str | Path, node_path: str | Path | None = None) -> CitationGraph:
    attrs = {}
    nodes = []
    if node_path is not None:
        with open(node_path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                nodes.append(row["case_id"])
                attrs[row["case_id"]] = {
                    "language": row.get("language", ""),
                    "doc_type": row.get("doc_type", ""),
                    "has_topic_vector": row.get("has_topic_vector", "0") == "1",
                }
    edges = []
    with open(edge_path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames][:2] != ["src", "dst"]:
            raise GraphError(f"{edge_path}: expected header 'src,dst,weight'")
        for row in reader:
            if row["src"] == row["dst"]:
                raise GraphError(f"{edge_path}: self-loop at {row['src']!r}")
            w = float(row.get("weight") or 1.0)
            if w < 0:
                raise GraphError(f"{edge_path}: negative weight on {row['src']}-{row['dst']}")
            edges.append((row["src"], row["dst"], w))
    return CitationGraph.from_edges(edges, nodes, attrs)

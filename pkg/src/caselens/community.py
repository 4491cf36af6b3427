"""Resolution-parameterized modularity and Louvain optimization."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from ._accel import kernel
from .citegraph import CitationGraph, GraphError

log = logging.getLogger(__name__)

# a move must beat staying put by more than this (relative to 1/m units)
MOVE_EPS = 1e-12


@dataclass
class Partition:
    assignment: dict  # node -> community id, canonical 0..C-1
    sizes: list[int] = field(default_factory=list)
    internal_weight: list[float] = field(default_factory=list)
    total_weight: list[float] = field(default_factory=list)
    modularity: float | None = None  # value tracked by the optimizer, if any

    @property
    def n_communities(self) -> int:
        return len(self.sizes)

    def __getitem__(self, node):
        return self.assignment[node]

    def __len__(self) -> int:
        return len(self.assignment)

    def members(self, cid: int) -> list:
        return sorted(n for n, c in self.assignment.items() if c == cid)

    def groups(self) -> list[list]:
        out = [[] for _ in range(self.n_communities)]
        for n in sorted(self.assignment):
            out[self.assignment[n]].append(n)
        return out

    @classmethod
    def from_assignment(cls, assignment: Mapping, graph: CitationGraph | None = None) -> "Partition":
        """Canonicalize labels: community of the smallest node is 0, and so on."""
        remap = {}
        for n in sorted(assignment):
            c = assignment[n]
            if c not in remap:
                remap[c] = len(remap)
        canon = {n: remap[assignment[n]] for n in sorted(assignment)}
        sizes = [0] * len(remap)
        for c in canon.values():
            sizes[c] += 1
        p = cls(canon, sizes)
        if graph is not None:
            p.internal_weight, p.total_weight = _tallies(graph, canon, len(remap))
        return p

    @classmethod
    def from_groups(cls, groups, graph: CitationGraph | None = None) -> "Partition":
        return cls.from_assignment({n: i for i, g in enumerate(groups) for n in g}, graph)

    def check(self, graph: CitationGraph) -> None:
        if set(self.assignment) != set(graph.nodes):
            raise GraphError("partition does not cover exactly the graph's nodes")
        w_in, s = _tallies(graph, self.assignment, self.n_communities)
        if not (np.allclose(w_in, self.internal_weight) and np.allclose(s, self.total_weight)):
            raise GraphError("partition tallies disagree with the graph")

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["case_id", "community_id"])
            for n in sorted(self.assignment):
                w.writerow([n, self.assignment[n]])

    @classmethod
    def from_csv(cls, path: str | Path, graph: CitationGraph | None = None) -> "Partition":
        with open(path, encoding="utf-8", newline="") as fh:
            assignment = {row["case_id"]: int(row["community_id"]) for row in csv.DictReader(fh)}
        return cls.from_assignment(assignment, graph)

    def summary(self, resolution: float | None = None, seed: int | None = None, Q: float | None = None) -> dict:
        return {
            "C": self.n_communities,
            "Q": Q if Q is not None else self.modularity,
            "resolution": resolution,
            "seed": seed,
            "sizes": list(self.sizes),
        }


def _tallies(graph: CitationGraph, assignment: Mapping, n_comm: int):
    w_in = [0.0] * n_comm
    s = [0.0] * n_comm
    for (u, v), w in graph.edges.items():
        cu = assignment[u]
        if cu == assignment[v]:
            w_in[cu] += w
        s[cu] += w
        s[assignment[v]] += w
    for n, w in graph.self_loops.items():
        c = assignment[n]
        w_in[c] += w
        s[c] += 2.0 * w
    return w_in, s


def modularity(graph: CitationGraph, partition: Partition | Mapping, resolution: float = 1.0) -> float:
    """Q = sum_c [ W_in(c)/m - resolution * (S(c)/2m)^2 ]."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    assignment = partition.assignment if isinstance(partition, Partition) else dict(partition)
    if set(assignment) != set(graph.nodes):
        raise GraphError("partition does not cover exactly the graph's nodes")
    m = graph.total_weight()
    if m <= 0:
        raise GraphError("modularity is undefined for a graph with zero total edge weight")
    labels = sorted(set(assignment.values()))
    dense = {c: i for i, c in enumerate(labels)}
    w_in, s = _tallies(graph, {n: dense[c] for n, c in assignment.items()}, len(labels))
    w_in = np.asarray(w_in)
    s = np.asarray(s)
    return float(np.sum(w_in / m - resolution * (s / (2.0 * m)) ** 2))


@kernel
def local_move_pass(indptr, indices, weights, degree, comm, tot, order, resolution, m, nbr_w, mark, touched):
    """One pass of greedy node moves. Returns (moves, modularity gain).

    ``nbr_w`` (float) and ``mark`` (int, all -1) are scratch arrays of length
    n; ``touched`` is an int scratch array of length n.
    """
    moves = 0
    dq = 0.0
    scale = resolution / (2.0 * m * m)
    for oi in range(order.shape[0]):
        i = order[oi]
        ci = comm[i]
        ki = degree[i]
        n_t = 0
        for p in range(indptr[i], indptr[i + 1]):
            c = comm[indices[p]]
            if mark[c] < 0:
                mark[c] = 1
                nbr_w[c] = 0.0
                touched[n_t] = c
                n_t += 1
            nbr_w[c] += weights[p]
        tot[ci] -= ki
        own = nbr_w[ci] if mark[ci] >= 0 else 0.0
        stay = own / m - scale * tot[ci] * ki
        best = ci
        best_gain = stay
        for t in range(n_t):
            c = touched[t]
            if c == ci:
                continue
            g = nbr_w[c] / m - scale * tot[c] * ki
            if g - stay > MOVE_EPS:
                if best == ci or g > best_gain or (g == best_gain and c < best):
                    best = c
                    best_gain = g
        tot[best] += ki
        if best != ci:
            comm[i] = best
            moves += 1
            dq += best_gain - stay
        for t in range(n_t):
            mark[touched[t]] = -1
    return moves, dq


def _aggregate_arrays(n_comm, labels, indptr, indices, weights, loops):
    """Collapse nodes sharing a label into super-nodes (CSR in, CSR out)."""
    n = indptr.shape[0] - 1
    src = np.repeat(np.arange(n), np.diff(indptr))
    cu = labels[src]
    cv = labels[indices]
    new_loops = np.bincount(labels, weights=loops, minlength=n_comm)
    inside = cu == cv
    # each internal edge appears twice in the CSR
    new_loops += np.bincount(cu[inside], weights=weights[inside], minlength=n_comm) / 2.0
    cross = ~inside
    keys = cu[cross] * n_comm + cv[cross]
    uniq, inv = np.unique(keys, return_inverse=True)
    agg_w = np.bincount(inv, weights=weights[cross], minlength=uniq.shape[0])
    a = uniq // n_comm
    new_indptr = np.zeros(n_comm + 1, dtype=np.int64)
    np.cumsum(np.bincount(a, minlength=n_comm), out=new_indptr[1:])
    return new_indptr, (uniq % n_comm).astype(np.int64), agg_w.astype(np.float64), new_loops


def _degrees(indptr, weights, loops):
    n = indptr.shape[0] - 1
    src = np.repeat(np.arange(n), np.diff(indptr))
    return np.bincount(src, weights=weights, minlength=n) + 2.0 * loops


def _dense_labels(comm):
    _, labels = np.unique(comm, return_inverse=True)
    return labels.astype(np.int64), int(labels.max()) + 1 if labels.size else 0


def aggregate(graph: CitationGraph, partition: Partition) -> CitationGraph:
    """Super-node graph: node c carries the internal weight of community c as a self-loop."""
    order, indptr, indices, weights, loops = graph.to_csr()
    labels = np.array([partition.assignment[n] for n in order], dtype=np.int64)
    n_comm = partition.n_communities
    ip, ix, wt, lp = _aggregate_arrays(n_comm, labels, indptr, indices, weights, loops)
    edges = []
    for a in range(n_comm):
        for p in range(ip[a], ip[a + 1]):
            if a < ix[p]:
                edges.append((a, int(ix[p]), float(wt[p])))
    g = CitationGraph.from_edges(edges, nodes=range(n_comm))
    g.self_loops = {c: float(lp[c]) for c in range(n_comm) if lp[c] != 0}
    return g


def louvain(graph: CitationGraph, resolution: float = 1.0, seed: int = 0, max_levels: int = 100) -> Partition:
    """Two-phase Louvain. Node visit order is reshuffled from ``seed`` every pass."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    order_nodes, indptr, indices, weights, loops = graph.to_csr()
    m = float(weights.sum() / 2.0 + loops.sum())
    if m <= 0:
        raise GraphError("modularity is undefined for a graph with zero total edge weight")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x10])))

    n = len(order_nodes)
    membership = np.arange(n, dtype=np.int64)
    degree = _degrees(indptr, weights, loops)
    q = float(loops.sum() / m - resolution * np.sum((degree / (2.0 * m)) ** 2))

    for level in range(max_levels):
        nl = indptr.shape[0] - 1
        comm = np.arange(nl, dtype=np.int64)
        tot = degree.copy()
        nbr_w = np.zeros(nl)
        mark = np.full(nl, -1, dtype=np.int64)
        touched = np.empty(nl, dtype=np.int64)
        improved = False
        while True:
            order = rng.permutation(nl).astype(np.int64)
            moves, dq = local_move_pass(
                indptr, indices, weights, degree, comm, tot, order, float(resolution), m, nbr_w, mark, touched
            )
            q += dq
            if moves == 0:
                break
            improved = True
        if not improved:
            break
        labels, n_comm = _dense_labels(comm)
        membership = labels[membership]
        indptr, indices, weights, loops = _aggregate_arrays(n_comm, labels, indptr, indices, weights, loops)
        degree = _degrees(indptr, weights, loops)
        log.debug("level %d: %d communities, Q=%.6f", level, n_comm, q)

    p = Partition.from_assignment({node: int(membership[i]) for i, node in enumerate(order_nodes)}, graph)
    p.modularity = q
    return p


def write_summary(path: str | Path, partition: Partition, resolution: float, seed: int, Q: float) -> None:
    Path(path).write_text(
        json.dumps(partition.summary(resolution, seed, Q), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

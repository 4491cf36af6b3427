"""Acceptance criteria, one test each.

Every test prints a single PASS/FAIL line (also repeated in the terminal
summary). Run with ``pytest tests/test_acceptance.py -s``.
"""

import json
import math
import shutil
import time
from pathlib import Path

import networkx as nx
import numpy as np
import pytest
from conftest import (
    ACCEPTANCE_LINES,
    MINI,
    clique_ring,
    dense_modularity,
    mini_bows,
    planted_thetas,
    separation_ratio,
    set_partitions,
    synth_bows,
)

from caselens.citegraph import CitationGraph, build_graph, components, subgraph, weight_edges
from caselens.cli import main
from caselens.community import louvain, modularity
from caselens.corpus import Corpus, Document, load_corpus
from caselens.embed import EXAGGERATION_ITERS, tsne
from caselens.evaluate import match_topics, nmi, synth_corpus
from caselens.textprep import build_vocabulary, to_bow
from caselens.topics import TopicModel, coherence_sweep, top_words, train_lda, umass_coherence


def report(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:>2}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


@pytest.fixture(scope="module", autouse=True)
def warm_kernels():
    # compile (or load cached) kernels once so runtime bounds measure the algorithms
    louvain(clique_ring(2, 3), 1.0, 0)
    train_lda([[(0, 2), (1, 1)]], 2, iterations=2, burn_in=0)
    tsne(np.eye(3)[np.arange(12) % 3] + 0.01, perplexity=3.0, iterations=2)


# 1 -----------------------------------------------------------------------


def _random_connected(rng, n):
    edges = {}
    nodes = list(rng.permutation(n))
    for i in range(1, n):
        u, v = int(nodes[i]), int(nodes[rng.integers(0, i)])
        edges[(min(u, v), max(u, v))] = None
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < 0.3:
                edges[(u, v)] = None
    # mixed weights: some integers, some arbitrary reals
    weights = [float(rng.integers(1, 4)) if rng.random() < 0.5 else float(rng.uniform(0.05, 3.0)) for _ in edges]
    return CitationGraph.from_edges([(u, v, w) for (u, v), w in zip(edges, weights)], nodes=range(n))


def _exhaustive_max(graph, rgs_by_n):
    n = graph.n_nodes
    A = np.zeros((n, n))
    for (u, v), w in graph.edges.items():
        A[u, v] = A[v, u] = w
    k = A.sum(axis=1)
    two_m = k.sum()
    B = A - np.outer(k, k) / two_m
    L = rgs_by_n[n]
    same = L[:, :, None] == L[:, None, :]
    return float(((same * B).sum(axis=(1, 2)) / two_m).max())


def test_criterion_01_modularity_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    rgs_by_n = {n: np.array(list(set_partitions(n))) for n in range(2, 9)}
    assert len(rgs_by_n[8]) == 4140
    worst_recompute = 0.0
    worst_ratio = math.inf
    shortfalls = 0
    sizes = []
    for _ in range(100):
        n = int(rng.integers(2, 9))
        sizes.append(n)
        g = _random_connected(rng, n)
        # modularity vs from-scratch on several partitions, two resolutions
        for _ in range(5):
            labels = rng.integers(0, n, size=n)
            part = {i: int(labels[i]) for i in range(n)}
            for gamma in (1.0, 2.5):
                worst_recompute = max(worst_recompute, abs(modularity(g, part, gamma) - dense_modularity(g, part, gamma)))
        best = max(louvain(g, 1.0, seed).modularity for seed in range(5))
        q_max = _exhaustive_max(g, rgs_by_n)
        # graphs whose optimum is the single community have q_max == 0 up to rounding
        shortfalls += best < 0.98 * q_max - 1e-12
        if q_max > 1e-9:
            worst_ratio = min(worst_ratio, best / q_max)
    elapsed = time.perf_counter() - t0
    ok = worst_recompute <= 1e-9 and shortfalls == 0 and elapsed < 120 and sizes.count(8) > 0
    report(1, ok, f"100 graphs ({sizes.count(8)} with 8 nodes), max |Q - Q_oracle| = {worst_recompute:.1e}, "
                  f"{shortfalls} graphs below 0.98 x exhaustive max, min ratio where max > 0: {worst_ratio:.4f}, "
                  f"{elapsed:.1f}s")


# 2 -----------------------------------------------------------------------


def test_criterion_02_clique_ring():
    g = clique_ring(4, 5)
    expected = [list(range(c * 5, c * 5 + 5)) for c in range(4)]
    t0 = time.perf_counter()
    exact = [louvain(g, 1.0, seed).groups() == expected for seed in range(5)]
    elapsed = time.perf_counter() - t0
    report(2, all(exact) and elapsed < 1.0, f"ring of 4 five-cliques recovered for {sum(exact)}/5 seeds, {elapsed * 1000:.1f}ms")


# 3 -----------------------------------------------------------------------


def test_criterion_03_resolution():
    g, _ = build_graph(load_corpus(MINI / "corpus.jsonl"))
    giant = subgraph(g, components(g), 0)
    t0 = time.perf_counter()
    counts = [(louvain(giant, 1.0, s).n_communities, louvain(giant, 3.0, s).n_communities) for s in range(10)]
    elapsed = time.perf_counter() - t0
    ok = all(c3 > c1 for c1, c3 in counts) and elapsed < 1.0
    report(3, ok, f"fixture giant ({giant.n_nodes} nodes): communities at gamma 1 -> 3 per seed "
                  f"{sorted(set(counts))}, 10 seeds, {elapsed * 1000:.1f}ms")


# 4 -----------------------------------------------------------------------


def test_criterion_04_lda_conservation():
    bows, vocab, ids = mini_bows()
    lengths = np.array([sum(c for _, c in b) for b in bows])
    N = int(lengths.sum())
    violations = []

    def check(state):
        if not np.array_equal(state.n_dk.sum(axis=1), lengths):
            violations.append((state.sweep, "doc lengths"))
        if not (state.n_dk.sum() == state.n_kw.sum() == state.n_k.sum() == N):
            violations.append((state.sweep, "totals"))
        if not np.array_equal(state.n_kw.sum(axis=1), state.n_k) or not np.array_equal(state.n_dk.sum(axis=0), state.n_k):
            violations.append((state.sweep, "per-topic"))
        if (state.n_dk < 0).any() or (state.n_kw < 0).any():
            violations.append((state.sweep, "negative"))
        sweeps.append(state.sweep)

    t0 = time.perf_counter()
    sweeps = []
    m = train_lda(bows, 3, alpha=0.1, beta=0.01, iterations=300, burn_in=50, seed=7, doc_ids=ids, vocabulary=vocab, callback=check)
    elapsed = time.perf_counter() - t0
    row_err = max(np.abs(m.phi.sum(axis=1) - 1).max(), np.abs(m.theta.sum(axis=1) - 1).max())
    ok = not violations and sweeps == list(range(300)) and row_err <= 1e-9 and elapsed < 30
    report(4, ok, f"{len(sweeps)} sweeps over {len(bows)} docs / {N} tokens, {len(violations)} count violations, "
                  f"max |row sum - 1| = {row_err:.1e}, {elapsed:.2f}s")


# 5 -----------------------------------------------------------------------


def test_criterion_05_planted_topics():
    t0 = time.perf_counter()
    overlaps = []
    for seed in range(20):
        bows, vocab, _, truth = synth_bows(doc_count=500, K_true=2, vocab_per_topic=50, separation=0.9, seed=seed)
        m = train_lda(bows, 2, beta=0.01, iterations=200, burn_in=50, seed=seed, vocabulary=vocab)
        tops = [[m.word(w) for w, _ in top_words(m, k, 10)] for k in range(2)]
        overlaps.append(sorted(ov for _, _, ov in match_topics(tops, [set(w) for w in truth.topic_words])))
    elapsed = time.perf_counter() - t0
    good = sum(min(o) >= 8 for o in overlaps)
    ok = good >= 18 and elapsed < 120
    report(5, ok, f"{good}/20 seeds with top-10 overlap >= 8 for both topics "
                  f"(min overlap {min(min(o) for o in overlaps)}), {elapsed:.1f}s")


# 6 -----------------------------------------------------------------------


def _merges_planted(partition, planted):
    for group in partition.groups():
        if min(sum(planted[n] == c for n in group) for c in (0, 1)) >= 2:
            return True
    return False


def test_criterion_06_weighted_communities():
    t0 = time.perf_counter()
    rows = []
    for seed in range(20):
        corpus, truth = synth_corpus(doc_count=200, K_true=2, communities=2, separation=0.9,
                                     p_intra=0.08, p_inter=0.05, seed=seed, fr_fraction=0.1)
        english = [d for d in corpus if d.language == "en"]
        tokens = [d.text.split() for d in english]
        vocab = build_vocabulary(tokens, 1, 1.0)
        model = train_lda([to_bow(t, vocab) for t in tokens], 2, alpha=0.1, iterations=200, burn_in=50, seed=seed,
                          doc_ids=[d.case_id for d in english], vocabulary=vocab)
        g, _ = build_graph(corpus)
        planted = {n: truth.community_of[n] for n in g.nodes}
        plain = louvain(g, 1.0, seed)
        wg, _ = weight_edges(g, model.thetas_by_id())
        weighted = louvain(wg, 1.0, seed)
        rows.append((nmi(plain, planted), nmi(weighted, planted), _merges_planted(plain, planted)))
    elapsed = time.perf_counter() - t0
    merged = sum(r[2] for r in rows)
    wins = sum(w >= u for u, w, _ in rows)
    gain = float(np.mean([w - u for u, w, _ in rows]))
    ok = merged == 20 and wins >= 16 and gain > 0.05 and elapsed < 300
    report(6, ok, f"unweighted Louvain merges planted communities in {merged}/20 seeds; weighted NMI >= unweighted in "
                  f"{wins}/20, mean NMI gain {gain:.3f} (unweighted {np.mean([r[0] for r in rows]):.3f}, "
                  f"weighted {np.mean([r[1] for r in rows]):.3f}), {elapsed:.1f}s")


# 7 -----------------------------------------------------------------------

# unit vectors whose cosine with e_x is exact in binary floating point
_EXACT = {1.0: [1.0, 0.0], 0.0: [0.0, 1.0], 0.6: [3.0, 4.0], 0.8: [4.0, 3.0]}


def _fallback_fixture(cosines):
    hub = "h"
    leaves = [f"e{i}" for i in range(len(cosines))]
    edges = [(hub, x) for x in leaves] + [(hub, "f1"), ("f1", "f2"), ("e0", "s1")]
    g = CitationGraph.from_edges(edges)
    for n in g.nodes:
        g.nodes[n]["language"] = {"f": "fr", "s": ""}.get(n[0], "en")
    thetas = {hub: np.array([1.0, 0.0])}
    thetas.update({x: np.array(_EXACT[c]) for x, c in zip(leaves, cosines)})
    return g, thetas


def test_criterion_07_fallback_median():
    checks = []
    for cosines, expected in (([1.0, 0.6, 0.0], 0.6), ([1.0, 0.8, 0.6, 0.0], (0.6 + 0.8) / 2)):
        g, thetas = _fallback_fixture(cosines)
        out, s = weight_edges(g, thetas)
        vectorless = {e for e in g.edges if not (e[0] in thetas and e[1] in thetas)}
        checks.append(s.fallback == expected)
        checks.append(all(out.edges[e] == expected for e in vectorless))
        checks.append(all(out.edges[("e%d" % i, "h")] == c for i, c in enumerate(cosines)))
        checks.append((s.n_vectored, s.n_fallback) == (len(cosines), 3))
        checks.append(set(out.edges) == set(g.edges))
    ok = all(checks)
    report(7, ok, f"median of 3 -> 0.6 and of 4 -> mean of central values {(0.6 + 0.8) / 2!r}, assigned to all 3 "
                  f"vector-less edges ({sum(checks)}/{len(checks)} checks); full-data fallback reported as 0.755 "
                  f"is a property of the full corpus, recomputed per run here")


# 8 -----------------------------------------------------------------------

# word sets of the 10 toy documents
_TOY = [{0, 1, 2}, {0, 1}, {0, 2}, {0}, {1, 2, 3}, {1, 3}, {2, 3}, {3}, {0, 1, 2, 3}, {0, 2}]


def test_criterion_08_umass():
    bows = [[(w, 1 + w % 2) for w in sorted(doc)] for doc in _TOY]
    # topic 0 ranks words 0,1,2; topic 1 ranks 3,2,1
    model = TopicModel(K=2, V=4, alpha=0.1, beta=0.01, n_kw=np.array([[30, 20, 10, 0], [0, 5, 10, 20]]), n_dk=np.zeros((10, 2), dtype=int))
    got = umass_coherence(model, bows, top_n=3)
    # D(0)=6 D(1)=5 D(2)=6 D(3)=5; D(0,1)=3 D(0,2)=4 D(1,2)=3 D(2,3)=3 D(1,3)=3
    hand = [
        math.log(4 / 6) + math.log(5 / 6) + math.log(4 / 5),
        math.log(4 / 5) + math.log(4 / 5) + math.log(4 / 6),
    ]
    err = max(abs(a - b) for a, b in zip(got, hand))
    mb, vocab, ids = mini_bows()
    rows = coherence_sweep(mb, (2, 5), alpha=0.1, iterations=50, burn_in=10, seed=7, top_n=5, doc_ids=ids, vocabulary=vocab)
    consistent = [r.K for r in rows] == [2, 3, 4, 5] and all(
        len(r.per_topic) == r.K and abs(r.mean - sum(r.per_topic) / r.K) <= 1e-12 for r in rows)
    ok = err <= 1e-12 and consistent
    report(8, ok, f"toy corpus UMass max error {err:.1e} vs hand values {[round(h, 6) for h in hand]}; "
                  f"sweep 2..5 gave {len(rows)} rows with consistent means")


# 9 -----------------------------------------------------------------------


def test_criterion_09_tsne():
    t0 = time.perf_counter()
    worst_window = -math.inf
    ratios = []
    deterministic = True
    for seed in range(3):
        X, groups = planted_thetas(60, seed)
        e = tsne(X, perplexity=10.0, iterations=1000, learning_rate="auto", seed=seed)
        h = np.array(e.kl_history)
        worst_window = max(worst_window, max(h[t + 50] - h[t] for t in range(EXAGGERATION_ITERS, len(h) - 50)))
        ratios.append(separation_ratio(e.coords, groups))
        again = tsne(X, perplexity=10.0, iterations=1000, learning_rate="auto", seed=seed)
        deterministic &= again.coords.tobytes() == e.coords.tobytes()
    elapsed = time.perf_counter() - t0
    ok = worst_window <= 1e-6 and min(ratios) > 3 and deterministic and elapsed < 60
    report(9, ok, f"60 points, perplexity 10, 3 seeds: max KL rise over 50 iterations after {EXAGGERATION_ITERS} = "
                  f"{worst_window:.2e}, separation ratios {[round(r, 2) for r in ratios]}, "
                  f"deterministic={deterministic}, {elapsed:.1f}s")


# 10 ----------------------------------------------------------------------


def _snapshot(root: Path) -> dict[str, bytes]:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            data = p.read_bytes()
            if p.parent.name == "manifests":
                doc = json.loads(data)
                doc.pop("created")
                data = json.dumps(doc, sort_keys=True).encode()
            out[str(p.relative_to(root))] = data
    return out


def test_criterion_10_end_to_end(tmp_path):
    times = []
    snaps = []
    codes = []
    for name in ("a", "b"):
        t0 = time.perf_counter()
        codes.append(main(["all", "-c", str(MINI / "config.toml"), "-o", str(tmp_path / name)]))
        times.append(time.perf_counter() - t0)
        snaps.append(_snapshot(tmp_path / name))
    same = snaps[0] == snaps[1]
    diff = sorted(k for k in set(snaps[0]) | set(snaps[1]) if snaps[0].get(k) != snaps[1].get(k))
    ok = codes == [0, 0] and same and max(times) < 60
    report(10, ok, f"two full runs on the 30-doc fixture: {len(snaps[0])} files, identical={same} "
                   f"{'' if same else diff}, run times {times[0]:.1f}s / {times[1]:.1f}s")
    shutil.rmtree(tmp_path, ignore_errors=True)


# 11 ----------------------------------------------------------------------


def _census_fixture():
    """Giant of 120 nodes, 6 pairs, 2 triangles, 3 paths of 4, 60 singletons."""
    docs = []
    cid = lambda i: f"001-{i:05d}"  # noqa: E731
    rng = np.random.default_rng(11)
    giant = list(range(1, 121))
    for i in giant[1:]:
        cited = {cid(int(rng.integers(1, i)))}
        if rng.random() < 0.4:
            cited.add(cid(int(rng.integers(1, i))))
        docs.append((i, sorted(cited)))
    docs.append((1, [cid(1), "001-99999"]))  # self-citation and a dangling reference
    nxt = 121
    small = []
    for size, count in ((2, 6), (3, 2), (4, 3)):
        for _ in range(count):
            ids = list(range(nxt, nxt + size))
            nxt += size
            small.append(ids)
            for a, b in zip(ids, ids[1:]):
                docs.append((b, [cid(a)]))
            docs.append((ids[0], [cid(ids[-1])] if size == 3 else []))
    for _ in range(60):
        docs.append((nxt, []))
        nxt += 1
    docs.sort()
    return Corpus(tuple(Document(cid(i), "judgment", "en", tuple(c)) for i, c in docs))


def test_criterion_11_component_census():
    corpus = _census_fixture()
    g, summary = build_graph(corpus)
    c = components(g)
    expect_edges_giant = len({frozenset(e) for e in g.edges if int(e[0][4:]) <= 120})
    giant = subgraph(g, c, c.giant)
    hist = c.size_histogram()
    exact = (
        c.n_components == 1 + 6 + 2 + 3 + 60
        and hist == {1: 60, 2: 6, 3: 2, 4: 3, 120: 1}
        and c.sizes[0] == 120 and giant.n_nodes == 120 and giant.n_edges == expect_edges_giant
        and summary.self_citations == 1 and summary.dangling == 1
        and sum(c.sizes) == g.n_nodes == 120 + 12 + 6 + 12 + 60
    )

    rng = np.random.default_rng(1000)
    failures = 0
    for trial in range(1000):
        n = int(rng.integers(0, 40))
        p = float(rng.uniform(0, 0.15))
        edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
        rg = CitationGraph.from_edges(edges, nodes=range(n))
        rc = components(rg)
        ref = sorted((sorted(s) for s in nx.connected_components(nx.Graph(edges) if edges else nx.empty_graph(0)) ), key=min)
        isolated = n - sum(len(s) for s in ref)
        good = (
            sum(rc.sizes) == n
            and all(rc.component_of[u] == rc.component_of[v] for u, v in rg.edges)
            and rc.sizes == sorted(rc.sizes, reverse=True)
            and rc.n_components == len(ref) + isolated
            and sorted(sorted(rc.members(k)) for k in range(rc.n_components) if rc.sizes[k] > 1) == sorted(ref)
            and (n == 0 or min(rc.members(0)) == min(min(rc.members(k)) for k in range(rc.n_components) if rc.sizes[k] == rc.sizes[0]))
        )
        failures += not good
    ok = exact and failures == 0
    report(11, ok, f"fixture census {c.n_components} components, histogram {hist}, giant {giant.n_nodes} nodes / "
                   f"{giant.n_edges} links; invariants held on {1000 - failures}/1000 random graphs")

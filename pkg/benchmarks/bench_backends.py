"""Compare compiled kernels with their plain-Python sources.

    python benchmarks/bench_backends.py [--repeat 3]

Each kernel is timed on the same inputs twice: as compiled by numba and as
the uncompiled function (what ``CASELENS_BACKEND=numpy`` runs). For t-SNE
the numpy backend uses a vectorized gradient, timed as a third column.
"""

import argparse
import time

import numpy as np

from caselens import BACKEND, community, embed, topics
from caselens._accel import py_func
from caselens.citegraph import CitationGraph
from caselens.evaluate import synth_corpus
from caselens.textprep import build_vocabulary, to_bow


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def gibbs_case():
    corpus, _ = synth_corpus(doc_count=300, words_per_doc=80, seed=0)
    tokens = [d.text.split() for d in corpus]
    vocab = build_vocabulary(tokens, 1, 1.0)
    bows = [to_bow(t, vocab) for t in tokens]
    K, V = 10, len(vocab)
    doc_ptr, words = topics._flatten(bows, np.arange(len(bows)))
    rng = np.random.default_rng(0)
    z0 = rng.integers(0, K, size=words.shape[0])
    u = rng.random(words.shape[0])

    def make(kernel):
        def run():
            z = z0.copy()
            n_dk = np.zeros((len(bows), K), dtype=np.int64)
            n_kw = np.zeros((K, V), dtype=np.int64)
            d = np.repeat(np.arange(len(bows)), np.diff(doc_ptr))
            np.add.at(n_dk, (d, z), 1)
            np.add.at(n_kw, (z, words), 1)
            kernel(doc_ptr, words, z, n_dk, n_kw, n_kw.sum(1), 0.1, 0.01, 0.01 * V, u)
        return run

    return f"gibbs_sweep ({words.shape[0]} tokens, K={K})", make(topics.gibbs_sweep), make(py_func(topics.gibbs_sweep)), None


def louvain_case():
    rng = np.random.default_rng(1)
    n = 2000
    edges = {(int(a), int(b)) for a, b in rng.integers(0, n, size=(8000, 2)) if a < b}
    g = CitationGraph.from_edges(sorted(edges), nodes=range(n))
    _, indptr, indices, weights, loops = g.to_csr()
    degree = community._degrees(indptr, weights, loops)
    m = float(weights.sum() / 2)
    order = rng.permutation(n).astype(np.int64)

    def make(kernel):
        def run():
            kernel(indptr, indices, weights, degree, np.arange(n, dtype=np.int64), degree.copy(), order, 1.0, m,
                   np.zeros(n), np.full(n, -1, dtype=np.int64), np.empty(n, dtype=np.int64))
        return run

    return f"local_move_pass ({n} nodes, {len(edges)} edges)", make(community.local_move_pass), make(py_func(community.local_move_pass)), None


def tsne_case():
    rng = np.random.default_rng(2)
    X = rng.dirichlet(np.ones(5), size=300)
    P = embed.joint_affinities(X, 30.0)
    Y = rng.standard_normal((300, 2))
    return (
        "t-SNE gradient (300 points)",
        lambda: embed._grad_loops(Y, P, 1.0),
        lambda: py_func(embed._grad_loops)(Y, P, 1.0),
        lambda: embed._grad_numpy(Y, P, 1.0),
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if BACKEND != "numba":
        raise SystemExit("numba is not active (CASELENS_BACKEND=numpy?); nothing to compare")
    print(f"{'kernel':<44} {'numba':>10} {'python':>10} {'vectorized':>11} {'speed-up':>9}")
    for name, fast, slow, vec in (gibbs_case(), louvain_case(), tsne_case()):
        fast()  # compile
        tf = best_of(fast, args.repeat)
        ts = best_of(slow, 1)
        tv = f"{best_of(vec, args.repeat) * 1e3:9.2f}ms" if vec else f"{'-':>11}"
        print(f"{name:<44} {tf * 1e3:8.2f}ms {ts * 1e3:8.1f}ms {tv} {ts / tf:8.0f}x")


if __name__ == "__main__":
    main()

"""LDA by collapsed Gibbs sampling, UMass coherence and topic-count sweeps."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import sparse

from ._accel import kernel
from .textprep import BowVector, Vocabulary

log = logging.getLogger(__name__)

MODEL_FORMAT = "caselens.lda"
MODEL_VERSION = 1


@kernel
def gibbs_sweep(doc_ptr, words, z, n_dk, n_kw, n_k, alpha, beta, vbeta, uniforms):
    """Resample every token once, documents in storage order.

    ``uniforms`` holds one U[0,1) draw per token. Counts are updated in place.
    """
    n_topics = n_kw.shape[0]
    cum = np.empty(n_topics)
    for d in range(doc_ptr.shape[0] - 1):
        for i in range(doc_ptr[d], doc_ptr[d + 1]):
            w = words[i]
            k = z[i]
            n_dk[d, k] -= 1
            n_kw[k, w] -= 1
            n_k[k] -= 1
            total = 0.0
            for t in range(n_topics):
                total += (n_dk[d, t] + alpha) * (n_kw[t, w] + beta) / (n_k[t] + vbeta)
                cum[t] = total
            u = uniforms[i] * total
            k = 0
            while k < n_topics - 1 and u >= cum[k]:
                k += 1
            z[i] = k
            n_dk[d, k] += 1
            n_kw[k, w] += 1
            n_k[k] += 1


@kernel
def fold_in_sweep(words, z, n_k_doc, phi_cols, alpha, uniforms):
    """One fold-in sweep for a single document against fixed topic-word probabilities.

    ``phi_cols`` is (K, len(words)): column i holds phi[:, words[i]].
    """
    n_topics = phi_cols.shape[0]
    cum = np.empty(n_topics)
    for i in range(words.shape[0]):
        k = z[i]
        n_k_doc[k] -= 1
        total = 0.0
        for t in range(n_topics):
            total += (n_k_doc[t] + alpha) * phi_cols[t, i]
            cum[t] = total
        u = uniforms[i] * total
        k = 0
        while k < n_topics - 1 and u >= cum[k]:
            k += 1
        z[i] = k
        n_k_doc[k] += 1


class GibbsState(NamedTuple):
    """Counts after a sweep, in caller document order."""

    sweep: int
    n_dk: np.ndarray
    n_kw: np.ndarray
    n_k: np.ndarray
    doc_lengths: np.ndarray


def _key_hash(key: str) -> int:
    return int.from_bytes(hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest(), "little")


def _flatten(bows: Sequence[BowVector], order: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([sum(c for _, c in bows[d]) for d in order], dtype=np.int64)
    doc_ptr = np.zeros(len(order) + 1, dtype=np.int64)
    np.cumsum(lengths, out=doc_ptr[1:])
    words = np.empty(doc_ptr[-1], dtype=np.int64)
    for j, d in enumerate(order):
        pos = doc_ptr[j]
        for w, c in bows[d]:
            words[pos : pos + c] = w
            pos += c
    return doc_ptr, words


@dataclass
class TopicModel:
    K: int
    V: int
    alpha: float
    beta: float
    n_kw: np.ndarray
    n_dk: np.ndarray
    seed: int = 0
    iterations: int = 0
    burn_in: int = 0
    doc_ids: list[str] = field(default_factory=list)
    vocabulary: Vocabulary | None = None

    @property
    def phi(self) -> np.ndarray:
        n_kw = self.n_kw.astype(np.float64)
        return (n_kw + self.beta) / (n_kw.sum(axis=1, keepdims=True) + self.V * self.beta)

    @property
    def theta(self) -> np.ndarray:
        n_dk = self.n_dk.astype(np.float64)
        return (n_dk + self.alpha) / (n_dk.sum(axis=1, keepdims=True) + self.K * self.alpha)

    def thetas_by_id(self) -> dict[str, np.ndarray]:
        theta = self.theta
        return {cid: theta[i] for i, cid in enumerate(self.doc_ids)}

    def word(self, word_id: int) -> str:
        if self.vocabulary is None:
            return str(word_id)
        return self.vocabulary.words[word_id]

    def to_json(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "K": self.K,
            "V": self.V,
            "alpha": self.alpha,
            "beta": self.beta,
            "seed": self.seed,
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "doc_ids": list(self.doc_ids),
            "n_kw": self.n_kw.tolist(),
            "n_dk": self.n_dk.tolist(),
            "vocabulary": self.vocabulary.to_json() if self.vocabulary is not None else None,
        }

    @classmethod
    def from_json(cls, data: dict) -> "TopicModel":
        if data.get("format") != MODEL_FORMAT:
            raise ValueError("not a caselens LDA model file")
        if data.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {data.get('version')}")
        vocab = Vocabulary.from_json(data["vocabulary"]) if data.get("vocabulary") else None
        n_kw = np.asarray(data["n_kw"], dtype=np.int64).reshape(data["K"], data["V"])
        n_dk = np.asarray(data["n_dk"], dtype=np.int64).reshape(-1, data["K"])
        return cls(
            K=data["K"],
            V=data["V"],
            alpha=data["alpha"],
            beta=data["beta"],
            n_kw=n_kw,
            n_dk=n_dk,
            seed=data["seed"],
            iterations=data["iterations"],
            burn_in=data["burn_in"],
            doc_ids=list(data["doc_ids"]),
            vocabulary=vocab,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TopicModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def train_lda(
    bows: Sequence[BowVector],
    K: int,
    alpha: float | None = None,
    beta: float = 0.01,
    iterations: int = 1000,
    burn_in: int = 200,
    seed: int = 0,
    doc_ids: Sequence[str] | None = None,
    vocabulary: Vocabulary | None = None,
    n_words: int | None = None,
    callback: Callable[[GibbsState], None] | None = None,
) -> TopicModel:
    """Fit LDA with a collapsed Gibbs chain.

    Documents are swept in ``doc_ids`` order (sorted) rather than input
    order, and each document's initial assignments come from a stream keyed
    on its id, so permuting the input permutes the rows of ``theta`` and
    nothing else. Estimates are taken from the final state; ``burn_in`` is
    validated and recorded but no sample averaging is done.

    ``alpha`` defaults to ``50 / K``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if not 0 <= burn_in < iterations:
        raise ValueError("need iterations > burn_in >= 0")
    D = len(bows)
    if doc_ids is None:
        doc_ids = [f"{i:09d}" for i in range(D)]
    doc_ids = list(doc_ids)
    if len(doc_ids) != D:
        raise ValueError("doc_ids must match the number of documents")
    if len(set(doc_ids)) != D:
        raise ValueError("doc_ids must be unique")
    if alpha is None:
        alpha = 50.0 / K
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")

    max_id = max((w for bow in bows for w, _ in bow), default=-1)
    if vocabulary is not None:
        V = len(vocabulary)
    elif n_words is not None:
        V = n_words
    else:
        V = max_id + 1
    if max_id >= V:
        raise ValueError(f"word id {max_id} outside vocabulary of size {V}")
    if V == 0:
        raise ValueError("cannot train on an all-empty corpus")

    order = np.array(sorted(range(D), key=lambda d: doc_ids[d]), dtype=np.int64)
    inverse = np.empty(D, dtype=np.int64)
    inverse[order] = np.arange(D)
    doc_ptr, words = _flatten(bows, order)
    N = words.shape[0]
    if N == 0:
        raise ValueError("cannot train on an all-empty corpus")
    if K > N:
        raise ValueError(f"K={K} exceeds the total token count {N}")

    z = np.empty(N, dtype=np.int64)
    for j, d in enumerate(order):
        lo, hi = doc_ptr[j], doc_ptr[j + 1]
        if hi > lo:
            doc_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, _key_hash(doc_ids[d])])))
            z[lo:hi] = doc_rng.integers(0, K, size=hi - lo)

    n_dk = np.zeros((D, K), dtype=np.int64)
    n_kw = np.zeros((K, V), dtype=np.int64)
    doc_of_token = np.repeat(np.arange(D), np.diff(doc_ptr))
    np.add.at(n_dk, (doc_of_token, z), 1)
    np.add.at(n_kw, (z, words), 1)
    n_k = n_kw.sum(axis=1)

    lengths = np.diff(doc_ptr)[inverse]
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x5EED])))
    for sweep in range(iterations):
        uniforms = rng.random(N)
        gibbs_sweep(doc_ptr, words, z, n_dk, n_kw, n_k, float(alpha), float(beta), float(V * beta), uniforms)
        if callback is not None:
            callback(GibbsState(sweep, n_dk[inverse].copy(), n_kw.copy(), n_k.copy(), lengths))

    return TopicModel(
        K=K,
        V=V,
        alpha=float(alpha),
        beta=float(beta),
        n_kw=n_kw,
        n_dk=n_dk[inverse],
        seed=seed,
        iterations=iterations,
        burn_in=burn_in,
        doc_ids=doc_ids,
        vocabulary=vocabulary,
    )


def top_words(model: TopicModel, topic: int, n: int) -> list[tuple[int, float]]:
    if not 0 <= topic < model.K:
        raise IndexError(f"topic {topic} out of range 0..{model.K - 1}")
    if n < 1:
        raise ValueError("n must be >= 1")
    return _top_of_row(model.phi[topic], n)


def _top_of_row(row: np.ndarray, n: int) -> list[tuple[int, float]]:
    # stable sort on -p keeps lower ids first among ties
    idx = np.argsort(-row, kind="stable")[:n]
    return [(int(i), float(row[i])) for i in idx]


def _doc_term_presence(bows: Sequence[BowVector], V: int) -> sparse.csc_matrix:
    rows, cols = [], []
    for d, bow in enumerate(bows):
        for w, _ in bow:
            rows.append(d)
            cols.append(w)
    data = np.ones(len(rows), dtype=np.int64)
    return sparse.csc_matrix((data, (rows, cols)), shape=(len(bows), V))


def umass_from_counts(top: Sequence[int], presence: sparse.csc_matrix) -> float:
    """UMass score of one ranked word list given a binary doc-term matrix."""
    sub = presence[:, list(top)]
    co = (sub.T @ sub).toarray()
    df = np.diag(co)
    score = 0.0
    for i in range(1, len(top)):
        for j in range(i):
            denom = df[j]
            if denom == 0:
                log.warning("word %d of a topic occurs in no document; clamping its count to 1", top[j])
                denom = 1
            score += np.log((co[i, j] + 1.0) / denom)
    return float(score)


def umass_coherence(model: TopicModel, bows: Sequence[BowVector], top_n: int = 10) -> list[float]:
    if top_n < 2:
        raise ValueError("top_n must be >= 2")
    presence = _doc_term_presence(bows, model.V)
    phi = model.phi
    return [umass_from_counts([w for w, _ in _top_of_row(phi[k], top_n)], presence) for k in range(model.K)]


@dataclass
class CoherenceRow:
    K: int
    per_topic: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_topic))


def coherence_sweep(
    bows: Sequence[BowVector],
    k_range: Sequence[int] | range,
    alpha: float | None = None,
    beta: float = 0.01,
    iterations: int = 1000,
    burn_in: int = 200,
    seed: int = 0,
    top_n: int = 10,
    doc_ids: Sequence[str] | None = None,
    vocabulary: Vocabulary | None = None,
) -> list[CoherenceRow]:
    """Train one model per K (seed offset by K) and score it.

    A ``(lo, hi)`` pair is read as the inclusive range lo..hi.
    """
    if isinstance(k_range, tuple) and len(k_range) == 2:
        k_range = range(k_range[0], k_range[1] + 1)
    ks = list(k_range)
    if not ks:
        raise ValueError("empty K range")
    rows = []
    for K in ks:
        model = train_lda(
            bows, K, alpha=alpha, beta=beta, iterations=iterations, burn_in=burn_in,
            seed=seed + K, doc_ids=doc_ids, vocabulary=vocabulary,
        )
        rows.append(CoherenceRow(K, umass_coherence(model, bows, top_n)))
        log.info("K=%d mean coherence %.4f", K, rows[-1].mean)
    return rows


def primary_topic(theta_row) -> int:
    return int(np.argmax(np.asarray(theta_row)))


def infer_theta(model: TopicModel, bow: BowVector, iterations: int = 100, seed: int = 0) -> np.ndarray:
    """Fold a new document into a trained model, topic-word counts held fixed."""
    K = model.K
    if not bow:
        log.warning("empty document; returning the prior mean")
        return np.full(K, 1.0 / K)
    words = np.repeat(np.array([w for w, _ in bow], dtype=np.int64), [c for _, c in bow])
    if words.max() >= model.V:
        raise ValueError("document contains word ids outside the model vocabulary")
    phi_cols = np.ascontiguousarray(model.phi[:, words])
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0xF01D])))
    z = rng.integers(0, K, size=words.shape[0])
    n_k_doc = np.bincount(z, minlength=K).astype(np.int64)
    for _ in range(iterations):
        fold_in_sweep(words, z, n_k_doc, phi_cols, float(model.alpha), rng.random(words.shape[0]))
    return (n_k_doc + model.alpha) / (words.shape[0] + K * model.alpha)


def topic_report(model: TopicModel, n: int = 30) -> list[dict]:
    """Top-``n`` (word, weight) pairs per topic; the word-cloud data."""
    phi = model.phi
    return [
        {"topic": k, "words": [[model.word(w), p] for w, p in _top_of_row(phi[k], n)]}
        for k in range(model.K)
    ]

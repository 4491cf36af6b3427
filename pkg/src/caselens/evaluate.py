"""Cross-tabulation against labels, retrieval/agreement metrics, synthetic corpora."""

from __future__ import annotations

import json
import logging

from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .community import Partition
from .corpus import Corpus, Document, LabelSet
from .topics import primary_topic

log = logging.getLogger(__name__)

UNMODELLED = "unmodelled"


@dataclass
class CommunityRow:
    community: int
    size: int
    labelled: int
    dominant_topic: int | None = None
    dominant_share: float = 0.0
    english: int = 0


@dataclass
class Retrieval:
    precision: float
    recall: float
    f1: float
    n_candidates: int
    n_relevant_found: int
    precision_defined: bool = True


@dataclass
class EvalReport:
    label_name: str
    label_total: int
    rows: list[CommunityRow]
    outside: list[str]  # labelled ids absent from the partition
    retrieval: Retrieval | None = None
    candidate_communities: list[int] = field(default_factory=list)

    def check(self) -> None:
        for r in self.rows:
            if r.labelled > r.size:
                raise AssertionError(f"community {r.community}: labelled {r.labelled} > size {r.size}")
        total = sum(r.labelled for r in self.rows) + len(self.outside)
        if total != self.label_total:
            raise AssertionError(f"labelled counts sum to {total}, label set has {self.label_total}")

    def to_json(self) -> dict:
        return asdict(self)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def table(self, limit: int | None = None) -> str:
        rows = self.rows if limit is None else self.rows[:limit]
        lines = [
            f"{'community':>9}  {'size':>6}  {'english':>7}  {'known ' + self.label_name:>16}  {'dominant topic':>14}  {'share':>6}"
        ]
        for r in rows:
            dom = "-" if r.dominant_topic is None else str(r.dominant_topic)
            lines.append(
                f"{r.community:>9}  {r.size:>6}  {r.english:>7}  {r.labelled:>16}  {dom:>14}  {r.dominant_share:>6.2f}"
            )
        lines.append(f"labelled outside the evaluated graph: {len(self.outside)} of {self.label_total}")
        if self.retrieval is not None:
            rt = self.retrieval
            lines.append(
                f"candidates {rt.n_candidates} (communities {self.candidate_communities}): "
                f"precision {rt.precision:.3f}  recall {rt.recall:.3f}  F1 {rt.f1:.3f}"
            )
        return "\n".join(lines)


def community_label_counts(partition: Partition, labels: LabelSet) -> tuple[list[CommunityRow], list[str]]:
    """Per-community labelled counts, sorted by labelled count descending (ties by id)."""
    counts = Counter()
    outside = []
    for cid in sorted(labels.case_ids):
        if cid in partition.assignment:
            counts[partition.assignment[cid]] += 1
        else:
            outside.append(cid)
    rows = [CommunityRow(c, partition.sizes[c], counts.get(c, 0)) for c in range(partition.n_communities)]
    rows.sort(key=lambda r: (-r.labelled, r.community))
    return rows, outside


def community_topic_profile(partition: Partition, thetas: Mapping[str, np.ndarray], n_topics: int | None = None) -> list[dict]:
    """For each community, the share of members whose primary topic is each topic.

    Members without a topic vector fall in the ``"unmodelled"`` bucket.
    """
    profiles = []
    for members in partition.groups():
        hist: Counter = Counter()
        for n in members:
            if n in thetas:
                hist[primary_topic(thetas[n])] += 1
            else:
                hist[UNMODELLED] += 1
        size = len(members)
        prof = {k: hist[k] / size for k in sorted((k for k in hist if k != UNMODELLED))}
        if hist[UNMODELLED]:
            prof[UNMODELLED] = hist[UNMODELLED] / size
        profiles.append(prof)
    return profiles


def dominant_topic(profile: Mapping) -> tuple[int | None, float]:
    topical = [(share, -k, k) for k, share in profile.items() if k != UNMODELLED]
    if not topical:
        return None, 0.0
    share, _, k = max(topical)
    return k, share


def retrieval_metrics(candidates: Iterable[str], labels: LabelSet | Iterable[str]) -> Retrieval:
    cand = set(candidates)
    truth = set(labels.case_ids if isinstance(labels, LabelSet) else labels)
    hit = len(cand & truth)
    defined = bool(cand)
    precision = hit / len(cand) if cand else 0.0
    recall = hit / len(truth) if truth else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    if not defined:
        log.warning("empty candidate set; precision reported as 0")
    return Retrieval(precision, recall, f1, len(cand), hit, defined)


def select_candidates(
    partition: Partition,
    profiles: Sequence[Mapping],
    topic: int | None = None,
    threshold: float = 0.4,
    key_cases: Iterable[str] = (),
) -> list[int]:
    """Communities whose share for ``topic`` exceeds ``threshold``, plus those holding a key case."""
    chosen = set()
    if topic is not None:
        for c, prof in enumerate(profiles):
            if prof.get(topic, 0.0) > threshold:
                chosen.add(c)
    for case in key_cases:
        if case in partition.assignment:
            chosen.add(partition.assignment[case])
        else:
            log.warning("key case %s is not in the partition", case)
    return sorted(chosen)


def evaluation_report(
    partition: Partition,
    labels: LabelSet,
    thetas: Mapping[str, np.ndarray] | None = None,
    languages: Mapping[str, str] | None = None,
    topic: int | None = None,
    threshold: float = 0.4,
    key_cases: Iterable[str] = (),
) -> EvalReport:
    rows, outside = community_label_counts(partition, labels)
    profiles = community_topic_profile(partition, thetas or {})
    groups = partition.groups()
    for r in rows:
        r.dominant_topic, r.dominant_share = dominant_topic(profiles[r.community])
        if languages is not None:
            r.english = sum(1 for n in groups[r.community] if languages.get(n) == "en")
    chosen = select_candidates(partition, profiles, topic, threshold, key_cases)
    retrieval = None
    if chosen:
        cands = [n for c in chosen for n in groups[c]]
        retrieval = retrieval_metrics(cands, labels)
    report = EvalReport(labels.label_name, len(labels), rows, outside, retrieval, chosen)
    report.check()
    return report


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(p1: Partition | Mapping, p2: Partition | Mapping) -> float:
    """Normalized mutual information, arithmetic-mean normalization."""
    a = p1.assignment if isinstance(p1, Partition) else dict(p1)
    b = p2.assignment if isinstance(p2, Partition) else dict(p2)
    if set(a) != set(b):
        raise ValueError("partitions cover different node sets")
    nodes = sorted(a)
    n = len(nodes)
    if n == 0:
        return 1.0
    la = {c: i for i, c in enumerate(sorted(set(a.values()), key=str))}
    lb = {c: i for i, c in enumerate(sorted(set(b.values()), key=str))}
    table = np.zeros((len(la), len(lb)))
    for x in nodes:
        table[la[a[x]], lb[b[x]]] += 1
    ha = _entropy(table.sum(axis=1), n)
    hb = _entropy(table.sum(axis=0), n)
    if ha + hb == 0:
        return 1.0  # both single-community over the same nodes
    nz = table > 0
    outer = np.outer(table.sum(axis=1), table.sum(axis=0))
    mi = float(np.sum(table[nz] / n * np.log(table[nz] * n / outer[nz])))
    return float(np.clip(2.0 * mi / (ha + hb), 0.0, 1.0))


def match_topics(model_top: Sequence[Sequence[int]], truth_sets: Sequence[set]) -> list[tuple[int, int, int]]:
    """Greedy one-to-one matching of model topics to planted word sets.

    Returns (model topic, planted topic, overlap) triples, largest overlaps first.
    """
    scores = [(len(set(top) & truth), -i, -j, i, j) for i, top in enumerate(model_top) for j, truth in enumerate(truth_sets)]
    scores.sort(reverse=True)
    used_i, used_j, out = set(), set(), []
    for ov, _, _, i, j in scores:
        if i in used_i or j in used_j:
            continue
        used_i.add(i)
        used_j.add(j)
        out.append((i, j, ov))
    return out


_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def synth_word(index: int) -> str:
    """Letter-only pseudo-word, unique per index, never a stopword."""
    chars = []
    for _ in range(3):
        index, r = divmod(index, 26)
        chars.append(_LETTERS[r])
    if index:
        raise ValueError("synthetic vocabulary limited to 26**3 words")
    return "zq" + "".join(reversed(chars))


@dataclass
class SyntheticTruth:
    topic_of: dict[str, int]
    community_of: dict[str, int]
    topic_words: list[list[str]]
    background_words: list[str]
    params: dict

    def community_partition(self) -> Partition:
        return Partition.from_assignment(self.community_of)


def synth_corpus(
    doc_count: int = 100,
    K_true: int = 2,
    vocab_per_topic: int = 50,
    words_per_doc: int = 50,
    separation: float = 0.9,
    communities: int = 2,
    p_intra: float = 0.1,
    p_inter: float = 0.01,
    seed: int = 0,
    background_size: int | None = None,
    community_topics: Sequence[int] | None = None,
    fr_fraction: float = 0.0,
) -> tuple[Corpus, SyntheticTruth]:
    """Planted-topic, planted-community corpus.

    Documents are split into ``communities`` contiguous blocks; block ``c``
    draws its words from topic ``community_topics[c]`` (default ``c % K_true``)
    with probability ``separation`` and from a shared background vocabulary
    otherwise. Each pair of documents is linked with probability ``p_intra``
    inside a block and ``p_inter`` across; the later document cites the
    earlier one. A ``fr_fraction`` share of documents is marked French.
    """
    for name, p in (("separation", separation), ("p_intra", p_intra), ("p_inter", p_inter), ("fr_fraction", fr_fraction)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    if doc_count < 1 or K_true < 1 or vocab_per_topic < 1 or words_per_doc < 1 or communities < 1:
        raise ValueError("counts must be positive")
    if communities > doc_count:
        raise ValueError("more communities than documents")
    if background_size is None:
        background_size = vocab_per_topic
    if community_topics is None:
        community_topics = [c % K_true for c in range(communities)]
    if len(community_topics) != communities or any(not 0 <= t < K_true for t in community_topics):
        raise ValueError("community_topics must map every community to a topic in 0..K_true-1")

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x5C])))
    topic_words = [[synth_word(k * vocab_per_topic + j) for j in range(vocab_per_topic)] for k in range(K_true)]
    bg_start = K_true * vocab_per_topic
    background = [synth_word(bg_start + j) for j in range(background_size)]

    ids = [f"syn-{i:05d}" for i in range(doc_count)]
    comm = [i * communities // doc_count for i in range(doc_count)]
    topic = [community_topics[c] for c in comm]

    texts = []
    for i in range(doc_count):
        from_topic = rng.random(words_per_doc) < separation
        t_idx = rng.integers(0, vocab_per_topic, size=words_per_doc)
        b_idx = rng.integers(0, max(background_size, 1), size=words_per_doc)
        words = [
            topic_words[topic[i]][t] if ft or not background else background[b]
            for ft, t, b in zip(from_topic, t_idx, b_idx)
        ]
        texts.append(" ".join(words))

    draws = rng.random((doc_count, doc_count))
    cites = [[] for _ in range(doc_count)]
    for j in range(doc_count):
        for i in range(j):
            p = p_intra if comm[i] == comm[j] else p_inter
            if draws[i, j] < p:
                cites[j].append(ids[i])

    french = rng.random(doc_count) < fr_fraction
    kinds = rng.random(doc_count) < 0.5
    docs = tuple(
        Document(
            case_id=ids[i],
            doc_type="judgment" if kinds[i] else "decision",
            language="fr" if french[i] else "en",
            cited_case_ids=tuple(cites[i]),
            text=texts[i],
            title=f"Synthetic case {i}",
        )
        for i in range(doc_count)
    )
    params = dict(
        doc_count=doc_count, K_true=K_true, vocab_per_topic=vocab_per_topic, words_per_doc=words_per_doc,
        separation=separation, communities=communities, p_intra=p_intra, p_inter=p_inter, seed=seed,
        background_size=background_size, community_topics=list(community_topics), fr_fraction=fr_fraction,
    )
    truth = SyntheticTruth(
        topic_of=dict(zip(ids, topic)),
        community_of=dict(zip(ids, comm)),
        topic_words=topic_words,
        background_words=background,
        params=params,
    )
    return Corpus(docs), truth

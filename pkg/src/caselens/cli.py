"""Command-line pipeline.

Each subcommand reads upstream artifacts from the output directory, writes
its own, and records a manifest under ``manifests/`` with input/output
hashes and parameters. Exit codes: 0 success, 1 invalid configuration,
2 runtime failure (including missing upstream artifacts).
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .citegraph import build_graph, components, read_graph, subgraph, weight_edges, write_edges, write_nodes
from .community import Partition, louvain, modularity, write_summary
from .config import ConfigError, RunConfig
from .corpus import CorpusError, corpus_census, filter_corpus, format_census, load_annotations, load_corpus
from .embed import tsne, write_embedding_csv
from .evaluate import evaluation_report
from .textprep import NormalizeConfig, Vocabulary, build_vocabulary, normalize, to_bow
from .topics import TopicModel, coherence_sweep, primary_topic, topic_report, train_lda

log = logging.getLogger("caselens")

SUBCOMMANDS = (
    "ingest", "preprocess", "lda-train", "lda-sweep", "embed", "graph-build",
    "weight", "communities", "evaluate", "report", "all",
)


class MissingArtifact(RuntimeError):
    pass


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_via(path: Path, writer) -> None:
    """Run ``writer(tmp_path)`` then move the result into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


class Run:
    """Shared state for one subcommand invocation."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = cfg.output_dir
        self.inputs: dict[str, Path] = {}
        self.outputs: dict[str, Path] = {}

    def need(self, name: str) -> Path:
        p = self.out / name
        if not p.exists():
            raise MissingArtifact(f"required artifact {p} is missing; run the upstream subcommand first")
        self.inputs[name] = p
        return p

    def source(self, key: str, p: Path) -> Path:
        self.inputs[key] = p
        return p

    def write_text(self, name: str, text: str) -> Path:
        p = self.out / name
        atomic_write(p, text)
        self.outputs[name] = p
        return p

    def write_with(self, name: str, writer) -> Path:
        p = self.out / name
        _atomic_via(p, writer)
        self.outputs[name] = p
        return p

    def manifest(self, subcommand: str, params: dict, seed=None) -> None:
        doc = {
            "subcommand": subcommand,
            "version": __version__,
            "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "params": params,
            "seed": seed,
            "inputs": {k: sha256(p) for k, p in sorted(self.inputs.items())},
            "outputs": {k: sha256(p) for k, p in sorted(self.outputs.items())},
        }
        atomic_write(self.out / "manifests" / f"{subcommand}.json", dump_json(doc))


def _norm_config(cfg: RunConfig) -> NormalizeConfig:
    stop, gaz, lem, months = cfg.paths("stopwords"), cfg.paths("gazetteers"), cfg.path("lemmas"), cfg.path("months")
    default = NormalizeConfig.default(stem=cfg["textprep"]["stem"])
    if not (stop or gaz or lem or months):
        return default
    custom = NormalizeConfig.from_files(stop, gaz, lem, months, cfg["textprep"]["stem"])
    # any list left unset falls back to the bundled one
    return NormalizeConfig(
        custom.stopwords if stop else default.stopwords,
        custom.gazetteer if gaz else default.gazetteer,
        custom.lemmas if lem else default.lemmas,
        custom.months if months else default.months,
        cfg["textprep"]["stem"],
    )


def _load_corpus(run: Run):
    return load_corpus(run.source("corpus", run.cfg.path("corpus")))


def _read_bows(path: Path) -> tuple[list[str], list[list[tuple[int, int]]]]:
    ids, bows = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            ids.append(rec["case_id"])
            bows.append([(int(w), int(c)) for w, c in rec["bow"]])
    return ids, bows


def _read_thetas(path: Path) -> dict[str, np.ndarray]:
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        k_cols = [i for i, h in enumerate(header) if h.startswith("topic_")]
        for row in reader:
            out[row[0]] = np.array([float(row[i]) for i in k_cols])
    return out


def cmd_ingest(run: Run) -> None:
    corpus = _load_corpus(run)
    census = corpus_census(corpus)
    run.write_text(
        "census.json",
        dump_json({"total": len(corpus), "counts": [{"language": l, "doc_type": t, "n": n} for (l, t), n in census.items()]}),
    )
    run.write_text("census.txt", format_census(census) + "\n")
    print(format_census(census))
    run.manifest("ingest", {})


def cmd_preprocess(run: Run) -> None:
    tp = run.cfg["textprep"]
    corpus = filter_corpus(_load_corpus(run), language=tp["language"] or None)
    ncfg = _norm_config(run.cfg)
    tokens = [normalize(d.text, ncfg) for d in corpus]
    vocab = build_vocabulary(tokens, tp["min_df"], tp["max_df_ratio"])
    lines = [json.dumps({"case_id": d.case_id, "bow": to_bow(t, vocab)}) for d, t in zip(corpus, tokens)]
    run.write_text("bows.jsonl", "\n".join(lines) + "\n")
    run.write_text("vocabulary.json", dump_json(vocab.to_json()))
    log.info("%d documents, vocabulary of %d words", len(corpus), len(vocab))
    run.manifest("preprocess", tp)


def _lda_params(cfg: RunConfig) -> dict:
    lda = cfg["lda"]
    return dict(alpha=lda["alpha"], beta=lda["beta"], iterations=lda["iterations"], burn_in=lda["burn_in"])


def cmd_lda_train(run: Run) -> None:
    lda = run.cfg["lda"]
    ids, bows = _read_bows(run.need("bows.jsonl"))
    vocab = Vocabulary.from_json(json.loads(run.need("vocabulary.json").read_text(encoding="utf-8")))
    model = train_lda(bows, lda["K"], seed=lda["seed"], doc_ids=ids, vocabulary=vocab, **_lda_params(run.cfg))
    run.write_with("model.json", model.save)
    run.write_text("topics.json", dump_json(topic_report(model, lda["report_words"])))
    theta = model.theta
    rows = ["case_id," + ",".join(f"topic_{k}" for k in range(model.K)) + ",primary_topic"]
    for i, cid in enumerate(ids):
        rows.append(cid + "," + ",".join(repr(float(x)) for x in theta[i]) + f",{primary_topic(theta[i])}")
    run.write_text("thetas.csv", "\n".join(rows) + "\n")
    run.manifest("lda-train", lda, seed=lda["seed"])


def cmd_lda_sweep(run: Run) -> None:
    lda = run.cfg["lda"]
    ids, bows = _read_bows(run.need("bows.jsonl"))
    lo, hi = lda["sweep"]
    table = coherence_sweep(bows, range(lo, hi + 1), seed=lda["seed"], top_n=lda["top_n"], doc_ids=ids, **_lda_params(run.cfg))
    run.write_text("coherence.json", dump_json([{"K": r.K, "per_topic": r.per_topic, "mean": r.mean} for r in table]))
    for r in table:
        print(f"K={r.K:3d}  mean UMass coherence {r.mean:.4f}")
    run.manifest("lda-sweep", lda, seed=lda["seed"])


def _labels(run: Run):
    p = run.cfg.path("annotations")
    if p is None:
        return None
    return load_annotations(run.source("annotations", p), run.cfg["evaluate"]["label"])


def cmd_embed(run: Run) -> None:
    ts = run.cfg["tsne"]
    thetas = _read_thetas(run.need("thetas.csv"))
    ids = list(thetas)
    X = np.vstack([thetas[c] for c in ids])
    emb = tsne(X, ts["perplexity"], ts["iterations"], ts["learning_rate"], ts["seed"], case_ids=ids)
    labels = _labels(run)
    flags = {c: labels.label_name for c in ids if labels is not None and c in labels}
    prim = {c: primary_topic(thetas[c]) for c in ids}
    run.write_with("embedding.csv", lambda p: write_embedding_csv(emb, p, prim, flags))
    log.info("t-SNE final KL %.5f", emb.kl)
    run.manifest("embed", ts, seed=ts["seed"])


def cmd_graph_build(run: Run) -> None:
    gcfg = run.cfg["graph"]
    corpus = _load_corpus(run)
    graph, summary = build_graph(corpus, gcfg["dangling"], gcfg["accumulate"])
    census = components(graph)
    run.write_with("graph_edges.csv", lambda p: write_edges(graph, p))
    run.write_with("graph_nodes.csv", lambda p: write_nodes(graph, p))
    giant = subgraph(graph, census, census.giant) if census.giant is not None else graph
    run.write_with("giant_edges.csv", lambda p: write_edges(giant, p))
    run.write_with("giant_nodes.csv", lambda p: write_nodes(giant, p))
    info = {
        "nodes": graph.n_nodes,
        "edges": graph.n_edges,
        "components": census.n_components,
        "singletons": sum(1 for s in census.sizes if s == 1),
        "size_histogram": {str(k): v for k, v in census.size_histogram().items()},
        "giant_nodes": giant.n_nodes,
        "giant_edges": giant.n_edges,
        "dropped_citations": summary.dangling,
        "duplicate_citations": summary.duplicates,
        "self_citations": summary.self_citations,
        "stubs": summary.stubs,
    }
    run.write_text("components.json", dump_json(info))
    print(f"{graph.n_nodes} nodes, {graph.n_edges} links, {census.n_components} components; "
          f"giant: {giant.n_nodes} nodes, {giant.n_edges} links")
    run.manifest("graph-build", gcfg)


def _graph_prefix(cfg: RunConfig) -> str:
    return "giant" if cfg["graph"]["giant_only"] else "graph"


def cmd_weight(run: Run) -> None:
    prefix = _graph_prefix(run.cfg)
    graph = read_graph(run.need(f"{prefix}_edges.csv"), run.need(f"{prefix}_nodes.csv"))
    thetas = _read_thetas(run.need("thetas.csv"))
    thetas = {k: v for k, v in thetas.items() if k in graph.nodes}
    weighted, ws = weight_edges(graph, thetas)
    run.write_with("weighted_edges.csv", lambda p: write_edges(weighted, p))
    run.write_with("weighted_nodes.csv", lambda p: write_nodes(weighted, p))
    run.write_text("weights.json", dump_json({"fallback_median": ws.fallback, "vectored_edges": ws.n_vectored, "fallback_edges": ws.n_fallback}))
    print(f"fallback weight (median cosine over {ws.n_vectored} edges): {ws.fallback:.4f}")
    run.manifest("weight", {"graph": prefix})


def _partition_name(weighted: bool, gamma: float) -> str:
    return f"partition_{'weighted' if weighted else 'unweighted'}_g{gamma:g}"


def cmd_communities(run: Run, weighted: bool = False) -> None:
    lv = run.cfg["louvain"]
    if weighted:
        graph = read_graph(run.need("weighted_edges.csv"), run.need("weighted_nodes.csv"))
    else:
        prefix = _graph_prefix(run.cfg)
        graph = read_graph(run.need(f"{prefix}_edges.csv"), run.need(f"{prefix}_nodes.csv"))
    for gamma in lv["resolutions"]:
        part = louvain(graph, float(gamma), lv["seed"])
        Q = modularity(graph, part, float(gamma))
        name = _partition_name(weighted, gamma)
        run.write_with(f"{name}.csv", part.to_csv)
        run.write_with(f"{name}.json", lambda p: write_summary(p, part, float(gamma), lv["seed"], Q))
        print(f"resolution {gamma:g}: {part.n_communities} communities, Q={Q:.4f}")
    run.manifest("communities-weighted" if weighted else "communities", dict(lv, weighted=weighted), seed=lv["seed"])


def _select_topic(run: Run, ev: dict):
    if ev["topic"] is not None:
        return ev["topic"]
    if ev["topic_word"]:
        model = TopicModel.load(run.need("model.json"))
        if model.vocabulary is None or ev["topic_word"] not in model.vocabulary:
            raise RuntimeError(f"evaluate.topic_word {ev['topic_word']!r} is not in the vocabulary")
        return int(np.argmax(model.phi[:, model.vocabulary[ev["topic_word"]]]))
    return None


def cmd_evaluate(run: Run) -> None:
    ev = run.cfg["evaluate"]
    labels = _labels(run)
    if labels is None:
        raise ConfigError(["paths.annotations is required for evaluate"])
    thetas = _read_thetas(run.need("thetas.csv"))
    topic = _select_topic(run, ev)
    found = 0
    for weighted in (False, True):
        for gamma in run.cfg["louvain"]["resolutions"]:
            name = _partition_name(weighted, gamma)
            path = run.out / f"{name}.csv"
            if not path.exists():
                continue
            found += 1
            part = Partition.from_csv(run.need(f"{name}.csv"))
            nodes_file = run.need("weighted_nodes.csv" if weighted else f"{_graph_prefix(run.cfg)}_nodes.csv")
            with open(nodes_file, encoding="utf-8", newline="") as fh:
                langs = {r["case_id"]: r["language"] for r in csv.DictReader(fh)}
            report = evaluation_report(part, labels, thetas, langs, topic, ev["threshold"], ev["key_cases"])
            stem = name.replace("partition_", "eval_")
            run.write_with(f"{stem}.json", report.save)
            run.write_text(f"{stem}.txt", report.table() + "\n")
            print(f"== {stem}\n{report.table(limit=5)}")
    if not found:
        raise MissingArtifact("no partition files found; run 'communities' first")
    run.manifest("evaluate", dict(ev, topic=topic))


def cmd_report(run: Run) -> None:
    def load(name, required=False):
        p = run.out / name
        if not p.exists():
            if required:
                run.need(name)
            return None
        run.inputs[name] = p
        return json.loads(p.read_text(encoding="utf-8"))

    bundle = {
        "census": load("census.json", required=True),
        "coherence": load("coherence.json"),
        "topics": load("topics.json"),
        "components": load("components.json"),
        "weights": load("weights.json"),
        "partitions": {},
        "evaluations": {},
    }
    for p in sorted(run.out.glob("partition_*.json")):
        bundle["partitions"][p.stem] = load(p.name)
    for p in sorted(run.out.glob("eval_*.json")):
        bundle["evaluations"][p.stem] = load(p.name)
    run.write_text("report.json", dump_json(bundle))
    run.manifest("report", {})


PIPELINE = (
    ("ingest", cmd_ingest),
    ("preprocess", cmd_preprocess),
    ("lda-train", cmd_lda_train),
    ("lda-sweep", cmd_lda_sweep),
    ("embed", cmd_embed),
    ("graph-build", cmd_graph_build),
    ("communities", cmd_communities),
    ("weight", cmd_weight),
    ("communities --weighted", lambda run: cmd_communities(run, weighted=True)),
    ("evaluate", cmd_evaluate),
    ("report", cmd_report),
)

REQUIRED_PATHS = {
    "ingest": ("corpus",),
    "preprocess": ("corpus",),
    "graph-build": ("corpus",),
    "evaluate": ("annotations",),
    "all": ("corpus", "annotations"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="caselens", description="Topic models and citation communities for case-law corpora.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", help="TOML run configuration")
        p.add_argument("-o", "--output", help="output directory (overrides paths.output)")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config value")
        if name == "communities":
            p.add_argument("--weighted", action="store_true", help="use the topic-weighted graph")
    return parser


def run_command(command: str, cfg: RunConfig, weighted: bool = False) -> None:
    steps = PIPELINE if command == "all" else [(command, None)]
    for name, fn in steps:
        run = Run(cfg)
        run.out.mkdir(parents=True, exist_ok=True)
        if fn is None:
            fn = {
                "ingest": cmd_ingest, "preprocess": cmd_preprocess, "lda-train": cmd_lda_train,
                "lda-sweep": cmd_lda_sweep, "embed": cmd_embed, "graph-build": cmd_graph_build,
                "weight": cmd_weight, "evaluate": cmd_evaluate, "report": cmd_report,
                "communities": lambda r: cmd_communities(r, weighted),
            }[name]
        log.info("running %s", name)
        fn(run)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = list(args.set)
        if args.output:
            overrides.append(f"paths.output={json.dumps(str(Path(args.output).resolve()))}")
        cfg = RunConfig.load(args.config, overrides)
        cfg.validate(REQUIRED_PATHS.get(args.command, ()))
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 1
    try:
        run_command(args.command, cfg, getattr(args, "weighted", False))
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 1
    except (MissingArtifact, CorpusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

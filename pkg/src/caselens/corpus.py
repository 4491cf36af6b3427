"""Corpus and annotation loading."""

from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

log = logging.getLogger(__name__)

DOC_TYPES = ("judgment", "decision")
LANGUAGES = ("en", "fr")
REQUIRED_KEYS = ("case_id", "doc_type", "language", "cited_case_ids", "text")

# (language, doc_type) cells in the order the census table is printed.
CENSUS_ORDER = (("en", "judgment"), ("en", "decision"), ("fr", "decision"), ("fr", "judgment"))


class CorpusError(ValueError):
    """Raised for malformed corpus or annotation input."""


@dataclass(frozen=True)
class Document:
    case_id: str
    doc_type: str
    language: str
    cited_case_ids: tuple[str, ...] = ()
    text: str = ""
    title: str = ""
    application_no: str = ""
    importance: int | None = None
    date: str = ""

    def to_record(self) -> dict:
        rec = {
            "case_id": self.case_id,
            "title": self.title,
            "application_no": self.application_no,
            "doc_type": self.doc_type,
            "language": self.language,
            "importance": self.importance,
            "date": self.date,
            "cited_case_ids": list(self.cited_case_ids),
            "text": self.text,
        }
        return rec


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...] = ()
    index: dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.index:
            idx = {}
            for pos, doc in enumerate(self.documents):
                if doc.case_id in idx:
                    raise CorpusError(f"duplicate case_id {doc.case_id!r}")
                idx[doc.case_id] = pos
            object.__setattr__(self, "index", idx)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __contains__(self, case_id: str) -> bool:
        return case_id in self.index

    def __getitem__(self, case_id: str) -> Document:
        return self.documents[self.index[case_id]]

    @property
    def case_ids(self) -> list[str]:
        return [d.case_id for d in self.documents]


@dataclass(frozen=True)
class LabelSet:
    label_name: str
    case_ids: frozenset[str] = frozenset()

    def __len__(self) -> int:
        return len(self.case_ids)

    def __contains__(self, case_id: str) -> bool:
        return case_id in self.case_ids


def _check_enum(value, allowed, fieldname, lineno):
    if value not in allowed:
        raise CorpusError(f"line {lineno}: unknown {fieldname} value {value!r} (allowed: {', '.join(allowed)})")


def document_from_record(rec: dict, lineno: int = 0) -> Document:
    """Validate one decoded JSON record and build a Document."""
    if not isinstance(rec, dict):
        raise CorpusError(f"line {lineno}: record is not a JSON object")
    missing = [k for k in REQUIRED_KEYS if k not in rec]
    if missing:
        raise CorpusError(f"line {lineno}: missing required key(s) {', '.join(missing)}")
    case_id = rec["case_id"]
    if not isinstance(case_id, str) or not case_id:
        raise CorpusError(f"line {lineno}: case_id must be a non-empty string")
    _check_enum(rec["doc_type"], DOC_TYPES, "doc_type", lineno)
    _check_enum(rec["language"], LANGUAGES, "language", lineno)

    cited = rec["cited_case_ids"]
    if not isinstance(cited, list) or not all(isinstance(c, str) for c in cited):
        raise CorpusError(f"line {lineno}: cited_case_ids must be a list of strings")
    seen = set()
    deduped = []
    for c in cited:
        if c == case_id:
            log.warning("line %d: dropping self-citation of %s", lineno, case_id)
            continue
        if c not in seen:
            seen.add(c)
            deduped.append(c)

    text = rec["text"]
    if not isinstance(text, str):
        raise CorpusError(f"line {lineno}: text must be a string")

    importance = rec.get("importance")
    if importance is not None and (not isinstance(importance, int) or isinstance(importance, bool)):
        raise CorpusError(f"line {lineno}: importance must be an integer or null")

    date = rec.get("date") or ""
    if date:
        try:
            _dt.date.fromisoformat(date)
        except (TypeError, ValueError):
            raise CorpusError(f"line {lineno}: date {date!r} is not ISO-8601 (YYYY-MM-DD)") from None

    return Document(
        case_id=case_id,
        doc_type=rec["doc_type"],
        language=rec["language"],
        cited_case_ids=tuple(deduped),
        text=text,
        title=rec.get("title") or "",
        application_no=rec.get("application_no") or "",
        importance=importance,
        date=date,
    )


def load_corpus(path: str | Path, format: str = "jsonl") -> Corpus:
    """Read a JSON Lines corpus file.

    Blank lines are skipped. Duplicate case ids, malformed JSON and unknown
    enum values raise :class:`CorpusError` with the offending line number.
    """
    if format != "jsonl":
        raise CorpusError(f"unsupported corpus format {format!r}")
    docs: list[Document] = []
    first_seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from None
            doc = document_from_record(rec, lineno)
            if doc.case_id in first_seen:
                raise CorpusError(
                    f"duplicate case_id {doc.case_id!r} on lines {first_seen[doc.case_id]} and {lineno}"
                )
            first_seen[doc.case_id] = lineno
            docs.append(doc)
    return Corpus(tuple(docs))


def write_corpus(corpus: Corpus | Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in corpus:
            fh.write(json.dumps(doc.to_record(), ensure_ascii=False, sort_keys=True) + "\n")


def load_annotations(path: str | Path, label: str = "eviction") -> LabelSet:
    """Read a ``case_id,label`` CSV and keep the ids carrying ``label``."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            log.warning("annotation file %s is empty", path)
            return LabelSet(label)
        if [h.strip() for h in header] != ["case_id", "label"]:
            raise CorpusError(f"{path}: expected header 'case_id,label', got {','.join(header)!r}")
        ids = set()
        for row in reader:
            if not row or not any(cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise CorpusError(f"{path}: line {reader.line_num}: expected 2 columns")
            if row[1].strip() == label:
                ids.add(row[0].strip())
    if not ids:
        log.warning("no rows labelled %r in %s", label, path)
    return LabelSet(label, frozenset(ids))


def filter_corpus(corpus: Corpus, language: str | None = None, doc_type: str | None = None) -> Corpus:
    if language is None and doc_type is None:
        return corpus
    keep = tuple(
        d
        for d in corpus
        if (language is None or d.language == language) and (doc_type is None or d.doc_type == doc_type)
    )
    return Corpus(keep)


def corpus_census(corpus: Corpus) -> dict[tuple[str, str], int]:
    """Document counts per (language, doc_type), keyed in table order."""
    counts = {cell: 0 for cell in CENSUS_ORDER}
    for doc in corpus:
        counts[(doc.language, doc.doc_type)] += 1
    return counts


def format_census(counts: dict[tuple[str, str], int]) -> str:
    head = f"{'English':^23}|{'French':^23}"
    sub = f"{'Decisions':>11} {'Judgments':>11}|{'Decisions':>11} {'Judgments':>11}"
    vals = (
        f"{counts[('en', 'decision')]:>11,} {counts[('en', 'judgment')]:>11,}|"
        f"{counts[('fr', 'decision')]:>11,} {counts[('fr', 'judgment')]:>11,}"
    )
    return "\n".join([head, sub, vals])

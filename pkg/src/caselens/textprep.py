"""Text normalization and bag-of-words construction.

Normalization order: tokenize, lowercase, drop stopwords / numbers / dates,
drop gazetteer entries, lemmatize. Lowercasing is applied before every list
lookup so the lists are effectively case-insensitive.
"""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

log = logging.getLogger(__name__)

TokenList = list[str]
BowVector = list[tuple[int, int]]

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_DIGIT_RE = re.compile(r"\d")
_YEAR_RE = re.compile(r"^\d{4}$")
_DAY_RE = re.compile(r"^\d{1,2}(st|nd|rd|th|er)?$")


def read_wordlist(path: str | Path) -> frozenset[str]:
    """One entry per line; blank lines and ``#`` comments ignored."""
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


def read_lemmas(path: str | Path) -> dict[str, str]:
    lemmas = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{path}: line {lineno}: expected 'surface<TAB>lemma'")
        lemmas[parts[0].strip().lower()] = parts[1].strip().lower()
    return lemmas


def _resolve_chains(lemmas: Mapping[str, str]) -> dict[str, str]:
    # a->b, b->c becomes a->c so lemmatizing is idempotent
    out = {}
    for surface in lemmas:
        seen = {surface}
        target = lemmas[surface]
        while target in lemmas and target not in seen and lemmas[target] != target:
            seen.add(target)
            target = lemmas[target]
        out[surface] = target
    return out


def _data_path(name: str) -> Path:
    return Path(str(resources.files("caselens") / "data" / name))


@dataclass(frozen=True)
class NormalizeConfig:
    stopwords: frozenset[str] = frozenset()
    gazetteer: frozenset[str] = frozenset()
    lemmas: Mapping[str, str] = field(default_factory=dict)
    months: frozenset[str] = frozenset()
    stem: bool = False
    min_length: int = 2

    def __post_init__(self):
        object.__setattr__(self, "stopwords", frozenset(w.lower() for w in self.stopwords))
        object.__setattr__(self, "gazetteer", frozenset(w.lower() for w in self.gazetteer))
        object.__setattr__(self, "months", frozenset(w.lower() for w in self.months))
        lemmas = {k.lower(): v.lower() for k, v in self.lemmas.items()}
        object.__setattr__(self, "lemmas", _resolve_chains(lemmas))

    @classmethod
    def from_files(
        cls,
        stopword_files: Sequence[str | Path] = (),
        gazetteer_files: Sequence[str | Path] = (),
        lemma_file: str | Path | None = None,
        month_file: str | Path | None = None,
        stem: bool = False,
    ) -> "NormalizeConfig":
        stop = frozenset().union(*(read_wordlist(p) for p in stopword_files))
        gaz = frozenset().union(*(read_wordlist(p) for p in gazetteer_files))
        lemmas = read_lemmas(lemma_file) if lemma_file else {}
        months = read_wordlist(month_file) if month_file else frozenset()
        return cls(stop, gaz, lemmas, months, stem)

    @classmethod
    def default(cls, stem: bool = False) -> "NormalizeConfig":
        """Bundled English stoplist, month names, gazetteers and lemma table."""
        return cls.from_files(
            stopword_files=[_data_path("stopwords_en.txt")],
            gazetteer_files=[_data_path("gazetteer_countries.txt"), _data_path("gazetteer_parties.txt")],
            lemma_file=_data_path("lemmas_en.tsv"),
            month_file=_data_path("months.txt"),
            stem=stem,
        )


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def _strip_dates(tokens: list[str], months: frozenset[str]) -> list[str]:
    """Remove 'day month year' and 'month year' runs. Tokens are lowercase."""
    if not months:
        return tokens
    drop = [False] * len(tokens)
    for i, tok in enumerate(tokens):
        if tok in months and i + 1 < len(tokens) and _YEAR_RE.match(tokens[i + 1]):
            drop[i] = drop[i + 1] = True
            if i > 0 and _DAY_RE.match(tokens[i - 1]):
                drop[i - 1] = True
    return [t for t, d in zip(tokens, drop) if not d]


def _porter_step1(word: str) -> str:
    # Porter step 1a/1b only: plurals and -ed/-ing.
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ies"):
        word = word[:-2]
    elif word.endswith("s") and not word.endswith("ss") and len(word) > 3:
        word = word[:-1]
    for suffix in ("ing", "ed"):
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if len(stem) >= 3 and re.search(r"[aeiouy]", stem):
                if stem.endswith(("at", "bl", "iz")):
                    return stem + "e"
                if len(stem) > 2 and stem[-1] == stem[-2] and stem[-1] not in "lsz":
                    return stem[:-1]
                return stem
    return word


def _keep(tok: str, config: NormalizeConfig) -> bool:
    return (
        len(tok) >= config.min_length
        and not _DIGIT_RE.search(tok)
        and tok not in config.stopwords
        and tok not in config.gazetteer
    )


def normalize(text: str, config: NormalizeConfig) -> TokenList:
    if not text:
        return []
    tokens = [t.lower() for t in tokenize(text)]
    tokens = _strip_dates(tokens, config.months)
    out = []
    for tok in tokens:
        if not _keep(tok, config):
            continue
        lemma = config.lemmas.get(tok, tok)
        if config.stem:
            lemma = _porter_step1(lemma)
        # a lemma can itself be a stopword ("were" -> "be")
        if _keep(lemma, config):
            out.append(lemma)
    return out


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]
    doc_freq: tuple[int, ...]
    n_docs: int = 0
    ids: dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "ids", {w: i for i, w in enumerate(self.words)})
        if len(self.ids) != len(self.words):
            raise ValueError("vocabulary words must be unique")

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.ids

    def __getitem__(self, word: str) -> int:
        return self.ids[word]

    def as_dict(self) -> dict[str, int]:
        return dict(self.ids)

    def to_json(self) -> dict:
        return {"words": list(self.words), "doc_freq": list(self.doc_freq), "n_docs": self.n_docs}

    @classmethod
    def from_json(cls, data: dict) -> "Vocabulary":
        return cls(tuple(data["words"]), tuple(data["doc_freq"]), data.get("n_docs", 0))


def build_vocabulary(token_lists: Iterable[TokenList], min_df: int = 5, max_df_ratio: float = 0.5) -> Vocabulary:
    if min_df < 1:
        raise ValueError("min_df must be >= 1")
    if not 0 < max_df_ratio <= 1:
        raise ValueError("max_df_ratio must lie in (0, 1]")
    df: Counter[str] = Counter()
    n_docs = 0
    for tokens in token_lists:
        n_docs += 1
        df.update(set(tokens))
    cap = max_df_ratio * n_docs
    kept = sorted(w for w, c in df.items() if min_df <= c <= cap)
    if not kept:
        raise ValueError(
            f"empty vocabulary with min_df={min_df}, max_df_ratio={max_df_ratio} over {n_docs} documents; "
            "lower min_df or raise max_df_ratio"
        )
    return Vocabulary(tuple(kept), tuple(df[w] for w in kept), n_docs)


def to_bow(tokens: TokenList, vocab: Vocabulary | Mapping[str, int]) -> BowVector:
    ids = vocab.ids if isinstance(vocab, Vocabulary) else vocab
    counts = Counter(ids[t] for t in tokens if t in ids)
    return sorted(counts.items())

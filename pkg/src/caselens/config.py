"""Run configuration: a TOML file plus ``section.key=value`` overrides."""

from __future__ import annotations

import copy
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULTS: dict[str, dict[str, Any]] = {
    "paths": {
        "corpus": "",
        "annotations": "",
        "output": "out",
        "stopwords": [],
        "gazetteers": [],
        "lemmas": "",
        "months": "",
    },
    "textprep": {"language": "en", "min_df": 5, "max_df_ratio": 0.5, "stem": False},
    "lda": {
        "K": 17,
        "sweep": [10, 25],
        "alpha": None,
        "beta": 0.01,
        "iterations": 1000,
        "burn_in": 200,
        "seed": 0,
        "top_n": 10,
        "report_words": 30,
    },
    "graph": {"dangling": "drop", "accumulate": False, "giant_only": True},
    "louvain": {"resolutions": [1.0, 3.0], "seed": 0},
    "tsne": {"perplexity": 30.0, "iterations": 1000, "learning_rate": 200.0, "seed": 0},
    "evaluate": {"label": "eviction", "topic": None, "topic_word": "", "threshold": 0.4, "key_cases": []},
}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


def _parse_override(text: str) -> tuple[str, str, Any]:
    if "=" not in text or "." not in text.split("=", 1)[0]:
        raise ConfigError([f"override {text!r} must look like section.key=value"])
    key, raw = text.split("=", 1)
    section, name = key.strip().split(".", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return section, name, value


@dataclass
class RunConfig:
    data: dict
    base_dir: Path

    def __getitem__(self, section: str) -> dict:
        return self.data[section]

    def path(self, key: str) -> Path | None:
        raw = self.data["paths"][key]
        if not raw:
            return None
        p = Path(raw)
        return p if p.is_absolute() else (self.base_dir / p)

    def paths(self, key: str) -> list[Path]:
        return [Path(p) if Path(p).is_absolute() else self.base_dir / p for p in self.data["paths"][key]]

    @property
    def output_dir(self) -> Path:
        return self.path("output")

    def as_json(self) -> dict:
        return copy.deepcopy(self.data)

    @classmethod
    def load(cls, path: str | Path | None, overrides: list[str] = ()) -> "RunConfig":
        data = copy.deepcopy(DEFAULTS)
        base = Path.cwd()
        problems = []
        if path is not None:
            path = Path(path)
            try:
                raw = tomllib.loads(path.read_text(encoding="utf-8"))
            except FileNotFoundError:
                raise ConfigError([f"config file {path} not found"]) from None
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError([f"{path}: {exc}"]) from None
            base = path.resolve().parent
            for section, values in raw.items():
                if section not in data or not isinstance(values, dict):
                    problems.append(f"unknown config section [{section}]")
                    continue
                for k, v in values.items():
                    if k not in data[section]:
                        problems.append(f"unknown key {section}.{k}")
                    else:
                        data[section][k] = v
        for ov in overrides:
            section, name, value = _parse_override(ov)
            if section not in data or name not in data[section]:
                problems.append(f"unknown key {section}.{name} in override")
            else:
                data[section][name] = value
        if problems:
            raise ConfigError(problems)
        return cls(data, base)

    def validate(self, need: tuple[str, ...] = ()) -> None:
        """Check every field; raise ConfigError listing all problems."""
        problems = []
        for key in need:
            p = self.path(key)
            if p is None:
                problems.append(f"paths.{key} is required")
            elif not p.exists():
                problems.append(f"paths.{key}: {p} does not exist")
        for key in ("lemmas", "months"):
            p = self.path(key)
            if p is not None and not p.exists():
                problems.append(f"paths.{key}: {p} does not exist")
        for key in ("stopwords", "gazetteers"):
            for p in self.paths(key):
                if not p.exists():
                    problems.append(f"paths.{key}: {p} does not exist")

        tp = self.data["textprep"]
        if tp["language"] not in (None, "", "en", "fr"):
            problems.append("textprep.language must be 'en', 'fr' or empty")
        if not (isinstance(tp["min_df"], int) and tp["min_df"] >= 1):
            problems.append("textprep.min_df must be an integer >= 1")
        if not (isinstance(tp["max_df_ratio"], (int, float)) and 0 < tp["max_df_ratio"] <= 1):
            problems.append("textprep.max_df_ratio must lie in (0, 1]")

        lda = self.data["lda"]
        if not (isinstance(lda["K"], int) and lda["K"] >= 1):
            problems.append("lda.K must be an integer >= 1")
        sw = lda["sweep"]
        if not (isinstance(sw, list) and len(sw) == 2 and all(isinstance(x, int) for x in sw) and 1 <= sw[0] <= sw[1]):
            problems.append("lda.sweep must be [lo, hi] with 1 <= lo <= hi")
        if lda["alpha"] is not None and not (isinstance(lda["alpha"], (int, float)) and lda["alpha"] > 0):
            problems.append("lda.alpha must be positive (or omitted for 50/K)")
        if not (isinstance(lda["beta"], (int, float)) and lda["beta"] > 0):
            problems.append("lda.beta must be positive")
        if not (isinstance(lda["iterations"], int) and isinstance(lda["burn_in"], int) and 0 <= lda["burn_in"] < lda["iterations"]):
            problems.append("lda.iterations and lda.burn_in must satisfy iterations > burn_in >= 0")
        if not (isinstance(lda["top_n"], int) and lda["top_n"] >= 2):
            problems.append("lda.top_n must be an integer >= 2")

        if self.data["graph"]["dangling"] not in ("drop", "stub"):
            problems.append("graph.dangling must be 'drop' or 'stub'")
        res = self.data["louvain"]["resolutions"]
        if not (isinstance(res, list) and res and all(isinstance(r, (int, float)) and r > 0 for r in res)):
            problems.append("louvain.resolutions must be a non-empty list of positive numbers")

        ts = self.data["tsne"]
        if not (isinstance(ts["perplexity"], (int, float)) and ts["perplexity"] > 0):
            problems.append("tsne.perplexity must be positive")
        if not (isinstance(ts["iterations"], int) and ts["iterations"] >= 1):
            problems.append("tsne.iterations must be a positive integer")
        lr = ts["learning_rate"]
        if not (lr == "auto" or (isinstance(lr, (int, float)) and lr > 0)):
            problems.append("tsne.learning_rate must be positive or 'auto'")

        ev = self.data["evaluate"]
        if not (isinstance(ev["threshold"], (int, float)) and 0 <= ev["threshold"] <= 1):
            problems.append("evaluate.threshold must lie in [0, 1]")
        if ev["topic"] is not None and not (isinstance(ev["topic"], int) and ev["topic"] >= 0):
            problems.append("evaluate.topic must be a non-negative integer")

        for section in ("lda", "louvain", "tsne"):
            if not isinstance(self.data[section]["seed"], int):
                problems.append(f"{section}.seed must be an integer")
        if problems:
            raise ConfigError(problems)

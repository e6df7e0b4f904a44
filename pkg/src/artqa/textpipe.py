"""Deterministic text preprocessing shared by indexing and querying.

The pipeline order is fixed: tokenize, stop-word removal, stemming, n-gram
formation. All functions are pure; a :class:`PipelineConfig` captures every
knob so an index and its queries always agree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from . import porter

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    """English stop list shipped with the package (one word per line)."""
    text = resources.files("artqa.resources").joinpath("stopwords_en.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip() and not w.startswith("#"))


@dataclass(frozen=True)
class PipelineConfig:
    lowercase: bool = True
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    stem: bool = True
    n_max: int = 3

    def __post_init__(self) -> None:
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))

    def to_dict(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "stopwords": sorted(self.stopwords),
            "stem": self.stem,
            "n_max": self.n_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(
            lowercase=bool(d["lowercase"]),
            stopwords=frozenset(d["stopwords"]),
            stem=bool(d["stem"]),
            n_max=int(d["n_max"]),
        )


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    """Split on maximal runs of non-alphanumeric characters; digits retained."""
    if lowercase:
        text = text.lower()
    return _TOKEN_RE.findall(text)


def remove_stopwords(tokens: list[str], config: PipelineConfig) -> list[str]:
    """Order-preserving filter; membership is tested on the lowercased token."""
    return [t for t in tokens if t.lower() not in config.stopwords]


def stem(token: str) -> str:
    return porter.stem(token)


def ngrams(tokens: list[str], n_max: int) -> list[str]:
    """All contiguous n-grams for n = 1..n_max, ordered by n then position,
    joined with single spaces."""
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    out: list[str] = []
    for n in range(1, n_max + 1):
        for i in range(len(tokens) - n + 1):
            out.append(" ".join(tokens[i : i + n]))
    return out


def content_tokens(text: str, config: PipelineConfig) -> list[str]:
    """tokenize -> stop-word removal -> stemming (no n-grams)."""
    tokens = tokenize(text, lowercase=config.lowercase)
    tokens = remove_stopwords(tokens, config)
    if config.stem:
        tokens = [porter.stem(t) for t in tokens]
    return tokens


def preprocess(text: str, config: PipelineConfig) -> list[str]:
    """Full pipeline: tokenize -> stop words -> stem -> n-grams."""
    return ngrams(content_tokens(text, config), config.n_max)

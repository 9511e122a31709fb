"""Keyword analyzer chain: tokenize, fold, lowercase, stop, stem, n-gram.

Pipeline order is fixed: whitespace/punctuation pre-tokenization, ASCII
folding of diacritics, lowercasing, stop-word removal, stemming, then
emission of every contiguous character n-gram with length between min_gram
and max_gram.  A stemmed token shorter than min_gram passes through whole
so short clinical terms stay searchable.
"""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

from . import porter
from .model import ModelError


class StemmerKind(Enum):
    """Snowball-family English stemming, or none."""

    ENGLISH = "english"
    NONE = "none"


def _load_default_stop_words() -> frozenset[str]:
    text = resources.files("casegraph.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


DEFAULT_STOP_WORDS = _load_default_stop_words()

_WORD = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class AnalyzerConfig:
    min_gram: int = 3
    max_gram: int = 25
    stop_words: frozenset[str] = field(default=DEFAULT_STOP_WORDS)
    stemmer: StemmerKind = StemmerKind.ENGLISH
    fold_ascii: bool = True
    lowercase: bool = True

    def __post_init__(self):
        if not (1 <= self.min_gram <= self.max_gram):
            raise ModelError(
                f"invalid n-gram bounds [{self.min_gram}, {self.max_gram}]"
            )


def fold_to_ascii(token: str) -> str:
    """Strip diacritics by compatibility decomposition, drop what remains
    outside ASCII."""
    decomposed = unicodedata.normalize("NFKD", token)
    return "".join(ch for ch in decomposed if ord(ch) < 128 and not unicodedata.combining(ch))


def analyze_words(text: str, cfg: AnalyzerConfig | None = None) -> list[str]:
    """Run the chain up to (and including) stemming, without n-gram expansion."""
    cfg = cfg or AnalyzerConfig()
    words = []
    for raw in _WORD.findall(text):
        token = fold_to_ascii(raw) if cfg.fold_ascii else raw
        if cfg.lowercase:
            token = token.lower()
        if not token or token in cfg.stop_words:
            continue
        if cfg.stemmer is StemmerKind.ENGLISH:
            token = porter.stem(token)
        if token:
            words.append(token)
    return words


def ngrams(token: str, min_gram: int, max_gram: int) -> list[str]:
    if len(token) < min_gram:
        return [token]
    out = []
    top = min(max_gram, len(token))
    for length in range(min_gram, top + 1):
        for start in range(len(token) - length + 1):
            out.append(token[start : start + length])
    return out


def analyze(text: str, cfg: AnalyzerConfig | None = None) -> list[str]:
    """Full analyzer output: the n-gram tokens the inverted index consumes."""
    cfg = cfg or AnalyzerConfig()
    out: list[str] = []
    for word in analyze_words(text, cfg):
        out.extend(ngrams(word, cfg.min_gram, cfg.max_gram))
    return out

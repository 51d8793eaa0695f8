"""Deterministic synthetic text with Zipfian words and topical structure.

Stands in for a real base corpus when none is available: each document draws
from one topic's vocabulary plus a shared pool of function words, so content
words acquire genuine distributional signatures while the marginal counts
stay Zipf-like. Everything derives from one seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
           "br", "dr", "gr", "kl", "pl", "st", "tr", "sk"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ea", "io", "ou"]
_CODAS = ["", "", "n", "r", "s", "l", "t", "k", "nd", "st"]


@dataclass
class GeneratorConfig:
    tokens: int = 1_000_000
    topics: int = 20
    words_per_topic: int = 400
    function_words: int = 120
    function_mass: float = 0.35
    zipf_exponent: float = 1.05
    doc_len_low: int = 8
    doc_len_high: int = 28
    seed: int = 1


def _make_words(rng: np.random.Generator, count: int, syllables: int,
                taken: set[str]) -> list[str]:
    """Pronounceable unique pseudo-words of a given syllable count."""
    words = []
    while len(words) < count:
        parts = []
        for _ in range(syllables):
            parts.append(_ONSETS[rng.integers(len(_ONSETS))])
            parts.append(_VOWELS[rng.integers(len(_VOWELS))])
        parts.append(_CODAS[rng.integers(len(_CODAS))])
        word = "".join(parts)
        if word not in taken:
            taken.add(word)
            words.append(word)
    return words


def _zipf_cdf(count: int, exponent: float) -> np.ndarray:
    weights = 1.0 / np.arange(1, count + 1) ** exponent
    return np.cumsum(weights / weights.sum())


def generate_corpus(path, config: GeneratorConfig = GeneratorConfig()):
    """Write one synthetic corpus file; returns the function-word list.

    The output has exactly ``config.tokens`` whitespace tokens across
    newline-delimited documents, each document sampled from a single topic.
    """
    rng = np.random.default_rng([config.seed])
    taken: set[str] = set()
    function_words = _make_words(rng, config.function_words, 1, taken)
    topic_words = [
        _make_words(rng, config.words_per_topic, 2, taken)
        for _ in range(config.topics)
    ]

    lengths = []
    remaining = config.tokens
    while remaining > 0:
        size = int(rng.integers(config.doc_len_low, config.doc_len_high + 1))
        size = min(size, remaining)
        lengths.append(size)
        remaining -= size
    lengths = np.array(lengths, dtype=np.int64)
    total = config.tokens

    doc_topic = rng.integers(0, config.topics, size=len(lengths))
    token_topic = np.repeat(doc_topic, lengths)
    is_function = rng.random(total) < config.function_mass

    func_cdf = _zipf_cdf(config.function_words, config.zipf_exponent)
    content_cdf = _zipf_cdf(config.words_per_topic, config.zipf_exponent)
    # clip guards the u > cdf[-1] corner when the cumsum rounds below 1
    func_rank = np.minimum(
        np.searchsorted(func_cdf, rng.random(total), side="right"),
        config.function_words - 1,
    )
    content_rank = np.minimum(
        np.searchsorted(content_cdf, rng.random(total), side="right"),
        config.words_per_topic - 1,
    )

    vocab = np.array(
        function_words + [w for topic in topic_words for w in topic]
    )
    word_ids = np.where(
        is_function,
        func_rank,
        config.function_words + token_topic * config.words_per_topic + content_rank,
    )
    tokens = vocab[word_ids]

    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        pos = 0
        for size in lengths:
            fh.write(" ".join(tokens[pos:pos + size]))
            fh.write("\n")
            pos += size
    return function_words


def write_stopword_file(path, words) -> None:
    """One stopword per line, the format the pair sampler consumes."""
    with open(path, "w", encoding="utf-8") as fh:
        for w in words:
            fh.write(w + "\n")


def read_stopword_file(path) -> set[str]:
    with open(path, encoding="utf-8") as fh:
        return {line.strip() for line in fh if line.strip()}

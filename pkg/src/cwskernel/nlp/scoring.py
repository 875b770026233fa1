"""Extractive summarization and keyword extraction by lemma frequency."""

from __future__ import annotations

from collections import Counter
from typing import Sequence

from ..envelope import Token
from .resources import StopList


def _content_lemmas(tokens: Sequence[Token], stoplist: StopList) -> list[str]:
    return [t.key for t in tokens if t.key.lower() not in stoplist.words]


def sentence_scores(token_lists: Sequence[Sequence[Token]], stoplist: StopList) -> list[float]:
    """Mean document frequency of each sentence's non-stop lemmas (0 for none)."""
    per_sentence = [_content_lemmas(tokens, stoplist) for tokens in token_lists]
    freq = Counter(lemma for lemmas in per_sentence for lemma in lemmas)
    # Integer numerators keep equal ratios bit-identical, so ties stay ties.
    return [sum(freq[l] for l in lemmas) / len(lemmas) if lemmas else 0.0 for lemmas in per_sentence]


def summarize(
    sentences: Sequence[str],
    token_lists: Sequence[Sequence[Token]],
    stoplist: StopList,
    k: int,
) -> list[str]:
    if k < 0:
        raise ValueError("k must be non-negative")
    if len(sentences) != len(token_lists):
        raise ValueError("need one token list per sentence")
    scores = sentence_scores(token_lists, stoplist)
    ranked = sorted(range(len(sentences)), key=lambda i: (-scores[i], i))
    chosen = sorted(ranked[:k])
    return [sentences[i] for i in chosen]


def extract_keywords(tokens: Sequence[Token], stoplist: StopList, n: int) -> list[tuple[str, float]]:
    if n < 0:
        raise ValueError("n must be non-negative")
    counts = Counter(_content_lemmas(tokens, stoplist))
    total = sum(counts.values())
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:n]
    return [(term, count / total) for term, count in ranked]

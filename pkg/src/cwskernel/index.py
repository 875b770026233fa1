"""Inverted index over lemmatized envelopes with smoothed tf-idf ranking."""

from __future__ import annotations

import bisect
import math
import threading
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable

from .envelope import DocumentEnvelope
from .errors import EmptyQuery, MissingLemmas
from .nlp.resources import EMPTY_STOPLIST, StopList

Analyzer = Callable[[str], list[str]]


@dataclass(frozen=True)
class IndexReport:
    doc_id: str
    indexed: int

    def to_dict(self) -> dict:
        return {"doc_id": self.doc_id, "indexed": self.indexed}


def idf(doc_count: int, df: int) -> float:
    return math.log((1 + doc_count) / (1 + df)) + 1.0


class InvertedIndex:
    """lemma -> [(doc id, tf)] sorted by doc id, plus per-document lengths.

    Searches and writes share one lock, so a search sees either the state
    before a write or after it, never a half-merged document.
    """

    def __init__(self) -> None:
        self._postings: dict[str, list[tuple[str, int]]] = {}
        self._doc_terms: dict[str, Counter[str]] = {}
        self._lock = threading.RLock()

    @property
    def doc_count(self) -> int:
        return len(self._doc_terms)

    @property
    def doc_lengths(self) -> dict[str, int]:
        with self._lock:
            return {d: sum(c.values()) for d, c in self._doc_terms.items()}

    def postings(self, lemma: str) -> list[tuple[str, int]]:
        return list(self._postings.get(lemma, ()))

    def lemmas(self) -> list[str]:
        return sorted(self._postings)

    def add(self, doc_id: str, lemmas: Iterable[str], stoplist: StopList = EMPTY_STOPLIST) -> IndexReport:
        counts = Counter(l for l in lemmas if l.lower() not in stoplist.words)
        with self._lock:
            old = self._doc_terms.get(doc_id, Counter())
            touched = set(old) | set(counts)
            updated: dict[str, list[tuple[str, int]]] = {}
            for lemma in touched:
                plist = [p for p in self._postings.get(lemma, ()) if p[0] != doc_id]
                if counts[lemma]:
                    bisect.insort(plist, (doc_id, counts[lemma]))
                updated[lemma] = plist
            for lemma, plist in updated.items():
                if plist:
                    self._postings[lemma] = plist
                else:
                    self._postings.pop(lemma, None)
            self._doc_terms[doc_id] = counts
        return IndexReport(doc_id, sum(counts.values()))

    def remove(self, doc_id: str) -> None:
        with self._lock:
            if doc_id not in self._doc_terms:
                return
            self.add(doc_id, ())
            del self._doc_terms[doc_id]

    def index_document(self, envelope: DocumentEnvelope, stoplist: StopList = EMPTY_STOPLIST) -> IndexReport:
        if envelope.tokens is None or any(t.lemma is None for t in envelope.tokens):
            raise MissingLemmas(f"envelope {envelope.id!r} has no lemmatized tokens")
        return self.add(envelope.id, (t.lemma for t in envelope.tokens), stoplist)

    def search(self, query_lemmas: Iterable[str], limit: int = 10) -> list[tuple[str, float]]:
        terms = sorted(set(query_lemmas))
        if not terms:
            raise EmptyQuery("no query lemma survived filtering")
        with self._lock:
            n = self.doc_count
            parts: dict[str, list[float]] = {}
            for lemma in terms:
                plist = self._postings.get(lemma, ())
                weight = idf(n, len(plist))
                for doc_id, tf in plist:
                    parts.setdefault(doc_id, []).append(tf * weight)
        scored = [(doc_id, math.fsum(p)) for doc_id, p in parts.items()]
        scored.sort(key=lambda s: (-s[1], s[0]))
        return scored[: max(limit, 0)]

    # persistence as an ordinary attribute-value document

    def to_dict(self) -> dict:
        with self._lock:
            return {"documents": {d: dict(sorted(c.items())) for d, c in sorted(self._doc_terms.items())}}

    @classmethod
    def from_dict(cls, doc: dict) -> InvertedIndex:
        index = cls()
        for doc_id, counts in doc.get("documents", {}).items():
            index.add(doc_id, [lemma for lemma, tf in counts.items() for _ in range(int(tf))])
        return index


class SearchEngine:
    """Index plus the analyzer that turns query text into non-stop lemmas."""

    def __init__(self, index: InvertedIndex, analyzer: Analyzer) -> None:
        self.index = index
        self.analyzer = analyzer

    def search(self, query: str, limit: int = 10) -> list[tuple[str, float]]:
        return self.index.search(self.analyzer(query), limit)

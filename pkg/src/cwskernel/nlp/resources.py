"""Language resources: stop lists, lexicons and term lexicons, loaded from plain files."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from ..envelope import POS_TAGS
from ..errors import MalformedResource


@dataclass(frozen=True)
class StopList:
    words: frozenset[str]

    def __post_init__(self) -> None:
        if any(not w for w in self.words):
            raise MalformedResource("stop list entries must be non-empty")

    @classmethod
    def of(cls, words: Iterable[str]) -> StopList:
        return cls(frozenset(w.lower() for w in words))

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.words

    def __len__(self) -> int:
        return len(self.words)


EMPTY_STOPLIST = StopList(frozenset())


@dataclass(frozen=True)
class Lexicon:
    """Lowercase surface form -> (lemma, POS tag)."""

    entries: dict[str, tuple[str, str]]

    def __post_init__(self) -> None:
        for surface, (lemma, pos) in self.entries.items():
            if not lemma:
                raise MalformedResource(f"empty lemma for {surface!r}")
            if pos not in POS_TAGS:
                raise MalformedResource(f"unknown POS tag {pos!r} for {surface!r}")

    def lookup(self, surface: str) -> tuple[str, str] | None:
        return self.entries.get(surface.lower())

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class TermLexicon:
    terms: frozenset[tuple[str, ...]]

    def __post_init__(self) -> None:
        if any(len(t) < 2 for t in self.terms):
            raise MalformedResource("term lexicon holds multiword terms only")

    @classmethod
    def of(cls, terms: Iterable[str]) -> TermLexicon:
        return cls(frozenset(tuple(t.split()) for t in terms))

    @property
    def max_len(self) -> int:
        return max((len(t) for t in self.terms), default=0)


EMPTY_TERMS = TermLexicon(frozenset())


def _lines(path: str | Path) -> Iterable[tuple[int, str]]:
    with open(path, encoding="utf-8") as fh:
        for number, line in enumerate(fh, 1):
            yield number, line.rstrip("\r\n")


def load_stoplist(path: str | Path) -> StopList:
    words = []
    for _, line in _lines(path):
        word = line.strip()
        if word and not word.startswith("#"):
            words.append(word)
    return StopList.of(words)


def load_lexicon(path: str | Path) -> Lexicon:
    entries: dict[str, tuple[str, str]] = {}
    for number, line in _lines(path):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise MalformedResource(f"{path}:{number}: expected surface<TAB>lemma<TAB>pos")
        surface, lemma, pos = parts
        entries[surface.lower()] = (lemma, pos)
    return Lexicon(entries)


def load_term_lexicon(path: str | Path) -> TermLexicon:
    terms = []
    for number, line in _lines(path):
        term = line.strip()
        if not term:
            continue
        if len(term.split()) < 2:
            raise MalformedResource(f"{path}:{number}: single-word term {term!r}")
        terms.append(term)
    return TermLexicon.of(terms)


def load_abbreviations(path: str | Path) -> frozenset[str]:
    return frozenset(line.strip() for _, line in _lines(path) if line.strip() and not line.startswith("#"))

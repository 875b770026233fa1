"""Segmentation, lemmatization, term segmentation and stop-word filtering."""

from __future__ import annotations

import re
from typing import Iterable, Sequence, TypeVar

from ..envelope import Token
from ..errors import LexiconMissing, StopListMissing
from .resources import Lexicon, StopList, TermLexicon

_ALNUM = r"[^\W_]"
_LETTER = r"[^\W\d_]"
# A run of letters/digits; an apostrophe or hyphen may join two letters.
TOKEN_RE = re.compile(rf"{_ALNUM}+(?:(?<={_LETTER})['’\-](?={_LETTER}){_ALNUM}+)*")

_CLOSERS = "\"'»”’)]}"
TERMINATOR_RE = re.compile(rf"[.!?]+[{re.escape(_CLOSERS)}]*")
_WORD_BEFORE_RE = re.compile(rf"({_ALNUM}+)$")


_NEXT_RE = re.compile(r"\s*\Z|\s+(\S)")


def _is_boundary(text: str, end: int) -> bool:
    """True at end of text, or before whitespace followed by an uppercase letter or digit."""
    m = _NEXT_RE.match(text, end)
    if m is None:
        return False
    nxt = m.group(1)
    return nxt is None or nxt.isupper() or nxt.isdigit()


def split_sentences(text: str, abbreviations: Iterable[str] = ()) -> list[str]:
    abbrevs = {a.lower().rstrip(".") for a in abbreviations}
    sentences = []
    start = 0
    for match in TERMINATOR_RE.finditer(text):
        if not _is_boundary(text, match.end()):
            continue
        if match.group().rstrip(_CLOSERS) == ".":
            before = _WORD_BEFORE_RE.search(text[max(0, match.start() - 64) : match.start()])
            if before and before.group(1).lower() in abbrevs:
                continue
        segment = text[start : match.end()].strip()
        if segment:
            sentences.append(segment)
        start = match.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def tokenize(text: str) -> list[Token]:
    return [Token(m.group()) for m in TOKEN_RE.finditer(text)]


def lemmatize(tokens: Sequence[Token], lexicon: Lexicon | None) -> list[Token]:
    if lexicon is None:
        raise LexiconMissing("no lexicon configured")
    out = []
    for token in tokens:
        hit = lexicon.lookup(token.surface)
        lemma, pos = hit if hit is not None else (token.surface.lower(), "OTHER")
        out.append(Token(token.surface, lemma, pos))
    return out


def segment_terms(tokens: Sequence[Token], terms: TermLexicon) -> list[str]:
    """Greedy leftmost-longest match of lemma sequences against the term lexicon."""
    lemmas = [t.key for t in tokens]
    longest = terms.max_len
    out = []
    i = 0
    while i < len(lemmas):
        for length in range(min(longest, len(lemmas) - i), 1, -1):
            if tuple(lemmas[i : i + length]) in terms.terms:
                out.append(" ".join(lemmas[i : i + length]))
                i += length
                break
        else:
            out.append(lemmas[i])
            i += 1
    return out


T = TypeVar("T", Token, str)


def filter_stopwords(items: Sequence[T], stoplist: StopList | None) -> list[T]:
    if stoplist is None:
        raise StopListMissing("no stop list configured")
    out = []
    for item in items:
        key = item.key if isinstance(item, Token) else item.lower()
        if key.lower() not in stoplist.words:
            out.append(item)
    return out

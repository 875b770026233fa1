"""Character-trigram language profiles and cosine-similarity identification."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from ..errors import CorpusTooSmall, EmptyText, MalformedResource, NoProfiles

PROFILE_SIZE = 500
MIN_CORPUS_LETTERS = 500
_LETTER_RUN_RE = re.compile(r"[^\W\d_]+")


@dataclass(frozen=True)
class LanguageProfile:
    lang: str
    ngrams: dict[str, float]

    def __post_init__(self) -> None:
        if len(self.lang) != 2:
            raise MalformedResource(f"language code must have 2 letters, got {self.lang!r}")
        if any(f <= 0 for f in self.ngrams.values()):
            raise MalformedResource("profile frequencies must be positive")

    def to_dict(self) -> dict:
        return {"lang": self.lang, "ngrams": self.ngrams}

    @classmethod
    def from_dict(cls, doc: dict) -> LanguageProfile:
        try:
            return cls(doc["lang"], {str(k): float(v) for k, v in doc["ngrams"].items()})
        except (KeyError, TypeError, AttributeError, ValueError) as exc:
            raise MalformedResource(f"bad language profile: {exc}") from None


def trigram_counts(text: str) -> Counter[str]:
    counts: Counter[str] = Counter()
    for run in _LETTER_RUN_RE.findall(text.lower()):
        padded = f"_{run}_"
        counts.update(padded[i : i + 3] for i in range(len(padded) - 2))
    return counts


def trigram_frequencies(text: str) -> dict[str, float]:
    counts = trigram_counts(text)
    total = sum(counts.values())
    return {g: c / total for g, c in counts.items()} if total else {}


def train_profile(corpus: str, lang: str, min_letters: int = MIN_CORPUS_LETTERS, size: int = PROFILE_SIZE) -> LanguageProfile:
    letters = sum(len(run) for run in _LETTER_RUN_RE.findall(corpus))
    if letters == 0 or letters < min_letters:
        raise CorpusTooSmall(f"corpus has {letters} letters, need {min_letters}")
    freqs = trigram_frequencies(corpus)
    top = sorted(freqs.items(), key=lambda kv: (-kv[1], kv[0]))[:size]
    return LanguageProfile(lang, dict(top))


def _cosine(a: dict[str, float], b: dict[str, float]) -> float:
    if len(a) > len(b):
        a, b = b, a
    dot = math.fsum(v * b[g] for g, v in a.items() if g in b)
    na = math.sqrt(math.fsum(v * v for v in a.values()))
    nb = math.sqrt(math.fsum(v * v for v in b.values()))
    return dot / (na * nb) if na and nb else 0.0


def detect_language(text: str, profiles: Iterable[LanguageProfile]) -> tuple[str, float]:
    """Best-matching profile and its margin over the runner-up (1.0 when only one profile)."""
    profiles = list(profiles)
    if not profiles:
        raise NoProfiles("no language profiles loaded")
    freqs = trigram_frequencies(text)
    if not freqs:
        raise EmptyText("text contains no letters")
    scored = sorted(((_cosine(freqs, p.ngrams), p.lang) for p in profiles), key=lambda s: (-s[0], s[1]))
    if len(scored) == 1:
        return scored[0][1], 1.0
    return scored[0][1], scored[0][0] - scored[1][0]


def load_profile(path: str | Path) -> LanguageProfile:
    with open(path, encoding="utf-8") as fh:
        return LanguageProfile.from_dict(json.load(fh))


def save_profile(profile: LanguageProfile, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(profile.to_dict(), fh, ensure_ascii=False, sort_keys=True, indent=0)
        fh.write("\n")

"""Queries over a pre-built word/term vector model (exact cosine, linear scan)."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInput, MalformedModel, UnknownTerm, ZeroMean, ZeroVector

ZERO_MEAN_EPS = 1e-12
# Cosines this close count as equal, so the lexicographic tie rule is not
# undone by rounding (parallel vectors of different length, say).
TIE_EPS = 1e-12


def term_key(term: str) -> str:
    """Multiword terms are stored with underscores in place of spaces."""
    return "_".join(term.split())


def _rank(scored: Iterable[tuple[str, float]]) -> list[tuple[str, float]]:
    """Descending by similarity, near-equal similarities ordered by term."""
    ordered = sorted(scored, key=lambda ts: (-ts[1], ts[0]))
    out: list[tuple[str, float]] = []
    group: list[tuple[str, float]] = []
    for item in ordered:
        if group and group[0][1] - item[1] > TIE_EPS:
            out.extend(sorted(group))
            group = []
        group.append(item)
    out.extend(sorted(group))
    return out


def _cos(a: np.ndarray, b: np.ndarray) -> float:
    value = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
    return min(1.0, max(-1.0, value))


@dataclass(frozen=True)
class VectorModel:
    terms: tuple[str, ...]
    matrix: np.ndarray  # shape (len(terms), dimension), float64

    def __post_init__(self) -> None:
        self.matrix.setflags(write=False)
        object.__setattr__(self, "_rows", {t: i for i, t in enumerate(self.terms)})
        norms = np.linalg.norm(self.matrix, axis=1)
        object.__setattr__(self, "_unit", self.matrix / norms[:, None] if len(self.terms) else self.matrix)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term_key(term) in self._rows

    def vector(self, term: str) -> np.ndarray:
        try:
            return self.matrix[self._rows[term_key(term)]]
        except KeyError:
            raise UnknownTerm(term) from None

    @classmethod
    def from_dict(cls, entries: dict[str, Sequence[float]]) -> VectorModel:
        terms = tuple(entries)
        if not terms:
            raise MalformedModel(1, "model has no entries")
        matrix = np.array([entries[t] for t in terms], dtype=np.float64)
        if matrix.ndim != 2:
            raise MalformedModel(1, "vectors differ in length")
        for t, row in zip(terms, matrix):
            if not np.any(row):
                raise ZeroVector(t)
        return cls(tuple(term_key(t) for t in terms), matrix)

    def scaled(self, factor: float) -> VectorModel:
        return VectorModel(self.terms, self.matrix * factor)

    # queries

    def similarity(self, t1: str, t2: str) -> float:
        return _cos(self.vector(t1), self.vector(t2))

    def nearest(self, term: str, k: int) -> list[tuple[str, float]]:
        if k < 0:
            raise ValueError("k must be non-negative")
        row = self._rows.get(term_key(term))
        if row is None:
            raise UnknownTerm(term)
        if k == 0:
            return []
        sims = np.clip(self._unit @ self._unit[row], -1.0, 1.0)
        return _rank((self.terms[i], float(sims[i])) for i in range(len(self.terms)) if i != row)[:k]

    def _mean(self, terms: Iterable[str]) -> np.ndarray:
        # Sorted so the floating-point sum does not depend on input order.
        unique = sorted({term_key(t) for t in terms})
        if not unique:
            raise EmptyInput("term list is empty")
        return np.mean([self.vector(t) for t in unique], axis=0)

    def cluster_center(self, terms: Sequence[str]) -> tuple[str, float]:
        mean = self._mean(terms)
        if np.linalg.norm(mean) < ZERO_MEAN_EPS:
            raise ZeroMean("cluster mean vector is zero")
        return _rank((t, _cos(self.vector(t), mean)) for t in {term_key(t) for t in terms})[0]

    def set_similarity(self, a: Sequence[str], b: Sequence[str]) -> float:
        ma, mb = self._mean(a), self._mean(b)
        if np.linalg.norm(ma) < ZERO_MEAN_EPS or np.linalg.norm(mb) < ZERO_MEAN_EPS:
            raise ZeroMean("a term set has a zero mean vector")
        return _cos(ma, mb)


def parse_model(lines: Iterable[str]) -> VectorModel:
    it = iter(lines)
    header = next(it, None)
    if header is None:
        raise MalformedModel(1, "missing header")
    parts = header.split()
    try:
        count, dim = int(parts[0]), int(parts[1])
        if len(parts) != 2 or count < 0 or dim < 1:
            raise ValueError
    except (ValueError, IndexError):
        raise MalformedModel(1, "header must be 'N D'") from None

    terms: list[str] = []
    seen: set[str] = set()
    matrix = np.empty((count, dim), dtype=np.float64)
    for number, line in enumerate(it, 2):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != dim + 1:
            raise MalformedModel(number, f"expected {dim} components, got {len(fields) - 1}")
        if len(terms) == count:
            raise MalformedModel(number, f"more than {count} entries")
        term = fields[0]
        if term in seen:
            raise MalformedModel(number, f"duplicate term {term!r}")
        try:
            row = np.array([float(x) for x in fields[1:]], dtype=np.float64)
        except ValueError:
            raise MalformedModel(number, "non-numeric component") from None
        if not np.all(np.isfinite(row)):
            raise MalformedModel(number, "non-finite component")
        if not np.any(row):
            raise ZeroVector(term)
        matrix[len(terms)] = row
        terms.append(term)
        seen.add(term)
    if len(terms) != count:
        raise MalformedModel(number if terms else 1, f"header promised {count} entries, found {len(terms)}")
    return VectorModel(tuple(terms), matrix)


def load_model(path: str | Path) -> VectorModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh)

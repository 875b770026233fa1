"""Request/response models for the HTTP surface."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, Field

from ..composition import CompositionDef, Stage
from ..registry import ServiceDescriptor


class ServiceIn(BaseModel):
    name: str
    kind: Literal["builtin", "remote"] = "builtin"
    replicas: list[str] = []
    requires: list[str] = []
    provides: list[str] = []
    cacheable: bool = False
    version: str = "1"

    def to_descriptor(self) -> ServiceDescriptor:
        return ServiceDescriptor(
            self.name,
            self.kind,
            tuple(self.replicas),
            frozenset(self.requires),
            frozenset(self.provides),
            self.cacheable,
            self.version,
        )


class ReplicaHealthOut(BaseModel):
    replica: str
    state: Literal["healthy", "unhealthy", "unknown"]
    checked_at: float | None = None


class HealthReport(BaseModel):
    service: str
    replicas: list[ReplicaHealthOut]


class StageIn(BaseModel):
    service: str
    params: dict[str, Any] = {}


class CompositionIn(BaseModel):
    name: str = Field(min_length=1)
    stages: list[StageIn | str] = []
    initial_fields: list[str] = ["text"]

    def to_def(self) -> CompositionDef:
        stages = tuple(Stage(s) if isinstance(s, str) else Stage(s.service, dict(s.params)) for s in self.stages)
        return CompositionDef(self.name, stages, frozenset(self.initial_fields))


class NameOut(BaseModel):
    name: str


class IndexReportOut(BaseModel):
    doc_id: str
    indexed: int


class SearchHit(BaseModel):
    doc_id: str
    score: float


class SearchOut(BaseModel):
    query: str
    hits: list[SearchHit]


class SimilarityOut(BaseModel):
    t1: str
    t2: str
    similarity: float


class Neighbour(BaseModel):
    term: str
    similarity: float


class NearestOut(BaseModel):
    term: str
    neighbours: list[Neighbour]


class TermsIn(BaseModel):
    terms: list[str]


class CenterOut(BaseModel):
    term: str
    similarity: float


class SetSimIn(BaseModel):
    a: list[str]
    b: list[str]


class SetSimOut(BaseModel):
    similarity: float


class StoredDocumentOut(BaseModel):
    id: str
    body: Any
    version: int
    updated_at: int
    origin: str
    deleted: bool = False


class MergeReportOut(BaseModel):
    applied: int
    skipped: int
    conflicts: int

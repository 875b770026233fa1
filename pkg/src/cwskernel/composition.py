"""Named compositions over registered services, and execution plans for them."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Any

from .errors import DuplicateName, IncompatibleStages, UnknownComposition, UnknownService
from .registry import ServiceDescriptor, ServiceRegistry


@dataclass(frozen=True)
class Stage:
    service: str
    params: dict[str, Any] = field(default_factory=dict, hash=False, compare=True)

    def to_dict(self) -> dict:
        return {"service": self.service, "params": self.params}


@dataclass(frozen=True)
class CompositionDef:
    name: str
    stages: tuple[Stage, ...] = ()
    initial_fields: frozenset[str] = frozenset({"text"})

    def __post_init__(self) -> None:
        stages = tuple(s if isinstance(s, Stage) else Stage(s) for s in self.stages)
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "initial_fields", frozenset(self.initial_fields))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "stages": [s.to_dict() for s in self.stages],
            "initial_fields": sorted(self.initial_fields),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> CompositionDef:
        stages = []
        for item in doc.get("stages", []):
            if isinstance(item, str):
                stages.append(Stage(item))
            else:
                stages.append(Stage(item["service"], dict(item.get("params") or {})))
        return cls(doc["name"], tuple(stages), frozenset(doc.get("initial_fields", ["text"])))


@dataclass(frozen=True)
class PlannedStage:
    service: str
    mode: str  # "builtin" or "remote"; remote stages pick a replica at call time
    params: dict[str, Any]
    version: str

    def to_dict(self) -> dict:
        return {"service": self.service, "mode": self.mode, "params": self.params, "version": self.version}


@dataclass(frozen=True)
class ExecutionPlan:
    composition: str
    stages: tuple[PlannedStage, ...]
    initial_fields: frozenset[str]
    created_at: float

    def to_dict(self) -> dict:
        return {
            "composition": self.composition,
            "stages": [s.to_dict() for s in self.stages],
            "initial_fields": sorted(self.initial_fields),
            "created_at": self.created_at,
        }


def check_composition(definition: CompositionDef, services: dict[str, ServiceDescriptor]) -> None:
    """Raise unless every stage resolves and its required fields are available when it runs."""
    for stage in definition.stages:
        if stage.service not in services:
            raise UnknownService(stage.service)
    available = set(definition.initial_fields)
    for i, stage in enumerate(definition.stages):
        descriptor = services[stage.service]
        missing = sorted(descriptor.requires - available)
        if missing:
            raise IncompatibleStages(i, stage.service, missing)
        available |= descriptor.provides


# Preset stage lists cover only the services implemented here. Document
# parsing, title detection, syntactic parsing and vector training are not
# part of this kernel.
PRESETS: dict[str, tuple[str, ...]] = {
    "ontoprep": (
        "detect_language",
        "split_sentences",
        "tokenize",
        "lemmatize",
        "segment_terms",
        "stopfilter",
        "index_document",
    ),
    "clp": ("split_sentences", "tokenize", "lemmatize", "stopfilter"),
    "summ": ("detect_language", "split_sentences", "summarize"),
    "keywords": ("tokenize", "stopfilter", "extract_keywords"),
}


@dataclass
class CompositionStore:
    registry: ServiceRegistry
    _defs: dict[str, CompositionDef] = field(default_factory=dict)
    _lock: threading.RLock = field(default_factory=threading.RLock)

    def __post_init__(self) -> None:
        self.registry.add_guard(self.users_of)

    def users_of(self, service: str) -> list[str]:
        return [name for name, d in self._defs.items() if any(s.service == service for s in d.stages)]

    def define_composition(self, definition: CompositionDef, replace: bool = True) -> str:
        if not definition.name:
            raise ValueError("composition name must be non-empty")
        # Validation and storage happen under the registry lock too, so a
        # concurrent deregistration cannot slip between check and store.
        with self.registry._lock, self._lock:
            check_composition(definition, self.registry.snapshot())
            existing = self._defs.get(definition.name)
            if existing is not None and not replace and existing != definition:
                raise DuplicateName(f"composition {definition.name!r} already defined", name=definition.name)
            self._defs[definition.name] = definition
        return definition.name

    def get(self, name: str) -> CompositionDef:
        try:
            return self._defs[name]
        except KeyError:
            raise UnknownComposition(name) from None

    def names(self) -> list[str]:
        with self._lock:
            return sorted(self._defs)

    def plan(self, name: str) -> ExecutionPlan:
        definition = self.get(name)
        stages = []
        for stage in definition.stages:
            descriptor = self.registry.resolve(stage.service)
            stages.append(PlannedStage(stage.service, descriptor.kind, dict(stage.params), descriptor.version))
        return ExecutionPlan(definition.name, tuple(stages), definition.initial_fields, time.time())

    def load_presets(self) -> list[str]:
        defs = [CompositionDef(name, tuple(Stage(s) for s in stages), frozenset({"text"})) for name, stages in PRESETS.items()]
        with self.registry._lock, self._lock:
            services = self.registry.snapshot()
            for definition in defs:
                check_composition(definition, services)
            for definition in defs:
                self._defs[definition.name] = definition
        return sorted(PRESETS)

"""Wires registry, compositions, coordinator, builtins, index, store and vectors together."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .composition import PRESETS, CompositionStore
from .coordinator import DEFAULT_TTL, Coordinator
from .envelope import DocumentEnvelope
from .errors import CWSError, NoModel, NotFound
from .index import IndexReport, InvertedIndex, SearchEngine
from .nlp import langid
from .nlp.resources import EMPTY_STOPLIST
from .nlp.services import DATA_DIR, Resources, build_builtins
from .nlp.text import lemmatize, tokenize
from .registry import ServiceRegistry
from .store import DocumentStore, open_store
from .vectors import VectorModel, load_model

log = logging.getLogger(__name__)

INDEX_DOC_ID = "_index"


@dataclass
class KernelConfig:
    """Operator configuration, read from an attribute-value (JSON) file.

    ``builtins`` of ``None`` enables every reference service.
    """

    host: str = "127.0.0.1"
    port: int = 8000
    builtins: list[str] | None = None
    resources: str | None = None
    default_lang: str = "en"
    vectors: str | None = None
    store_backend: str = "memory"
    store_path: str | None = None
    node_id: str = "node-1"
    cache_ttl: float = DEFAULT_TTL
    token: str | None = None
    presets: bool = True
    extra: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> KernelConfig:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        base = Path(path).resolve().parent
        known = {k: v for k, v in doc.items() if k in cls.__dataclass_fields__ and k != "extra"}
        config = cls(**known, extra={k: v for k, v in doc.items() if k not in known})
        # Relative resource paths are relative to the config file.
        for attr in ("resources", "vectors", "store_path"):
            value = getattr(config, attr)
            if value is not None and not os.path.isabs(value):
                setattr(config, attr, str(base / value))
        return config

    def with_env(self) -> KernelConfig:
        if "CWS_CACHE_TTL" in os.environ:
            self.cache_ttl = float(os.environ["CWS_CACHE_TTL"])
        if os.environ.get("CWS_TOKEN"):
            self.token = os.environ["CWS_TOKEN"]
        return self


class Kernel:
    def __init__(self, config: KernelConfig | None = None, *, resources: Resources | None = None, store: DocumentStore | None = None) -> None:
        self.config = config or KernelConfig()
        self.resources = resources or Resources.from_dir(self.config.resources or DATA_DIR, self.config.default_lang)
        self.registry = ServiceRegistry()
        self.compositions = CompositionStore(self.registry)
        self.store = store or open_store(self.config.node_id, self.config.store_backend, self.config.store_path)
        self.index = self._load_index()
        self.search_engine = SearchEngine(self.index, self.analyze_query)
        self.vectors: VectorModel | None = load_model(self.config.vectors) if self.config.vectors else None

        builtins = build_builtins(self.resources, lambda env: self.index_envelope(env).indexed)
        self.builtin_descriptors = {name: d for name, (d, _) in builtins.items()}
        self.coordinator = Coordinator(
            self.registry,
            self.compositions,
            {name: h for name, (_, h) in builtins.items()},
            cache_ttl=self.config.cache_ttl,
        )
        enabled = self.config.builtins if self.config.builtins is not None else list(builtins)
        for name in enabled:
            if name not in builtins:
                raise CWSError(f"unknown builtin service {name!r} in configuration")
            self.registry.register_service(self.builtin_descriptors[name])
        if self.config.presets and all(s in self.registry for stages in PRESETS.values() for s in stages):
            self.compositions.load_presets()

    # index plumbing

    def index_envelope(self, envelope: DocumentEnvelope) -> IndexReport:
        stoplist = self.resources.pick(self.resources.stoplists, envelope.language) or EMPTY_STOPLIST
        return self.index.index_document(envelope, stoplist)

    def analyze_query(self, query: str) -> list[str]:
        lang = None
        if len(self.resources.profiles) > 1:
            try:
                lang, _ = langid.detect_language(query, self.resources.profiles)
            except CWSError:
                lang = None
        tokens = tokenize(query)
        lexicon = self.resources.pick(self.resources.lexicons, lang)
        if lexicon is not None:
            tokens = lemmatize(tokens, lexicon)
        stoplist = self.resources.pick(self.resources.stoplists, lang) or EMPTY_STOPLIST
        return [t.key for t in tokens if t.key.lower() not in stoplist.words]

    def _load_index(self) -> InvertedIndex:
        try:
            return InvertedIndex.from_dict(self.store.get_document(INDEX_DOC_ID).body)
        except NotFound:
            return InvertedIndex()

    def persist_index(self) -> None:
        self.store.put_document(INDEX_DOC_ID, self.index.to_dict())

    def model(self) -> VectorModel:
        if self.vectors is None:
            raise NoModel("no vector model configured")
        return self.vectors

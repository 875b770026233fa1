"""The document envelope: the one attribute-value record every service reads and writes.

Wire form is canonical JSON (sorted keys, no insignificant whitespace,
UTF-8), so equal envelopes always encode to identical bytes. Cache keys and
byte-identity checks depend on that.
"""

from __future__ import annotations

import base64
import binascii
import json
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any

from .errors import MalformedEnvelope

POS_TAGS = frozenset({"NOUN", "VERB", "ADJ", "ADV", "PRON", "NUM", "PART", "OTHER"})

# Fields with a fixed place in the schema. Any other field name used in a
# service contract refers to a key of ``attrs``.
PAYLOAD_FIELDS = ("language", "text", "sentences", "tokens", "terms", "summary", "keywords", "encoded")
SCHEMA_FIELDS = ("id", "media_type", *PAYLOAD_FIELDS, "attrs", "provenance")


@dataclass(frozen=True)
class Token:
    surface: str
    lemma: str | None = None
    pos: str | None = None

    def __post_init__(self) -> None:
        if not self.surface:
            raise ValueError("token surface must be non-empty")
        if self.pos is not None and self.pos not in POS_TAGS:
            raise ValueError(f"unknown POS tag {self.pos!r}")

    @property
    def key(self) -> str:
        """Lemma when known, else the lowercased surface."""
        return self.lemma if self.lemma is not None else self.surface.lower()

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"surface": self.surface}
        if self.lemma is not None:
            out["lemma"] = self.lemma
        if self.pos is not None:
            out["pos"] = self.pos
        return out


@dataclass(frozen=True)
class Provenance:
    service: str
    version: str
    timestamp: str

    def to_dict(self) -> dict[str, str]:
        return {"service": self.service, "version": self.version, "timestamp": self.timestamp}


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds").replace("+00:00", "Z")


@dataclass
class DocumentEnvelope:
    id: str = field(default_factory=lambda: uuid.uuid4().hex)
    media_type: str = "text/plain"
    language: str | None = None
    text: str | None = None
    sentences: list[str] | None = None
    tokens: list[Token] | None = None
    terms: list[str] | None = None
    summary: list[str] | None = None
    keywords: list[tuple[str, float]] | None = None
    encoded: bytes | None = None
    attrs: dict[str, Any] = field(default_factory=dict)
    provenance: list[Provenance] = field(default_factory=list)

    def has(self, name: str) -> bool:
        if name in SCHEMA_FIELDS:
            return getattr(self, name) is not None
        return name in self.attrs

    def with_provenance(self, service: str, version: str, timestamp: str | None = None) -> DocumentEnvelope:
        record = Provenance(service, version, timestamp or utc_now())
        return replace(self, provenance=[*self.provenance, record])

    def payload(self) -> dict[str, Any]:
        """Attribute-value form without provenance; what services actually consume."""
        doc = self.to_dict()
        doc.pop("provenance")
        return doc

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "id": self.id,
            "media_type": self.media_type,
            "attrs": self.attrs,
            "provenance": [p.to_dict() for p in self.provenance],
        }
        for name in ("language", "text", "sentences", "terms", "summary"):
            value = getattr(self, name)
            if value is not None:
                doc[name] = value if isinstance(value, str) else list(value)
        if self.tokens is not None:
            doc["tokens"] = [t.to_dict() for t in self.tokens]
        if self.keywords is not None:
            doc["keywords"] = [[term, score] for term, score in self.keywords]
        if self.encoded is not None:
            doc["encoded"] = base64.b64encode(self.encoded).decode("ascii")
        return doc

    @classmethod
    def from_dict(cls, doc: Any) -> DocumentEnvelope:
        if not isinstance(doc, dict):
            raise MalformedEnvelope("envelope must be an attribute-value object")
        try:
            return _from_dict(cls, doc)
        except (TypeError, ValueError, binascii.Error) as exc:
            raise MalformedEnvelope(str(exc)) from None


def _str(doc: dict, key: str, optional: bool = True) -> str | None:
    value = doc.get(key)
    if value is None and optional:
        return None
    if not isinstance(value, str):
        raise TypeError(f"{key} must be a string")
    return value


def _str_list(doc: dict, key: str) -> list[str] | None:
    value = doc.get(key)
    if value is None:
        return None
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise TypeError(f"{key} must be an array of strings")
    return list(value)


def _from_dict(cls: type[DocumentEnvelope], doc: dict) -> DocumentEnvelope:
    attrs = doc.get("attrs", {})
    if not isinstance(attrs, dict):
        raise TypeError("attrs must be an object")
    attrs = dict(attrs)
    for key, value in doc.items():
        if key not in SCHEMA_FIELDS:
            attrs.setdefault(key, value)

    tokens = None
    if doc.get("tokens") is not None:
        raw = doc["tokens"]
        if not isinstance(raw, list):
            raise TypeError("tokens must be an array")
        tokens = []
        for item in raw:
            if not isinstance(item, dict) or not isinstance(item.get("surface"), str):
                raise TypeError("token must be an object with a string surface")
            tokens.append(Token(item["surface"], _str(item, "lemma"), _str(item, "pos")))

    keywords = None
    if doc.get("keywords") is not None:
        raw = doc["keywords"]
        if not isinstance(raw, list):
            raise TypeError("keywords must be an array")
        keywords = []
        for item in raw:
            if (
                not isinstance(item, list)
                or len(item) != 2
                or not isinstance(item[0], str)
                or isinstance(item[1], bool)
                or not isinstance(item[1], (int, float))
            ):
                raise TypeError("keyword must be a [term, score] pair")
            keywords.append((item[0], float(item[1])))

    provenance = []
    raw_prov = doc.get("provenance", [])
    if not isinstance(raw_prov, list):
        raise TypeError("provenance must be an array")
    for item in raw_prov:
        if not isinstance(item, dict):
            raise TypeError("provenance record must be an object")
        provenance.append(Provenance(_str(item, "service", False), _str(item, "version", False), _str(item, "timestamp", False)))

    encoded = None
    if doc.get("encoded") is not None:
        encoded = base64.b64decode(_str(doc, "encoded"), validate=True)

    language = _str(doc, "language")
    if language is not None and len(language) != 2:
        raise ValueError("language must be a 2-letter code")

    kwargs: dict[str, Any] = dict(
        media_type=_str(doc, "media_type") or "text/plain",
        language=language,
        text=_str(doc, "text"),
        sentences=_str_list(doc, "sentences"),
        tokens=tokens,
        terms=_str_list(doc, "terms"),
        summary=_str_list(doc, "summary"),
        keywords=keywords,
        encoded=encoded,
        attrs=attrs,
        provenance=provenance,
    )
    if doc.get("id") is not None:
        kwargs["id"] = _str(doc, "id")
    return cls(**kwargs)


def canonical_json(value: Any) -> bytes:
    """Sorted keys, compact separators, UTF-8. NaN/inf are rejected."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False).encode("utf-8")


def encode_envelope(envelope: DocumentEnvelope) -> bytes:
    return canonical_json(envelope.to_dict())


def decode_envelope(data: bytes | str) -> DocumentEnvelope:
    return DocumentEnvelope.from_dict(parse_document(data))


def parse_document(data: bytes | str) -> Any:
    """Parse a UTF-8 attribute-value document, reporting failures by byte offset."""
    if isinstance(data, (bytes, bytearray)):
        try:
            text = bytes(data).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedEnvelope("invalid UTF-8", exc.start) from None
    else:
        text = data
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise MalformedEnvelope(exc.msg, offset) from None


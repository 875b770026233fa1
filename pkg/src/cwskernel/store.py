"""Document repository behind a small storage interface, with snapshot sync.

Replicas converge by exchanging snapshots and merging them last-writer-wins
on ``(updated_at, origin)``. Deletes are kept as tombstones so they
replicate like any other write. ``version`` is a per-node counter and is not
part of the replicated state.
"""

from __future__ import annotations

import logging
import os
import struct
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterator, Protocol

from .envelope import canonical_json, parse_document
from .errors import CWSError, InvalidId, MalformedBundle, NotFound

log = logging.getLogger(__name__)


def now_us() -> int:
    return time.time_ns() // 1000


@dataclass(frozen=True)
class StoredDocument:
    id: str
    body: Any
    version: int
    updated_at: int  # microseconds since the epoch
    origin: str
    deleted: bool = False

    @property
    def lww_key(self) -> tuple[int, str]:
        return (self.updated_at, self.origin)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "body": self.body,
            "version": self.version,
            "updated_at": self.updated_at,
            "origin": self.origin,
            "deleted": self.deleted,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> StoredDocument:
        return cls(
            id=doc["id"],
            body=doc.get("body"),
            version=int(doc["version"]),
            updated_at=int(doc["updated_at"]),
            origin=doc["origin"],
            deleted=bool(doc.get("deleted", False)),
        )


class Backend(Protocol):
    def put(self, doc: StoredDocument) -> None: ...
    def get(self, doc_id: str) -> StoredDocument | None: ...
    def delete(self, doc_id: str) -> None: ...
    def scan(self) -> Iterator[StoredDocument]: ...


class MemoryBackend:
    def __init__(self) -> None:
        self._docs: dict[str, StoredDocument] = {}

    def put(self, doc: StoredDocument) -> None:
        self._docs[doc.id] = doc

    def get(self, doc_id: str) -> StoredDocument | None:
        return self._docs.get(doc_id)

    def delete(self, doc_id: str) -> None:
        self._docs.pop(doc_id, None)

    def scan(self) -> Iterator[StoredDocument]:
        return iter(sorted(self._docs.values(), key=lambda d: d.id))


_LENGTH = struct.Struct(">I")


class JournalBackend(MemoryBackend):
    """Append-only journal of length-prefixed canonical records, replayed on open.

    Each record is a 4-byte big-endian length followed by the canonical
    encoding of ``{"op": "put"|"delete", ...}``. The journal is rewritten
    with only live records once it holds more than ``compact_ratio`` times
    as many records as live documents (and at least ``compact_min``).
    """

    def __init__(self, path: str | Path, compact_ratio: float = 2.0, compact_min: int = 1000) -> None:
        super().__init__()
        self.path = Path(path)
        self.compact_ratio = compact_ratio
        self.compact_min = compact_min
        self._records = 0
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.path.exists():
            self._replay()
        self._fh = open(self.path, "ab")

    def _replay(self) -> None:
        data = self.path.read_bytes()
        pos = 0
        while pos + _LENGTH.size <= len(data):
            (size,) = _LENGTH.unpack_from(data, pos)
            end = pos + _LENGTH.size + size
            if end > len(data):
                break
            record = parse_document(data[pos + _LENGTH.size : end])
            if record.pop("op") == "delete":
                super().delete(record["id"])
            else:
                super().put(StoredDocument.from_dict(record))
            self._records += 1
            pos = end
        if pos != len(data):
            log.warning("%s: dropping %d bytes of incomplete trailing record", self.path, len(data) - pos)
            with open(self.path, "r+b") as fh:
                fh.truncate(pos)

    def _append(self, record: dict[str, Any]) -> None:
        payload = canonical_json(record)
        self._fh.write(_LENGTH.pack(len(payload)) + payload)
        self._fh.flush()
        self._records += 1
        if self._records >= self.compact_min and self._records > self.compact_ratio * max(len(self._docs), 1):
            self.compact()

    def put(self, doc: StoredDocument) -> None:
        self._append({"op": "put", **doc.to_dict()})
        super().put(doc)

    def delete(self, doc_id: str) -> None:
        self._append({"op": "delete", "id": doc_id})
        super().delete(doc_id)

    def compact(self) -> None:
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        with open(tmp, "wb") as out:
            for doc in self.scan():
                payload = canonical_json({"op": "put", **doc.to_dict()})
                out.write(_LENGTH.pack(len(payload)) + payload)
        self._fh.close()
        os.replace(tmp, self.path)
        self._fh = open(self.path, "ab")
        self._records = len(self._docs)

    def close(self) -> None:
        self._fh.close()


@dataclass(frozen=True)
class SyncBundle:
    node: str
    entries: tuple[StoredDocument, ...]
    created_at: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "node": self.node,
            "created_at": self.created_at,
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, doc: Any) -> SyncBundle:
        try:
            entries = tuple(StoredDocument.from_dict(e) for e in doc["entries"])
            bundle = cls(str(doc["node"]), entries, int(doc.get("created_at", 0)))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise MalformedBundle(f"bad sync bundle: {exc}") from None
        ids = [e.id for e in entries]
        if len(ids) != len(set(ids)):
            raise MalformedBundle("bundle lists an id more than once")
        if any(not isinstance(e.id, str) or not e.id or not isinstance(e.origin, str) or e.version < 1 for e in entries):
            raise MalformedBundle("bundle entry has an empty id, bad origin or version < 1")
        return bundle


@dataclass(frozen=True)
class MergeReport:
    applied: int = 0
    skipped: int = 0
    conflicts: int = 0

    def to_dict(self) -> dict[str, int]:
        return {"applied": self.applied, "skipped": self.skipped, "conflicts": self.conflicts}


@dataclass
class DocumentStore:
    node_id: str
    backend: Backend = field(default_factory=MemoryBackend)
    clock: Callable[[], int] = now_us
    _lock: threading.RLock = field(default_factory=threading.RLock)

    def _write(self, doc_id: str, body: Any, deleted: bool) -> StoredDocument:
        if not isinstance(doc_id, str) or not doc_id:
            raise InvalidId("document id must be a non-empty string")
        with self._lock:
            prev = self.backend.get(doc_id)
            version = prev.version + 1 if prev else 1
            updated_at = self.clock()
            if prev is not None and updated_at <= prev.updated_at:
                updated_at = prev.updated_at + 1
            doc = StoredDocument(doc_id, body, version, updated_at, self.node_id, deleted)
            self.backend.put(doc)
            return doc

    def put_document(self, doc_id: str, body: Any) -> StoredDocument:
        return self._write(doc_id, body, deleted=False)

    def get_document(self, doc_id: str) -> StoredDocument:
        doc = self.backend.get(doc_id)
        if doc is None or doc.deleted:
            raise NotFound(f"no document {doc_id!r}", id=doc_id)
        return doc

    def delete_document(self, doc_id: str) -> StoredDocument:
        with self._lock:
            self.get_document(doc_id)
            return self._write(doc_id, None, deleted=True)

    def ids(self) -> list[str]:
        with self._lock:
            return [d.id for d in self.backend.scan() if not d.deleted]

    def snapshot_export(self) -> SyncBundle:
        with self._lock:
            entries = tuple(self.backend.scan())
        return SyncBundle(self.node_id, entries, now_us())

    def sync_merge(self, bundle: SyncBundle | dict) -> MergeReport:
        if not isinstance(bundle, SyncBundle):
            bundle = SyncBundle.from_dict(bundle)
        applied = skipped = conflicts = 0
        with self._lock:
            for entry in bundle.entries:
                local = self.backend.get(entry.id)
                if local is not None and local.lww_key != entry.lww_key:
                    conflicts += 1
                if local is None or entry.lww_key > local.lww_key:
                    version = local.version + 1 if local else 1
                    self.backend.put(replace(entry, version=version))
                    applied += 1
                else:
                    skipped += 1
        return MergeReport(applied, skipped, conflicts)

    def replicated_state(self) -> dict[str, dict[str, Any]]:
        with self._lock:
            return {
                d.id: {"body": d.body, "updated_at": d.updated_at, "origin": d.origin, "deleted": d.deleted}
                for d in self.backend.scan()
            }

    def canonical_state(self) -> bytes:
        return canonical_json(self.replicated_state())


def open_store(node_id: str, backend: str = "memory", path: str | Path | None = None) -> DocumentStore:
    if backend == "memory":
        return DocumentStore(node_id, MemoryBackend())
    if backend == "journal":
        if path is None:
            raise CWSError("journal backend needs a path")
        return DocumentStore(node_id, JournalBackend(path))
    raise CWSError(f"unknown store backend {backend!r}")

"""Registry of atomic services: descriptors, replicas and replica health."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable

import httpx

from .errors import DuplicateName, InvalidDescriptor, ServiceInUse, UnknownService

HEALTH_TIMEOUT = 2.0


class Health(str, Enum):
    HEALTHY = "healthy"
    UNHEALTHY = "unhealthy"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class ServiceDescriptor:
    name: str
    kind: str = "builtin"
    replicas: tuple[str, ...] = ()
    requires: frozenset[str] = frozenset()
    provides: frozenset[str] = frozenset()
    cacheable: bool = False
    version: str = "1"

    def __post_init__(self) -> None:
        # Normalise containers so descriptors built from JSON compare equal.
        object.__setattr__(self, "replicas", tuple(self.replicas))
        object.__setattr__(self, "requires", frozenset(self.requires))
        object.__setattr__(self, "provides", frozenset(self.provides))

    def validate(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise InvalidDescriptor("name must be a non-empty string")
        if self.kind not in ("builtin", "remote"):
            raise InvalidDescriptor(f"kind must be builtin or remote, not {self.kind!r}")
        if self.kind == "remote" and not self.replicas:
            raise InvalidDescriptor(f"remote service {self.name!r} needs at least one replica")
        if self.kind == "builtin" and self.replicas:
            raise InvalidDescriptor(f"builtin service {self.name!r} cannot list replicas")
        if not self.provides:
            raise InvalidDescriptor(f"service {self.name!r} must provide at least one field")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "replicas": list(self.replicas),
            "requires": sorted(self.requires),
            "provides": sorted(self.provides),
            "cacheable": self.cacheable,
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> ServiceDescriptor:
        try:
            return cls(
                name=doc["name"],
                kind=doc.get("kind", "builtin"),
                replicas=tuple(doc.get("replicas", ())),
                requires=frozenset(doc.get("requires", ())),
                provides=frozenset(doc.get("provides", ())),
                cacheable=bool(doc.get("cacheable", False)),
                version=str(doc.get("version", "1")),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidDescriptor(f"bad descriptor document: {exc}") from None


@dataclass
class ReplicaHealth:
    replica: str
    state: Health = Health.UNKNOWN
    checked_at: float | None = None

    def to_dict(self) -> dict:
        return {"replica": self.replica, "state": self.state.value, "checked_at": self.checked_at}


@dataclass
class ServiceRegistry:
    """The set of atomic services known to this node.

    Reads take a snapshot of plain dicts under the lock; writes replace whole
    descriptors, so a reader never sees a half-updated service.
    """

    probe_timeout: float = HEALTH_TIMEOUT
    _services: dict[str, ServiceDescriptor] = field(default_factory=dict)
    _health: dict[tuple[str, int], ReplicaHealth] = field(default_factory=dict)
    _guards: list[Callable[[str], Iterable[str]]] = field(default_factory=list)
    _lock: threading.RLock = field(default_factory=threading.RLock)

    def register_service(self, descriptor: ServiceDescriptor) -> str:
        descriptor.validate()
        with self._lock:
            if descriptor.name in self._services:
                raise DuplicateName(f"service {descriptor.name!r} already registered", name=descriptor.name)
            self._services[descriptor.name] = descriptor
            for i, url in enumerate(descriptor.replicas):
                self._health[(descriptor.name, i)] = ReplicaHealth(url)
        return descriptor.name

    def deregister(self, name: str) -> None:
        with self._lock:
            if name not in self._services:
                raise UnknownService(name)
            users = sorted({c for guard in self._guards for c in guard(name)})
            if users:
                raise ServiceInUse(f"service {name!r} is used by compositions {users}", compositions=users)
            descriptor = self._services.pop(name)
            for i in range(len(descriptor.replicas)):
                self._health.pop((name, i), None)

    def add_guard(self, guard: Callable[[str], Iterable[str]]) -> None:
        """``guard(name)`` returns the compositions that still reference ``name``."""
        self._guards.append(guard)

    def resolve(self, name: str) -> ServiceDescriptor:
        try:
            return self._services[name]
        except KeyError:
            raise UnknownService(name) from None

    def names(self) -> list[str]:
        with self._lock:
            return sorted(self._services)

    def __contains__(self, name: str) -> bool:
        return name in self._services

    def __len__(self) -> int:
        return len(self._services)

    def snapshot(self) -> dict[str, ServiceDescriptor]:
        with self._lock:
            return dict(self._services)

    def replica_health(self, name: str) -> list[ReplicaHealth]:
        with self._lock:
            descriptor = self.resolve(name)
            if descriptor.kind == "builtin":
                return [ReplicaHealth("builtin", Health.HEALTHY, time.time())]
            return [self._health[(name, i)] for i in range(len(descriptor.replicas))]

    def mark(self, name: str, index: int, state: Health) -> None:
        with self._lock:
            descriptor = self.resolve(name)
            if not 0 <= index < len(descriptor.replicas):
                raise IndexError(f"{name!r} has no replica {index}")
            self._health[(name, index)] = ReplicaHealth(descriptor.replicas[index], state, time.time())

    def health_check(self, name: str, client: httpx.Client | None = None) -> list[ReplicaHealth]:
        """Probe every replica's ``/health``; any 2xx within the timeout is healthy."""
        descriptor = self.resolve(name)
        if descriptor.kind == "builtin":
            return self.replica_health(name)
        own_client = client is None
        client = client or httpx.Client(timeout=self.probe_timeout)
        try:
            for i, url in enumerate(descriptor.replicas):
                try:
                    response = client.get(url.rstrip("/") + "/health", timeout=self.probe_timeout)
                    state = Health.HEALTHY if response.is_success else Health.UNHEALTHY
                except httpx.HTTPError:
                    state = Health.UNHEALTHY
                with self._lock:
                    # Skip the update if the service was replaced meanwhile.
                    if self._services.get(name) is descriptor:
                        self._health[(name, i)] = ReplicaHealth(url, state, time.time())
        finally:
            if own_client:
                client.close()
        return self.replica_health(name)

"""Coordinator: runs compositions stage by stage, routing remote calls.

Remote calls go through round-robin replica selection with bounded retries
on transport failures. Responses of cacheable services are kept in a TTL
cache with single-flight filling, so concurrent identical requests reach
the backend once.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import httpx

from .composition import CompositionStore
from .envelope import DocumentEnvelope, canonical_json, decode_envelope, encode_envelope
from .errors import (
    Application,
    ContractViolation,
    CWSError,
    MalformedEnvelope,
    MissingField,
    NoHealthyReplica,
    StageFailure,
    Transport,
    UnknownRun,
    UnknownService,
)
from .nlp.services import Handler
from .registry import Health, ServiceDescriptor, ServiceRegistry

log = logging.getLogger(__name__)

DEFAULT_TTL = 300.0
PARAMS_HEADER = "X-CWS-Params"


@dataclass
class StageRecord:
    service: str
    replica: str
    started_at: float
    ended_at: float
    outcome: str  # "ok" | "error"
    cache_hit: bool = False
    error: dict[str, Any] | None = None

    def to_dict(self) -> dict[str, Any]:
        out = {
            "service": self.service,
            "replica": self.replica,
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "outcome": self.outcome,
            "cache_hit": self.cache_hit,
        }
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass
class ExecutionTrace:
    run_id: str
    composition: str
    stages: list[StageRecord] = field(default_factory=list)
    outcome: str = "running"

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "composition": self.composition,
            "stages": [s.to_dict() for s in self.stages],
            "outcome": self.outcome,
        }


@dataclass
class CacheEntry:
    key: tuple[str, str, str]
    response: bytes
    inserted_at: float
    ttl: float

    def fresh(self, now: float) -> bool:
        return now - self.inserted_at < self.ttl


class ResponseCache:
    """TTL cache of service responses keyed by (service, version, request hash)."""

    def __init__(self, ttl: float = DEFAULT_TTL, clock: Callable[[], float] = time.monotonic) -> None:
        self.ttl = ttl
        self.clock = clock
        self._entries: dict[tuple[str, str, str], CacheEntry] = {}
        self._inflight: dict[tuple[str, str, str], threading.Event] = {}
        self._lock = threading.Lock()

    def get(self, key: tuple[str, str, str]) -> bytes | None:
        with self._lock:
            entry = self._entries.get(key)
            if entry is None:
                return None
            if not entry.fresh(self.clock()):
                del self._entries[key]
                return None
            return entry.response

    def fill(self, key: tuple[str, str, str], produce: Callable[[], bytes]) -> tuple[bytes, bool]:
        """Return (response, hit). Only one caller per key runs ``produce`` at a time."""
        while True:
            with self._lock:
                entry = self._entries.get(key)
                if entry is not None and entry.fresh(self.clock()):
                    return entry.response, True
                waiter = self._inflight.get(key)
                if waiter is None:
                    done = self._inflight[key] = threading.Event()
                    break
            waiter.wait()
        try:
            response = produce()
            with self._lock:
                self._entries[key] = CacheEntry(key, response, self.clock(), self.ttl)
            return response, False
        finally:
            with self._lock:
                del self._inflight[key]
            done.set()

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    def __len__(self) -> int:
        return len(self._entries)


def request_key(descriptor: ServiceDescriptor, envelope: DocumentEnvelope, params: dict[str, Any]) -> tuple[str, str, str]:
    digest = hashlib.sha256(canonical_json({"envelope": envelope.payload(), "params": params})).hexdigest()
    return (descriptor.name, descriptor.version, digest)


class Coordinator:
    def __init__(
        self,
        registry: ServiceRegistry,
        compositions: CompositionStore,
        handlers: dict[str, Handler] | None = None,
        *,
        cache_ttl: float = DEFAULT_TTL,
        retries: int = 2,
        backoff: float = 0.1,
        timeout: float = 30.0,
        client: httpx.Client | None = None,
        max_runs: int = 1000,
    ) -> None:
        self.registry = registry
        self.compositions = compositions
        self.handlers = dict(handlers or {})
        self.cache = ResponseCache(cache_ttl)
        self.retries = retries
        self.backoff = backoff
        self.client = client or httpx.Client(timeout=timeout)
        self.max_runs = max_runs
        self._rr: dict[str, int] = {}
        self._rr_lock = threading.Lock()
        self._runs: OrderedDict[str, ExecutionTrace] = OrderedDict()
        self._runs_lock = threading.Lock()

    # routing

    def select_replica(self, name: str) -> str:
        return self._select(self.registry.resolve(name))[1]

    def _select(self, descriptor: ServiceDescriptor) -> tuple[int, str]:
        health = self.registry.replica_health(descriptor.name)
        # Unknown counts as usable: only a failed probe takes a replica out.
        eligible = [i for i, h in enumerate(health) if h.state is not Health.UNHEALTHY]
        if not eligible:
            raise NoHealthyReplica(f"no healthy replica for {descriptor.name!r}", service=descriptor.name)
        with self._rr_lock:
            n = self._rr.get(descriptor.name, 0)
            self._rr[descriptor.name] = n + 1
        index = eligible[n % len(eligible)]
        return index, descriptor.replicas[index]

    # single service calls

    def _call_remote(self, descriptor: ServiceDescriptor, envelope: DocumentEnvelope, params: dict[str, Any]) -> tuple[DocumentEnvelope, str]:
        body = encode_envelope(envelope)
        headers = {"Content-Type": "application/json"}
        if params:
            headers[PARAMS_HEADER] = json.dumps(params, sort_keys=True, separators=(",", ":"))
        attempts = (1 + self.retries) * len(descriptor.replicas)
        last: Transport | None = None
        for attempt in range(attempts):
            if attempt:
                time.sleep(self.backoff)
            _, replica = self._select(descriptor)
            url = replica.rstrip("/") + "/process"
            try:
                response = self.client.post(url, content=body, headers=headers)
            except httpx.HTTPError as exc:
                last = Transport(f"{url}: {exc.__class__.__name__}: {exc}", replica=replica)
                log.debug("transport failure on %s (attempt %d)", url, attempt + 1)
                continue
            if response.is_success:
                try:
                    return decode_envelope(response.content), replica
                except MalformedEnvelope as exc:
                    raise ContractViolation(f"{descriptor.name} returned a malformed envelope: {exc.message}") from None
            error = _error_body(response)
            if error is None and response.status_code >= 500:
                last = Transport(f"{url}: HTTP {response.status_code}", replica=replica)
                continue
            code, message = error or (str(response.status_code), response.text)
            raise Application(code, message)
        assert last is not None
        raise last

    def _call(self, descriptor: ServiceDescriptor, envelope: DocumentEnvelope, params: dict[str, Any]) -> tuple[DocumentEnvelope, str]:
        if descriptor.kind == "builtin":
            handler = self.handlers.get(descriptor.name)
            if handler is None:
                raise UnknownService(descriptor.name)
            try:
                out = handler(envelope, dict(params))
            except CWSError as exc:
                raise Application(exc.code, exc.message) from None
            replica = "builtin"
        else:
            out, replica = self._call_remote(descriptor, envelope, params)
        missing = sorted(f for f in descriptor.provides if not out.has(f))
        if missing:
            raise ContractViolation(f"{descriptor.name} did not provide {missing}", service=descriptor.name, missing=missing)
        # Provenance belongs to the coordinator, whatever the service echoed.
        return replace(out, provenance=list(envelope.provenance)), replica

    def call(self, name: str, envelope: DocumentEnvelope, params: dict[str, Any] | None = None, use_cache: bool = True) -> tuple[DocumentEnvelope, bool, str]:
        """Invoke one service without touching provenance; returns (envelope, cache hit, replica)."""
        descriptor = self.registry.resolve(name)
        params = params or {}
        if not (use_cache and descriptor.cacheable):
            out, replica = self._call(descriptor, envelope, params)
            return out, False, replica
        used: list[str] = []

        def produce() -> bytes:
            out, replica = self._call(descriptor, envelope, params)
            used.append(replica)
            return encode_envelope(replace(out, provenance=[]))

        stored, hit = self.cache.fill(request_key(descriptor, envelope, params), produce)
        out = replace(decode_envelope(stored), provenance=list(envelope.provenance))
        return out, hit, used[0] if used else "cache"

    def invoke_atomic(self, name: str, envelope: DocumentEnvelope, params: dict[str, Any] | None = None) -> DocumentEnvelope:
        out, _, _ = self.call(name, envelope, params, use_cache=False)
        return out.with_provenance(name, self.registry.resolve(name).version)

    def cached_invoke(self, name: str, envelope: DocumentEnvelope, params: dict[str, Any] | None = None) -> tuple[DocumentEnvelope, bool]:
        out, hit, _ = self.call(name, envelope, params)
        return out.with_provenance(name, self.registry.resolve(name).version), hit

    # compositions

    def execute(self, name: str, envelope: DocumentEnvelope, use_cache: bool = True) -> tuple[DocumentEnvelope, ExecutionTrace]:
        plan = self.compositions.plan(name)
        missing = sorted(f for f in plan.initial_fields if not envelope.has(f))
        if missing:
            raise MissingField(f"input envelope lacks {missing}", missing=missing)
        trace = ExecutionTrace(uuid.uuid4().hex, name)
        self._remember(trace)
        current = envelope
        for i, stage in enumerate(plan.stages):
            started = time.time()
            try:
                out, hit, replica = self.call(stage.service, current, stage.params, use_cache)
            except CWSError as exc:
                trace.stages.append(StageRecord(stage.service, stage.mode, started, time.time(), "error", error=exc.to_dict()))
                trace.outcome = "error"
                failure = StageFailure(i, exc, trace.run_id)
                failure.trace = trace
                raise failure from exc
            trace.stages.append(StageRecord(stage.service, replica, started, time.time(), "ok", cache_hit=hit))
            current = out.with_provenance(stage.service, stage.version)
        trace.outcome = "ok"
        return current, trace

    def _remember(self, trace: ExecutionTrace) -> None:
        with self._runs_lock:
            self._runs[trace.run_id] = trace
            while len(self._runs) > self.max_runs:
                self._runs.popitem(last=False)

    def get_run(self, run_id: str) -> ExecutionTrace:
        try:
            return self._runs[run_id]
        except KeyError:
            raise UnknownRun(f"no run {run_id!r}") from None


def _error_body(response: httpx.Response) -> tuple[str, str] | None:
    try:
        doc = response.json()
    except ValueError:
        return None
    if isinstance(doc, dict) and isinstance(doc.get("code"), str):
        return doc["code"], str(doc.get("message", ""))
    return None

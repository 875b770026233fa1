"""FastAPI binding of the kernel.

Envelope-carrying endpoints read and write raw canonical bytes rather than
going through pydantic, so responses stay byte-identical to what the
coordinator produced.
"""

from __future__ import annotations

import json
import logging
from contextlib import asynccontextmanager
from typing import Any

from fastapi import Depends, FastAPI, Query, Request
from fastapi.responses import JSONResponse, Response
from starlette.concurrency import run_in_threadpool

from ..coordinator import PARAMS_HEADER
from ..envelope import canonical_json, decode_envelope, encode_envelope, parse_document
from ..errors import CWSError, InvalidDescriptor, MalformedEnvelope, StageFailure, Unauthorized, UnknownService
from ..kernel import Kernel
from . import schemas

log = logging.getLogger(__name__)

ENVELOPE_MEDIA = "application/json"


def _canonical(doc: Any, status: int = 200, headers: dict[str, str] | None = None) -> Response:
    return Response(canonical_json(doc), status_code=status, media_type=ENVELOPE_MEDIA, headers=headers)


def create_app(kernel: Kernel | None = None) -> FastAPI:
    kernel = kernel or Kernel()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        kernel.persist_index()

    app = FastAPI(title="cwskernel", version="0.1.0", lifespan=lifespan)
    app.state.kernel = kernel

    @app.exception_handler(CWSError)
    async def cws_error(request: Request, exc: CWSError) -> JSONResponse:
        body = exc.to_dict()
        if isinstance(exc, StageFailure) and exc.trace is not None:
            body["trace"] = exc.trace.to_dict()
        return JSONResponse(body, status_code=exc.status)

    def require_token(request: Request) -> None:
        token = kernel.config.token
        if token and request.headers.get("authorization") != f"Bearer {token}":
            raise Unauthorized("missing or wrong bearer token")

    async def read_envelope(request: Request):
        return decode_envelope(await request.body())

    def read_params(request: Request) -> dict[str, Any]:
        raw = request.headers.get(PARAMS_HEADER)
        if not raw:
            return {}
        try:
            params = json.loads(raw)
        except ValueError:
            raise MalformedEnvelope(f"{PARAMS_HEADER} is not a JSON object") from None
        if not isinstance(params, dict):
            raise MalformedEnvelope(f"{PARAMS_HEADER} is not a JSON object")
        return params

    @app.get("/health")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    # registry

    @app.post("/services", status_code=201, response_model=schemas.NameOut, dependencies=[Depends(require_token)])
    def register_service(body: schemas.ServiceIn) -> dict:
        descriptor = body.to_descriptor()
        if descriptor.kind == "builtin" and descriptor.name not in kernel.coordinator.handlers:
            raise InvalidDescriptor(f"no builtin implementation named {descriptor.name!r}")
        return {"name": kernel.registry.register_service(descriptor)}

    @app.get("/services")
    def list_services() -> list[dict]:
        return [d.to_dict() for _, d in sorted(kernel.registry.snapshot().items())]

    @app.get("/services/{name}")
    def get_service(name: str) -> dict:
        return kernel.registry.resolve(name).to_dict()

    @app.delete("/services/{name}", status_code=204, dependencies=[Depends(require_token)])
    def deregister_service(name: str) -> Response:
        kernel.registry.deregister(name)
        return Response(status_code=204)

    @app.get("/services/{name}/health", response_model=schemas.HealthReport)
    def service_health(name: str) -> dict:
        report = kernel.registry.health_check(name, kernel.coordinator.client)
        return {"service": name, "replicas": [h.to_dict() for h in report]}

    # compositions and execution

    @app.post("/compositions", status_code=201, response_model=schemas.NameOut, dependencies=[Depends(require_token)])
    def define_composition(body: schemas.CompositionIn) -> dict:
        return {"name": kernel.compositions.define_composition(body.to_def())}

    @app.get("/compositions")
    def list_compositions() -> list[str]:
        return kernel.compositions.names()

    @app.get("/compositions/{name}")
    def get_composition(name: str) -> dict:
        return kernel.compositions.get(name).to_dict()

    @app.get("/compositions/{name}/plan")
    def plan(name: str) -> dict:
        return kernel.compositions.plan(name).to_dict()

    @app.post("/compositions/{name}/execute")
    async def execute(name: str, request: Request) -> Response:
        envelope = await read_envelope(request)
        result, trace = await run_in_threadpool(kernel.coordinator.execute, name, envelope)
        return _canonical({"envelope": result.to_dict(), "run_id": trace.run_id})

    @app.get("/runs/{run_id}")
    def get_run(run_id: str) -> dict:
        return kernel.coordinator.get_run(run_id).to_dict()

    @app.post("/proxy/{service}/process")
    async def proxy(service: str, request: Request) -> Response:
        envelope = await read_envelope(request)
        params = read_params(request)
        out, hit, _ = await run_in_threadpool(kernel.coordinator.call, service, envelope, params)
        return Response(encode_envelope(out), media_type=ENVELOPE_MEDIA, headers={"X-Cache": "hit" if hit else "miss"})

    # builtin services over the wire, same contract as remote replicas

    @app.post("/svc/{name}/process")
    async def svc_process(name: str, request: Request) -> Response:
        handler = kernel.coordinator.handlers.get(name)
        if handler is None:
            raise UnknownService(name)
        envelope = await read_envelope(request)
        params = read_params(request)
        out = await run_in_threadpool(handler, envelope, params)
        return Response(encode_envelope(out), media_type=ENVELOPE_MEDIA)

    @app.get("/svc/{name}/health")
    def svc_health(name: str) -> dict[str, str]:
        if name not in kernel.coordinator.handlers:
            raise UnknownService(name)
        return {"status": "ok"}

    # index

    @app.post("/index", response_model=schemas.IndexReportOut, dependencies=[Depends(require_token)])
    async def index_document(request: Request) -> dict:
        envelope = await read_envelope(request)
        report = await run_in_threadpool(kernel.index_envelope, envelope)
        return report.to_dict()

    @app.get("/search", response_model=schemas.SearchOut)
    def search(q: str, limit: int = Query(10, ge=0)) -> dict:
        hits = kernel.search_engine.search(q, limit)
        return {"query": q, "hits": [{"doc_id": d, "score": s} for d, s in hits]}

    # vectors

    @app.get("/vectors/similarity", response_model=schemas.SimilarityOut)
    def similarity(t1: str, t2: str) -> dict:
        return {"t1": t1, "t2": t2, "similarity": kernel.model().similarity(t1, t2)}

    @app.get("/vectors/nearest", response_model=schemas.NearestOut)
    def nearest(t: str, k: int = Query(10, ge=0)) -> dict:
        return {"term": t, "neighbours": [{"term": n, "similarity": s} for n, s in kernel.model().nearest(t, k)]}

    @app.post("/vectors/center", response_model=schemas.CenterOut)
    def center(body: schemas.TermsIn) -> dict:
        term, sim = kernel.model().cluster_center(body.terms)
        return {"term": term, "similarity": sim}

    @app.post("/vectors/setsim", response_model=schemas.SetSimOut)
    def setsim(body: schemas.SetSimIn) -> dict:
        return {"similarity": kernel.model().set_similarity(body.a, body.b)}

    # store and sync

    @app.put("/docs/{doc_id}", response_model=schemas.StoredDocumentOut, dependencies=[Depends(require_token)])
    async def put_doc(doc_id: str, request: Request) -> dict:
        body = parse_document(await request.body())
        return kernel.store.put_document(doc_id, body).to_dict()

    @app.get("/docs/{doc_id}", response_model=schemas.StoredDocumentOut)
    def get_doc(doc_id: str) -> dict:
        return kernel.store.get_document(doc_id).to_dict()

    @app.delete("/docs/{doc_id}", status_code=204, dependencies=[Depends(require_token)])
    def delete_doc(doc_id: str) -> Response:
        kernel.store.delete_document(doc_id)
        return Response(status_code=204)

    @app.get("/sync/export")
    def sync_export() -> Response:
        return _canonical(kernel.store.snapshot_export().to_dict())

    @app.post("/sync/import", response_model=schemas.MergeReportOut, dependencies=[Depends(require_token)])
    async def sync_import(request: Request) -> dict:
        bundle = parse_document(await request.body())
        return kernel.store.sync_merge(bundle).to_dict()

    return app

"""Exception hierarchy shared by the kernel, the HTTP layer and the CLI.

Every error carries a stable ``code`` and an HTTP ``status`` so the API can
render it as ``{"code": ..., "message": ...}`` without a lookup table.
"""

from __future__ import annotations

from typing import Any


class CWSError(Exception):
    code = "Error"
    status = 500

    def __init__(self, message: str = "", **details: Any) -> None:
        super().__init__(message or self.code)
        self.message = message or self.code
        self.details = details

    def to_dict(self) -> dict[str, Any]:
        body: dict[str, Any] = {"code": self.code, "message": self.message}
        body.update(self.details)
        return body


class Unauthorized(CWSError):
    code = "Unauthorized"
    status = 401


# registry / composition


class DuplicateName(CWSError):
    code = "DuplicateName"
    status = 409


class InvalidDescriptor(CWSError):
    code = "InvalidDescriptor"
    status = 422


class UnknownService(CWSError):
    code = "UnknownService"
    status = 404

    def __init__(self, name: str) -> None:
        super().__init__(f"unknown service {name!r}", service=name)
        self.name = name


class ServiceInUse(CWSError):
    code = "ServiceInUse"
    status = 409


class UnknownComposition(CWSError):
    code = "UnknownComposition"
    status = 404

    def __init__(self, name: str) -> None:
        super().__init__(f"unknown composition {name!r}", composition=name)
        self.name = name


class IncompatibleStages(CWSError):
    code = "IncompatibleStages"
    status = 422

    def __init__(self, stage: int, service: str, missing: list[str]) -> None:
        super().__init__(
            f"stage {stage} ({service}) requires unavailable fields {missing}",
            stage=stage,
            service=service,
            missing=missing,
        )
        self.stage = stage
        self.missing = missing


# coordinator


class MissingField(CWSError):
    code = "MissingField"
    status = 422


class Transport(CWSError):
    code = "Transport"
    status = 502


class Application(CWSError):
    """Error reported by a service itself; passed through, never retried."""

    code = "Application"
    status = 502

    def __init__(self, app_code: str, message: str) -> None:
        super().__init__(f"{app_code}: {message}", app_code=app_code)
        self.app_code = app_code


class ContractViolation(CWSError):
    code = "ContractViolation"
    status = 502


class NoHealthyReplica(CWSError):
    code = "NoHealthyReplica"
    status = 503


class StageFailure(CWSError):
    code = "StageFailure"
    status = 502

    def __init__(self, stage: int, cause: CWSError, run_id: str | None = None) -> None:
        super().__init__(
            f"stage {stage} failed: {cause.code}: {cause.message}",
            stage=stage,
            cause=cause.code,
            run_id=run_id,
        )
        self.stage = stage
        self.cause = cause
        self.run_id = run_id
        self.trace = None


class UnknownRun(CWSError):
    code = "UnknownRun"
    status = 404


# interface


class MalformedEnvelope(CWSError):
    code = "MalformedEnvelope"
    status = 400

    def __init__(self, message: str, offset: int = 0) -> None:
        super().__init__(f"{message} (byte {offset})", offset=offset)
        self.offset = offset


# nlp


class CorpusTooSmall(CWSError):
    code = "CorpusTooSmall"
    status = 422


class NoProfiles(CWSError):
    code = "NoProfiles"
    status = 422


class EmptyText(CWSError):
    code = "EmptyText"
    status = 422


class LexiconMissing(CWSError):
    code = "LexiconMissing"
    status = 422


class StopListMissing(CWSError):
    code = "StopListMissing"
    status = 422


class Unmappable(CWSError):
    code = "Unmappable"
    status = 422

    def __init__(self, codepoint: int, offset: int) -> None:
        super().__init__(
            f"U+{codepoint:04X} at offset {offset} has no WIN-1251 byte",
            codepoint=codepoint,
            offset=offset,
        )
        self.codepoint = codepoint
        self.offset = offset


class MalformedResource(CWSError):
    code = "MalformedResource"
    status = 422


# index


class MissingLemmas(CWSError):
    code = "MissingLemmas"
    status = 422


class EmptyQuery(CWSError):
    code = "EmptyQuery"
    status = 422


# vectors


class MalformedModel(CWSError):
    code = "MalformedModel"
    status = 422

    def __init__(self, line: int, reason: str) -> None:
        super().__init__(f"line {line}: {reason}", line=line)
        self.line = line


class ZeroVector(CWSError):
    code = "ZeroVector"
    status = 422

    def __init__(self, term: str) -> None:
        super().__init__(f"zero vector for {term!r}", term=term)
        self.term = term


class UnknownTerm(CWSError):
    code = "UnknownTerm"
    status = 404

    def __init__(self, term: str) -> None:
        super().__init__(f"term {term!r} not in model", term=term)
        self.term = term


class EmptyInput(CWSError):
    code = "EmptyInput"
    status = 422


class ZeroMean(CWSError):
    code = "ZeroMean"
    status = 422


class NoModel(CWSError):
    code = "NoModel"
    status = 503


# store


class InvalidId(CWSError):
    code = "InvalidId"
    status = 422


class NotFound(CWSError):
    code = "NotFound"
    status = 404


class MalformedBundle(CWSError):
    code = "MalformedBundle"
    status = 400

"""Composite web-service coordination kernel.

A registry of atomic services, validated compositions over them, and a
coordinator that executes compositions as ordered invocations, plus a
suite of builtin text-processing services.
"""

from .composition import CompositionDef, CompositionStore, ExecutionPlan, Stage
from .coordinator import Coordinator, ExecutionTrace
from .envelope import DocumentEnvelope, Token, decode_envelope, encode_envelope
from .kernel import Kernel, KernelConfig
from .registry import ServiceDescriptor, ServiceRegistry

__all__ = [
    "CompositionDef",
    "CompositionStore",
    "Coordinator",
    "DocumentEnvelope",
    "ExecutionPlan",
    "ExecutionTrace",
    "Kernel",
    "KernelConfig",
    "ServiceDescriptor",
    "ServiceRegistry",
    "Stage",
    "Token",
    "decode_envelope",
    "encode_envelope",
]

__version__ = "0.1.0"

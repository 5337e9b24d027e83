"""Exception types shared across the package.

Everything raised on purpose derives from :class:`ModalflowError` so callers
can catch one base. Graph validation problems additionally derive from
:class:`GraphValidationError` and carry enough structure for a CLI to print
one diagnostic per problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class ModalflowError(Exception):
    """Base class for every deliberate error in this package."""


class PayloadError(ModalflowError):
    """A payload body violates its own invariants."""


class IoError(ModalflowError):
    """A file-backed body or cache entry could not be read or written."""


class UnsupportedCoercionError(ModalflowError):
    """No rule converts the source modality into the requested one."""

    def __init__(self, source: str, target: str) -> None:
        super().__init__(f"no coercion from {source} to {target}")
        self.source = source
        self.target = target


# ---------------------------------------------------------------------------
# Graph construction and validation


class GraphValidationError(ModalflowError):
    """Base for all pipeline-config validation failures."""


class ParseError(GraphValidationError):
    """The config document is malformed (schema, types, duplicates)."""


class CycleError(GraphValidationError):
    """The node/edge set contains a directed cycle."""

    def __init__(self, nodes: tuple[str, ...]) -> None:
        super().__init__("cycle involving nodes: " + ", ".join(sorted(nodes)))
        self.nodes = tuple(sorted(nodes))


class DanglingRefError(GraphValidationError):
    """An edge endpoint names a node or port that does not exist."""


class ModalityMismatchError(GraphValidationError):
    """An edge connects ports whose modalities neither match nor coerce."""


class UnknownOperationError(GraphValidationError):
    """The named operation is not in the catalog (graph or invoke time)."""


class UnreachableNodeError(GraphValidationError):
    """A node is not on any Input-to-Output path."""


class MissingInputError(GraphValidationError):
    """A required in_port has no incoming edge, or a run lacks a binding."""


# ---------------------------------------------------------------------------
# Adapter invocation


class AdapterErrorKind(str, Enum):
    TIMEOUT = "Timeout"
    RATE_LIMITED = "RateLimited"
    AUTH_FAILED = "AuthFailed"
    INVALID_INPUT = "InvalidInput"
    SERVICE_FAULT = "ServiceFault"
    NETWORK_ERROR = "NetworkError"


# Kinds that are safe to retry regardless of detail. ServiceFault is decided
# per error (5xx yes, 4xx no) so it is not in this set.
_ALWAYS_RETRIABLE = frozenset(
    {AdapterErrorKind.TIMEOUT, AdapterErrorKind.RATE_LIMITED, AdapterErrorKind.NETWORK_ERROR}
)


class AdapterError(ModalflowError):
    """A backend call failed.

    ``retriable`` drives the retry loop: Timeout, RateLimited and
    NetworkError always retry; AuthFailed and InvalidInput never do;
    ServiceFault retries only when the caller marks it so (server-side 5xx).
    """

    def __init__(self, kind: AdapterErrorKind, detail: str, *, retriable: bool | None = None) -> None:
        super().__init__(f"{kind.value}: {detail}")
        self.kind = kind
        self.detail = detail
        if retriable is None:
            retriable = kind in _ALWAYS_RETRIABLE
        if kind in (AdapterErrorKind.AUTH_FAILED, AdapterErrorKind.INVALID_INPUT):
            retriable = False
        self.retriable = retriable


class SignatureMismatchError(ModalflowError):
    """Invoke-time inputs or params do not fit the declared capability."""


class DuplicateOperationError(ModalflowError):
    """An operation name was registered twice without override."""


class ConfigError(ModalflowError):
    """An adapter or agent configuration is structurally invalid."""


# ---------------------------------------------------------------------------
# Execution


class RunFailedError(ModalflowError):
    """At least one node failed; carries the trace and partial outputs."""

    def __init__(self, message: str, *, trace=None, outputs=None) -> None:
        super().__init__(message)
        self.trace = trace
        self.outputs = outputs or {}


# ---------------------------------------------------------------------------
# Transforms and metrics

class EmptyInputError(ModalflowError):
    """A transform or metric received an empty collection it cannot handle."""


class DimMismatchError(ModalflowError):
    """Two vectors that must share a dimension do not."""


class ZeroVectorError(ModalflowError):
    """Cosine similarity is undefined for a zero-norm vector."""


class CandidateMismatchError(ModalflowError):
    """Two score vectors do not cover the same candidate ids."""


class NegativeScoreError(ModalflowError):
    """Product fusion requires scores already normalized to be non-negative."""


class MissingSlotError(ModalflowError):
    """A template references a slot with no bound value."""

    def __init__(self, slot: str) -> None:
        super().__init__(f"template slot has no value: {slot}")
        self.slot = slot


class EmptyRankingError(ModalflowError):
    """A ranking metric received an empty ranking."""


class LengthMismatchError(ModalflowError):
    """Parallel lists (hypotheses/references, rankings/golds) differ in length."""


class EmptyCorpusError(ModalflowError):
    """A corpus-level metric received zero items."""


# ---------------------------------------------------------------------------
# Agent sessions


class UnknownSessionError(ModalflowError):
    """No session exists for the given id."""


class BusyError(ModalflowError):
    """The session is already processing a turn."""


class AgentStageError(ModalflowError):
    """A pipeline stage inside an agent turn failed; session state unchanged."""

    def __init__(self, stage: str, cause: Exception) -> None:
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class Diagnostic:
    """One human-readable validation finding, printable as a single line."""

    code: str
    message: str
    node_id: str | None = None
    edge: str | None = None

    def render(self) -> str:
        where = self.node_id or self.edge
        return f"{self.code}: {self.message}" + (f" [{where}]" if where else "")

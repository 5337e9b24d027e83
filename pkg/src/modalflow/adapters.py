"""Adapter capabilities, configuration, and the invoking registry.

The capability catalog names every model-service operation the engine can
call, with its port signature and params. A registry binds operation names
to a configured backend and owns the retry loop.

Retry policy: attempts are capped at ``max_attempts``; the delay before
attempt ``n+1`` is ``base_delay_ms * multiplier**(n-1)`` scaled by a uniform
jitter factor in ``[1-jitter, 1+jitter]``. Only retriable faults re-enter
the loop (rate limits, timeouts, network faults, server-side 5xx); auth
failures and invalid input surface after exactly one attempt.

Credentials never appear in configs. A remote adapter config names an
environment variable (``auth_env``); the secret itself is read from the
process environment at call time.
"""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Protocol

from .errors import (
    AdapterError,
    AdapterErrorKind,
    ConfigError,
    DuplicateOperationError,
    SignatureMismatchError,
    UnknownOperationError,
)
from .ops import OperationSignature, ParamSpec, Port
from .payload import Modality, Payload


@dataclass(frozen=True)
class AdapterCapability:
    signature: OperationSignature

    @property
    def operation(self) -> str:
        return self.signature.name


def _cap(name: str, inputs, output: Modality, params: dict[str, ParamSpec] | None = None) -> AdapterCapability:
    return AdapterCapability(
        OperationSignature(name=name, inputs=tuple(inputs), output=output, params=params or {})
    )


CAPABILITIES: dict[str, AdapterCapability] = {
    c.operation: c
    for c in (
        _cap(
            "speech.transcribe",
            [Port("audio", Modality.AUDIO_CLIP)],
            Modality.TEXT,
            {"language": ParamSpec("str", default=None)},
        ),
        _cap(
            "speech.synthesize",
            [Port("text", Modality.TEXT)],
            Modality.AUDIO_CLIP,
            {"voice": ParamSpec("str", default="default"), "language": ParamSpec("str", default=None)},
        ),
        _cap(
            "language.translate",
            [Port("text", Modality.TEXT)],
            Modality.TEXT,
            {"source": ParamSpec("str", required=True), "target": ParamSpec("str", required=True)},
        ),
        _cap(
            "llm.complete",
            [Port("prompt", Modality.TEXT)],
            Modality.TEXT,
            {"max_tokens": ParamSpec("int", default=256), "temperature": ParamSpec("float", default=0.0)},
        ),
        _cap(
            "llm.chat",
            [Port("prompt", Modality.TEXT)],
            Modality.TEXT,
            {
                "system": ParamSpec("str", default=""),
                "max_tokens": ParamSpec("int", default=256),
                "temperature": ParamSpec("float", default=0.0),
            },
        ),
        _cap(
            "llm.summarize",
            [Port("text", Modality.TEXT)],
            Modality.TEXT,
            {"max_tokens": ParamSpec("int", default=256)},
        ),
        _cap("vision.describe", [Port("image", Modality.IMAGE_REF)], Modality.STRUCTURED_VISION),
        _cap("vision.embed_image", [Port("image", Modality.IMAGE_REF)], Modality.EMBEDDING),
        _cap(
            "vision.embed_video",
            [Port("video", Modality.VIDEO_REF)],
            Modality.EMBEDDING,
            {"max_frames": ParamSpec("int", default=16)},
        ),
        _cap("text.embed", [Port("text", Modality.TEXT)], Modality.EMBEDDING),
    )
}


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 4
    base_delay_ms: float = 250.0
    multiplier: float = 2.0
    jitter: float = 0.2

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be >= 1")
        if self.base_delay_ms < 0 or self.multiplier < 1.0 or not (0.0 <= self.jitter < 1.0):
            raise ConfigError("retry policy out of range")

    def delay_ms(self, attempt: int, rng: random.Random) -> float:
        """Delay after failed attempt number ``attempt`` (1-based)."""
        base = self.base_delay_ms * (self.multiplier ** (attempt - 1))
        return base * (1.0 + self.jitter * rng.uniform(-1.0, 1.0))


@dataclass(frozen=True)
class AdapterConfig:
    backend: str = "mock"  # "mock" or "remote"
    endpoint: str | None = None
    auth_env: str | None = None
    timeout_ms: int = 30000
    retry: RetryPolicy = field(default_factory=RetryPolicy)

    def __post_init__(self) -> None:
        if self.backend not in ("mock", "remote"):
            raise ConfigError(f"unknown backend kind {self.backend!r}")
        if self.timeout_ms <= 0:
            raise ConfigError("timeout_ms must be positive")
        if self.backend == "remote":
            if not self.endpoint:
                raise ConfigError("remote adapters need an endpoint")
            if not self.auth_env:
                raise ConfigError("remote adapters need auth_env naming an environment variable")


class Backend(Protocol):
    kind: str

    def call(self, operation: str, inputs: Mapping[str, Payload], params: Mapping[str, Any]) -> Payload: ...


@dataclass(frozen=True)
class InvokeOutcome:
    payload: Payload
    attempts: int
    backend_kind: str


@dataclass
class _Registration:
    capability: AdapterCapability
    config: AdapterConfig
    backend: Backend


class AdapterRegistry:
    """Thread-safe name-to-backend binding with the shared retry loop.

    ``sleeper`` and ``rng`` exist for tests: the default sleeper really
    sleeps; tests inject a recorder so retry schedules are assertable
    without waiting.
    """

    def __init__(
        self,
        *,
        sleeper: Callable[[float], None] | None = None,
        rng: random.Random | None = None,
    ) -> None:
        self._lock = threading.Lock()
        self._regs: dict[str, _Registration] = {}
        self._sleep = sleeper if sleeper is not None else lambda ms: time.sleep(ms / 1000.0)
        self._rng = rng if rng is not None else random.Random()

    def register(
        self,
        capability: AdapterCapability,
        config: AdapterConfig,
        backend: Backend,
        *,
        override: bool = False,
    ) -> None:
        with self._lock:
            if capability.operation in self._regs and not override:
                raise DuplicateOperationError(f"operation {capability.operation!r} already registered")
            self._regs[capability.operation] = _Registration(capability, config, backend)

    def operations(self) -> list[str]:
        with self._lock:
            return sorted(self._regs)

    def capability(self, operation: str) -> AdapterCapability:
        return self._registration(operation).capability

    def config(self, operation: str) -> AdapterConfig:
        return self._registration(operation).config

    def backend_kind(self, operation: str) -> str:
        return self._registration(operation).backend.kind

    def _registration(self, operation: str) -> _Registration:
        with self._lock:
            reg = self._regs.get(operation)
        if reg is None:
            raise UnknownOperationError(f"no adapter registered for operation {operation!r}")
        return reg

    def _check_inputs(self, sig: OperationSignature, inputs: Mapping[str, Payload]) -> None:
        assert sig.inputs is not None
        expected = {p.name for p in sig.inputs}
        given = set(inputs)
        if given != expected:
            raise SignatureMismatchError(
                f"operation {sig.name} takes inputs {sorted(expected)}, got {sorted(given)}"
            )
        for p in sig.inputs:
            payload = inputs[p.name]
            if not isinstance(payload, Payload):
                raise SignatureMismatchError(f"input {p.name} must be a Payload")
            if payload.modality != p.modality:
                raise SignatureMismatchError(
                    f"input {p.name} must be {p.modality.value}, got {payload.modality.value}"
                )

    def invoke_detailed(
        self,
        operation: str,
        inputs: Mapping[str, Payload],
        params: Mapping[str, Any] | None = None,
    ) -> InvokeOutcome:
        reg = self._registration(operation)
        sig = reg.capability.signature
        self._check_inputs(sig, inputs)
        resolved = sig.resolve_params(params)
        policy = reg.config.retry
        attempt = 0
        while True:
            attempt += 1
            try:
                payload = reg.backend.call(operation, inputs, resolved)
            except AdapterError as err:
                if not err.retriable or attempt >= policy.max_attempts:
                    err.attempts = attempt  # trace records how many tries were burned
                    raise
                self._sleep(policy.delay_ms(attempt, self._rng))
                continue
            if payload.modality != sig.output:
                raise AdapterError(
                    AdapterErrorKind.SERVICE_FAULT,
                    f"backend returned {payload.modality.value}, expected {sig.output.value}",
                    retriable=False,
                )
            return InvokeOutcome(payload=payload, attempts=attempt, backend_kind=reg.backend.kind)

    def invoke(
        self,
        operation: str,
        inputs: Mapping[str, Payload],
        params: Mapping[str, Any] | None = None,
    ) -> Payload:
        return self.invoke_detailed(operation, inputs, params).payload


def build_mock_registry(settings=None, **registry_kwargs) -> AdapterRegistry:
    """Registry with every cataloged operation bound to one shared mock backend."""
    from .mock_backend import MockBackend, MockSettings

    backend = MockBackend(settings or MockSettings())
    registry = AdapterRegistry(**registry_kwargs)
    config = AdapterConfig(backend="mock")
    for cap in CAPABILITIES.values():
        registry.register(cap, config, backend)
    return registry


def build_remote_registry(
    endpoint: str,
    auth_env: str,
    *,
    timeout_ms: int = 30000,
    retry: RetryPolicy | None = None,
    operations: list[str] | None = None,
    **registry_kwargs,
) -> AdapterRegistry:
    """Registry with cataloged operations bound to one remote endpoint."""
    from .remote_backend import RemoteBackend

    config = AdapterConfig(
        backend="remote",
        endpoint=endpoint,
        auth_env=auth_env,
        timeout_ms=timeout_ms,
        retry=retry or RetryPolicy(),
    )
    backend = RemoteBackend(config)
    registry = AdapterRegistry(**registry_kwargs)
    for name in operations or sorted(CAPABILITIES):
        registry.register(CAPABILITIES[name], config, backend)
    return registry

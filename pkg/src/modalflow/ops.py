"""Operation signatures: the shape contract shared by graph validation and invocation.

An operation (adapter capability or transform) declares named input ports
with modalities, one output modality, which ports accept fan-in, and a
params schema. Graph validation checks node wiring against these; invocation
checks actual params against the same schema so both paths agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from .errors import SignatureMismatchError
from .payload import Modality

_PARAM_KINDS = {
    "str": str,
    "int": int,
    "float": (int, float),
    "bool": bool,
    "list": (list, tuple),
    "any": object,
}


@dataclass(frozen=True)
class Port:
    name: str
    modality: Modality


@dataclass(frozen=True)
class ParamSpec:
    kind: str = "any"
    default: Any = None
    required: bool = False

    def check(self, name: str, value: Any) -> Any:
        expected = _PARAM_KINDS[self.kind]
        ok = isinstance(value, expected)
        if self.kind == "float" and isinstance(value, bool):
            ok = False
        if self.kind == "int" and isinstance(value, bool):
            ok = False
        if not ok:
            raise SignatureMismatchError(f"param {name} must be of kind {self.kind}, got {type(value).__name__}")
        return value


@dataclass(frozen=True)
class OperationSignature:
    """Port and param contract for one named operation.

    ``inputs=None`` marks a slot-driven operation (render_template): any set
    of text in-ports is acceptable and port names are meaningful to the op.
    """

    name: str
    inputs: tuple[Port, ...] | None
    output: Modality
    variadic: frozenset[str] = frozenset()
    params: Mapping[str, ParamSpec] = field(default_factory=dict)

    def resolve_params(self, given: Mapping[str, Any] | None) -> dict[str, Any]:
        """Merge defaults, reject unknown keys and wrong kinds."""
        given = dict(given or {})
        out: dict[str, Any] = {}
        for key in given:
            if key not in self.params:
                raise SignatureMismatchError(f"operation {self.name} has no param {key!r}")
        for key, spec in self.params.items():
            if key in given:
                out[key] = spec.check(key, given[key])
            elif spec.required:
                raise SignatureMismatchError(f"operation {self.name} requires param {key!r}")
            else:
                out[key] = spec.default
        return out

    def port(self, name: str) -> Port | None:
        if self.inputs is None:
            return Port(name, Modality.TEXT)
        for p in self.inputs:
            if p.name == name:
                return p
        return None

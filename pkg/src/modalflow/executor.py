"""Run a validated pipeline graph: scheduling, caching, tracing.

Execution walks the DAG with a bounded worker pool. A node becomes ready
only after every upstream node has succeeded, and ready nodes are submitted
in ascending node-id order, so a single-worker run follows the canonical
topological order exactly and any run satisfies: for every edge u->v, u's
Succeeded record precedes v's Running record in the trace.

Node lifecycle: Pending -> Running -> Succeeded | Failed, or Pending ->
Skipped when any upstream node failed or was skipped. Failure propagation
is the exact transitive closure of the failed node; independent branches
keep running (``fail_fast=True`` instead skips everything not yet started).

Results of adapter and transform nodes are memoized in a content-addressed
disk cache. The key hashes the operation name, the resolved params in
canonical JSON, the per-port content digests of the (coerced) inputs, and
the backend kind, so any change in code-visible behavior inputs produces a
different key. Entries are written atomically (temp file then rename) and a
corrupt entry reads as absent.

Each run appends to an in-memory trace with a strictly monotone ``seq``;
``write_trace`` persists it as ``<run_id>.trace.jsonl``, one record per line.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
import uuid
from concurrent.futures import FIRST_COMPLETED, Future, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

from .adapters import AdapterRegistry
from .errors import (
    MissingInputError,
    ModalflowError,
    ModalityMismatchError,
    RunFailedError,
    UnknownOperationError,
)
from .graph import EdgeSpec, NodeSpec, PipelineGraph
from .payload import Payload, coerce, content_hash, from_wire, to_wire
from .transforms import TRANSFORM_OPS, TransformOp

TRANSFORM_BACKEND_KIND = "transform"


class NodeState(str, Enum):
    PENDING = "Pending"
    RUNNING = "Running"
    SUCCEEDED = "Succeeded"
    FAILED = "Failed"
    SKIPPED = "Skipped"


@dataclass(frozen=True)
class TraceRecord:
    seq: int
    node_id: str
    state: NodeState
    ts: float
    input_digests: tuple[str, ...] = ()
    output_digest: str | None = None
    cache_hit: bool = False
    attempts: int = 0
    error: Mapping[str, str] | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "node_id": self.node_id,
            "state": self.state.value,
            "ts": self.ts,
            "input_digests": list(self.input_digests),
            "output_digest": self.output_digest,
            "cache_hit": self.cache_hit,
            "attempts": self.attempts,
            "error": dict(self.error) if self.error else None,
        }


@dataclass
class RunTrace:
    run_id: str
    records: list[TraceRecord] = field(default_factory=list)

    def for_node(self, node_id: str) -> list[TraceRecord]:
        return [r for r in self.records if r.node_id == node_id]

    def final_states(self) -> dict[str, NodeState]:
        out: dict[str, NodeState] = {}
        for r in self.records:
            out[r.node_id] = r.state
        return out


@dataclass
class RunResult:
    run_id: str
    outputs: dict[str, Payload]
    trace: RunTrace

    def states(self) -> dict[str, NodeState]:
        return self.trace.final_states()


def write_trace(trace: RunTrace, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{trace.run_id}.trace.jsonl"
    with open(path, "w", encoding="utf-8") as f:
        for record in trace.records:
            f.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")
    return path


# ---------------------------------------------------------------------------
# Cache


def cache_key(
    operation: str,
    params: Mapping[str, Any],
    input_digests: Mapping[str, Any],
    backend_kind: str,
) -> str:
    doc = {
        "backend": backend_kind,
        "inputs": input_digests,
        "operation": operation,
        "params": params,
    }
    blob = json.dumps(doc, sort_keys=True, ensure_ascii=False, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class CacheStore:
    """Content-addressed result cache; one JSON file per entry."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> Payload | None:
        path = self._path(key)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            return from_wire(doc["payload"])
        except FileNotFoundError:
            return None
        except (OSError, json.JSONDecodeError, KeyError, ModalflowError, TypeError):
            return None  # corrupt entries read as absent

    def put(self, key: str, operation: str, payload: Payload) -> None:
        doc = {"key": key, "operation": operation, "payload": to_wire(payload)}
        blob = json.dumps(doc, ensure_ascii=False)
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                f.write(blob)
            os.replace(tmp, self._path(key))
        except OSError:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise


# ---------------------------------------------------------------------------
# Execution


class _Tracer:
    def __init__(self, run_id: str) -> None:
        self.trace = RunTrace(run_id=run_id)
        self._lock = threading.Lock()
        self._seq = 0

    def record(self, node_id: str, state: NodeState, **kw: Any) -> None:
        with self._lock:
            self._seq += 1
            self.trace.records.append(TraceRecord(seq=self._seq, node_id=node_id, state=state, ts=time.time(), **kw))


@dataclass
class _NodeOutcome:
    payload: Payload | None
    digest: str | None
    input_digests: tuple[str, ...]
    cache_hit: bool
    attempts: int


def _gather_inputs(
    node: NodeSpec,
    incoming: list[EdgeSpec],
    outputs: Mapping[str, Payload],
    variadic: frozenset[str],
) -> tuple[dict[str, Payload | list[Payload]], dict[str, Any], tuple[str, ...]]:
    """Collect, coerce and digest this node's inputs.

    Fan-in arrives in ascending (source node id, source port) order. Returns
    the per-port values, the per-port digest map for the cache key, and the
    flat digest tuple for the trace.
    """
    gathered: dict[str, Payload | list[Payload]] = {}
    digest_map: dict[str, Any] = {}
    flat: list[str] = []
    for port in node.in_ports:
        edges = sorted(
            (e for e in incoming if e.to_port == port.name),
            key=lambda e: (e.from_node, e.from_port),
        )
        values = [coerce(outputs[e.from_node], port.modality) for e in edges]
        digests = [content_hash(v).hex for v in values]
        flat.extend(digests)
        if port.name in variadic:
            gathered[port.name] = values
            digest_map[port.name] = digests
        else:
            gathered[port.name] = values[0]
            digest_map[port.name] = digests[0]
    return gathered, digest_map, tuple(flat)


class _Runner:
    def __init__(
        self,
        graph: PipelineGraph,
        bindings: Mapping[str, Payload],
        registry: AdapterRegistry,
        transform_ops: Mapping[str, TransformOp],
        cache: CacheStore | None,
    ) -> None:
        self.graph = graph
        self.bindings = bindings
        self.registry = registry
        self.transform_ops = transform_ops
        self.cache = cache
        self.outputs: dict[str, Payload] = {}  # node id -> produced payload
        self._outputs_lock = threading.Lock()

    def run_node(self, node: NodeSpec, tracer: _Tracer) -> _NodeOutcome:
        if node.kind == "input":
            payload = self.bindings[node.id]
            return _NodeOutcome(payload, content_hash(payload).hex, (), False, 0)

        variadic: frozenset[str] = frozenset()
        if node.kind == "adapter":
            variadic = self.registry.capability(node.operation).signature.variadic
        elif node.kind == "transform":
            variadic = self.transform_ops[node.operation].signature.variadic

        with self._outputs_lock:
            snapshot = dict(self.outputs)
        gathered, digest_map, flat = _gather_inputs(node, self.graph.incoming(node.id), snapshot, variadic)

        if node.kind == "output":
            payload = gathered[node.in_ports[0].name]
            assert isinstance(payload, Payload)
            return _NodeOutcome(payload, content_hash(payload).hex, flat, False, 0)

        if node.kind == "adapter":
            sig = self.registry.capability(node.operation).signature
            params = sig.resolve_params(node.params)
            backend_kind = self.registry.backend_kind(node.operation)
        else:
            op = self.transform_ops[node.operation]
            sig = op.signature
            params = sig.resolve_params(node.params)
            backend_kind = TRANSFORM_BACKEND_KIND

        key = cache_key(node.operation, params, digest_map, backend_kind)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return _NodeOutcome(hit, content_hash(hit).hex, flat, True, 0)

        if node.kind == "adapter":
            outcome = self.registry.invoke_detailed(node.operation, gathered, node.params)
            payload, attempts = outcome.payload, outcome.attempts
        else:
            payload = self.transform_ops[node.operation].fn(gathered, params)
            attempts = 1

        if self.cache is not None:
            self.cache.put(key, node.operation, payload)
        return _NodeOutcome(payload, content_hash(payload).hex, flat, False, attempts)


def execute(
    graph: PipelineGraph,
    inputs: Mapping[str, Payload],
    *,
    registry: AdapterRegistry,
    transform_ops: Mapping[str, TransformOp] | None = None,
    max_parallel: int = 1,
    cache_dir: str | Path | None = None,
    run_id: str | None = None,
    fail_fast: bool = False,
) -> RunResult:
    """Execute ``graph`` with ``inputs`` bound to its input nodes.

    Returns a :class:`RunResult` mapping output-node ids to payloads.
    Raises :class:`RunFailedError` (carrying the trace and any completed
    outputs) when at least one node fails.
    """
    if max_parallel < 1:
        raise ValueError("max_parallel must be >= 1")
    transform_ops = dict(transform_ops) if transform_ops is not None else TRANSFORM_OPS

    input_ids = set(graph.input_ids())
    missing = sorted(input_ids - set(inputs))
    if missing:
        raise MissingInputError(f"no binding for input nodes: {', '.join(missing)}")
    unknown = sorted(set(inputs) - input_ids)
    if unknown:
        raise MissingInputError(f"bindings for unknown input nodes: {', '.join(unknown)}")
    for node_id in sorted(input_ids):
        node = graph.node(node_id)
        payload = inputs[node_id]
        want = node.out_ports[0].modality
        if payload.modality != want:
            raise ModalityMismatchError(
                f"input {node_id} expects {want.value}, binding is {payload.modality.value}"
            )
    for node in graph.nodes:
        if node.kind == "adapter":
            registry.capability(node.operation)  # raises UnknownOperationError if unregistered
        elif node.kind == "transform" and node.operation not in transform_ops:
            raise UnknownOperationError(f"node {node.id}: no transform named {node.operation!r}")

    tracer = _Tracer(run_id or uuid.uuid4().hex)
    cache = CacheStore(cache_dir) if cache_dir is not None else None
    runner = _Runner(graph, inputs, registry, transform_ops, cache)

    parents: dict[str, set[str]] = {n.id: set() for n in graph.nodes}
    children: dict[str, set[str]] = {n.id: set() for n in graph.nodes}
    for e in graph.edges:
        parents[e.to_node].add(e.from_node)
        children[e.from_node].add(e.to_node)

    states: dict[str, NodeState] = {n.id: NodeState.PENDING for n in graph.nodes}
    waiting = {nid: len(ps) for nid, ps in parents.items()}
    failed_any = False

    def mark_skipped_closure(root: str) -> None:
        stack = [c for c in children[root]]
        while stack:
            nid = stack.pop()
            if states[nid] in (NodeState.PENDING,):
                states[nid] = NodeState.SKIPPED
                tracer.record(nid, NodeState.SKIPPED)
                stack.extend(children[nid])

    with ThreadPoolExecutor(max_workers=max_parallel) as pool:
        futures: dict[Future, str] = {}

        def submit_ready(candidates) -> None:
            for nid in sorted(candidates):
                if states[nid] is NodeState.PENDING and waiting[nid] == 0:
                    if fail_fast and failed_any:
                        states[nid] = NodeState.SKIPPED
                        tracer.record(nid, NodeState.SKIPPED)
                        continue
                    node = graph.node(nid)
                    states[nid] = NodeState.RUNNING
                    if node.kind in ("adapter", "transform"):
                        tracer.record(nid, NodeState.RUNNING)
                    futures[pool.submit(runner.run_node, node, tracer)] = nid

        submit_ready(list(states))
        while futures:
            done, _ = wait(list(futures), return_when=FIRST_COMPLETED)
            ready_next: set[str] = set()
            for fut in done:
                nid = futures.pop(fut)
                err = fut.exception()
                if err is not None:
                    failed_any = True
                    states[nid] = NodeState.FAILED
                    kind = getattr(err, "kind", None)
                    tracer.record(
                        nid,
                        NodeState.FAILED,
                        error={
                            "kind": kind.value if kind is not None else type(err).__name__,
                            "detail": str(err),
                        },
                        attempts=getattr(err, "attempts", 0),
                    )
                    mark_skipped_closure(nid)
                    continue
                outcome: _NodeOutcome = fut.result()
                with runner._outputs_lock:
                    runner.outputs[nid] = outcome.payload
                states[nid] = NodeState.SUCCEEDED
                tracer.record(
                    nid,
                    NodeState.SUCCEEDED,
                    input_digests=outcome.input_digests,
                    output_digest=outcome.digest,
                    cache_hit=outcome.cache_hit,
                    attempts=outcome.attempts,
                )
                for child in children[nid]:
                    waiting[child] -= 1
                    ready_next.add(child)
            submit_ready(ready_next)

    # Under fail_fast some nodes never became ready; they count as skipped.
    for nid, state in states.items():
        if state is NodeState.PENDING:
            states[nid] = NodeState.SKIPPED
            tracer.record(nid, NodeState.SKIPPED)

    out_payloads = {nid: runner.outputs[nid] for nid in graph.output_ids() if nid in runner.outputs}
    result = RunResult(run_id=tracer.trace.run_id, outputs=out_payloads, trace=tracer.trace)
    if any(s is NodeState.FAILED for s in states.values()):
        failed = sorted(nid for nid, s in states.items() if s is NodeState.FAILED)
        raise RunFailedError(
            f"nodes failed: {', '.join(failed)}", trace=tracer.trace, outputs=out_payloads
        )
    return result

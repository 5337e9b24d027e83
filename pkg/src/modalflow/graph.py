"""Pipeline graphs: config parsing, validation, and deterministic ordering.

A pipeline is a directed acyclic graph of four node kinds:

* ``input``   - run-time binding point, one out_port, no operation
* ``adapter`` - calls a model-service operation from the adapter catalog
* ``transform`` - calls a pure operation from the transform catalog
* ``output``  - names a run result, one in_port

The JSON config document looks like::

    {"version": 1,
     "nodes": [{"id": "asr", "kind": "adapter", "operation": "speech.transcribe",
                "params": {}, "in_ports": [{"name": "audio", "modality": "audio_clip"}],
                "out_ports": [{"name": "text", "modality": "text"}]}, ...],
     "edges": [{"from": "src.audio", "to": "asr.audio"}, ...]}

``build_graph`` validates everything up front and returns an immutable
:class:`PipelineGraph`; nothing is checked lazily at run time. Validation
reports the most structural problem first: document shape, then dangling
references, then cycles, then operations and signatures, then edge modality
compatibility, then unbound ports and reachability.

Scheduling order is fully deterministic: Kahn's algorithm with ready nodes
drawn in ascending node-id order.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable, Mapping

from .errors import (
    CycleError,
    DanglingRefError,
    Diagnostic,
    MissingInputError,
    ModalityMismatchError,
    ParseError,
    SignatureMismatchError,
    UnknownOperationError,
    UnreachableNodeError,
)
from .ops import OperationSignature, Port
from .payload import Modality, can_coerce

_NAME_RE = re.compile(r"^[A-Za-z0-9_-]+$")

KINDS = ("input", "adapter", "transform", "output")


@dataclass(frozen=True)
class NodeSpec:
    id: str
    kind: str
    operation: str | None
    params: Mapping[str, Any]
    in_ports: tuple[Port, ...]
    out_ports: tuple[Port, ...]

    def in_port(self, name: str) -> Port | None:
        for p in self.in_ports:
            if p.name == name:
                return p
        return None

    def out_port(self, name: str) -> Port | None:
        for p in self.out_ports:
            if p.name == name:
                return p
        return None


@dataclass(frozen=True)
class EdgeSpec:
    from_node: str
    from_port: str
    to_node: str
    to_port: str

    def render(self) -> str:
        return f"{self.from_node}.{self.from_port} -> {self.to_node}.{self.to_port}"


@dataclass(frozen=True)
class PipelineGraph:
    version: int
    nodes: tuple[NodeSpec, ...]
    edges: tuple[EdgeSpec, ...]

    def node(self, node_id: str) -> NodeSpec:
        return self._by_id[node_id]

    @cached_property
    def _by_id(self) -> dict[str, NodeSpec]:
        return {n.id: n for n in self.nodes}

    def incoming(self, node_id: str) -> list[EdgeSpec]:
        return [e for e in self.edges if e.to_node == node_id]

    def outgoing(self, node_id: str) -> list[EdgeSpec]:
        return [e for e in self.edges if e.from_node == node_id]

    def input_ids(self) -> list[str]:
        return [n.id for n in self.nodes if n.kind == "input"]

    def output_ids(self) -> list[str]:
        return [n.id for n in self.nodes if n.kind == "output"]


# ---------------------------------------------------------------------------
# Parsing helpers


def _parse_port_list(raw: Any, node_id: str, side: str) -> tuple[Port, ...]:
    if not isinstance(raw, list):
        raise ParseError(f"node {node_id}: {side} must be a list")
    ports: list[Port] = []
    seen: set[str] = set()
    for item in raw:
        if not isinstance(item, dict) or "name" not in item or "modality" not in item:
            raise ParseError(f"node {node_id}: each {side} entry needs name and modality")
        name = item["name"]
        if not isinstance(name, str) or not _NAME_RE.match(name):
            raise ParseError(f"node {node_id}: bad port name {name!r}")
        if name in seen:
            raise ParseError(f"node {node_id}: duplicate {side} name {name!r}")
        seen.add(name)
        try:
            modality = Modality(item["modality"])
        except ValueError:
            raise ParseError(f"node {node_id}: unknown modality {item['modality']!r}") from None
        ports.append(Port(name, modality))
    return tuple(ports)


def _parse_endpoint(raw: Any, which: str) -> tuple[str, str]:
    if not isinstance(raw, str) or raw.count(".") != 1:
        raise ParseError(f"edge {which} endpoint must look like 'node.port', got {raw!r}")
    node, port = raw.split(".")
    if not node or not port:
        raise ParseError(f"edge {which} endpoint must look like 'node.port', got {raw!r}")
    return node, port


def _parse_nodes(doc: Mapping[str, Any]) -> tuple[NodeSpec, ...]:
    raw_nodes = doc.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise ParseError("config needs a non-empty 'nodes' list")
    nodes: list[NodeSpec] = []
    seen: set[str] = set()
    for raw in raw_nodes:
        if not isinstance(raw, dict):
            raise ParseError("each node must be an object")
        node_id = raw.get("id")
        if not isinstance(node_id, str) or not _NAME_RE.match(node_id):
            raise ParseError(f"bad node id {node_id!r} (letters, digits, _ and - only)")
        if node_id in seen:
            raise ParseError(f"duplicate node id {node_id!r}")
        seen.add(node_id)
        kind = raw.get("kind")
        if kind not in KINDS:
            raise ParseError(f"node {node_id}: unknown kind {kind!r}")
        operation = raw.get("operation")
        if kind in ("adapter", "transform"):
            if not isinstance(operation, str) or not operation:
                raise ParseError(f"node {node_id}: {kind} nodes need an operation name")
        elif operation is not None:
            raise ParseError(f"node {node_id}: {kind} nodes must not set an operation")
        params = raw.get("params", {})
        if not isinstance(params, dict):
            raise ParseError(f"node {node_id}: params must be an object")
        if kind in ("input", "output") and params:
            raise ParseError(f"node {node_id}: {kind} nodes take no params")
        in_ports = _parse_port_list(raw.get("in_ports", []), node_id, "in_ports")
        out_ports = _parse_port_list(raw.get("out_ports", []), node_id, "out_ports")
        nodes.append(NodeSpec(node_id, kind, operation, dict(params), in_ports, out_ports))
    return tuple(nodes)


def _find_cycle(node_ids: list[str], adj: Mapping[str, list[str]]) -> tuple[str, ...] | None:
    """Iterative DFS; returns the node ids on the first cycle found."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n: WHITE for n in node_ids}
    parent: dict[str, str] = {}
    for start in sorted(node_ids):
        if color[start] != WHITE:
            continue
        stack: list[tuple[str, Iterable[str]]] = [(start, iter(sorted(adj.get(start, ()))))]
        color[start] = GRAY
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    parent[nxt] = node
                    stack.append((nxt, iter(sorted(adj.get(nxt, ())))))
                    advanced = True
                    break
                if color[nxt] == GRAY:
                    cycle = [nxt]
                    cur = node
                    while cur != nxt:
                        cycle.append(cur)
                        cur = parent[cur]
                    return tuple(cycle)
            if not advanced:
                color[node] = BLACK
                stack.pop()
    return None


# ---------------------------------------------------------------------------
# Build and validate


def _default_catalog() -> dict[str, OperationSignature]:
    from .adapters import CAPABILITIES
    from .transforms import TRANSFORM_OPS

    catalog = {name: cap.signature for name, cap in CAPABILITIES.items()}
    catalog.update({name: op.signature for name, op in TRANSFORM_OPS.items()})
    return catalog


def _node_signature(node: NodeSpec, catalog: Mapping[str, OperationSignature]) -> OperationSignature:
    sig = catalog.get(node.operation or "")
    if sig is None:
        raise UnknownOperationError(f"node {node.id}: unknown operation {node.operation!r}")
    return sig


def _check_node_signature(node: NodeSpec, sig: OperationSignature) -> None:
    if len(node.out_ports) != 1:
        raise ParseError(f"node {node.id}: {node.kind} nodes declare exactly one out_port")
    if node.out_ports[0].modality != sig.output:
        raise ModalityMismatchError(
            f"node {node.id}: out_port {node.out_ports[0].name} is "
            f"{node.out_ports[0].modality.value}, operation {sig.name} produces {sig.output.value}"
        )
    if sig.inputs is None:
        # Slot-driven op: any non-empty set of text ports.
        if not node.in_ports:
            raise ParseError(f"node {node.id}: {sig.name} needs at least one in_port")
        for p in node.in_ports:
            if p.modality != Modality.TEXT:
                raise ModalityMismatchError(
                    f"node {node.id}: {sig.name} slots are text, port {p.name} is {p.modality.value}"
                )
        return
    declared = {p.name for p in node.in_ports}
    expected = {p.name for p in sig.inputs}
    if declared != expected:
        missing = sorted(expected - declared)
        extra = sorted(declared - expected)
        raise ParseError(
            f"node {node.id}: in_ports do not match operation {sig.name}"
            + (f"; missing {missing}" if missing else "")
            + (f"; unexpected {extra}" if extra else "")
        )
    for p in node.in_ports:
        want = sig.port(p.name)
        assert want is not None
        if p.modality != want.modality:
            raise ModalityMismatchError(
                f"node {node.id}: port {p.name} is {p.modality.value}, "
                f"operation {sig.name} expects {want.modality.value}"
            )


def build_graph(
    document: Mapping[str, Any],
    *,
    catalog: Mapping[str, OperationSignature] | None = None,
) -> PipelineGraph:
    """Parse and fully validate a pipeline config document.

    Raises a :class:`GraphValidationError` subclass describing the first
    problem found; returns an immutable graph otherwise. The input document
    is never mutated.
    """
    if not isinstance(document, Mapping):
        raise ParseError("config must be a JSON object")
    if document.get("version") != 1:
        raise ParseError(f"unsupported config version {document.get('version')!r}")

    nodes = _parse_nodes(document)
    by_id = {n.id: n for n in nodes}

    raw_edges = document.get("edges", [])
    if not isinstance(raw_edges, list):
        raise ParseError("'edges' must be a list")
    edges: list[EdgeSpec] = []
    for raw in raw_edges:
        if not isinstance(raw, dict) or "from" not in raw or "to" not in raw:
            raise ParseError("each edge needs 'from' and 'to'")
        fn, fp = _parse_endpoint(raw["from"], "from")
        tn, tp = _parse_endpoint(raw["to"], "to")
        edges.append(EdgeSpec(fn, fp, tn, tp))

    # Dangling references before anything topological.
    for e in edges:
        src = by_id.get(e.from_node)
        if src is None:
            raise DanglingRefError(f"edge {e.render()}: no node {e.from_node!r}")
        if src.out_port(e.from_port) is None:
            raise DanglingRefError(f"edge {e.render()}: node {e.from_node} has no out_port {e.from_port!r}")
        dst = by_id.get(e.to_node)
        if dst is None:
            raise DanglingRefError(f"edge {e.render()}: no node {e.to_node!r}")
        if dst.in_port(e.to_port) is None:
            raise DanglingRefError(f"edge {e.render()}: node {e.to_node} has no in_port {e.to_port!r}")

    adj: dict[str, list[str]] = {n.id: [] for n in nodes}
    for e in edges:
        adj[e.from_node].append(e.to_node)
    cycle = _find_cycle([n.id for n in nodes], adj)
    if cycle is not None:
        raise CycleError(cycle)

    ops = catalog if catalog is not None else _default_catalog()
    inputs_present = any(n.kind == "input" for n in nodes)
    outputs_present = any(n.kind == "output" for n in nodes)
    if not inputs_present:
        raise ParseError("pipeline needs at least one input node")
    if not outputs_present:
        raise ParseError("pipeline needs at least one output node")

    for n in nodes:
        if n.kind == "input":
            if n.in_ports or len(n.out_ports) != 1:
                raise ParseError(f"node {n.id}: input nodes have no in_ports and exactly one out_port")
        elif n.kind == "output":
            if n.out_ports or len(n.in_ports) != 1:
                raise ParseError(f"node {n.id}: output nodes have exactly one in_port and no out_ports")
        else:
            sig = _node_signature(n, ops)
            _check_node_signature(n, sig)
            try:
                sig.resolve_params(n.params)
            except SignatureMismatchError as err:
                raise ParseError(f"node {n.id}: {err}") from None

    # Edge modality compatibility under the closed coercion table.
    for e in edges:
        src_mod = by_id[e.from_node].out_port(e.from_port).modality
        dst_mod = by_id[e.to_node].in_port(e.to_port).modality
        if not can_coerce(src_mod, dst_mod):
            raise ModalityMismatchError(
                f"edge {e.render()}: {src_mod.value} does not flow into {dst_mod.value}"
            )

    # Port binding counts: fan-in only on variadic ports, nothing unbound.
    incoming_count: dict[tuple[str, str], int] = {}
    for e in edges:
        key = (e.to_node, e.to_port)
        incoming_count[key] = incoming_count.get(key, 0) + 1
    for n in nodes:
        if n.kind == "input":
            continue
        variadic: frozenset[str] = frozenset()
        if n.kind in ("adapter", "transform"):
            variadic = ops[n.operation].variadic
        for p in n.in_ports:
            count = incoming_count.get((n.id, p.name), 0)
            if count == 0:
                raise MissingInputError(f"node {n.id}: in_port {p.name} has no incoming edge")
            if count > 1 and p.name not in variadic:
                raise ParseError(f"node {n.id}: in_port {p.name} does not accept fan-in ({count} edges)")

    # Reachability: every node must sit on some input-to-output path.
    fwd: set[str] = set()
    frontier = [n.id for n in nodes if n.kind == "input"]
    while frontier:
        cur = frontier.pop()
        if cur in fwd:
            continue
        fwd.add(cur)
        frontier.extend(adj[cur])
    radj: dict[str, list[str]] = {n.id: [] for n in nodes}
    for e in edges:
        radj[e.to_node].append(e.from_node)
    bwd: set[str] = set()
    frontier = [n.id for n in nodes if n.kind == "output"]
    while frontier:
        cur = frontier.pop()
        if cur in bwd:
            continue
        bwd.add(cur)
        frontier.extend(radj[cur])
    for n in nodes:
        if n.id not in fwd or n.id not in bwd:
            raise UnreachableNodeError(f"node {n.id} is not on any input-to-output path")

    return PipelineGraph(version=1, nodes=nodes, edges=tuple(edges))


def topological_order(graph: PipelineGraph) -> list[str]:
    """Kahn's algorithm; ready set popped in ascending node-id order."""
    indeg: dict[str, int] = {n.id: 0 for n in graph.nodes}
    adj: dict[str, list[str]] = {n.id: [] for n in graph.nodes}
    seen_pairs: set[tuple[str, str]] = set()
    for e in graph.edges:
        # Parallel edges between the same nodes count once for ordering.
        if (e.from_node, e.to_node) in seen_pairs:
            continue
        seen_pairs.add((e.from_node, e.to_node))
        adj[e.from_node].append(e.to_node)
        indeg[e.to_node] += 1
    heap = sorted(n for n, d in indeg.items() if d == 0)
    heapq.heapify(heap)
    order: list[str] = []
    while heap:
        cur = heapq.heappop(heap)
        order.append(cur)
        for nxt in adj[cur]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(heap, nxt)
    if len(order) != len(graph.nodes):  # build_graph rejects cycles already
        raise CycleError(tuple(n for n, d in indeg.items() if d > 0))
    return order


def validate_types(graph: PipelineGraph) -> list[Diagnostic]:
    """Edge-by-edge modality report as data; empty list means clean."""
    out: list[Diagnostic] = []
    for e in graph.edges:
        src_mod = graph.node(e.from_node).out_port(e.from_port).modality
        dst_mod = graph.node(e.to_node).in_port(e.to_port).modality
        if not can_coerce(src_mod, dst_mod):
            out.append(
                Diagnostic(
                    code="modality-mismatch",
                    message=f"{src_mod.value} does not flow into {dst_mod.value}",
                    edge=e.render(),
                )
            )
    return out

from __future__ import annotations

import json
import threading
import time

import pytest

from modalflow.adapters import CAPABILITIES
from modalflow.errors import MissingInputError, ModalityMismatchError, RunFailedError
from modalflow.executor import NodeState, cache_key, execute, write_trace
from modalflow.graph import build_graph
from modalflow.ops import OperationSignature, Port
from modalflow.payload import Modality, Payload, content_hash
from modalflow.transforms import TRANSFORM_OPS, TransformOp


def node(node_id, kind, operation=None, params=None, in_ports=(), out_ports=()):
    return {
        "id": node_id,
        "kind": kind,
        **({"operation": operation} if operation else {}),
        **({"params": params} if params else {}),
        "in_ports": [{"name": n, "modality": m} for n, m in in_ports],
        "out_ports": [{"name": n, "modality": m} for n, m in out_ports],
    }


def edge(src, dst):
    return {"from": src, "to": dst}


def doc(nodes, edges):
    return {"version": 1, "nodes": nodes, "edges": edges}


def linear_graph():
    """src -> summarize -> translate -> dst"""
    return build_graph(
        doc(
            [
                node("src", "input", out_ports=[("text", "text")]),
                node(
                    "sum",
                    "adapter",
                    "llm.summarize",
                    in_ports=[("text", "text")],
                    out_ports=[("out", "text")],
                ),
                node(
                    "mt",
                    "adapter",
                    "language.translate",
                    params={"source": "en", "target": "de"},
                    in_ports=[("text", "text")],
                    out_ports=[("out", "text")],
                ),
                node("dst", "output", in_ports=[("text", "text")]),
            ],
            [
                edge("src.text", "sum.text"),
                edge("sum.out", "mt.text"),
                edge("mt.out", "dst.text"),
            ],
        )
    )


def first_seq(trace, node_id, state):
    for r in trace.records:
        if r.node_id == node_id and r.state is state:
            return r.seq
    raise AssertionError(f"no {state.value} record for {node_id}")


def test_linear_run_produces_outputs_and_trace(mock_registry):
    graph = linear_graph()
    result = execute(
        graph, {"src": Payload.text("One thing. Another.")}, registry=mock_registry
    )
    assert result.outputs["dst"].body.content == "One thing. |mt:en->de"
    assert result.states() == {
        "src": NodeState.SUCCEEDED,
        "sum": NodeState.SUCCEEDED,
        "mt": NodeState.SUCCEEDED,
        "dst": NodeState.SUCCEEDED,
    }
    seqs = [r.seq for r in result.trace.records]
    assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
    # inputs and outputs get a single terminal record; workers also log Running
    assert [r.state for r in result.trace.for_node("src")] == [NodeState.SUCCEEDED]
    assert [r.state for r in result.trace.for_node("sum")] == [
        NodeState.RUNNING,
        NodeState.SUCCEEDED,
    ]
    assert [r.state for r in result.trace.for_node("dst")] == [NodeState.SUCCEEDED]
    done = result.trace.for_node("mt")[-1]
    assert done.attempts == 1 and not done.cache_hit
    assert done.output_digest == content_hash(result.outputs["dst"]).hex


def test_same_inputs_same_digests_across_parallelism(mock_registry):
    graph = linear_graph()
    binding = {"src": Payload.text("Stable sentence. Tail.")}
    digests = set()
    for parallel in (1, 2, 8):
        for _ in range(3):
            result = execute(graph, binding, registry=mock_registry, max_parallel=parallel)
            digests.add(
                tuple(sorted((k, content_hash(v).hex) for k, v in result.outputs.items()))
            )
    assert len(digests) == 1


def diamond_graph():
    return build_graph(
        doc(
            [
                node("src", "input", out_ports=[("text", "text")]),
                node(
                    "a",
                    "adapter",
                    "llm.summarize",
                    in_ports=[("text", "text")],
                    out_ports=[("out", "text")],
                ),
                node(
                    "b",
                    "adapter",
                    "llm.summarize",
                    in_ports=[("text", "text")],
                    out_ports=[("out", "text")],
                ),
                node(
                    "join",
                    "transform",
                    "concat_text",
                    in_ports=[("parts", "text")],
                    out_ports=[("out", "text")],
                ),
                node("dst", "output", in_ports=[("text", "text")]),
            ],
            [
                edge("src.text", "a.text"),
                edge("src.text", "b.text"),
                edge("a.out", "join.parts"),
                edge("b.out", "join.parts"),
                edge("join.out", "dst.text"),
            ],
        )
    )


def test_parent_succeeds_before_child_runs(mock_registry):
    graph = diamond_graph()
    workers = {n.id for n in graph.nodes if n.kind in ("adapter", "transform")}
    for _ in range(10):
        result = execute(
            graph, {"src": Payload.text("Joined. Twice.")}, registry=mock_registry, max_parallel=8
        )
        for e in graph.edges:
            parent_done = first_seq(result.trace, e.from_node, NodeState.SUCCEEDED)
            child_state = NodeState.RUNNING if e.to_node in workers else NodeState.SUCCEEDED
            assert parent_done < first_seq(result.trace, e.to_node, child_state)


def test_variadic_fan_in_arrives_in_source_id_order(mock_registry):
    result = execute(
        diamond_graph(), {"src": Payload.text("Same. Again.")}, registry=mock_registry
    )
    # both branches summarize identically, joined with the default separator
    assert result.outputs["dst"].body.content == "Same.\nSame."


def two_branch_graph():
    """One branch transcribes audio, the other summarizes text."""
    return build_graph(
        doc(
            [
                node("in_text", "input", out_ports=[("text", "text")]),
                node("in_audio", "input", out_ports=[("audio", "audio_clip")]),
                node(
                    "sum",
                    "adapter",
                    "llm.summarize",
                    in_ports=[("text", "text")],
                    out_ports=[("out", "text")],
                ),
                node(
                    "asr",
                    "adapter",
                    "speech.transcribe",
                    in_ports=[("audio", "audio_clip")],
                    out_ports=[("out", "text")],
                ),
                node(
                    "mt",
                    "adapter",
                    "language.translate",
                    params={"source": "es", "target": "en"},
                    in_ports=[("text", "text")],
                    out_ports=[("out", "text")],
                ),
                node("out_text", "output", in_ports=[("text", "text")]),
                node("out_audio", "output", in_ports=[("text", "text")]),
            ],
            [
                edge("in_text.text", "sum.text"),
                edge("in_audio.audio", "asr.audio"),
                edge("asr.out", "mt.text"),
                edge("sum.out", "out_text.text"),
                edge("mt.out", "out_audio.text"),
            ],
        )
    )


def test_failure_skips_exactly_the_downstream_closure(mock_registry, tmp_path):
    orphan = tmp_path / "orphan.wav"  # no transcript sidecar: transcribe fails
    orphan.write_bytes(b"RIFFfake")
    bindings = {
        "in_text": Payload.text("Keep going. More."),
        "in_audio": Payload.audio(path=str(orphan)),
    }
    with pytest.raises(RunFailedError) as err:
        execute(two_branch_graph(), bindings, registry=mock_registry, max_parallel=4)
    states = err.value.trace.final_states()
    assert states["asr"] is NodeState.FAILED
    assert states["mt"] is NodeState.SKIPPED
    assert states["out_audio"] is NodeState.SKIPPED
    # the independent branch still completed
    assert states["sum"] is NodeState.SUCCEEDED
    assert states["out_text"] is NodeState.SUCCEEDED
    assert set(err.value.outputs) == {"out_text"}
    assert err.value.outputs["out_text"].body.content == "Keep going."
    failed = err.value.trace.for_node("asr")[-1]
    assert failed.error["kind"] == "InvalidInput"
    assert failed.attempts == 1


def _catalog_with(extra_sigs):
    catalog = {name: cap.signature for name, cap in CAPABILITIES.items()}
    catalog.update({name: op.signature for name, op in TRANSFORM_OPS.items()})
    catalog.update(extra_sigs)
    return catalog


def _identity_sig(name):
    return OperationSignature(
        name=name, inputs=(Port("text", Modality.TEXT),), output=Modality.TEXT
    )


def test_fail_fast_skips_branches_that_were_not_started(mock_registry):
    def delay(inputs, params):
        time.sleep(0.15)
        return inputs["text"]

    def boom(inputs, params):
        raise ValueError("boom")

    ops = dict(TRANSFORM_OPS)
    ops["t.delay"] = TransformOp(_identity_sig("t.delay"), delay)
    ops["t.boom"] = TransformOp(_identity_sig("t.boom"), boom)
    document = doc(
        [
            node("src", "input", out_ports=[("text", "text")]),
            node("boom", "transform", "t.boom", in_ports=[("text", "text")], out_ports=[("out", "text")]),
            node("slow", "transform", "t.delay", in_ports=[("text", "text")], out_ports=[("out", "text")]),
            node("slow2", "transform", "t.delay", in_ports=[("text", "text")], out_ports=[("out", "text")]),
            node("out_a", "output", in_ports=[("text", "text")]),
            node("out_b", "output", in_ports=[("text", "text")]),
        ],
        [
            edge("src.text", "boom.text"),
            edge("src.text", "slow.text"),
            edge("slow.out", "slow2.text"),
            edge("boom.out", "out_b.text"),
            edge("slow2.out", "out_a.text"),
        ],
    )
    graph = build_graph(document, catalog=_catalog_with({k: v.signature for k, v in ops.items()}))
    binding = {"src": Payload.text("x")}

    with pytest.raises(RunFailedError) as err:
        execute(graph, binding, registry=mock_registry, transform_ops=ops, max_parallel=4)
    lenient = err.value.trace.final_states()
    assert lenient["slow2"] is NodeState.SUCCEEDED  # independent branch ran to the end
    assert lenient["out_a"] is NodeState.SUCCEEDED

    with pytest.raises(RunFailedError) as err:
        execute(
            graph,
            binding,
            registry=mock_registry,
            transform_ops=ops,
            max_parallel=4,
            fail_fast=True,
        )
    eager = err.value.trace.final_states()
    assert eager["boom"] is NodeState.FAILED
    assert eager["slow2"] is NodeState.SKIPPED  # became ready after the failure
    assert eager["out_a"] is NodeState.SKIPPED
    failed = err.value.trace.for_node("boom")[-1]
    assert failed.error["kind"] == "ValueError"


def test_generic_failure_records_exception_type(mock_registry):
    # a transform error that is not an AdapterError still lands in the trace
    graph = build_graph(
        doc(
            [
                node("src", "input", out_ports=[("text", "text")]),
                node(
                    "tmpl",
                    "transform",
                    "render_template",
                    params={"template": "{absent}"},
                    in_ports=[("text", "text")],
                    out_ports=[("out", "text")],
                ),
                node("dst", "output", in_ports=[("text", "text")]),
            ],
            [edge("src.text", "tmpl.text"), edge("tmpl.out", "dst.text")],
        )
    )
    with pytest.raises(RunFailedError) as err:
        execute(graph, {"src": Payload.text("hi")}, registry=mock_registry)
    failed = err.value.trace.for_node("tmpl")[-1]
    assert failed.error["kind"] == "MissingSlotError"


def test_binding_validation(mock_registry):
    graph = linear_graph()
    with pytest.raises(MissingInputError):
        execute(graph, {}, registry=mock_registry)
    with pytest.raises(MissingInputError):
        execute(
            graph,
            {"src": Payload.text("x"), "ghost": Payload.text("y")},
            registry=mock_registry,
        )
    with pytest.raises(ModalityMismatchError):
        execute(graph, {"src": Payload.embedding([1.0])}, registry=mock_registry)


def test_output_edge_applies_coercion(mock_registry, tmp_path):
    img = tmp_path / "cat.png"
    img.write_bytes(b"\x89PNGfake")
    (tmp_path / "cat.png.vision.json").write_text(
        '{"caption": "a cat", "tags": ["pet"], "detections": [{"label": "cat", "box": [0,0,1,1]}]}',
        encoding="utf-8",
    )
    graph = build_graph(
        doc(
            [
                node("img", "input", out_ports=[("image", "image_ref")]),
                node(
                    "see",
                    "adapter",
                    "vision.describe",
                    in_ports=[("image", "image_ref")],
                    out_ports=[("out", "structured_vision")],
                ),
                node("dst", "output", in_ports=[("text", "text")]),
            ],
            [edge("img.image", "see.image"), edge("see.out", "dst.text")],
        )
    )
    result = execute(graph, {"img": Payload.image(str(img))}, registry=mock_registry)
    assert result.outputs["dst"].modality is Modality.TEXT
    assert result.outputs["dst"].body.content == "Image caption: a cat\nObjects: cat\nTags: pet"


def test_cache_second_run_is_all_hits(no_sleep_registry_factory, mock_backend_of, tmp_path):
    registry = no_sleep_registry_factory()
    backend = mock_backend_of(registry)
    graph = linear_graph()
    binding = {"src": Payload.text("Cache me. Please.")}
    cache_dir = tmp_path / "cache"

    first = execute(graph, binding, registry=registry, cache_dir=cache_dir)
    calls_after_first = sum(backend.calls.values())
    assert calls_after_first == 2  # sum + mt

    second = execute(graph, binding, registry=registry, cache_dir=cache_dir)
    assert sum(backend.calls.values()) == calls_after_first  # zero new backend calls
    for nid in ("sum", "mt"):
        done = second.trace.for_node(nid)[-1]
        assert done.cache_hit is True and done.attempts == 0
    assert content_hash(second.outputs["dst"]) == content_hash(first.outputs["dst"])
    assert not list(cache_dir.glob("*.tmp"))


def test_corrupt_cache_entries_are_recomputed(no_sleep_registry_factory, mock_backend_of, tmp_path):
    registry = no_sleep_registry_factory()
    backend = mock_backend_of(registry)
    graph = linear_graph()
    binding = {"src": Payload.text("Fragile. Entry.")}
    cache_dir = tmp_path / "cache"

    execute(graph, binding, registry=registry, cache_dir=cache_dir)
    before = sum(backend.calls.values())
    for entry in cache_dir.glob("*.json"):
        entry.write_text("{ not json", encoding="utf-8")

    result = execute(graph, binding, registry=registry, cache_dir=cache_dir)
    assert sum(backend.calls.values()) == before * 2  # everything recomputed
    assert result.outputs["dst"].body.content == "Fragile. |mt:en->de"
    assert all(not r.cache_hit for r in result.trace.records)

    again = execute(graph, binding, registry=registry, cache_dir=cache_dir)
    assert sum(backend.calls.values()) == before * 2  # repaired entries hit again
    assert again.trace.for_node("mt")[-1].cache_hit is True


def test_cache_key_ignores_dict_order_but_tracks_content():
    base = cache_key("op", {"a": 1, "b": 2}, {"x": "d1", "y": "d2"}, "mock")
    assert base == cache_key("op", {"b": 2, "a": 1}, {"y": "d2", "x": "d1"}, "mock")
    assert base != cache_key("op2", {"a": 1, "b": 2}, {"x": "d1", "y": "d2"}, "mock")
    assert base != cache_key("op", {"a": 1, "b": 3}, {"x": "d1", "y": "d2"}, "mock")
    assert base != cache_key("op", {"a": 1, "b": 2}, {"x": "d1", "y": "XX"}, "mock")
    assert base != cache_key("op", {"a": 1, "b": 2}, {"x": "d1", "y": "d2"}, "remote")


def test_worker_pool_respects_max_parallel(mock_registry):
    active = 0
    peak = 0
    lock = threading.Lock()

    def tracked(inputs, params):
        nonlocal active, peak
        with lock:
            active += 1
            peak = max(peak, active)
        time.sleep(0.05)
        with lock:
            active -= 1
        return inputs["text"]

    ops = dict(TRANSFORM_OPS)
    ops["t.track"] = TransformOp(_identity_sig("t.track"), tracked)
    nodes = [node("src", "input", out_ports=[("text", "text")])]
    edges = []
    for i in range(6):
        nodes.append(
            node(f"w{i}", "transform", "t.track", in_ports=[("text", "text")], out_ports=[("out", "text")])
        )
        nodes.append(node(f"o{i}", "output", in_ports=[("text", "text")]))
        edges.append(edge("src.text", f"w{i}.text"))
        edges.append(edge(f"w{i}.out", f"o{i}.text"))
    graph = build_graph(
        doc(nodes, edges), catalog=_catalog_with({"t.track": ops["t.track"].signature})
    )

    execute(graph, {"src": Payload.text("x")}, registry=mock_registry, transform_ops=ops, max_parallel=3)
    assert peak <= 3

    active = peak = 0
    execute(graph, {"src": Payload.text("x")}, registry=mock_registry, transform_ops=ops, max_parallel=6)
    assert 2 <= peak <= 6


def test_trace_file_round_trips(mock_registry, tmp_path):
    result = execute(
        linear_graph(),
        {"src": Payload.text("Persist. Me.")},
        registry=mock_registry,
        run_id="run42",
    )
    path = write_trace(result.trace, tmp_path)
    assert path.name == "run42.trace.jsonl"
    lines = path.read_text(encoding="utf-8").splitlines()
    docs = [json.loads(line) for line in lines]
    assert [d["seq"] for d in docs] == [r.seq for r in result.trace.records]
    assert docs[-1]["state"] == "Succeeded"
    assert all(set(d) == set(docs[0]) for d in docs)

"""Show the content-addressed cache skipping every backend on a rerun.

Run: python3 demos/03_caching_and_traces.py
"""

import tempfile
from pathlib import Path

from modalflow.adapters import build_mock_registry
from modalflow.executor import execute, write_trace
from modalflow.graph import build_graph
from modalflow.payload import Payload
from modalflow.pipelines import build_vqa_config


def make_scene(root: Path) -> Path:
    image = root / "scene.png"
    image.write_bytes(b"PNG-stand-in")
    Path(str(image) + ".vision.json").write_text(
        '{"caption": "a red kite over the beach", "tags": ["kite", "beach"],'
        ' "detections": [{"label": "kite", "box": [10, 10, 80, 60]}]}',
        encoding="utf-8",
    )
    return image


with tempfile.TemporaryDirectory() as scratch:
    root = Path(scratch)
    image = make_scene(root)
    graph = build_graph(build_vqa_config())
    registry = build_mock_registry()
    bindings = {
        "image": Payload.image(str(image)),
        "question": Payload.text("What color is the kite?"),
    }

    cache_dir = root / "cache"
    first = execute(graph, bindings, registry=registry, cache_dir=cache_dir, run_id="warm")
    second = execute(graph, bindings, registry=registry, cache_dir=cache_dir, run_id="cached")

    for label, run in (("first", first), ("second", second)):
        hits = sum(1 for r in run.trace.records if r.cache_hit)
        print(f"{label} run: {hits} cache hits, answer={run.outputs['answer'].body.content!r}")

    trace_path = write_trace(second.trace, root)
    print("\ntrace file:", trace_path.name)
    for line in trace_path.read_text(encoding="utf-8").splitlines()[:4]:
        print(" ", line)

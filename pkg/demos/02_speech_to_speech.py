"""Run the speech translation cascade end to end on mock services.

The mock speech backend reads transcripts from a ``<clip>.txt`` sidecar, so
the demo fabricates a tiny Spanish clip first.

Run: python3 demos/02_speech_to_speech.py
"""

import tempfile
from pathlib import Path

from modalflow.adapters import build_mock_registry
from modalflow.executor import execute
from modalflow.graph import build_graph
from modalflow.payload import Payload
from modalflow.pipelines import build_s2st_config

with tempfile.TemporaryDirectory() as scratch:
    clip = Path(scratch) / "greeting.wav"
    clip.write_bytes(b"RIFF-not-really-audio")
    Path(str(clip) + ".txt").write_text("hola desde la cabina de demos", encoding="utf-8")

    graph = build_graph(build_s2st_config("es", "en"))
    registry = build_mock_registry()
    result = execute(graph, {"src_audio": Payload.audio(path=str(clip))}, registry=registry)

    print("translated text :", result.outputs["text_out"].body.content)
    out_clip = result.outputs["audio_out"].body
    print("synthesized clip:", out_clip.path, f"({out_clip.language})")

    print("\ntrace:")
    for record in result.trace.records:
        print(f"  seq={record.seq:>2} {record.node_id:<12} {record.state.value}")

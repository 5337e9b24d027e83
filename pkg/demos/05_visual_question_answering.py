"""Answer a question about an image, with a scripted model for the reply.

Shows the prompt the vision block produces and how a scripted LLM fixture
pins the answer (the default mock would just echo the prompt).

Run: python3 demos/05_visual_question_answering.py
"""

import tempfile
from pathlib import Path

from modalflow.adapters import build_mock_registry
from modalflow.executor import execute
from modalflow.graph import build_graph
from modalflow.mock_backend import MockSettings, escape_line
from modalflow.payload import Payload
from modalflow.pipelines import build_vqa_config

with tempfile.TemporaryDirectory() as scratch:
    root = Path(scratch)
    image = root / "park.jpg"
    image.write_bytes(b"JPEG-stand-in")
    Path(str(image) + ".vision.json").write_text(
        '{"caption": "two children flying a kite", "tags": ["park", "kite"],'
        ' "detections": [{"label": "child", "box": [5, 5, 40, 90]},'
        ' {"label": "kite", "box": [60, 10, 90, 40]}]}',
        encoding="utf-8",
    )

    question = "How many children are there?"
    expected_prompt = (
        "Image caption: two children flying a kite\n"
        "Objects: child, kite\n"
        "Tags: park, kite\n"
        f"Question: {question}\nAnswer:"
    )
    script = root / "llm_script.txt"
    script.write_text(
        f"PROMPT: {escape_line(expected_prompt)}\nREPLY: two\n", encoding="utf-8"
    )

    registry = build_mock_registry(MockSettings(llm_script=script))
    graph = build_graph(build_vqa_config())
    result = execute(
        graph,
        {"image": Payload.image(str(image)), "question": Payload.text(question)},
        registry=registry,
    )

    print("prompt sent to the model:")
    print(expected_prompt)
    print("\nanswer:", result.outputs["answer"].body.content)

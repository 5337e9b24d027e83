"""Hold a short multimodal conversation with the agent service.

The second turn attaches an image; its caption and tags land in the prompt
as a vision block. A tight history budget forces the oldest turn out of the
third prompt, which the printout makes visible.

Run: python3 demos/06_agent_chat.py
"""

import tempfile
from pathlib import Path

from modalflow.adapters import build_mock_registry
from modalflow.agent import AgentConfig, AgentService
from modalflow.payload import Payload

with tempfile.TemporaryDirectory() as scratch:
    image = Path(scratch) / "whiteboard.png"
    image.write_bytes(b"PNG-stand-in")
    Path(str(image) + ".vision.json").write_text(
        '{"caption": "a whiteboard covered in boxes and arrows", "tags": ["diagram"],'
        ' "detections": []}',
        encoding="utf-8",
    )

    config = AgentConfig(system_prompt="Be brief.", history_char_budget=90)
    service = AgentService(build_mock_registry(), config)
    session = service.create_session()

    events = []
    service.add_listener(session.id, lambda name, data: events.append(name))

    first = service.post_turn(session.id, "Summarize our plan in one line.")
    print("reply 1:", first.reply)

    second = service.post_turn(
        session.id, "What is on this board?", image=Payload.image(str(image))
    )
    print("reply 2:", second.reply)

    third = service.post_turn(session.id, "Thanks!")
    print("\nthird prompt (note the truncated history):")
    print(third.prompt_used)

    print("\nevents observed:", events)
    print("turns stored:", len(service.history(session.id)))

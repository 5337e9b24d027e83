from __future__ import annotations

import threading
import time

import httpx
import pytest
import uvicorn
from fastapi.testclient import TestClient

from modalflow.agent import AgentConfig, AgentService
from modalflow.adapters import build_mock_registry
from modalflow.mock_backend import MockSettings, escape_line
from modalflow.server import create_app


def make_service(settings=None, **config_kw):
    registry = build_mock_registry(settings, sleeper=lambda ms: None)
    return AgentService(registry, AgentConfig(**config_kw))


@pytest.fixture()
def service():
    return make_service(system_prompt="SYS")


@pytest.fixture()
def client(service):
    return TestClient(create_app(service))


def test_health(client):
    r = client.get("/api/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_create_session_and_post_turn(client):
    created = client.post("/api/sessions", json={})
    assert created.status_code == 200
    sid = created.json()["session_id"]

    r = client.post(f"/api/sessions/{sid}/turns", json={"text": "hello there"})
    assert r.status_code == 200
    doc = r.json()
    assert doc["turn_index"] == 0
    assert doc["prompt_used"] == "SYS\nUser: hello there\nAssistant:"
    assert doc["reply"] == "ECHO: " + doc["prompt_used"][:64]

    h = client.get(f"/api/sessions/{sid}/history")
    assert h.status_code == 200
    turns = h.json()["turns"]
    assert len(turns) == 1
    assert set(turns[0]) == {"turn_index", "user_text", "assistant_text", "prompt_used", "had_image"}
    assert turns[0]["user_text"] == "hello there"
    assert turns[0]["had_image"] is False


def test_custom_system_prompt_flows_into_prompts(client):
    sid = client.post("/api/sessions", json={"system_prompt": "Be terse."}).json()["session_id"]
    r = client.post(f"/api/sessions/{sid}/turns", json={"text": "hi"})
    assert r.json()["prompt_used"].startswith("Be terse.\n")


def test_unknown_session_envelope(client):
    for method, url in [
        ("post", "/api/sessions/nope/turns"),
        ("get", "/api/sessions/nope/history"),
        ("get", "/api/sessions/nope/events"),
    ]:
        r = getattr(client, method)(url, **({"json": {"text": "x"}} if method == "post" else {}))
        assert r.status_code == 404
        assert r.json() == {"error": {"kind": "UnknownSession", "detail": r.json()["error"]["detail"]}}


def test_validation_error_uses_envelope(client):
    sid = client.post("/api/sessions", json={}).json()["session_id"]
    r = client.post(f"/api/sessions/{sid}/turns", json={"no_text": True})
    assert r.status_code == 422
    assert r.json()["error"]["kind"] == "InvalidRequest"


def test_busy_session_maps_to_409(service):
    client = TestClient(create_app(service))
    sid = client.post("/api/sessions", json={}).json()["session_id"]
    # hold the per-session lock to simulate an in-flight turn
    lock = service._session_locks[sid]
    assert lock.acquire(blocking=False)
    try:
        r = client.post(f"/api/sessions/{sid}/turns", json={"text": "hi"})
    finally:
        lock.release()
    assert r.status_code == 409
    assert r.json()["error"]["kind"] == "Busy"


def test_upstream_failure_maps_to_502(client, tmp_path):
    sid = client.post("/api/sessions", json={}).json()["session_id"]
    missing = tmp_path / "missing.png"
    r = client.post(
        f"/api/sessions/{sid}/turns", json={"text": "see", "image_path": str(missing)}
    )
    assert r.status_code == 502
    assert r.json()["error"]["kind"] == "UpstreamFailure"
    # nothing was recorded for the failed turn
    assert client.get(f"/api/sessions/{sid}/history").json()["turns"] == []


def test_event_stream_reports_turn_lifecycle(service):
    app = create_app(service)
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    try:
        deadline = time.time() + 10
        while not server.started:
            assert time.time() < deadline, "server never came up"
            time.sleep(0.01)
        port = server.servers[0].sockets[0].getsockname()[1]
        base = f"http://127.0.0.1:{port}"
        with httpx.Client(base_url=base, timeout=10) as client:
            sid = client.post("/api/sessions", json={}).json()["session_id"]
            seen: list[str] = []
            with client.stream("GET", f"/api/sessions/{sid}/events") as stream:
                # the listener is attached once headers are out, so a turn
                # posted now cannot be missed
                posted = client.post(f"/api/sessions/{sid}/turns", json={"text": "live"})
                assert posted.status_code == 200
                for line in stream.iter_lines():
                    if line.startswith("event: "):
                        seen.append(line[len("event: ") :])
                    if "turn_completed" in line:
                        break
        assert seen == ["turn_started", "turn_completed"]
    finally:
        server.should_exit = True
        thread.join(timeout=10)


def test_static_assets_served_when_present(service, tmp_path):
    (tmp_path / "index.html").write_text("<html><body>ui</body></html>", encoding="utf-8")
    with_ui = TestClient(create_app(service, static_dir=tmp_path))
    r = with_ui.get("/")
    assert r.status_code == 200
    assert "ui" in r.text
    assert with_ui.get("/api/health").status_code == 200

    without_ui = TestClient(create_app(service, static_dir=tmp_path / "absent"))
    assert without_ui.get("/").status_code == 404
    assert without_ui.get("/api/health").status_code == 200


def test_scripted_reply_round_trip(tmp_path):
    prompt = "SYS\nUser: ping\nAssistant:"
    service = make_service(
        MockSettings(llm_entries={escape_line(prompt): "pong"}), system_prompt="SYS"
    )
    client = TestClient(create_app(service))
    sid = client.post("/api/sessions", json={}).json()["session_id"]
    r = client.post(f"/api/sessions/{sid}/turns", json={"text": "ping"})
    assert r.json()["reply"] == "pong"

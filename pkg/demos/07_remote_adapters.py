"""Call a remote model service over HTTP, with the token taken from the
environment.

A stub server stands in for the real thing so the demo runs offline. The
registry config names the environment variable holding the credential; the
token itself never appears in the config and is read only when a call goes
out.

Run: python3 demos/07_remote_adapters.py
"""

import json
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from modalflow.adapters import build_remote_registry
from modalflow.payload import Payload


class StubService(BaseHTTPRequestHandler):
    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        print("  server saw auth:", self.headers.get("Authorization"))
        text = body["inputs"]["prompt"]["content"].upper()
        reply = {"output": {"modality": "text", "content": text, "language": None}}
        blob = json.dumps(reply).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(blob)))
        self.end_headers()
        self.wfile.write(blob)

    def log_message(self, *args):
        pass


server = ThreadingHTTPServer(("127.0.0.1", 0), StubService)
threading.Thread(target=server.serve_forever, daemon=True).start()
endpoint = f"http://127.0.0.1:{server.server_address[1]}/v1/invoke"

os.environ["DEMO_SERVICE_TOKEN"] = "demo-secret"
registry = build_remote_registry(endpoint, "DEMO_SERVICE_TOKEN")

result = registry.invoke("llm.complete", {"prompt": Payload.text("shout this")})
print("remote reply:", result.body.content)

server.shutdown()

"""Command-line front end: validate, run, eval, serve.

Exit codes: 0 success, 1 input/environment problems (unreadable files, bad
bindings, bad adapter spec), 2 pipeline validation failures, 3 a run whose
nodes failed. Every failure path prints exactly one ``ERROR ...`` line to
stderr.

Adapter spec (``--adapters``): the literal string ``mock`` for bare mocks,
or a path to a JSON file::

    {"backend": "mock", "llm_script": "script.txt",
     "embed_table": "table.json", "embed_dim": 8, "media_dir": "media"}

    {"backend": "remote", "endpoint": "https://svc/invoke",
     "auth_env": "MODALFLOW_TOKEN", "timeout_ms": 30000,
     "retry": {"max_attempts": 4, "base_delay_ms": 250.0,
               "multiplier": 2.0, "jitter": 0.2}}

Relative paths inside the file resolve against the file's directory. The
remote form names an environment variable for the bearer token; tokens
never live in the file itself.

Input bindings (``--input name=value``): the value may carry an explicit
tag (``text:hello``, ``audio:clip.wav``, ``image:x.png``,
``video:x.mp4``, ``json:{...payload doc...}``); a bare value is read
according to the input node's modality (text content, or a media path).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

from .adapters import AdapterRegistry, RetryPolicy, build_mock_registry, build_remote_registry
from .errors import (
    ConfigError,
    GraphValidationError,
    ModalflowError,
    RunFailedError,
)
from .executor import execute, write_trace
from .graph import PipelineGraph, build_graph
from .harness import load_manifest, run_task_eval, write_report
from .mock_backend import MockSettings
from .payload import Modality, Payload, content_hash, from_wire, to_wire

_EXIT_OK = 0
_EXIT_INPUT = 1
_EXIT_VALIDATION = 2
_EXIT_RUN_FAILED = 3


def _fail(code: int, err: Exception | str) -> int:
    name = type(err).__name__ if isinstance(err, Exception) else "Error"
    print(f"ERROR {name}: {err}", file=sys.stderr)
    return code


def _load_json(path: str) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _build_registry(spec: str) -> AdapterRegistry:
    if spec == "mock":
        return build_mock_registry()
    doc = _load_json(spec)
    if not isinstance(doc, dict):
        raise ConfigError("adapter spec must be a JSON object")
    base = Path(spec).parent
    backend = doc.get("backend", "mock")

    def resolve(key: str) -> str | None:
        value = doc.get(key)
        if value is None:
            return None
        p = Path(str(value))
        return str(p if p.is_absolute() else base / p)

    if backend == "mock":
        settings = MockSettings(
            llm_script=resolve("llm_script"),
            embed_table=resolve("embed_table"),
            embed_dim=int(doc.get("embed_dim", 8)),
            media_dir=resolve("media_dir"),
        )
        return build_mock_registry(settings)
    if backend == "remote":
        retry = RetryPolicy(**doc.get("retry", {}))
        return build_remote_registry(
            endpoint=str(doc["endpoint"]),
            auth_env=str(doc["auth_env"]),
            timeout_ms=int(doc.get("timeout_ms", 30000)),
            retry=retry,
        )
    raise ConfigError(f"unknown backend kind {backend!r}")


def _parse_binding(graph: PipelineGraph, raw: str) -> tuple[str, Payload]:
    if "=" not in raw:
        raise ConfigError(f"--input must look like name=value, got {raw!r}")
    name, value = raw.split("=", 1)
    node = next((n for n in graph.nodes if n.id == name and n.kind == "input"), None)
    if node is None:
        raise ConfigError(f"no input node named {name!r}")
    modality = node.out_ports[0].modality

    tag, _, rest = value.partition(":")
    if tag == "text":
        return name, Payload.text(rest)
    if tag == "audio":
        return name, Payload.audio(rest)
    if tag == "image":
        return name, Payload.image(rest)
    if tag == "video":
        return name, Payload.video(rest)
    if tag == "json":
        return name, from_wire(json.loads(rest))

    # Bare value: interpret according to the node's declared modality.
    if modality is Modality.TEXT:
        return name, Payload.text(value)
    if modality is Modality.AUDIO_CLIP:
        return name, Payload.audio(value)
    if modality is Modality.IMAGE_REF:
        return name, Payload.image(value)
    if modality is Modality.VIDEO_REF:
        return name, Payload.video(value)
    raise ConfigError(f"input {name}: pass an explicit json:payload for {modality.value}")


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        doc = _load_json(args.config)
    except (OSError, json.JSONDecodeError) as e:
        return _fail(_EXIT_INPUT, e)
    try:
        graph = build_graph(doc)
    except GraphValidationError as e:
        return _fail(_EXIT_VALIDATION, e)
    print(f"OK: {len(graph.nodes)} nodes, {len(graph.edges)} edges")
    return _EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        doc = _load_json(args.config)
        registry = _build_registry(args.adapters)
    except (OSError, json.JSONDecodeError, ModalflowError) as e:
        return _fail(_EXIT_INPUT, e)
    try:
        graph = build_graph(doc)
    except GraphValidationError as e:
        return _fail(_EXIT_VALIDATION, e)
    try:
        bindings = dict(_parse_binding(graph, raw) for raw in args.input or [])
    except (ModalflowError, json.JSONDecodeError) as e:
        return _fail(_EXIT_INPUT, e)

    try:
        result = execute(
            graph,
            bindings,
            registry=registry,
            max_parallel=args.max_parallel,
            cache_dir=args.cache_dir,
        )
    except RunFailedError as e:
        if args.trace_dir and e.trace is not None:
            write_trace(e.trace, args.trace_dir)
        return _fail(_EXIT_RUN_FAILED, e)
    except ModalflowError as e:
        return _fail(_EXIT_INPUT, e)

    print(f"run {result.run_id}: ok")
    for node_id in sorted(result.outputs):
        payload = result.outputs[node_id]
        digest = content_hash(payload).hex
        print(f"{node_id} {payload.modality.value} {digest}")
        if payload.modality is Modality.TEXT:
            print(f"  {payload.body.content}")
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for node_id, payload in result.outputs.items():
            (out_dir / f"{node_id}.json").write_text(
                json.dumps(to_wire(payload), ensure_ascii=False, indent=2), encoding="utf-8"
            )
            if payload.modality is Modality.TEXT:
                (out_dir / f"{node_id}.txt").write_text(payload.body.content, encoding="utf-8")
    if args.trace_dir:
        path = write_trace(result.trace, args.trace_dir)
        print(f"trace: {path}")
    return _EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    try:
        manifest = load_manifest(args.manifest)
        if manifest.task != args.task:
            raise ConfigError(f"manifest task is {manifest.task!r}, command asked for {args.task!r}")
        registry = _build_registry(args.adapters)
    except (OSError, json.JSONDecodeError, ModalflowError) as e:
        return _fail(_EXIT_INPUT, e)
    try:
        report = run_task_eval(
            manifest, registry, max_parallel=args.max_parallel, cache_dir=args.cache_dir
        )
    except GraphValidationError as e:
        return _fail(_EXIT_VALIDATION, e)
    except RunFailedError as e:
        return _fail(_EXIT_RUN_FAILED, e)
    except ModalflowError as e:
        return _fail(_EXIT_INPUT, e)
    print(f"task={report.task} items={report.item_count}")
    for key in sorted(report.metrics):
        print(f"{key}={report.metrics[key]}")
    if args.report:
        path = write_report(report, args.report)
        print(f"report: {path}")
    return _EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .agent import AgentConfig, AgentService
    from .server import create_app

    try:
        registry = _build_registry(args.adapters)
    except (OSError, json.JSONDecodeError, ModalflowError) as e:
        return _fail(_EXIT_INPUT, e)
    config = AgentConfig(system_prompt=args.system_prompt) if args.system_prompt else AgentConfig()
    app = create_app(AgentService(registry, config), static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return _EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--adapters", default="mock", help="'mock' or a JSON adapter spec file")
    p.add_argument("--cache-dir", default=None, help="content-addressed result cache directory")
    p.add_argument("--max-parallel", type=int, default=1, help="worker pool size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modalflow", description="Multimodal pipeline engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a pipeline config")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("run", help="execute a pipeline config")
    p.add_argument("--config", required=True)
    p.add_argument("--input", action="append", metavar="NAME=VALUE")
    p.add_argument("--out-dir", default=None, help="write output payloads here")
    p.add_argument("--trace-dir", default=None, help="write <run_id>.trace.jsonl here")
    _add_common(p)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("eval", help="run a task evaluation over a manifest")
    p.add_argument("--task", required=True, choices=("retrieval", "s2st", "vqa"))
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", default=None, help="write the metric report JSON here")
    _add_common(p)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("serve", help="serve the agent HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8600)
    p.add_argument("--static-dir", default=None, help="built UI assets to serve at /")
    p.add_argument("--system-prompt", default=None)
    p.add_argument("--adapters", default="mock")
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())

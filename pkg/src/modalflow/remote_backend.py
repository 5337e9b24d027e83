"""HTTP backend speaking the single-POST adapter wire protocol.

Request body::

    {"operation": "...", "params": {...}, "inputs": {"port": <payload doc>}}

Success response: ``{"output": <payload doc>}``. Failure response:
``{"error": {"kind": "...", "detail": "..."}}`` where kind is one of the
adapter fault kinds; the HTTP status decides retriability for 5xx faults.

The bearer token is read from the environment variable named in the config
at call time; configs never hold the secret itself.
"""

from __future__ import annotations

import os
from typing import Any, Mapping

import requests

from .adapters import AdapterConfig
from .errors import AdapterError, AdapterErrorKind, ConfigError
from .payload import Payload, from_wire, to_wire

_KIND_NAMES = {k.value: k for k in AdapterErrorKind}


class RemoteBackend:
    kind = "remote"

    def __init__(self, config: AdapterConfig, *, session: requests.Session | None = None) -> None:
        if config.backend != "remote":
            raise ConfigError("RemoteBackend needs a remote adapter config")
        self.config = config
        self._http = session or requests.Session()

    def _token(self) -> str:
        token = os.environ.get(self.config.auth_env or "")
        if not token:
            raise AdapterError(
                AdapterErrorKind.AUTH_FAILED,
                f"environment variable {self.config.auth_env} is unset or empty",
            )
        return token

    def call(self, operation: str, inputs: Mapping[str, Payload], params: Mapping[str, Any]) -> Payload:
        body = {
            "operation": operation,
            "params": dict(params),
            "inputs": {port: to_wire(p) for port, p in inputs.items()},
        }
        headers = {"Authorization": f"Bearer {self._token()}"}
        try:
            resp = self._http.post(
                self.config.endpoint,
                json=body,
                headers=headers,
                timeout=self.config.timeout_ms / 1000.0,
            )
        except requests.Timeout as e:
            raise AdapterError(AdapterErrorKind.TIMEOUT, f"request timed out: {e}") from e
        except requests.ConnectionError as e:
            raise AdapterError(AdapterErrorKind.NETWORK_ERROR, f"connection failed: {e}") from e
        except requests.RequestException as e:
            raise AdapterError(AdapterErrorKind.NETWORK_ERROR, f"request failed: {e}") from e

        try:
            doc = resp.json()
        except ValueError:
            doc = None

        if resp.status_code == 200 and isinstance(doc, dict) and "output" in doc:
            return from_wire(doc["output"])

        detail = ""
        kind: AdapterErrorKind | None = None
        if isinstance(doc, dict) and isinstance(doc.get("error"), dict):
            err = doc["error"]
            detail = str(err.get("detail", ""))
            kind = _KIND_NAMES.get(str(err.get("kind", "")))
        if kind is None:
            if resp.status_code == 401 or resp.status_code == 403:
                kind = AdapterErrorKind.AUTH_FAILED
            elif resp.status_code == 429:
                kind = AdapterErrorKind.RATE_LIMITED
            elif 400 <= resp.status_code < 500:
                kind = AdapterErrorKind.INVALID_INPUT
            else:
                kind = AdapterErrorKind.SERVICE_FAULT
        if not detail:
            detail = f"HTTP {resp.status_code}"
        retriable = None
        if kind is AdapterErrorKind.SERVICE_FAULT:
            retriable = resp.status_code >= 500
        raise AdapterError(kind, detail, retriable=retriable)

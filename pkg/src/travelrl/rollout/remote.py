"""Policy backed by a chat-style HTTP endpoint."""

from __future__ import annotations

import json
import os
import time
import urllib.error
import urllib.request
from typing import Any

import numpy as np

from .policy import Emission, Policy, PolicyTransportError
from .prompt import Message

TOKEN_ENV = "TRAVELRL_POLICY_TOKEN"


class RemotePolicy(Policy):
    """POSTs ``{"model", "messages", "temperature"}`` and reads the reply text.

    The reply may be ``{"content": ...}`` or the common
    ``{"choices": [{"message": {"content": ...}}]}`` shape. Only transport
    problems (connection errors, timeouts, 5xx) are retried; whatever text
    comes back is used as is, malformed or not.
    """

    name = "remote"

    def __init__(
        self,
        url: str,
        model: str = "policy",
        token: str | None = None,
        temperature: float = 1.0,
        timeout: float = 60.0,
        retries: int = 3,
        backoff: float = 0.5,
    ):
        self.url = url
        self.model = model
        self.token = token if token is not None else os.environ.get(TOKEN_ENV)
        self.temperature = temperature
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def _request(self, payload: dict[str, Any]) -> dict[str, Any]:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        req = urllib.request.Request(self.url, json.dumps(payload).encode(), headers, method="POST")
        last = "no attempt made"
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    return json.loads(resp.read().decode("utf-8"))
            except urllib.error.HTTPError as exc:
                last = f"HTTP {exc.code}"
                if exc.code < 500:
                    break
            except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
                last = str(getattr(exc, "reason", exc))
            except json.JSONDecodeError as exc:
                last = f"unreadable response body ({exc})"
                break
        raise PolicyTransportError(f"policy endpoint {self.url} failed: {last}")

    def next_emission(self, context: list[Message], rng: np.random.Generator) -> Emission:
        payload = {"model": self.model, "messages": context, "temperature": self.temperature,
                   "seed": int(rng.integers(2**31))}
        body = self._request(payload)
        if isinstance(body.get("content"), str):
            return Emission(body["content"])
        try:
            return Emission(str(body["choices"][0]["message"]["content"]))
        except (KeyError, IndexError, TypeError):
            raise PolicyTransportError("policy endpoint reply has no message content") from None

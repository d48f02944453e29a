"""Pluggable language-model clients: live chat-completions HTTP or scripted stub.

Every pipeline call runs at temperature 0 and is serializable, so a whole
session can be replayed bit-for-bit against a stub transcript. The stub is
strict: a request no transcript entry matches raises StubError rather than
inventing a response.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional


class LmError(Exception):
    """Any failure to obtain a usable model response."""


class StubError(LmError):
    """No stub transcript entry matched the request."""


@dataclass(frozen=True)
class Message:
    role: str  # system | user | assistant | tool
    content: str


@dataclass(frozen=True)
class ToolSchema:
    name: str
    description: str
    parameters: dict

    def wire(self) -> dict:
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": self.parameters,
            },
        }


@dataclass
class LmRequest:
    messages: list[Message]
    tools: list[ToolSchema] = field(default_factory=list)
    temperature: float = 0.0

    def text(self) -> str:
        """Flat rendering used for stub matching and digests."""
        parts = [f"[{m.role}]\n{m.content}" for m in self.messages]
        if self.tools:
            parts.append("[tools]\n" + ", ".join(t.name for t in self.tools))
        return "\n\n".join(parts)


@dataclass(frozen=True)
class FunctionCall:
    name: str
    arguments: dict


@dataclass
class LmResponse:
    text: str = ""
    call: Optional[FunctionCall] = None
    usage: dict = field(default_factory=dict)


class LiveLmClient:
    """Chat-completions wire shape over HTTP; endpoint and key from env or args."""

    def __init__(
        self,
        endpoint: Optional[str] = None,
        api_key: Optional[str] = None,
        model: Optional[str] = None,
        timeout: float = 120.0,
        http_client=None,
    ):
        self.endpoint = endpoint or os.environ.get("OPTEXPLAIN_LM_ENDPOINT", "")
        self.api_key = api_key or os.environ.get("OPTEXPLAIN_LM_KEY", "")
        self.model = model or os.environ.get("OPTEXPLAIN_LM_MODEL", "gpt-4o")
        self.timeout = timeout
        self._http = http_client  # injectable for tests
        if not self.endpoint:
            raise LmError(
                "no LM endpoint configured (set OPTEXPLAIN_LM_ENDPOINT)"
            )

    def complete(self, request: LmRequest) -> LmResponse:
        import httpx

        body = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
        }
        if request.tools:
            body["tools"] = [t.wire() for t in request.tools]
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            poster = self._http.post if self._http is not None else httpx.post
            resp = poster(self.endpoint, json=body, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            data = resp.json()
        except Exception as exc:  # noqa: BLE001 - network layer, report as LmError
            raise LmError(f"LM request failed: {exc}") from exc
        return self._parse(data)

    @staticmethod
    def _parse(data: dict) -> LmResponse:
        try:
            choice = data["choices"][0]
            message = choice["message"]
        except (KeyError, IndexError, TypeError) as exc:
            raise LmError(f"malformed LM response: {data!r}") from exc
        usage = data.get("usage", {}) or {}
        calls = message.get("tool_calls") or []
        if calls:
            fn = calls[0].get("function", {})
            try:
                args = json.loads(fn.get("arguments", "{}"))
            except json.JSONDecodeError:
                args = {}
            return LmResponse(
                text=message.get("content") or "",
                call=FunctionCall(fn.get("name", ""), args),
                usage=usage,
            )
        return LmResponse(text=message.get("content") or "", usage=usage)


@dataclass
class StubEntry:
    match: Optional[str] = None  # substring of the rendered request
    turn: Optional[int] = None  # 0-based request ordinal
    respond: Optional[str] = None
    respond_call: Optional[dict] = None

    @staticmethod
    def from_json(obj: dict) -> "StubEntry":
        entry = StubEntry(
            match=obj.get("match"),
            turn=obj.get("turn"),
            respond=obj.get("respond"),
            respond_call=obj.get("respond_call"),
        )
        if entry.match is None and entry.turn is None:
            raise ValueError("stub entry needs 'match' or 'turn'")
        if entry.respond is None and entry.respond_call is None:
            raise ValueError("stub entry needs 'respond' or 'respond_call'")
        return entry


class StubLmClient:
    """Deterministic transcript playback.

    Entries are consumed in order: each request takes the first unconsumed
    entry whose `match` substring occurs in the rendered request (or whose
    `turn` equals the ordinal of the request). An unmatched request is a
    loud StubError, never a silent default.
    """

    def __init__(self, entries: list[StubEntry]):
        self.entries = list(entries)
        self.consumed = [False] * len(self.entries)
        self.requests_seen = 0
        self.log: list[tuple[str, str]] = []

    @staticmethod
    def from_path(path: str) -> "StubLmClient":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                try:
                    entries.append(StubEntry.from_json(json.loads(line)))
                except (json.JSONDecodeError, ValueError) as exc:
                    raise ValueError(f"{path}:{line_no}: bad stub entry: {exc}") from exc
        return StubLmClient(entries)

    def complete(self, request: LmRequest) -> LmResponse:
        rendered = request.text()
        ordinal = self.requests_seen
        self.requests_seen += 1
        for i, entry in enumerate(self.entries):
            if self.consumed[i]:
                continue
            hit = (entry.match is not None and entry.match in rendered) or (
                entry.turn is not None and entry.turn == ordinal
            )
            if not hit:
                continue
            self.consumed[i] = True
            if entry.respond_call is not None:
                call = FunctionCall(
                    entry.respond_call.get("name", ""),
                    entry.respond_call.get("arguments", {}) or {},
                )
                self.log.append((rendered, f"call:{call.name}"))
                return LmResponse(call=call)
            self.log.append((rendered, entry.respond or ""))
            return LmResponse(text=entry.respond or "")
        head = rendered.splitlines()[0] if rendered else ""
        raise StubError(
            f"no stub entry matched request #{ordinal} (starts with {head!r})"
        )

"""Wire format: request validation and response construction.

One JSON object per line. A response echoes the request id and carries
exactly one of ``result`` or ``error``; every response carries ``proto``.
Request-level failures produce error responses, never a dead server.
"""

from __future__ import annotations

import json
from typing import Any

from . import PROTO_VERSION

OPS = ("health", "embed_question", "embed_image", "score_pair", "extract_span")

REQUIRED_FIELDS = {
    "health": (),
    "embed_question": ("question",),
    "embed_image": ("image",),
    "score_pair": ("question", "context"),
    "extract_span": ("question", "context"),
}


class RequestError(ValueError):
    """Carries the protocol error code and, when parseable, the request id."""

    def __init__(self, code: str, message: str, request_id: int | None = None):
        super().__init__(message)
        self.code = code
        self.request_id = request_id


def parse_request(line: str) -> dict:
    """Validate one request line; raises RequestError with a protocol code."""
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as e:
        raise RequestError("bad_request", f"invalid JSON: {e}") from e
    if not isinstance(msg, dict):
        raise RequestError("bad_request", "request must be a JSON object")
    if not isinstance(msg.get("id"), int):
        raise RequestError("bad_request", "missing or non-integer 'id'")
    rid = msg["id"]
    op = msg.get("op")
    if op not in OPS:
        raise RequestError("bad_op", f"unknown op {op!r}", request_id=rid)
    for field in REQUIRED_FIELDS[op]:
        if not isinstance(msg.get(field), str):
            raise RequestError(
                "bad_request", f"op {op!r} requires string field {field!r}", request_id=rid
            )
    return msg


def ok_response(request_id: int, result: Any) -> str:
    return json.dumps(
        {"id": request_id, "proto": PROTO_VERSION, "result": result}, ensure_ascii=False
    )


def error_response(request_id: int | None, code: str, message: str) -> str:
    return json.dumps(
        {"id": request_id, "proto": PROTO_VERSION, "error": {"code": code, "message": message}},
        ensure_ascii=False,
    )

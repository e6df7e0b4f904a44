"""Long-running NDJSON responder over stdio or TCP.

Requests are handled serially; every request gets exactly one response and
request-level errors (bad JSON, bad op, backend failure) never terminate
the server. Responses are validated against the protocol invariants before
they leave the process.
"""

from __future__ import annotations

import socket
import sys

from .protocol import RequestError, error_response, ok_response, parse_request


def _validated_result(model, msg: dict):
    op = msg["op"]
    if op == "health":
        return model.health()
    if op == "embed_question":
        vec = model.embed_question(msg["question"])
        if len(vec) != model.question_dim:
            raise RuntimeError(f"backend returned {len(vec)}-dim question vector")
        return vec
    if op == "embed_image":
        vec = model.embed_image(msg["image"])
        if len(vec) != model.image_dim:
            raise RuntimeError(f"backend returned {len(vec)}-dim image vector")
        return vec
    if op == "score_pair":
        score = float(model.score_pair(msg["question"], msg["context"]))
        if not 0.0 <= score <= 1.0:
            raise RuntimeError(f"backend score {score} outside [0, 1]")
        return score
    if op == "extract_span":
        span = model.extract_span(msg["question"], msg["context"])
        n = len(msg["context"].split())
        if n and not (0 <= span["start"] <= span["end"] < n):
            raise RuntimeError(f"backend span {span} outside context bounds")
        return span
    raise RequestError("bad_op", f"unknown op {op!r}")


def handle_line(model, line: str) -> str:
    """One request line in, one response line out (no trailing newline)."""
    try:
        msg = parse_request(line)
    except RequestError as e:
        return error_response(e.request_id, e.code, str(e))
    try:
        return ok_response(msg["id"], _validated_result(model, msg))
    except RequestError as e:
        return error_response(msg["id"], e.code, str(e))
    except Exception as e:
        return error_response(msg["id"], "model_error", str(e))


def serve_stdio(model, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(handle_line(model, line) + "\n")
        stdout.flush()


def serve_tcp(model, host: str = "127.0.0.1", port: int = 0) -> None:
    server = socket.socket()
    server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    server.bind((host, port))
    server.listen(1)
    actual_port = server.getsockname()[1]
    print(f"scorer-sidecar listening on {host}:{actual_port}", file=sys.stderr, flush=True)
    while True:
        conn, _ = server.accept()
        reader = conn.makefile("r", encoding="utf-8")
        writer = conn.makefile("w", encoding="utf-8")
        try:
            for line in reader:
                if not line.strip():
                    continue
                writer.write(handle_line(model, line) + "\n")
                writer.flush()
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            conn.close()

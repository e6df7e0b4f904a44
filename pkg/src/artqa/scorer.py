"""Client for the external scorer protocol (NDJSON over TCP or stdio).

An external scorer process serves transformer-grade question/image
embeddings, sentence-pair relevance scores, and extractive spans. The
primary pipeline works fully without one; when an endpoint is configured
the provider and scoring hooks below slot into the selector, reranker and
extractor through their normal interfaces.

Wire format: one JSON object per line. Requests carry ``id`` (integer),
``op`` (``health`` | ``embed_question`` | ``embed_image`` | ``score_pair``
| ``extract_span``) and op-specific payload fields. Responses echo ``id``
and carry exactly one of ``result`` or ``error``. See
``docs/scorer_protocol.md``.
"""

from __future__ import annotations

import json
import shlex
import socket
import subprocess
from pathlib import Path

import numpy as np

from .corpus import Painting


class ScorerError(RuntimeError):
    """Protocol failure or error response from the external scorer."""


class ScorerClient:
    """Blocking NDJSON client. ``endpoint`` is ``tcp://host:port`` or
    ``stdio:<command line>`` (the command is spawned as a child process)."""

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint
        self._next_id = 0
        self._pending: dict[int, dict] = {}
        self._proc: subprocess.Popen | None = None
        self._sock: socket.socket | None = None
        if endpoint.startswith("tcp://"):
            host, _, port = endpoint[len("tcp://") :].partition(":")
            self._sock = socket.create_connection((host, int(port)), timeout=timeout)
            self._reader = self._sock.makefile("r", encoding="utf-8")
            self._writer = self._sock.makefile("w", encoding="utf-8")
        elif endpoint.startswith("stdio:"):
            cmd = shlex.split(endpoint[len("stdio:") :])
            self._proc = subprocess.Popen(
                cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
            )
            self._reader = self._proc.stdout
            self._writer = self._proc.stdin
        else:
            raise ValueError(f"unsupported scorer endpoint {endpoint!r}")

    def close(self) -> None:
        try:
            if self._sock is not None:
                self._sock.close()
            if self._proc is not None:
                self._proc.stdin.close()
                self._proc.terminate()
                self._proc.wait(timeout=5)
        except Exception:
            pass

    def __enter__(self) -> "ScorerClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def request(self, op: str, **payload) -> dict:
        self._next_id += 1
        rid = self._next_id
        line = json.dumps({"id": rid, "op": op, **payload}, ensure_ascii=False)
        self._writer.write(line + "\n")
        self._writer.flush()
        # responses may interleave; ids resolve the pairing
        while rid not in self._pending:
            raw = self._reader.readline()
            if not raw:
                raise ScorerError(f"scorer connection closed while waiting for id {rid}")
            try:
                msg = json.loads(raw)
            except json.JSONDecodeError as e:
                raise ScorerError(f"scorer sent invalid JSON: {raw[:120]!r}") from e
            self._pending[int(msg.get("id", -1))] = msg
        msg = self._pending.pop(rid)
        if msg.get("error") is not None:
            err = msg["error"]
            raise ScorerError(f"scorer error {err.get('code')}: {err.get('message')}")
        return msg["result"]

    def health(self) -> dict:
        return self.request("health")

    def embed_question(self, text: str) -> np.ndarray:
        return np.asarray(self.request("embed_question", question=text), dtype=np.float64)

    def embed_image(self, image_ref: str) -> np.ndarray:
        return np.asarray(self.request("embed_image", image=image_ref), dtype=np.float64)

    def score_pair(self, question: str, context: str) -> float:
        return float(self.request("score_pair", question=question, context=context))

    def extract_span(self, question: str, context: str) -> tuple[int, int, str]:
        r = self.request("extract_span", question=question, context=context)
        return int(r["start"]), int(r["end"]), str(r["text"])


class ScorerFeatureProvider:
    """FeatureProvider backed by an external scorer's embedding ops."""

    def __init__(self, client: ScorerClient):
        self._client = client
        info = client.health()
        self.question_dim = int(info["question_dim"])
        self.image_dim = int(info["image_dim"])
        self.provider_id = f"scorer:{info.get('model', 'unknown')}"

    def featurize_question(self, text: str) -> np.ndarray:
        vec = self._client.embed_question(text)
        if len(vec) != self.question_dim:
            raise ScorerError(f"scorer returned {len(vec)}-dim question vector")
        return vec

    def featurize_painting(self, painting: Painting | None) -> np.ndarray:
        if painting is None:
            return np.zeros(self.image_dim, dtype=np.float64)
        ref = painting.image_ref or painting.id
        vec = self._client.embed_image(str(Path(ref)))
        if len(vec) != self.image_dim:
            raise ScorerError(f"scorer returned {len(vec)}-dim image vector")
        return vec

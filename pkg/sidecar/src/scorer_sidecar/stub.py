"""No-model stub backend: seeded hash embeddings and lexical scores.

Every operation is a pure function of (seed, inputs), so transcripts replay
bit-exactly on any machine. Embeddings are unit-norm vectors drawn from a
generator seeded by a keyed hash of the input text; pair scores are token
Jaccard overlap; spans pick the first context token absent from the
question.
"""

from __future__ import annotations

import hashlib
import re
import struct

import numpy as np

from . import IMAGE_DIM, QUESTION_DIM

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def _tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class StubModel:
    mode = "stub"
    model_id = "stub-hash-v1"
    question_dim = QUESTION_DIM
    image_dim = IMAGE_DIM

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._key = struct.pack("<q", seed)

    def _vector(self, kind: str, text: str, dim: int) -> list[float]:
        digest = hashlib.blake2b(
            f"{kind}\x00{text}".encode("utf-8"), digest_size=8, key=self._key
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        vec = rng.standard_normal(dim)
        vec /= np.linalg.norm(vec)
        return [float(x) for x in vec]

    def embed_question(self, question: str) -> list[float]:
        return self._vector("question", question, self.question_dim)

    def embed_image(self, image_ref: str) -> list[float]:
        return self._vector("image", image_ref, self.image_dim)

    def score_pair(self, question: str, context: str) -> float:
        q, c = set(_tokens(question)), set(_tokens(context))
        if not q or not c:
            return 0.0
        return len(q & c) / len(q | c)

    def extract_span(self, question: str, context: str) -> dict:
        tokens = context.split()
        if not tokens:
            return {"start": 0, "end": 0, "text": ""}
        question_tokens = set(_tokens(question))
        for i, tok in enumerate(tokens):
            if not set(_tokens(tok)) <= question_tokens:
                return {"start": i, "end": i, "text": tok}
        return {"start": 0, "end": 0, "text": tokens[0]}

    def health(self) -> dict:
        return {
            "model": self.model_id,
            "mode": self.mode,
            "seed": self.seed,
            "question_dim": self.question_dim,
            "image_dim": self.image_dim,
        }

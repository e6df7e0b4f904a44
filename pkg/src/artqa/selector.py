"""Modality routing: classify each question as visual or knowledge-based.

The classifier is a logistic regression over a concatenated
[question features; painting features] vector. Feature providers are
pluggable: the built-in fallback hashes a bag of words into 1024 dims and
reads image histograms into 2048 dims (zeros when no image is available),
matching the dimensions of transformer/CNN encoders so models stay
interchangeable with sidecar- or file-provided embeddings.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .corpus import Corpus, Painting
from .linear import TrainConfig, sgd_logistic, sigmoid
from .textpipe import tokenize

QUESTION_DIM = 1024
IMAGE_DIM = 2048


class FeatureProvider(Protocol):
    provider_id: str
    question_dim: int
    image_dim: int

    def featurize_question(self, text: str) -> np.ndarray: ...

    def featurize_painting(self, painting: Painting | None) -> np.ndarray: ...


class HashedFeatureProvider:
    """Deterministic fallback featurizer. Questions: seeded hashed bag of
    words, L2-normalized. Paintings: RGB histogram zero-padded to the image
    dimension when the referenced image file is readable, zeros otherwise."""

    def __init__(self, seed: int = 0, question_dim: int = QUESTION_DIM, image_dim: int = IMAGE_DIM):
        self.seed = seed
        self.question_dim = question_dim
        self.image_dim = image_dim
        self.provider_id = f"hashed-bow-v1:{seed}"
        self._key = struct.pack("<q", seed)

    def _bucket(self, token: str) -> int:
        h = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key).digest()
        return int.from_bytes(h, "little") % self.question_dim

    def featurize_question(self, text: str) -> np.ndarray:
        vec = np.zeros(self.question_dim, dtype=np.float64)
        for tok in tokenize(text):
            vec[self._bucket(tok)] += 1.0
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def featurize_painting(self, painting: Painting | None) -> np.ndarray:
        vec = np.zeros(self.image_dim, dtype=np.float64)
        if painting is None or not painting.image_ref:
            return vec
        path = Path(painting.image_ref)
        if not path.is_file():
            return vec
        try:
            from PIL import Image  # optional; zeros when unavailable

            with Image.open(path) as im:
                hist = np.asarray(im.convert("RGB").histogram(), dtype=np.float64)
        except Exception:
            return vec
        hist = hist / max(hist.sum(), 1.0)
        vec[: min(len(hist), self.image_dim)] = hist[: self.image_dim]
        return vec


class FileEmbeddingProvider:
    """Reads precomputed embeddings: one ``id<TAB>float,float,...`` per line.
    Question vectors are keyed by the sha256 hex digest of the raw UTF-8
    question text, painting vectors by painting id."""

    def __init__(
        self,
        question_path: str | Path,
        image_path: str | Path | None = None,
        question_dim: int = QUESTION_DIM,
        image_dim: int = IMAGE_DIM,
    ):
        self.question_dim = question_dim
        self.image_dim = image_dim
        self.provider_id = "embedding-files-v1"
        self._questions = _read_embedding_file(question_path, question_dim)
        self._images = _read_embedding_file(image_path, image_dim) if image_path else {}

    @staticmethod
    def question_key(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def featurize_question(self, text: str) -> np.ndarray:
        key = self.question_key(text)
        if key not in self._questions:
            raise KeyError(f"no embedding for question (key {key[:12]}...): {text[:60]!r}")
        return self._questions[key]

    def featurize_painting(self, painting: Painting | None) -> np.ndarray:
        if painting is None:
            return np.zeros(self.image_dim, dtype=np.float64)
        if painting.id not in self._images:
            raise KeyError(f"no embedding for painting {painting.id!r}")
        return self._images[painting.id]


def _read_embedding_file(path: str | Path, dim: int) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        key, _, rest = line.partition("\t")
        vec = np.array([float(x) for x in rest.split(",")], dtype=np.float64)
        if len(vec) != dim:
            raise ValueError(f"{path}:{lineno}: expected {dim} floats, got {len(vec)}")
        out[key] = vec
    return out


@dataclass(frozen=True)
class SelectorModel:
    weights: np.ndarray
    bias: float
    question_dim: int = QUESTION_DIM
    image_dim: int = IMAGE_DIM
    featurizer_id: str = ""
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.weights) != self.question_dim + self.image_dim:
            raise ValueError(
                f"weight vector has {len(self.weights)} entries, "
                f"expected {self.question_dim + self.image_dim}"
            )

    def to_dict(self) -> dict:
        return {
            "format": "selector-model",
            "version": 1,
            "question_dim": self.question_dim,
            "image_dim": self.image_dim,
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "featurizer_id": self.featurizer_id,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectorModel":
        if d.get("format") != "selector-model" or d.get("version") != 1:
            raise ValueError("not a selector model file (or unsupported version)")
        return cls(
            weights=np.array(d["weights"], dtype=np.float64),
            bias=float(d["bias"]),
            question_dim=int(d["question_dim"]),
            image_dim=int(d["image_dim"]),
            featurizer_id=d.get("featurizer_id", ""),
            seed=int(d.get("seed", 0)),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", "utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SelectorModel":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))


def concat_features(question: str, painting: Painting | None, model: SelectorModel, provider: FeatureProvider) -> np.ndarray:
    q = np.asarray(provider.featurize_question(question), dtype=np.float64)
    v = np.asarray(provider.featurize_painting(painting), dtype=np.float64)
    if len(q) != model.question_dim or len(v) != model.image_dim:
        raise ValueError(
            f"provider dims ({len(q)}, {len(v)}) do not match model "
            f"({model.question_dim}, {model.image_dim})"
        )
    return np.concatenate([q, v])


def predict_modality(
    question: str,
    painting: Painting | None,
    model: SelectorModel,
    provider: FeatureProvider,
) -> tuple[str, float]:
    """Returns (modality, probability of the visual branch).
    The boundary is strict: exactly 0.5 routes to knowledge."""
    x = concat_features(question, painting, model, provider)
    p = float(sigmoid(float(x @ model.weights) - model.bias))
    return ("visual" if p > 0.5 else "knowledge"), p


def train_selector(
    corpus: Corpus,
    provider: FeatureProvider,
    hyper: TrainConfig | None = None,
    split: str = "train",
) -> tuple[SelectorModel, list[float]]:
    """Seeded SGD on log loss over (features, modality) pairs; label 1 = visual."""
    hyper = hyper or TrainConfig()
    records = corpus.split_records(split)
    labels = sorted({r.modality for r in records})
    if len(labels) < 2:
        raise ValueError(f"selector training needs both modalities, got {labels}")
    X = np.stack(
        [
            np.concatenate(
                [
                    provider.featurize_question(r.question),
                    provider.featurize_painting(corpus.paintings.get(r.painting_id)),
                ]
            )
            for r in records
        ]
    )
    y = np.array([1.0 if r.modality == "visual" else 0.0 for r in records])
    w, b, trace = sgd_logistic(X, y, hyper)
    model = SelectorModel(
        weights=w,
        bias=b,
        question_dim=provider.question_dim,
        image_dim=provider.image_dim,
        featurizer_id=provider.provider_id,
        seed=hyper.seed,
    )
    return model, trace


@dataclass(frozen=True)
class RoutingRecord:
    qa_id: str
    predicted: str
    probability: float


def route(
    question: str,
    painting: Painting | None,
    model: SelectorModel,
    provider: FeatureProvider,
    qa_id: str = "",
) -> RoutingRecord:
    predicted, p = predict_modality(question, painting, model, provider)
    return RoutingRecord(qa_id=qa_id, predicted=predicted, probability=p)

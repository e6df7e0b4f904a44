"""Answer production for both branches.

Visual questions: argmax of a linear scorer over the closed answer
vocabulary. Knowledge questions: extractive span selection from the
retrieved comment. The default span extractor is fully lexical so it can be
checked against exhaustive enumeration: a candidate span scores the number
of question content terms in the +-window of context around it (span
excluded) minus one point per span token that occurs anywhere in the
question; best score wins, ties by earliest start then shortest span.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import AnswerVocabulary, Comment, Painting
from .linear import TrainConfig, sgd_softmax
from .porter import stem
from .selector import FeatureProvider
from .textpipe import default_stopwords, tokenize


@dataclass(frozen=True)
class Support:
    comment_id: str
    start: int
    end: int  # inclusive token index


@dataclass(frozen=True)
class Answer:
    text: str
    branch: str  # "visual" | "knowledge"
    score: float
    support: Support | None = None

    def __post_init__(self) -> None:
        if self.branch == "knowledge" and self.support is None:
            raise ValueError("knowledge answers must carry a support span")
        if self.branch not in ("visual", "knowledge"):
            raise ValueError(f"bad branch {self.branch!r}")

    def to_dict(self) -> dict:
        d = {"text": self.text, "branch": self.branch, "score": self.score}
        d["support"] = (
            None
            if self.support is None
            else {
                "comment_id": self.support.comment_id,
                "start": self.support.start,
                "end": self.support.end,
            }
        )
        return d


class VisualAnswerModel:
    """One weight vector per vocabulary entry over [question; image] features."""

    def __init__(
        self,
        weights: np.ndarray,
        biases: np.ndarray,
        vocabulary: AnswerVocabulary,
        featurizer_id: str = "",
        seed: int = 0,
    ):
        if weights.shape[0] != len(vocabulary) or len(biases) != len(vocabulary):
            raise ValueError(
                f"model has {weights.shape[0]} class rows for a vocabulary of {len(vocabulary)}"
            )
        self.weights = weights
        self.biases = biases
        self.vocabulary = vocabulary
        self.featurizer_id = featurizer_id
        self.seed = seed

    def save(self, path: str | Path, extra_meta: dict | None = None) -> None:
        meta = {
            "format": "visual-answer-model",
            "version": 1,
            "vocabulary": self.vocabulary.to_dict(),
            "featurizer_id": self.featurizer_id,
            "seed": self.seed,
            **(extra_meta or {}),
        }
        np.savez(
            path,
            weights=self.weights,
            biases=self.biases,
            meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
        )

    @classmethod
    def load(cls, path: str | Path) -> "VisualAnswerModel":
        with np.load(path) as z:
            meta = json.loads(bytes(z["meta"]).decode("utf-8"))
            if meta.get("format") != "visual-answer-model" or meta.get("version") != 1:
                raise ValueError("not a visual answer model file (or unsupported version)")
            return cls(
                weights=z["weights"],
                biases=z["biases"],
                vocabulary=AnswerVocabulary.from_dict(meta["vocabulary"]),
                featurizer_id=meta.get("featurizer_id", ""),
                seed=int(meta.get("seed", 0)),
            )


def answer_visual(
    question: str,
    painting: Painting | None,
    model: VisualAnswerModel,
    provider: FeatureProvider,
) -> Answer:
    """Argmax over vocabulary classes; exact ties resolved by lexicographic
    token order. The answer text is always a vocabulary member."""
    x = np.concatenate(
        [provider.featurize_question(question), provider.featurize_painting(painting)]
    )
    if len(x) != model.weights.shape[1]:
        raise ValueError(
            f"feature dim {len(x)} does not match model dim {model.weights.shape[1]}"
        )
    scores = model.weights @ x + model.biases
    best = scores.max()
    token = min(model.vocabulary.tokens[i] for i in np.flatnonzero(scores == best))
    return Answer(text=token, branch="visual", score=float(best))


def train_visual_model(
    corpus,
    vocabulary: AnswerVocabulary,
    provider: FeatureProvider,
    hyper: TrainConfig | None = None,
    split: str = "train",
) -> tuple[VisualAnswerModel, list[float]]:
    """Softmax regression over visual train records whose (lowercased,
    single-word) answer is in the vocabulary; others cannot be labeled."""
    hyper = hyper or TrainConfig()
    rows, labels = [], []
    for r in corpus.split_records(split):
        if r.modality != "visual":
            continue
        ans = r.answer.lower()
        if ans not in vocabulary:
            continue
        rows.append(
            np.concatenate(
                [
                    provider.featurize_question(r.question),
                    provider.featurize_painting(corpus.paintings.get(r.painting_id)),
                ]
            )
        )
        labels.append(vocabulary.index_of(ans))
    if not rows:
        raise ValueError("no trainable visual QA records (answers outside vocabulary?)")
    X = np.stack(rows)
    y = np.array(labels, dtype=np.int64)
    W, b, trace = sgd_softmax(X, y, len(vocabulary), hyper)
    model = VisualAnswerModel(
        weights=W, biases=b, vocabulary=vocabulary, featurizer_id=provider.provider_id, seed=hyper.seed
    )
    return model, trace


@dataclass(frozen=True)
class ExtractorConfig:
    max_span_tokens: int = 10
    context_window: int = 10
    penalty_weight: float = 1.0


def _normalize_token(token: str) -> str:
    return stem(token.lower())


def extract_span(question: str, comment: Comment, config: ExtractorConfig | None = None) -> Answer:
    """Default lexical extractor; see the module docstring for the objective."""
    config = config or ExtractorConfig()
    raw = tokenize(comment.text, lowercase=False)
    if not raw:
        raise ValueError(f"comment {comment.id!r} has no tokens")
    stop = default_stopwords()
    q_tokens = tokenize(question)
    q_all = {_normalize_token(t) for t in q_tokens}
    q_content = {_normalize_token(t) for t in q_tokens if t not in stop}

    norm = [_normalize_token(t.lower()) for t in raw]
    in_content = np.array([t in q_content for t in norm], dtype=np.int64)
    in_all = np.array([t in q_all for t in norm], dtype=np.int64)
    p_content = np.concatenate(([0], np.cumsum(in_content)))
    p_all = np.concatenate(([0], np.cumsum(in_all)))

    n = len(raw)
    w = config.context_window
    best: tuple[float, int, int] | None = None  # (-score, start, length)
    for s in range(n):
        for e in range(s, min(n, s + config.max_span_tokens)):
            left_lo = max(0, s - w)
            right_hi = min(n, e + 1 + w)
            affinity = (p_content[s] - p_content[left_lo]) + (p_content[right_hi] - p_content[e + 1])
            penalty = config.penalty_weight * (p_all[e + 1] - p_all[s])
            key = (-(affinity - penalty), s, e - s + 1)
            if best is None or key < best:
                best = key
    score, s, length = -best[0], best[1], best[2]
    e = s + length - 1
    return Answer(
        text=" ".join(raw[s : e + 1]),
        branch="knowledge",
        score=float(score),
        support=Support(comment_id=comment.id, start=s, end=e),
    )

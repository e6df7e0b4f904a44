"""Second-stage retrieval: score shortlisted comments against the question.

The default scorer is a logistic regression over handcrafted lexical pair
features (feature spec ``lexical-v1``); an external neural scorer can slot
in through the same interface (see :mod:`artqa.scorer`). Reranking never
changes the shortlist as a set, so recall@k at the shortlist size is
invariant under it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, QaRecord
from .linear import TrainConfig, sgd_logistic, sigmoid
from .textpipe import PipelineConfig, content_tokens, ngrams, tokenize
from .tfidf import RankedList, TfIdfIndex, document_score, retrieve_topk

FEATURE_SPEC = "lexical-v1"
FEATURE_DIM = 7
FEATURE_NAMES = (
    "unigram_overlap",
    "overlap_f1",
    "stage1_cosine",
    "question_len",
    "comment_len",
    "length_ratio",
    "bigram_overlap",
)


def featurize_pair(
    question: str, comment_text: str, stage1_score: float = 0.0, config: PipelineConfig | None = None
) -> np.ndarray:
    """Dense pair features; see FEATURE_NAMES for the layout."""
    config = config or PipelineConfig()
    q_tokens = tokenize(question)
    c_tokens = tokenize(comment_text)
    q_content = content_tokens(question, config)
    c_content = content_tokens(comment_text, config)
    q_uni, c_uni = set(q_content), set(c_content)
    overlap = len(q_uni & c_uni)
    denom = len(q_uni) + len(c_uni)
    f1 = 2.0 * overlap / denom if denom else 0.0
    q_bi = {g for g in ngrams(q_content, 2) if " " in g}
    c_bi = {g for g in ngrams(c_content, 2) if " " in g}
    return np.array(
        [
            float(overlap),
            f1,
            float(stage1_score),
            float(len(q_tokens)),
            float(len(c_tokens)),
            len(q_tokens) / max(len(c_tokens), 1),
            float(len(q_bi & c_bi)),
        ],
        dtype=np.float64,
    )


@dataclass(frozen=True)
class PairClassifier:
    weights: np.ndarray
    bias: float
    feature_spec: str = FEATURE_SPEC
    seed: int = 0

    def __post_init__(self) -> None:
        if self.feature_spec == FEATURE_SPEC and len(self.weights) != FEATURE_DIM:
            raise ValueError(
                f"feature spec {self.feature_spec} expects {FEATURE_DIM} weights, "
                f"got {len(self.weights)}"
            )

    def to_dict(self) -> dict:
        return {
            "format": "pair-classifier",
            "version": 1,
            "feature_spec": self.feature_spec,
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PairClassifier":
        if d.get("format") != "pair-classifier" or d.get("version") != 1:
            raise ValueError("not a pair-classifier file (or unsupported version)")
        return cls(
            weights=np.array(d["weights"], dtype=np.float64),
            bias=float(d["bias"]),
            feature_spec=d["feature_spec"],
            seed=int(d.get("seed", 0)),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", "utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PairClassifier":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))


def score_pair(
    question: str,
    comment_text: str,
    model: PairClassifier,
    stage1_score: float = 0.0,
    config: PipelineConfig | None = None,
) -> float:
    """sigmoid(w . features - b), in (0, 1)."""
    if model.feature_spec != FEATURE_SPEC:
        raise ValueError(f"unknown feature spec {model.feature_spec!r}")
    o = featurize_pair(question, comment_text, stage1_score, config)
    return float(sigmoid(float(o @ model.weights) - model.bias))


def rerank_by(shortlist: RankedList, score_fn) -> RankedList:
    """Reorder a shortlist by ``score_fn(comment_id, stage1_score)`` descending,
    ties by ascending comment id. The id set is preserved exactly."""
    if not shortlist.entries:
        raise ValueError("cannot rerank an empty shortlist")
    scored = [(cid, float(score_fn(cid, s1))) for cid, s1 in shortlist.entries]
    scored.sort(key=lambda e: (-e[1], e[0]))
    return RankedList(query_id=shortlist.query_id, entries=tuple(scored))


def rerank(
    question: str,
    shortlist: RankedList,
    model: PairClassifier,
    corpus: Corpus,
    config: PipelineConfig | None = None,
) -> RankedList:
    """Rerank with the trained pair classifier over lexical features."""

    def score_fn(cid: str, s1: float) -> float:
        comment = corpus.comments_by_id.get(cid)
        if comment is None:
            raise KeyError(f"shortlist comment {cid!r} not in corpus")
        return score_pair(question, comment.text, model, s1, config)

    return rerank_by(shortlist, score_fn)


def select_best(reranked: RankedList) -> str:
    """Head of the reranked list."""
    return reranked.head()


def train_pair_classifier(
    corpus: Corpus,
    index: TfIdfIndex,
    hyper: TrainConfig | None = None,
    negatives_per_positive: int = 9,
    shortlist_k: int = 10,
    split: str = "train",
) -> tuple[PairClassifier, list[float]]:
    """Binary relevance training. Positives pair each knowledge question with
    the comment attached to its painting; negatives are sampled from the
    question's first-stage shortlist minus the gold comment, matching the
    distribution the model scores at inference time."""
    hyper = hyper or TrainConfig()
    rows: list[np.ndarray] = []
    labels: list[float] = []
    for record in _knowledge_records(corpus, split):
        gold = corpus.gold_comment_id(record)
        if gold is None or gold not in corpus.comments_by_id:
            continue
        shortlist = retrieve_topk(record.question, index, k=shortlist_k, query_id=record.id)
        gold_score = document_score(record.question, index, gold)
        rows.append(featurize_pair(record.question, corpus.comments_by_id[gold].text, gold_score, index.config))
        labels.append(1.0)
        negatives = [e for e in shortlist.entries if e[0] != gold][:negatives_per_positive]
        for cid, s1 in negatives:
            rows.append(featurize_pair(record.question, corpus.comments_by_id[cid].text, s1, index.config))
            labels.append(0.0)
    if not any(labels):
        raise ValueError("no positive question/comment pairs derivable from this corpus")
    X = np.stack(rows)
    y = np.array(labels)
    w, b, trace = sgd_logistic(X, y, hyper)
    return PairClassifier(weights=w, bias=b, seed=hyper.seed), trace


def _knowledge_records(corpus: Corpus, split: str) -> list[QaRecord]:
    return [r for r in corpus.split_records(split) if r.modality == "knowledge"]

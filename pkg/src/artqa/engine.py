"""Loaded pipeline handles and end-to-end question answering.

An :class:`Engine` owns the corpus, the TF-IDF index, the trained models
and the feature provider, and runs the full flow: route the question, then
either predict from the closed answer vocabulary (visual branch) or
retrieve -> rerank -> extract a span (knowledge branch). Every answered
question yields a trace record suitable for JSON-lines logging.

All artifacts are immutable after load, so a single engine can serve
concurrent questions.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from . import rerank as rerank_mod
from .answerer import Answer, ExtractorConfig, Support, VisualAnswerModel, answer_visual, extract_span
from .corpus import AnswerVocabulary, Corpus, Painting, load_corpus
from .rerank import PairClassifier
from .selector import (
    FeatureProvider,
    FileEmbeddingProvider,
    HashedFeatureProvider,
    RoutingRecord,
    SelectorModel,
    predict_modality,
)
from .tfidf import RankedList, TfIdfIndex, load_index, retrieve_topk

SCORER_ENDPOINT_ENV = "ARTQA_SCORER_ENDPOINT"


def config_hash(config: dict) -> str:
    """sha256 over the canonical JSON form of a config mapping."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class EngineConfig:
    corpus: str
    index: str
    selector_model: str | None = None
    reranker_model: str | None = None
    visual_model: str | None = None
    vocabulary: str | None = None
    provider: dict = field(default_factory=lambda: {"kind": "hashed", "seed": 0})
    extractor: dict = field(default_factory=dict)
    shortlist_k: int = 10
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "EngineConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown engine config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "corpus": self.corpus,
            "index": self.index,
            "selector_model": self.selector_model,
            "reranker_model": self.reranker_model,
            "visual_model": self.visual_model,
            "vocabulary": self.vocabulary,
            "provider": dict(self.provider),
            "extractor": dict(self.extractor),
            "shortlist_k": self.shortlist_k,
            "seed": self.seed,
        }


def build_provider(spec: dict) -> FeatureProvider:
    kind = spec.get("kind", "hashed")
    if kind == "hashed":
        return HashedFeatureProvider(seed=int(spec.get("seed", 0)))
    if kind == "files":
        return FileEmbeddingProvider(
            question_path=spec["questions"],
            image_path=spec.get("images"),
            question_dim=int(spec.get("question_dim", 1024)),
            image_dim=int(spec.get("image_dim", 2048)),
        )
    if kind == "scorer":
        from .scorer import ScorerClient, ScorerFeatureProvider

        endpoint = os.environ.get(SCORER_ENDPOINT_ENV) or spec.get("endpoint")
        if not endpoint:
            raise ValueError(f"scorer provider needs an endpoint (or {SCORER_ENDPOINT_ENV})")
        return ScorerFeatureProvider(ScorerClient(endpoint))
    raise ValueError(f"unknown provider kind {kind!r}")


class Engine:
    def __init__(
        self,
        corpus: Corpus,
        index: TfIdfIndex,
        provider: FeatureProvider,
        selector_model: SelectorModel | None = None,
        reranker: PairClassifier | None = None,
        visual_model: VisualAnswerModel | None = None,
        vocabulary: AnswerVocabulary | None = None,
        extractor: ExtractorConfig | None = None,
        shortlist_k: int = 10,
        scorer_endpoint: str | None = None,
        cfg_hash: str = "",
    ):
        self.corpus = corpus
        self.index = index
        self.provider = provider
        self.selector_model = selector_model
        self.reranker = reranker
        self.visual_model = visual_model
        self.vocabulary = vocabulary
        self.extractor = extractor or ExtractorConfig()
        self.shortlist_k = shortlist_k
        self.config_hash = cfg_hash
        self._span_scorer = None
        if scorer_endpoint:
            from .scorer import ScorerClient

            self._span_scorer = ScorerClient(scorer_endpoint)

    @classmethod
    def from_config(cls, config: EngineConfig, base_dir: str | Path = ".") -> "Engine":
        base = Path(base_dir)

        def resolve(p: str | None) -> Path | None:
            if p is None:
                return None
            path = Path(p)
            return path if path.is_absolute() else base / path

        corpus = load_corpus(resolve(config.corpus))
        index = load_index(resolve(config.index))
        provider = build_provider(config.provider)
        selector_model = (
            SelectorModel.load(resolve(config.selector_model)) if config.selector_model else None
        )
        reranker = (
            PairClassifier.load(resolve(config.reranker_model)) if config.reranker_model else None
        )
        visual = (
            VisualAnswerModel.load(resolve(config.visual_model)) if config.visual_model else None
        )
        vocab = AnswerVocabulary.load(resolve(config.vocabulary)) if config.vocabulary else None
        if visual is not None and vocab is None:
            vocab = visual.vocabulary
        extractor = ExtractorConfig(**config.extractor) if config.extractor else ExtractorConfig()
        endpoint = os.environ.get(SCORER_ENDPOINT_ENV) or (
            config.provider.get("endpoint") if config.provider.get("kind") == "scorer" else None
        )
        return cls(
            corpus=corpus,
            index=index,
            provider=provider,
            selector_model=selector_model,
            reranker=reranker,
            visual_model=visual,
            vocabulary=vocab,
            extractor=extractor,
            shortlist_k=config.shortlist_k,
            scorer_endpoint=endpoint,
            cfg_hash=config_hash(config.to_dict()),
        )

    def route(self, question: str, painting: Painting | None, qa_id: str = "") -> RoutingRecord:
        if self.selector_model is None:
            raise ValueError("no selector model loaded")
        predicted, p = predict_modality(question, painting, self.selector_model, self.provider)
        return RoutingRecord(qa_id=qa_id, predicted=predicted, probability=p)

    def retrieve(
        self, question: str, k: int = 10, use_reranker: bool = True, query_id: str = ""
    ) -> list[dict]:
        """Both-stage scores for the top-k comments, as JSON-ready rows."""
        stage1 = retrieve_topk(question, self.index, k=k, query_id=query_id)
        stage2_scores: dict[str, float] = {}
        if use_reranker and stage1.entries:
            reranked = self._rerank(question, stage1)
            stage2_scores = dict(reranked.entries)
            order = reranked.entries
        else:
            order = stage1.entries
        stage1_scores = dict(stage1.entries)
        return [
            {
                "comment_id": cid,
                "stage1_score": stage1_scores[cid],
                "stage2_score": stage2_scores.get(cid),
            }
            for cid, _ in order
        ]

    def _rerank(self, question: str, shortlist: RankedList) -> RankedList:
        if self._span_scorer is not None:
            return rerank_mod.rerank_by(
                shortlist,
                lambda cid, s1: self._span_scorer.score_pair(
                    question, self.corpus.comments_by_id[cid].text
                ),
            )
        if self.reranker is not None:
            return rerank_mod.rerank(question, shortlist, self.reranker, self.corpus, self.index.config)
        return shortlist

    def answer(
        self,
        question: str,
        painting_id: str | None = None,
        qa_id: str = "",
        force_branch: str | None = None,
    ) -> tuple[Answer, dict]:
        painting = None
        if painting_id is not None:
            painting = self.corpus.paintings.get(painting_id)
            if painting is None:
                raise KeyError(f"unknown painting id {painting_id!r}")

        if force_branch is not None:
            branch, probability = force_branch, None
        else:
            routing = self.route(question, painting, qa_id)
            branch, probability = routing.predicted, routing.probability

        trace: dict = {
            "qa_id": qa_id,
            "question": question,
            "painting_id": painting_id,
            "branch": branch,
            "probability": probability,
            "retrieved": [],
        }
        if branch == "visual":
            if self.visual_model is None:
                raise ValueError("visual branch selected but no visual model loaded")
            ans = answer_visual(question, painting, self.visual_model, self.provider)
        elif branch == "knowledge":
            rows = self.retrieve(question, k=self.shortlist_k, query_id=qa_id)
            trace["retrieved"] = rows
            if not rows:
                raise ValueError("knowledge branch selected but retrieval returned nothing")
            best = rows[0]["comment_id"]
            comment = self.corpus.comments_by_id[best]
            if self._span_scorer is not None:
                start, end, text = self._span_scorer.extract_span(question, comment.text)
                top_score = rows[0]["stage2_score"]
                if top_score is None:
                    top_score = rows[0]["stage1_score"]
                ans = Answer(
                    text=text,
                    branch="knowledge",
                    score=float(top_score),
                    support=Support(comment_id=best, start=start, end=end),
                )
            else:
                ans = extract_span(question, comment, self.extractor)
        else:
            raise ValueError(f"unknown branch {branch!r}")
        trace["answer"] = ans.to_dict()
        return ans, trace

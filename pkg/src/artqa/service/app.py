"""FastAPI service wrapping a loaded engine.

The service owns one immutable :class:`~artqa.engine.Engine` and serves
retrieval, routing, answering, corpus statistics and question generation.
Batch workflows (index builds, training, evaluation) stay in the CLI; this
process serves many clients over one set of loaded artifacts.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException

from ..corpus import compute_stats
from ..engine import Engine, EngineConfig
from ..qgen import RulesConfig, filter_candidates, generate_qa, parse_bracketed
from .schemas import (
    AnswerRequest,
    AnswerResponse,
    HealthResponse,
    QgenCandidate,
    QgenRequest,
    QgenResponse,
    RetrieveRequest,
    RetrieveResponse,
    RetrievedComment,
    RouteRequest,
    RouteResponse,
    StatsResponse,
    SupportSpan,
)


def load_engine(config_path: str | Path) -> Engine:
    config_path = Path(config_path)
    config = EngineConfig.from_dict(json.loads(config_path.read_text("utf-8")))
    return Engine.from_config(config, base_dir=config_path.parent)


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="artqa", version="0.1.0")
    app.state.engine = engine

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        e: Engine = app.state.engine
        return HealthResponse(
            status="ok",
            config_hash=e.config_hash,
            paintings=len(e.corpus.paintings),
            comments=len(e.corpus.comments),
            qa_records=len(e.corpus.qa),
            question_dim=e.provider.question_dim,
            image_dim=e.provider.image_dim,
            models={
                "selector": e.selector_model is not None,
                "reranker": e.reranker is not None,
                "visual": e.visual_model is not None,
            },
        )

    @app.post("/retrieve", response_model=RetrieveResponse)
    def retrieve(req: RetrieveRequest) -> RetrieveResponse:
        e: Engine = app.state.engine
        rows = e.retrieve(req.question, k=req.k, use_reranker=req.rerank)
        return RetrieveResponse(
            question=req.question,
            results=[
                RetrievedComment(
                    comment_id=r["comment_id"],
                    stage1_score=r["stage1_score"],
                    stage2_score=r["stage2_score"],
                    text=e.corpus.comments_by_id[r["comment_id"]].text,
                )
                for r in rows
            ],
        )

    @app.post("/route", response_model=RouteResponse)
    def route(req: RouteRequest) -> RouteResponse:
        e: Engine = app.state.engine
        painting = None
        if req.painting_id is not None:
            painting = e.corpus.paintings.get(req.painting_id)
            if painting is None:
                raise HTTPException(404, f"unknown painting id {req.painting_id!r}")
        try:
            rec = e.route(req.question, painting)
        except ValueError as err:
            raise HTTPException(409, str(err)) from err
        return RouteResponse(modality=rec.predicted, probability=rec.probability)

    @app.post("/answer", response_model=AnswerResponse)
    def answer(req: AnswerRequest) -> AnswerResponse:
        e: Engine = app.state.engine
        try:
            ans, trace = e.answer(
                req.question, req.painting_id, qa_id=req.qa_id, force_branch=req.force_branch
            )
        except KeyError as err:
            raise HTTPException(404, str(err)) from err
        except ValueError as err:
            raise HTTPException(409, str(err)) from err
        support = None
        if ans.support is not None:
            support = SupportSpan(
                comment_id=ans.support.comment_id, start=ans.support.start, end=ans.support.end
            )
        return AnswerResponse(
            text=ans.text, branch=ans.branch, score=ans.score, support=support, trace=trace
        )

    @app.get("/stats", response_model=StatsResponse)
    def stats(split: str | None = None) -> StatsResponse:
        e: Engine = app.state.engine
        try:
            report = compute_stats(e.corpus, split)
        except ValueError as err:
            raise HTTPException(422, str(err)) from err
        d = report.to_dict()
        return StatsResponse(**d)

    @app.post("/qgen", response_model=QgenResponse)
    def qgen(req: QgenRequest) -> QgenResponse:
        config = RulesConfig(max_candidates=req.max_per_sentence)
        out = []
        for i, parse_text in enumerate(req.parses, 1):
            try:
                tree = parse_bracketed(parse_text)
            except ValueError as err:
                raise HTTPException(422, f"parse {i}: {err}") from err
            for cand in filter_candidates(generate_qa(tree, config), config):
                out.append(
                    QgenCandidate(
                        sentence_id=f"s{i:04d}",
                        rule=cand.rule_id,
                        wh=cand.wh,
                        question=cand.question,
                        answer=cand.answer,
                        answer_path=cand.answer_path,
                        score=cand.score,
                    )
                )
        return QgenResponse(candidates=out)

    return app


def create_app_from_config(config_path: str | Path) -> FastAPI:
    return create_app(load_engine(config_path))

"""Pydantic request/response models for the QA service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    config_hash: str
    paintings: int
    comments: int
    qa_records: int
    question_dim: int
    image_dim: int
    models: dict[str, bool]


class RetrieveRequest(BaseModel):
    question: str = Field(min_length=1)
    k: int = Field(default=10, ge=1)
    rerank: bool = True


class RetrievedComment(BaseModel):
    comment_id: str
    stage1_score: float
    stage2_score: float | None = None
    text: str | None = None


class RetrieveResponse(BaseModel):
    question: str
    results: list[RetrievedComment]


class RouteRequest(BaseModel):
    question: str = Field(min_length=1)
    painting_id: str | None = None


class RouteResponse(BaseModel):
    modality: str
    probability: float


class SupportSpan(BaseModel):
    comment_id: str
    start: int
    end: int


class AnswerRequest(BaseModel):
    question: str = Field(min_length=1)
    painting_id: str | None = None
    qa_id: str = ""
    force_branch: str | None = None


class AnswerResponse(BaseModel):
    text: str
    branch: str
    score: float
    support: SupportSpan | None = None
    trace: dict


class StatsResponse(BaseModel):
    split: str | None
    qa_pairs: int
    visual: int
    knowledge: int
    question_length: dict[str, float | None]
    answer_length: dict[str, float | None]


class QgenRequest(BaseModel):
    parses: list[str]
    max_per_sentence: int = Field(default=3, ge=1)


class QgenCandidate(BaseModel):
    sentence_id: str
    rule: str
    wh: str
    question: str
    answer: str
    answer_path: str
    score: float


class QgenResponse(BaseModel):
    candidates: list[QgenCandidate]

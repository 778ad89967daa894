"""Pydantic models for the wire protocol (requests and responses)."""

from __future__ import annotations

from pydantic import BaseModel, Field


class CapabilitiesResponse(BaseModel):
    model_name: str
    max_input_tokens: int
    embedding_dim: int
    layers: list[str]


class FillMaskRequest(BaseModel):
    id: str
    text: str
    top_k: int = Field(default=5, ge=1, le=50)


class CandidateModel(BaseModel):
    token: str
    score: float


class MaskModel(BaseModel):
    candidates: list[CandidateModel]


class FillMaskResponse(BaseModel):
    id: str
    masks: list[MaskModel]


class EmbedRequest(BaseModel):
    id: str
    text: str


class EmbedResponse(BaseModel):
    id: str
    tokens: list[str]
    vectors: list[list[float]]
    truncated: bool = False


class PllRequest(BaseModel):
    id: str
    text: str


class PllResponse(BaseModel):
    id: str
    mean_nll: float


class AnnotateRequest(BaseModel):
    id: str
    text: str
    layers: list[str]


class SpanModel(BaseModel):
    start: int
    end: int
    label: str
    layer: str


class AnnotateResponse(BaseModel):
    id: str
    spans: list[SpanModel]


class TrainDocument(BaseModel):
    text: str
    spans: list[list] = Field(default_factory=list)  # [start, end, label]


class NerTrainRequest(BaseModel):
    id: str
    dataset: list[TrainDocument]
    seed: int = 0
    epochs: int = Field(default=10, ge=1, le=1000)


class NerTrainResponse(BaseModel):
    id: str
    model_handle: str


class NerPredictRequest(BaseModel):
    id: str
    model_handle: str
    texts: list[str]


class PredictedSpan(BaseModel):
    start: int
    end: int
    label: str


class NerPredictResponse(BaseModel):
    id: str
    per_text_spans: list[list[PredictedSpan]]


class ErrorResponse(BaseModel):
    error: str
    detail: str = ""

"""FastAPI application implementing the wire protocol."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .bundles import MASK_SENTINEL, TooLongError, load_bundle
from .config import ServerConfig
from .ner_service import NerService
from .schemas import (
    AnnotateRequest,
    AnnotateResponse,
    CapabilitiesResponse,
    EmbedRequest,
    EmbedResponse,
    FillMaskRequest,
    FillMaskResponse,
    NerPredictRequest,
    NerPredictResponse,
    NerTrainRequest,
    NerTrainResponse,
    PllRequest,
    PllResponse,
    SpanModel,
)

SUPPORTED_LAYERS = ("pos", "ner", "medterm")


def create_app(config: ServerConfig | None = None) -> FastAPI:
    config = config or ServerConfig()
    app = FastAPI(title="modelserver", version="0.1.0")

    fill_bundle = load_bundle(
        config.fill_mask_model, device=config.device, max_input_tokens=config.max_input_tokens
    )
    layer_bundles = {}
    for layer, model_id in (
        ("pos", config.pos_model),
        ("ner", config.ner_model),
        ("medterm", config.medterm_model),
    ):
        bundle = (
            fill_bundle
            if model_id == config.fill_mask_model
            else load_bundle(model_id, device=config.device, max_input_tokens=config.max_input_tokens)
        )
        if layer in bundle.layers:
            layer_bundles[layer] = bundle
    ner_service = NerService()

    @app.exception_handler(TooLongError)
    async def too_long(request: Request, exc: TooLongError):
        return JSONResponse(status_code=400, content={"error": "too_long", "detail": str(exc)})

    @app.exception_handler(ValueError)
    async def bad_value(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"error": "bad_request", "detail": str(exc)})

    @app.exception_handler(KeyError)
    async def missing_handle(request: Request, exc: KeyError):
        return JSONResponse(
            status_code=404, content={"error": "unknown_handle", "detail": str(exc)}
        )

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "model": fill_bundle.name}

    @app.post("/v1/capabilities", response_model=CapabilitiesResponse)
    async def capabilities():
        return CapabilitiesResponse(
            model_name=fill_bundle.name,
            max_input_tokens=fill_bundle.max_input_tokens,
            embedding_dim=fill_bundle.embedding_dim,
            layers=sorted(layer_bundles),
        )

    @app.post("/v1/fill_mask", response_model=FillMaskResponse)
    async def fill_mask(request: FillMaskRequest):
        if MASK_SENTINEL not in request.text:
            raise ValueError("text contains no [MASK] sentinel")
        masks = fill_bundle.fill_mask(request.text, request.top_k)
        return FillMaskResponse(
            id=request.id,
            masks=[
                {"candidates": [{"token": token, "score": score} for token, score in mask]}
                for mask in masks
            ],
        )

    @app.post("/v1/embed", response_model=EmbedResponse)
    async def embed(request: EmbedRequest):
        if not request.text:
            raise ValueError("text is empty")
        tokens, vectors, truncated = fill_bundle.embed(request.text)
        return EmbedResponse(
            id=request.id, tokens=tokens, vectors=vectors.tolist(), truncated=truncated
        )

    @app.post("/v1/pll", response_model=PllResponse)
    async def pll(request: PllRequest):
        if not request.text:
            raise ValueError("text is empty")
        return PllResponse(id=request.id, mean_nll=fill_bundle.mean_nll(request.text))

    @app.post("/v1/annotate", response_model=AnnotateResponse)
    async def annotate(request: AnnotateRequest):
        unknown = set(request.layers) - set(SUPPORTED_LAYERS)
        if unknown:
            raise ValueError(f"unknown layer(s): {', '.join(sorted(unknown))}")
        spans: list[SpanModel] = []
        for layer in request.layers:
            bundle = layer_bundles.get(layer)
            if bundle is None:
                continue  # advertised capabilities tell clients what is loaded
            for start, end, label, span_layer in bundle.annotate(request.text, [layer]):
                spans.append(SpanModel(start=start, end=end, label=label, layer=span_layer))
        return AnnotateResponse(id=request.id, spans=spans)

    @app.post("/v1/ner/train", response_model=NerTrainResponse)
    async def ner_train(request: NerTrainRequest):
        if not request.dataset:
            raise ValueError("training dataset is empty")
        handle = ner_service.train(
            [doc.model_dump() for doc in request.dataset], request.seed, request.epochs
        )
        return NerTrainResponse(id=request.id, model_handle=handle)

    @app.post("/v1/ner/predict", response_model=NerPredictResponse)
    async def ner_predict(request: NerPredictRequest):
        predictions = ner_service.predict(request.model_handle, request.texts)
        return NerPredictResponse(
            id=request.id,
            per_text_spans=[
                [{"start": s, "end": e, "label": l} for s, e, l in spans] for spans in predictions
            ],
        )

    return app

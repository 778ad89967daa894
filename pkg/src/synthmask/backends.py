"""Uniform gateway to masked-LM capabilities.

Three backends share one interface: two deterministic in-process mocks
(echo and dictionary) that keep the pipeline buildable and testable
offline, and an HTTP client speaking the sidecar wire protocol. All
backends are referentially transparent per (descriptor, request).
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from hashlib import blake2b
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .errors import CapabilityError, ProtocolError, TransportError
from .features import MASK_SENTINEL, tokenize_words


@dataclass(frozen=True)
class BackendDescriptor:
    kind: str  # mock-echo | mock-dictionary | remote
    model_name: str
    max_input_tokens: int
    embedding_dim: int = 0
    layers: tuple[str, ...] = ()


@dataclass(frozen=True)
class Candidate:
    token: str
    score: float


@dataclass(frozen=True)
class FillMaskQuery:
    """Text with literal `[MASK]` sentinels.

    ``slot_hints`` carries the original surface forms for in-process
    oracle backends; it never goes on the wire and remote backends
    ignore it.
    """

    text: str
    top_k: int = 5
    slot_hints: tuple[str, ...] | None = None

    def sentinel_count(self) -> int:
        return self.text.count(MASK_SENTINEL)


@dataclass(frozen=True)
class FillMaskResult:
    masks: tuple[tuple[Candidate, ...], ...]  # one candidate list per sentinel


@dataclass(frozen=True)
class EmbeddingResult:
    tokens: tuple[str, ...]
    vectors: np.ndarray  # shape (len(tokens), dim)
    truncated: bool = False


@dataclass(frozen=True)
class AnnotationSpan:
    start: int
    end: int
    label: str
    layer: str


@dataclass(frozen=True)
class AnnotationResult:
    spans: tuple[AnnotationSpan, ...]


class PredictionBackend:
    """Interface; concrete backends override what they support."""

    def capabilities(self) -> BackendDescriptor:
        raise NotImplementedError

    def supports_layer(self, layer: str) -> bool:
        return layer in self.capabilities().layers

    def fill_mask(self, query: FillMaskQuery) -> FillMaskResult:
        raise CapabilityError("backend does not support fill_mask")

    def embed(self, text: str) -> EmbeddingResult:
        raise CapabilityError("backend does not support embeddings")

    def pseudo_log_likelihood(self, text: str) -> float:
        raise CapabilityError("backend does not support scoring")

    def annotate(self, text: str, layers: Iterable[str]) -> AnnotationResult:
        raise CapabilityError("backend does not support annotation")

    def ner_train(self, dataset: Sequence[dict], seed: int, epochs: int) -> str:
        raise CapabilityError("backend does not support NER training")

    def ner_predict(self, model_handle: str, texts: Sequence[str]) -> list[list[tuple[int, int, str]]]:
        raise CapabilityError("backend does not support NER prediction")


def perplexity(backend: PredictionBackend, text: str) -> float:
    """exp of the mean per-token negative log-probability."""
    return math.exp(backend.pseudo_log_likelihood(text))


def _check_query(query: FillMaskQuery) -> int:
    n = query.sentinel_count()
    if n == 0:
        raise ValueError("fill_mask query contains no [MASK] sentinel")
    if query.top_k < 1:
        raise ValueError("top_k must be >= 1")
    return n


def _hash_unit_vector(token: str, dim: int) -> np.ndarray:
    needed = dim * 4
    blocks = []
    for block in range((needed + 63) // 64):
        h = blake2b(token.encode("utf-8"), digest_size=64, salt=str(block).encode())
        blocks.append(h.digest())
    raw = np.frombuffer(b"".join(blocks)[:needed], dtype=np.uint32).astype(np.float64)
    vec = (raw / 0xFFFFFFFF) * 2.0 - 1.0
    norm = np.linalg.norm(vec)
    return vec / norm if norm else vec


class _HashEmbeddingMixin:
    """Deterministic per-token embeddings: identical tokens, identical vectors."""

    embedding_dim = 32

    def embed(self, text: str) -> EmbeddingResult:
        if not text:
            raise ValueError("embed on empty text")
        tokens = tuple(t.text for t in tokenize_words(text))
        descriptor = self.capabilities()
        truncated = len(tokens) > descriptor.max_input_tokens
        if truncated:
            tokens = tokens[: descriptor.max_input_tokens]
        if tokens:
            vectors = np.stack([_hash_unit_vector(tok, self.embedding_dim) for tok in tokens])
        else:
            vectors = np.zeros((0, self.embedding_dim))
        return EmbeddingResult(tokens=tokens, vectors=vectors, truncated=truncated)


class EchoBackend(_HashEmbeddingMixin, PredictionBackend):
    """Oracle backend: every sentinel predicts its original token with p=1.

    Generation through it is the identity, which pins the whole
    pipeline's end-to-end behavior in tests. Requires slot hints.
    """

    def __init__(self, max_input_tokens: int = 4096):
        self._descriptor = BackendDescriptor(
            kind="mock-echo",
            model_name="echo",
            max_input_tokens=max_input_tokens,
            embedding_dim=self.embedding_dim,
        )

    def capabilities(self) -> BackendDescriptor:
        return self._descriptor

    def fill_mask(self, query: FillMaskQuery) -> FillMaskResult:
        n = _check_query(query)
        if query.slot_hints is None or len(query.slot_hints) != n:
            raise ValueError(
                f"echo backend needs one slot hint per sentinel "
                f"({n} sentinel(s), hints={query.slot_hints!r})"
            )
        masks = tuple((Candidate(token=hint, score=1.0),) for hint in query.slot_hints)
        return FillMaskResult(masks=masks)

    def pseudo_log_likelihood(self, text: str) -> float:
        if not text:
            raise ValueError("pseudo_log_likelihood on empty text")
        return 0.0

    def annotate(self, text: str, layers: Iterable[str]) -> AnnotationResult:
        return AnnotationResult(spans=())


@lru_cache(maxsize=1)
def load_word_frequencies() -> tuple[tuple[str, int], ...]:
    data = resources.files("synthmask.data").joinpath("wordfreq.tsv").read_text("utf-8")
    out = []
    for line in data.splitlines():
        if not line.strip():
            continue
        word, count = line.split("\t")
        out.append((word, int(count)))
    return tuple(out)


class DictionaryBackend(_HashEmbeddingMixin, PredictionBackend):
    """Deterministic mock: candidates are hashed picks from the bundled dictionary.

    The pick depends on (seed, full query text, sentinel ordinal, rank),
    so identical requests always return identical candidates while
    different contexts return different words.
    """

    def __init__(self, seed: int = 0, max_input_tokens: int = 4096, words: Sequence[str] | None = None):
        self.seed = seed
        self._words = tuple(words) if words is not None else tuple(w for w, _ in load_word_frequencies())
        if not self._words:
            raise ValueError("dictionary backend needs a non-empty word list")
        self._descriptor = BackendDescriptor(
            kind="mock-dictionary",
            model_name=f"dictionary-{seed}",
            max_input_tokens=max_input_tokens,
            embedding_dim=self.embedding_dim,
        )

    def capabilities(self) -> BackendDescriptor:
        return self._descriptor

    def _pick(self, text: str, slot: int, rank: int) -> str:
        h = blake2b(f"{self.seed}|{text}|{slot}|{rank}".encode("utf-8"), digest_size=8)
        return self._words[int.from_bytes(h.digest(), "big") % len(self._words)]

    def fill_mask(self, query: FillMaskQuery) -> FillMaskResult:
        n = _check_query(query)
        masks = []
        for slot in range(n):
            seen: list[str] = []
            rank = 0
            while len(seen) < min(query.top_k, len(self._words)):
                word = self._pick(query.text, slot, rank)
                rank += 1
                if word not in seen and word != MASK_SENTINEL:
                    seen.append(word)
            masks.append(
                tuple(Candidate(token=w, score=2.0 ** -(r + 1)) for r, w in enumerate(seen))
            )
        return FillMaskResult(masks=tuple(masks))

    def pseudo_log_likelihood(self, text: str) -> float:
        if not text:
            raise ValueError("pseudo_log_likelihood on empty text")
        tokens = tokenize_words(text)
        if not tokens:
            return 0.0
        total = 0.0
        for tok in tokens:
            h = blake2b(f"{self.seed}|pll|{tok.text.lower()}".encode(), digest_size=8)
            u = (int.from_bytes(h.digest(), "big") % 1_000_000 + 1) / 1_000_000.0
            total += -math.log(0.05 + 0.95 * u)  # p in (0.05, 1.0]
        return total / len(tokens)

    def annotate(self, text: str, layers: Iterable[str]) -> AnnotationResult:
        return AnnotationResult(spans=())


class RemoteBackend(PredictionBackend):
    """HTTP client for the sidecar wire protocol (JSON over POST /v1/*).

    Responses are matched to requests by id; an id mismatch or malformed
    payload raises ProtocolError, connection failures raise
    TransportError after the configured retries. A semaphore caps
    in-flight requests when the gateway is shared across threads.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        retries: int = 2,
        max_in_flight: int = 4,
        session=None,
    ):
        import requests

        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self._session = session or requests.Session()
        self._gate = threading.BoundedSemaphore(max_in_flight)
        self._ids = itertools.count(1)
        self._id_lock = threading.Lock()
        self._capabilities: BackendDescriptor | None = None

    def _next_id(self) -> str:
        with self._id_lock:
            return f"req-{next(self._ids)}"

    def _post(self, path: str, payload: dict) -> dict:
        import requests

        url = f"{self.base_url}{path}"
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                with self._gate:
                    response = self._session.post(url, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = TransportError(f"{url} returned {response.status_code}")
                continue
            if response.status_code >= 400:
                try:
                    detail = response.json()
                except ValueError:
                    detail = {"error": response.text}
                raise ProtocolError(f"{url} rejected request: {detail}")
            try:
                body = response.json()
            except ValueError as exc:
                raise ProtocolError(f"{url} returned non-JSON payload") from exc
            if "id" in payload and body.get("id") != payload["id"]:
                raise ProtocolError(
                    f"response id {body.get('id')!r} does not match request id {payload['id']!r}"
                )
            return body
        raise TransportError(f"cannot reach {url}: {last_error}", attempts=self.retries + 1)

    def capabilities(self) -> BackendDescriptor:
        if self._capabilities is None:
            body = self._post("/v1/capabilities", {})
            try:
                self._capabilities = BackendDescriptor(
                    kind="remote",
                    model_name=body["model_name"],
                    max_input_tokens=int(body["max_input_tokens"]),
                    embedding_dim=int(body.get("embedding_dim", 0)),
                    layers=tuple(body.get("layers", ())),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(f"malformed capabilities payload: {body}") from exc
        return self._capabilities

    def fill_mask(self, query: FillMaskQuery) -> FillMaskResult:
        n = _check_query(query)
        body = self._post(
            "/v1/fill_mask",
            {"id": self._next_id(), "text": query.text, "top_k": query.top_k},
        )
        masks = body.get("masks")
        if not isinstance(masks, list) or len(masks) != n:
            raise ProtocolError(
                f"expected {n} candidate list(s), got {len(masks) if isinstance(masks, list) else masks!r}"
            )
        parsed = []
        for mask in masks:
            candidates = tuple(
                Candidate(token=c["token"], score=float(c["score"]))
                for c in mask.get("candidates", [])
            )
            if any(c.token == MASK_SENTINEL for c in candidates):
                raise ProtocolError("backend returned the sentinel itself as a candidate")
            parsed.append(candidates)
        return FillMaskResult(masks=tuple(parsed))

    def embed(self, text: str) -> EmbeddingResult:
        if not text:
            raise ValueError("embed on empty text")
        body = self._post("/v1/embed", {"id": self._next_id(), "text": text})
        tokens = tuple(body.get("tokens", ()))
        vectors = np.asarray(body.get("vectors", ()), dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(tokens):
            raise ProtocolError("embedding payload shape does not match token count")
        return EmbeddingResult(tokens=tokens, vectors=vectors, truncated=bool(body.get("truncated", False)))

    def pseudo_log_likelihood(self, text: str) -> float:
        if not text:
            raise ValueError("pseudo_log_likelihood on empty text")
        body = self._post("/v1/pll", {"id": self._next_id(), "text": text})
        try:
            return float(body["mean_nll"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed pll payload: {body}") from exc

    def annotate(self, text: str, layers: Iterable[str]) -> AnnotationResult:
        layers = list(layers)
        body = self._post(
            "/v1/annotate", {"id": self._next_id(), "text": text, "layers": layers}
        )
        spans = []
        for row in body.get("spans", ()):
            try:
                spans.append(
                    AnnotationSpan(
                        start=int(row["start"]),
                        end=int(row["end"]),
                        label=str(row["label"]),
                        layer=str(row["layer"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(f"malformed annotation span: {row}") from exc
        return AnnotationResult(spans=tuple(spans))

    def ner_train(self, dataset: Sequence[dict], seed: int, epochs: int) -> str:
        body = self._post(
            "/v1/ner/train",
            {"id": self._next_id(), "dataset": list(dataset), "seed": seed, "epochs": epochs},
        )
        try:
            return str(body["model_handle"])
        except KeyError as exc:
            raise ProtocolError(f"malformed train payload: {body}") from exc

    def ner_predict(self, model_handle: str, texts: Sequence[str]) -> list[list[tuple[int, int, str]]]:
        body = self._post(
            "/v1/ner/predict",
            {"id": self._next_id(), "model_handle": model_handle, "texts": list(texts)},
        )
        per_text = body.get("per_text_spans")
        if not isinstance(per_text, list) or len(per_text) != len(texts):
            raise ProtocolError("per_text_spans does not match the number of texts")
        out = []
        for rows in per_text:
            out.append([(int(r["start"]), int(r["end"]), str(r["label"])) for r in rows])
        return out


def make_backend(kind: str, *, url: str = "", model: str = "", seed: int = 0) -> PredictionBackend:
    """Construct a backend from its descriptor fields (CLI plumbing)."""
    if kind == "mock-echo":
        return EchoBackend()
    if kind == "mock-dictionary":
        return DictionaryBackend(seed=seed)
    if kind == "remote":
        if not url:
            raise ValueError("remote backend requires a base URL")
        return RemoteBackend(url)
    raise ValueError(f"unknown backend kind {kind!r}")

"""Model bundles behind the endpoints.

A bundle packages everything one capability set needs: fill-mask,
token embeddings, masked-token scoring, and annotation layers. Two
implementations:

* DebugBundle: deterministic, dependency-free; keeps CI and protocol
  tests runnable without downloading weights.
* TransformersBundle: a real masked LM (and optional token-classifier
  pipelines) through the transformers library, greedy only.
"""

from __future__ import annotations

import math
import re
from hashlib import sha256
from typing import Iterable

import numpy as np

MASK_SENTINEL = "[MASK]"

_TOKEN_RE = re.compile(r"\[MASK\]|\w+(?:[./'-]\w+)*|[^\w\s]")


def simple_tokens(text: str) -> list[tuple[str, int, int]]:
    """(surface, start, end) word tokens; the sentinel stays atomic."""
    return [(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


class TooLongError(ValueError):
    """Input exceeds the bundle's token budget."""


class ModelBundle:
    name: str = "bundle"
    max_input_tokens: int = 512
    embedding_dim: int = 0
    layers: tuple[str, ...] = ()

    def check_length(self, text: str) -> None:
        if len(simple_tokens(text)) > self.max_input_tokens:
            raise TooLongError(
                f"input has more than {self.max_input_tokens} tokens"
            )

    def fill_mask(self, text: str, top_k: int) -> list[list[tuple[str, float]]]:
        raise NotImplementedError

    def embed(self, text: str) -> tuple[list[str], np.ndarray, bool]:
        raise NotImplementedError

    def mean_nll(self, text: str) -> float:
        raise NotImplementedError

    def annotate(self, text: str, layers: Iterable[str]) -> list[tuple[int, int, str, str]]:
        raise NotImplementedError


_DEBUG_VOCAB = (
    "patient hospital clinic ward doctor nurse team review home visit care "
    "treatment therapy recovery history course plan notes letter summary "
    "stable severe mild acute chronic normal improved settled comfortable "
    "morning evening overnight daily weekly admitted discharged transferred "
    "presented reviewed observed monitored arranged continued started stopped "
    "walking resting eating sleeping breathing feeling looking getting being "
    "the a an and or but with without before after during under over about"
).split()

_DEBUG_MEDTERMS = {
    "deep vein thrombosis": "PROBLEM",
    "dvt": "PROBLEM",
    "open fracture": "PROBLEM",
    "fracture": "PROBLEM",
    "dislocation": "PROBLEM",
    "pneumonia": "PROBLEM",
    "hypertension": "PROBLEM",
    "sedation": "TREATMENT",
    "enoxaparin": "TREATMENT",
    "ibuprofen": "TREATMENT",
    "paracetamol": "TREATMENT",
    "heparin": "TREATMENT",
    "morphine": "TREATMENT",
    "physiotherapy": "TREATMENT",
    "syringe": "TREATMENT",
}

_AUX_WORDS = {"is", "was", "are", "were", "be", "been", "being", "has", "have", "had"}
_DET_WORDS = {"the", "a", "an", "this", "that", "these", "those"}
_ADP_WORDS = {"in", "on", "at", "by", "with", "from", "to", "of", "under", "over"}
_PRON_WORDS = {"he", "she", "it", "they", "we", "i", "you", "him", "her", "them"}
_TITLE_RE = re.compile(r"\b(?:Dr|Mr|Mrs|Ms|Prof)\.?\s+([A-Z][a-z]+)")
_DATE_RE = re.compile(r"\b\d{1,2}[/-]\d{1,2}[/-]\d{2,4}\b")
_LOC_RE = re.compile(r"\b(?:in|at|near)\s+([A-Z][a-z]+)\b")


class DebugBundle(ModelBundle):
    """Deterministic stand-in: hashed picks, hashed vectors, rule annotators.

    Every answer is a pure function of (bundle name, request), so golden
    request/response pairs stay stable in CI with no weights on disk.
    """

    embedding_dim = 16
    layers = ("pos", "ner", "medterm")

    def __init__(self, name: str = "core", max_input_tokens: int = 512):
        self.name = f"debug-{name}"
        self.max_input_tokens = max_input_tokens

    def _pick(self, key: str) -> str:
        digest = sha256(f"{self.name}|{key}".encode("utf-8")).digest()
        return _DEBUG_VOCAB[int.from_bytes(digest[:8], "big") % len(_DEBUG_VOCAB)]

    def fill_mask(self, text: str, top_k: int) -> list[list[tuple[str, float]]]:
        self.check_length(text)
        n = text.count(MASK_SENTINEL)
        out = []
        for slot in range(n):
            seen: list[str] = []
            rank = 0
            while len(seen) < min(top_k, len(_DEBUG_VOCAB)):
                word = self._pick(f"{text}|{slot}|{rank}")
                rank += 1
                if word not in seen:
                    seen.append(word)
            weights = [2.0 ** -(r + 1) for r in range(len(seen))]
            total = sum(weights)
            out.append([(w, weight / total) for w, weight in zip(seen, weights)])
        return out

    def _vector(self, token: str) -> np.ndarray:
        needed = self.embedding_dim * 4
        material = b"".join(
            sha256(f"vec|{block}|{token}".encode("utf-8")).digest()
            for block in range((needed + 31) // 32)
        )
        raw = np.frombuffer(material[:needed], dtype=np.uint32)
        vec = (raw.astype(np.float64) / 0xFFFFFFFF) * 2.0 - 1.0
        norm = np.linalg.norm(vec)
        return vec / norm if norm else vec

    def embed(self, text: str) -> tuple[list[str], np.ndarray, bool]:
        tokens = [t for t, _, _ in simple_tokens(text)]
        truncated = len(tokens) > self.max_input_tokens
        tokens = tokens[: self.max_input_tokens]
        if tokens:
            vectors = np.stack([self._vector(tok) for tok in tokens])
        else:
            vectors = np.zeros((0, self.embedding_dim))
        return tokens, vectors, truncated

    def mean_nll(self, text: str) -> float:
        self.check_length(text)
        tokens = [t for t, _, _ in simple_tokens(text)]
        if not tokens:
            return 0.0
        total = 0.0
        for tok in tokens:
            digest = sha256(f"nll|{tok.lower()}".encode("utf-8")).digest()
            u = (int.from_bytes(digest[:8], "big") % 1_000_000 + 1) / 1_000_000.0
            total += -math.log(0.05 + 0.95 * u)
        return total / len(tokens)

    def annotate(self, text: str, layers: Iterable[str]) -> list[tuple[int, int, str, str]]:
        spans: list[tuple[int, int, str, str]] = []
        wanted = set(layers)
        if "pos" in wanted:
            for surface, start, end in simple_tokens(text):
                lower = surface.lower()
                if not any(ch.isalnum() for ch in surface):
                    tag = "PUNCT"
                elif surface.replace(".", "").replace(",", "").isdigit():
                    tag = "NUM"
                elif lower in _AUX_WORDS:
                    tag = "AUX"
                elif lower in _DET_WORDS:
                    tag = "DET"
                elif lower in _ADP_WORDS:
                    tag = "ADP"
                elif lower in _PRON_WORDS:
                    tag = "PRON"
                elif lower.endswith("ly"):
                    tag = "ADV"
                elif lower.endswith(("ing", "ed")):
                    tag = "VERB"
                elif surface[:1].isupper() and start > 0:
                    tag = "PROPN"
                else:
                    tag = "NOUN"
                spans.append((start, end, tag, "pos"))
        if "ner" in wanted:
            for m in _TITLE_RE.finditer(text):
                spans.append((m.start(1), m.end(1), "PERSON", "ner"))
            for m in _DATE_RE.finditer(text):
                spans.append((m.start(), m.end(), "DATE", "ner"))
            for m in _LOC_RE.finditer(text):
                spans.append((m.start(1), m.end(1), "LOC", "ner"))
        if "medterm" in wanted:
            lowered = text.lower()
            for term, label in _DEBUG_MEDTERMS.items():
                start = 0
                while True:
                    idx = lowered.find(term, start)
                    if idx == -1:
                        break
                    spans.append((idx, idx + len(term), label, "medterm"))
                    start = idx + 1
        return spans


class TransformersBundle(ModelBundle):
    """A pretrained masked LM through transformers; greedy, sampling disabled."""

    def __init__(self, model_id: str, device: str = "cpu", max_input_tokens: int = 512):
        try:
            import torch
            from transformers import AutoModelForMaskedLM, AutoTokenizer
        except ImportError as exc:
            raise RuntimeError(
                "transformers/torch are required for non-debug models; "
                "install the [models] extra"
            ) from exc
        self.name = model_id
        self._torch = torch
        self._tokenizer = AutoTokenizer.from_pretrained(model_id)
        self._model = AutoModelForMaskedLM.from_pretrained(model_id).to(device).eval()
        self._device = device
        model_limit = getattr(self._tokenizer, "model_max_length", max_input_tokens)
        self.max_input_tokens = min(max_input_tokens, model_limit)
        self.embedding_dim = int(self._model.config.hidden_size)
        self.layers = ()

    def _encode(self, text: str):
        native = text.replace(MASK_SENTINEL, self._tokenizer.mask_token)
        encoded = self._tokenizer(native, return_tensors="pt", truncation=False)
        if encoded["input_ids"].shape[1] > self.max_input_tokens:
            raise TooLongError(f"input exceeds {self.max_input_tokens} model tokens")
        return {k: v.to(self._device) for k, v in encoded.items()}

    def fill_mask(self, text: str, top_k: int) -> list[list[tuple[str, float]]]:
        torch = self._torch
        encoded = self._encode(text)
        with torch.no_grad():
            logits = self._model(**encoded).logits[0]
        mask_id = self._tokenizer.mask_token_id
        positions = (encoded["input_ids"][0] == mask_id).nonzero(as_tuple=True)[0]
        out = []
        for pos in positions:
            probs = logits[pos].softmax(dim=-1)
            scores, ids = probs.topk(top_k + 1)
            candidates = []
            for score, token_id in zip(scores.tolist(), ids.tolist()):
                token = self._tokenizer.convert_ids_to_tokens(token_id)
                if token == self._tokenizer.mask_token:
                    continue
                candidates.append((token, float(score)))
                if len(candidates) == top_k:
                    break
            out.append(candidates)
        return out

    def embed(self, text: str) -> tuple[list[str], np.ndarray, bool]:
        torch = self._torch
        native = text.replace(MASK_SENTINEL, self._tokenizer.mask_token)
        encoded = self._tokenizer(
            native, return_tensors="pt", truncation=True, max_length=self.max_input_tokens
        )
        truncated = bool(
            self._tokenizer(native, return_tensors="pt")["input_ids"].shape[1]
            > self.max_input_tokens
        )
        with torch.no_grad():
            hidden = self._model(
                **{k: v.to(self._device) for k, v in encoded.items()},
                output_hidden_states=True,
            ).hidden_states[-1][0]
        tokens = self._tokenizer.convert_ids_to_tokens(encoded["input_ids"][0])
        return list(tokens), hidden.cpu().numpy().astype(float), truncated

    def mean_nll(self, text: str) -> float:
        torch = self._torch
        encoded = self._encode(text)
        input_ids = encoded["input_ids"][0]
        mask_id = self._tokenizer.mask_token_id
        special = set(self._tokenizer.all_special_ids)
        total, count = 0.0, 0
        for position in range(input_ids.shape[0]):
            true_id = int(input_ids[position])
            if true_id in special:
                continue
            masked = input_ids.clone()
            masked[position] = mask_id
            with torch.no_grad():
                logits = self._model(
                    input_ids=masked.unsqueeze(0),
                    attention_mask=encoded["attention_mask"],
                ).logits[0, position]
            total += -float(logits.log_softmax(dim=-1)[true_id])
            count += 1
        return total / count if count else 0.0

    def annotate(self, text: str, layers: Iterable[str]) -> list[tuple[int, int, str, str]]:
        return []  # annotation layers come from dedicated bundles


def load_bundle(model_id: str, device: str = "cpu", max_input_tokens: int = 512) -> ModelBundle:
    if model_id.startswith("debug://"):
        return DebugBundle(model_id[len("debug://") :] or "core", max_input_tokens)
    return TransformersBundle(model_id, device=device, max_input_tokens=max_input_tokens)

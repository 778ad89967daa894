"""Artifact writers and the run manifest.

Manifest checksums are computed over timing-normalized content: volatile
fields (wall-clock durations) are stripped from JSON-lines reports
before hashing, so two runs with identical config and a deterministic
backend produce identical checksums.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

from .generation import GenerationRecord

VOLATILE_REPORT_FIELDS = ("duration_ms",)


def write_generation_report(records: Sequence[GenerationRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.report_row(), sort_keys=True) + "\n")


def write_chunk_dump(chunked_letters, path: str | Path) -> None:
    """Debug dump: one JSON object per chunk."""
    with open(path, "w", encoding="utf-8") as fh:
        for chunked in chunked_letters:
            for chunk in chunked.chunks:
                fh.write(
                    json.dumps(
                        {
                            "note_id": chunk.note_id,
                            "chunk_index": chunk.chunk_index,
                            "start": chunk.start,
                            "end": chunk.end,
                            "token_count": chunk.token_count,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )


def write_feature_dump(featurized_letters, path: str | Path) -> None:
    """Audit dump: one JSON object per token with its flags and POS."""
    with open(path, "w", encoding="utf-8") as fh:
        for letter in featurized_letters:
            for chunk in letter.chunks:
                for tok in chunk.tokens:
                    fh.write(
                        json.dumps(
                            {
                                "note_id": letter.note_id,
                                "chunk_index": chunk.chunk_index,
                                "index": tok.index,
                                "text": tok.text,
                                "start": tok.start,
                                "end": tok.end,
                                "pos": tok.pos,
                                "flags": {
                                    "structure": tok.is_structure,
                                    "entity": tok.is_entity,
                                    "privacy": tok.is_privacy,
                                    "special": tok.is_special,
                                    "stopword": tok.is_stopword,
                                    "punct": tok.is_punct,
                                    "number": tok.is_number,
                                    "phi_placeholder": tok.is_phi_placeholder,
                                },
                            },
                            sort_keys=True,
                        )
                        + "\n"
                    )


def _normalized_bytes(path: Path) -> bytes:
    """File content with volatile fields stripped from .jsonl artifacts."""
    raw = path.read_bytes()
    if path.suffix != ".jsonl":
        return raw
    lines = []
    for line in raw.decode("utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        for key in VOLATILE_REPORT_FIELDS:
            row.pop(key, None)
        lines.append(json.dumps(row, sort_keys=True))
    return ("\n".join(lines) + "\n").encode("utf-8")


def checksum_artifact(path: str | Path) -> str:
    return hashlib.sha256(_normalized_bytes(Path(path))).hexdigest()


# where outputs land does not affect what they contain
_LOCATION_FIELDS = ("output_dir",)


def config_hash(config: dict) -> str:
    content = {k: v for k, v in config.items() if k not in _LOCATION_FIELDS}
    canonical = json.dumps(content, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(
    path: str | Path,
    command: str,
    config: dict,
    backend_descriptor: dict,
    seeds: dict,
    artifact_paths: Iterable[str | Path],
) -> dict:
    manifest = {
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "backend": backend_descriptor,
        "seeds": seeds,
        "artifacts": {
            Path(p).name: checksum_artifact(p) for p in artifact_paths if Path(p).exists()
        },
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest

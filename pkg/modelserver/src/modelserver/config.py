"""Server configuration: JSON file plus MODELSERVER_* environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

# "debug://<name>" selects the built-in deterministic bundle; anything else
# is treated as a transformers model id (requires the [models] extra).
DEFAULT_FILL_MASK_MODEL = "debug://core"


@dataclass
class ServerConfig:
    fill_mask_model: str = DEFAULT_FILL_MASK_MODEL
    pos_model: str = "debug://core"
    ner_model: str = "debug://core"
    medterm_model: str = "debug://core"
    device: str = "cpu"
    max_input_tokens: int = 512
    host: str = "127.0.0.1"
    port: int = 8600

    @classmethod
    def load(cls, path: str | Path | None = None) -> "ServerConfig":
        config = cls()
        if path is not None:
            payload = json.loads(Path(path).read_text("utf-8"))
            known = {f.name for f in fields(cls)}
            unknown = set(payload) - known
            if unknown:
                raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
            for key, value in payload.items():
                setattr(config, key, value)
        for f in fields(cls):
            env = os.environ.get(f"MODELSERVER_{f.name.upper()}")
            if env is not None:
                setattr(config, f.name, type(getattr(config, f.name))(env))
        if config.max_input_tokens < 8:
            raise ValueError("max_input_tokens must be >= 8")
        return config

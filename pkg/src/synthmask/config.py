"""Run configuration: a validated TOML-style file plus flag overrides.

The file grammar is the TOML subset documented in the README:
``[section]`` headers, ``key = value`` lines with quoted strings,
integers, floats, and booleans, and ``#`` comments. Unknown sections or
keys are rejected outright so a typo cannot silently fall back to a
default.
"""

from __future__ import annotations

import dataclasses
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

_SECTION_RE = re.compile(r"^\[([A-Za-z0-9_]+)\]$")
_KEY_RE = re.compile(r"^([A-Za-z0-9_]+)\s*=\s*(.+)$")

BACKEND_KINDS = ("mock-echo", "mock-dictionary", "remote")


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    if raw in ("true", "false"):
        return raw == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r}") from None


def parse_config_text(text: str) -> dict[str, dict]:
    sections: dict[str, dict] = {}
    current: str | None = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        section_match = _SECTION_RE.match(stripped)
        if section_match:
            current = section_match.group(1)
            sections.setdefault(current, {})
            continue
        key_match = _KEY_RE.match(stripped)
        if not key_match:
            raise ConfigError(f"config line {line_no}: cannot parse {line!r}")
        if current is None:
            raise ConfigError(f"config line {line_no}: key outside any [section]")
        sections[current][key_match.group(1)] = _parse_value(key_match.group(2))
    return sections


@dataclass
class RunConfig:
    letters: str = ""
    annotations: str = ""
    output_dir: str = "out"
    backend_kind: str = "mock-echo"
    backend_url: str = ""
    backend_model: str = ""
    backend_seed: int = 0
    max_lines: int = 40
    max_tokens: int = 256
    strategy: str = "random:0.4"
    seed: int = 0
    bertscore: bool = True
    advanced: bool = True
    spelling: bool = True
    fill_blanks: bool = True
    dictionary: str = ""
    max_edit_distance: int = 2
    ner_test_fraction: float = 0.2
    ner_seed: int = 0
    ner_epochs: int = 10
    ner_layer: str = "ner"
    jobs: int = 1
    top_k: int = 5
    retry_invalid: int = 0
    sample_top_k: int = 0

    def validate(self) -> "RunConfig":
        if self.backend_kind not in BACKEND_KINDS:
            raise ConfigError(
                f"backend kind must be one of {', '.join(BACKEND_KINDS)}, got {self.backend_kind!r}"
            )
        if self.backend_kind == "remote" and not self.backend_url:
            raise ConfigError("remote backend needs backend_url (or SYNTHMASK_BACKEND_URL)")
        if self.max_lines < 1 or self.max_tokens < 8:
            raise ConfigError("chunking budgets out of range (max_lines >= 1, max_tokens >= 8)")
        if not 0.0 < self.ner_test_fraction < 1.0:
            raise ConfigError("ner_test_fraction must be in (0, 1)")
        if self.jobs < 1 or self.top_k < 1 or self.retry_invalid < 0 or self.sample_top_k < 0:
            raise ConfigError("jobs/top_k/retry_invalid/sample_top_k out of range")
        if self.max_edit_distance < 1:
            raise ConfigError("max_edit_distance must be >= 1")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTION_FIELDS = {
    "paths": {"letters": "letters", "annotations": "annotations", "output_dir": "output_dir"},
    "backend": {
        "kind": "backend_kind",
        "url": "backend_url",
        "model": "backend_model",
        "seed": "backend_seed",
    },
    "chunking": {"max_lines": "max_lines", "max_tokens": "max_tokens"},
    "masking": {"strategy": "strategy", "seed": "seed"},
    "metrics": {"bertscore": "bertscore", "advanced": "advanced"},
    "postprocess": {
        "spelling": "spelling",
        "fill_blanks": "fill_blanks",
        "dictionary": "dictionary",
        "max_edit_distance": "max_edit_distance",
    },
    "ner": {
        "test_fraction": "ner_test_fraction",
        "seed": "ner_seed",
        "epochs": "ner_epochs",
        "layer": "ner_layer",
    },
    "run": {"jobs": "jobs", "top_k": "top_k", "retry_invalid": "retry_invalid", "sample_top_k": "sample_top_k"},
}


def load_config(path: str | Path | None) -> RunConfig:
    config = RunConfig()
    if path is None:
        return config
    text = Path(path).read_text("utf-8")
    sections = parse_config_text(text)
    for section, keys in sections.items():
        mapping = _SECTION_FIELDS.get(section)
        if mapping is None:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in keys.items():
            attr = mapping.get(key)
            if attr is None:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            expected = type(getattr(config, attr))
            if expected is float and isinstance(value, int):
                value = float(value)
            if not isinstance(value, expected):
                raise ConfigError(
                    f"[{section}] {key} should be {expected.__name__}, got {type(value).__name__}"
                )
            setattr(config, attr, value)
    return config


def apply_env_overrides(config: RunConfig) -> RunConfig:
    url = os.environ.get("SYNTHMASK_BACKEND_URL")
    if url:
        config.backend_url = url
        config.backend_kind = "remote"
    return config

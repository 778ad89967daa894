"""Input-validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

from typing import Sequence

from .corpus import AnnotatedLetter


def check_ratio(value, name="ratio") -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a number, got {value!r}") from None
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {value}")
    return value


def check_positive_int(value, name, minimum=1) -> int:
    try:
        value = int(value)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be an integer, got {value!r}") from None
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_seed(value, name="seed") -> int:
    try:
        value = int(value)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be an integer, got {value!r}") from None
    if not 0 <= value < 2**64:
        raise ValueError(f"{name} must fit in 64 bits, got {value}")
    return value


def check_corpus(corpus: Sequence[AnnotatedLetter], name="corpus") -> Sequence[AnnotatedLetter]:
    if not corpus:
        raise ValueError(f"{name} is empty")
    for item in corpus:
        if not isinstance(item, AnnotatedLetter):
            raise TypeError(f"{name} must contain AnnotatedLetter records, got {type(item).__name__}")
    return corpus

"""synthmask: de-identified synthetic clinical letters by feature-aware
masking and masked-LM infilling, with an evaluation battery and a
downstream NER harness.

The pipeline stages are sklearn-style transformers that chain over a
corpus of annotated letters:

    corpus -> Chunker -> TokenFeaturizer -> MaskPlanner -> generation

or in one step through :class:`SyntheticLetterGenerator`.
"""

from .backends import (
    DictionaryBackend,
    EchoBackend,
    FillMaskQuery,
    PredictionBackend,
    RemoteBackend,
    make_backend,
)
from .chunking import Chunker, ChunkConfig, tune_max_lines
from .corpus import (
    AnnotatedLetter,
    EntitySpan,
    LetterRecord,
    load_annotations,
    load_corpus,
    load_letters,
    merge_and_validate,
)
from .features import TokenFeaturizer, TokenRecord, tokenize_words
from .generation import SyntheticLetterGenerator, generate_corpus
from .masking import MaskPlanner, compute_eligibility, parse_strategy, plan_mask
from .sentences import split_sentences

__version__ = "0.1.0"

__all__ = [
    "AnnotatedLetter",
    "ChunkConfig",
    "Chunker",
    "DictionaryBackend",
    "EchoBackend",
    "EntitySpan",
    "FillMaskQuery",
    "LetterRecord",
    "MaskPlanner",
    "PredictionBackend",
    "RemoteBackend",
    "SyntheticLetterGenerator",
    "TokenFeaturizer",
    "TokenRecord",
    "compute_eligibility",
    "generate_corpus",
    "load_annotations",
    "load_corpus",
    "load_letters",
    "make_backend",
    "merge_and_validate",
    "parse_strategy",
    "plan_mask",
    "split_sentences",
    "tokenize_words",
    "tune_max_lines",
]

"""Command-line entry point: the pipeline as subcommands over a config file.

Exit codes: 0 success, 2 validation/config error, 3 backend or transport
error. Every failure is also written to stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import metrics
from .artifacts import (
    write_chunk_dump,
    write_feature_dump,
    write_generation_report,
    write_manifest,
)
from .backends import make_backend
from .chunking import ChunkConfig, Chunker, tune_max_lines
from .config import RunConfig, apply_env_overrides, load_config
from .corpus import LetterRecord, load_corpus, load_letters, write_letters
from .errors import AssemblyError, BackendError, ConfigError, SynthmaskError
from .generation import generate_corpus
from .masking import expand_strategy_sweep, parse_strategy
from .ner import run_comparison, write_ner_report
from .postprocess import SpellDictionary, correct_spelling, fill_blanks
from .features import detect_privacy, detect_special_patterns, detect_structure, FeatureSpanSet, label_tokens, tokenize_words

_FLAG_TO_FIELD = {
    "letters": "letters",
    "annotations": "annotations",
    "output_dir": "output_dir",
    "backend": "backend_kind",
    "backend_url": "backend_url",
    "model": "backend_model",
    "backend_seed": "backend_seed",
    "max_lines": "max_lines",
    "max_tokens": "max_tokens",
    "strategy": "strategy",
    "seed": "seed",
    "dictionary": "dictionary",
    "max_edit_distance": "max_edit_distance",
    "jobs": "jobs",
    "top_k": "top_k",
    "retry_invalid": "retry_invalid",
    "top_k_sample": "sample_top_k",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synthmask",
        description="Mask and regenerate annotated clinical letters, then score the output.",
    )
    parser.add_argument("--config", help="TOML-style config file; flags override file values")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--letters")
        p.add_argument("--annotations")
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--backend", choices=("mock-echo", "mock-dictionary", "remote"))
        p.add_argument("--backend-url", dest="backend_url")
        p.add_argument("--model")
        p.add_argument("--backend-seed", dest="backend_seed", type=int)
        p.add_argument("--max-lines", dest="max_lines", type=int)
        p.add_argument("--max-tokens", dest="max_tokens", type=int)
        p.add_argument("--strategy")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--top-k", dest="top_k", type=int)
        p.add_argument("--retry-invalid", dest="retry_invalid", type=int)
        p.add_argument("--top-k-sample", dest="top_k_sample", type=int)
        p.add_argument("--dictionary")
        p.add_argument("--max-edit-distance", dest="max_edit_distance", type=int)

    for name, help_text in (
        ("ingest", "validate and join the letters and annotations files"),
        ("chunk-tune", "sweep max_lines and report the plateau"),
        ("generate", "run the full mask-and-infill pipeline"),
        ("evaluate", "generate and score against the masked baseline"),
        ("postprocess", "fill placeholder blanks and correct spelling"),
        ("ner-eval", "downstream NER comparison original vs synthetic"),
        ("backend-check", "probe the configured backend's capabilities"),
    ):
        p = sub.add_parser(name, help=help_text)
        add_common(p)
        if name == "generate":
            p.add_argument("--dump-features", action="store_true", help="also write feature_dump.jsonl")
        if name == "postprocess":
            p.add_argument("--input", help="letters CSV to post-process (default: synthetic_letters.csv)")
        if name == "ner-eval":
            p.add_argument("--synthetic", help="synthetic letters CSV (default: synthetic_letters.csv)")
    return parser


def resolve_config(args) -> RunConfig:
    config = load_config(args.config)
    for flag, field in _FLAG_TO_FIELD.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(config, field, value)
    apply_env_overrides(config)
    return config.validate()


def _backend(config: RunConfig):
    return make_backend(
        config.backend_kind,
        url=config.backend_url,
        model=config.backend_model,
        seed=config.backend_seed,
    )


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _corpus(config: RunConfig):
    if not config.letters or not config.annotations:
        raise ConfigError("letters and annotations paths are required")
    return load_corpus(config.letters, config.annotations)


def cmd_ingest(args, config: RunConfig) -> int:
    corpus = _corpus(config)
    n_entities = sum(len(a.entities) for a in corpus)
    print(
        json.dumps(
            {
                "letters": len(corpus),
                "entities": n_entities,
                "chars": sum(len(a.text) for a in corpus),
            }
        )
    )
    return 0


def cmd_chunk_tune(args, config: RunConfig) -> int:
    corpus = _corpus(config)
    out = _out_dir(config)
    report = tune_max_lines(
        corpus, ChunkConfig(max_lines=config.max_lines, max_tokens=config.max_tokens)
    )
    payload = {
        "chosen_max_lines": report.chosen_max_lines,
        "rows": [
            {
                "max_lines": r.max_lines,
                "average_tokens_per_chunk": r.average_tokens_per_chunk,
                "chunk_count": r.chunk_count,
            }
            for r in report.rows
        ],
    }
    (out / "chunk_tuning.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    chunked = Chunker(max_lines=report.chosen_max_lines, max_tokens=config.max_tokens).fit(corpus).transform(corpus)
    write_chunk_dump(chunked, out / "chunks.jsonl")
    print(json.dumps({"chosen_max_lines": report.chosen_max_lines, "rows": len(report.rows)}))
    return 0


def _run_generation(config: RunConfig, backend, strategy: str):
    corpus = _corpus(config)
    return generate_corpus(
        corpus,
        backend,
        strategy=strategy,
        seed=config.seed,
        max_lines=config.max_lines,
        max_tokens=config.max_tokens,
        top_k=config.top_k,
        retry_invalid=config.retry_invalid,
        sample_top_k=config.sample_top_k,
        jobs=config.jobs,
    )


def cmd_generate(args, config: RunConfig) -> int:
    parse_strategy(config.strategy)
    backend = _backend(config)
    out = _out_dir(config)
    records = _run_generation(config, backend, config.strategy)
    write_letters(
        [LetterRecord(r.planned.note_id, r.synthetic.text) for r in records],
        out / "synthetic_letters.csv",
    )
    write_generation_report(records, out / "generation_report.jsonl")
    if getattr(args, "dump_features", False):
        from .chunking import Chunker as _Chunker
        from .features import TokenFeaturizer as _Featurizer

        corpus = _corpus(config)
        chunked = _Chunker(max_lines=config.max_lines, max_tokens=config.max_tokens).fit(corpus).transform(corpus)
        write_feature_dump(_Featurizer().transform(chunked), out / "feature_dump.jsonl")
    write_manifest(
        out / "run_manifest.json",
        command="generate",
        config=config.to_dict(),
        backend_descriptor=vars(backend.capabilities()),
        seeds={"masking_seed": config.seed, "backend_seed": config.backend_seed},
        artifact_paths=[out / "synthetic_letters.csv", out / "generation_report.jsonl"],
    )
    print(json.dumps({"letters": len(records), "output_dir": str(out)}))
    return 0


def cmd_evaluate(args, config: RunConfig) -> int:
    strategies = expand_strategy_sweep(config.strategy)
    backend = _backend(config)
    out = _out_dir(config)
    metric_backend = backend if (config.bertscore or config.advanced) else None

    all_rows = []
    summary_rows = []
    for strategy in strategies:
        records = _run_generation(config, backend, strategy)
        rows = []
        for record in records:
            row = metrics.evaluate_letter(
                original=record.planned.text,
                masked=record.masked_text,
                synthetic=record.synthetic.text,
                backend=metric_backend,
                note_id=record.planned.note_id,
                invalid_rate=record.synthetic.invalid_rate,
            )
            rows.append(row)
            all_rows.append((strategy, row))
        summary = metrics.corpus_summary(rows)
        summary_rows.append(
            {
                "strategy": strategy,
                "requested_ratio": records[0].report_row()["requested_ratio"] if records else None,
                "total_duration_ms": round(sum(r.synthetic.duration_ms for r in records), 3),
                **summary,
            }
        )

    with open(out / "evaluation_report.csv", "w", newline="", encoding="utf-8") as fh:
        import csv as _csv

        flat_rows = [
            {"strategy": strategy, **metrics.flatten_row(row)} for strategy, row in all_rows
        ]
        if flat_rows:
            writer = _csv.DictWriter(fh, fieldnames=list(flat_rows[0]))
            writer.writeheader()
            for flat in flat_rows:
                writer.writerow({k: ("" if v is None else v) for k, v in flat.items()})

    metrics.write_evaluation_summary(
        {"rows": summary_rows, "strategy_spec": config.strategy, "config": config.to_dict()},
        out / "evaluation_summary.json",
    )
    write_manifest(
        out / "run_manifest.json",
        command="evaluate",
        config=config.to_dict(),
        backend_descriptor=vars(backend.capabilities()),
        seeds={"masking_seed": config.seed, "backend_seed": config.backend_seed},
        artifact_paths=[out / "evaluation_report.csv", out / "evaluation_summary.json"],
    )
    print(json.dumps({"strategies": len(strategies), "letters_scored": len(all_rows)}))
    return 0


def _postprocess_text(text: str, backend, dictionary, do_fill: bool, do_spell: bool) -> str:
    if do_fill and backend is not None:
        text = fill_blanks(text, backend)
    if do_spell:
        feats = FeatureSpanSet(
            structure=detect_structure(text),
            privacy=detect_privacy(text),
            special=detect_special_patterns(text),
        )
        tokens = label_tokens(tokenize_words(text), feature_spans=feats)
        corrected = correct_spelling(tokens, None, dictionary)
        for original, fixed in sorted(
            zip(tokens, corrected), key=lambda pair: -pair[0].start
        ):
            if fixed.text != original.text:
                text = text[: original.start] + fixed.text + text[original.end :]
    return text


def cmd_postprocess(args, config: RunConfig) -> int:
    out = _out_dir(config)
    source = getattr(args, "input", None) or (out / "synthetic_letters.csv")
    letters = load_letters(source)
    backend = _backend(config) if config.fill_blanks else None
    dictionary = SpellDictionary.load(
        config.dictionary or None, max_edit_distance=config.max_edit_distance
    )
    if config.letters and config.annotations:
        corpus = _corpus(config)
        dictionary.add_protected_vocabulary(
            entity.surface(annotated.text)
            for annotated in corpus
            for entity in annotated.entities
        )
    processed = [
        LetterRecord(l.note_id, _postprocess_text(l.text, backend, dictionary, config.fill_blanks, config.spelling))
        for l in letters
    ]
    write_letters(processed, out / "postprocessed_letters.csv")
    print(json.dumps({"letters": len(processed)}))
    return 0


def cmd_ner_eval(args, config: RunConfig) -> int:
    out = _out_dir(config)
    backend = _backend(config)
    original = load_letters(config.letters) if config.letters else []
    if not original:
        raise ConfigError("ner-eval needs the letters path")
    synthetic_path = getattr(args, "synthetic", None) or (out / "synthetic_letters.csv")
    synthetic = load_letters(synthetic_path)
    report = run_comparison(
        original,
        synthetic,
        backend,
        test_fraction=config.ner_test_fraction,
        seed=config.ner_seed,
        epochs=config.ner_epochs,
        layer=config.ner_layer,
    )
    write_ner_report(report, out / "ner_report.json")
    print(json.dumps(report.to_json()))
    return 0


def cmd_backend_check(args, config: RunConfig) -> int:
    backend = _backend(config)
    descriptor = backend.capabilities()
    print(json.dumps(vars(descriptor), default=list))
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "chunk-tune": cmd_chunk_tune,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "postprocess": cmd_postprocess,
    "ner-eval": cmd_ner_eval,
    "backend-check": cmd_backend_check,
}


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "detail": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        return _fail(2, "config", str(exc))
    try:
        return COMMANDS[args.command](args, config)
    except (BackendError, AssemblyError) as exc:
        return _fail(3, "backend", str(exc))
    except FileNotFoundError as exc:
        return _fail(2, "missing-file", str(exc))
    except (SynthmaskError, ValueError) as exc:
        return _fail(2, "validation", str(exc))


if __name__ == "__main__":
    sys.exit(main())

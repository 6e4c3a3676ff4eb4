"""End-to-end orchestration: corpora, staged training and generation."""

from .corpus import (
    ClipPair,
    Corpus,
    Recording,
    build_corpus,
    cut_clips,
    load_corpus,
    load_stem_recording,
    save_corpus,
    split_recordings,
    synthesize_recording,
)
from .generate import Bundle, generate, generate_codes, load_bundle
from .train import (
    checkpoint_paths,
    lm_dataset,
    load_manifest,
    record_metrics,
    stage_seeds,
    train_all,
    train_stage,
    write_manifest,
)

__all__ = [
    "Bundle",
    "ClipPair",
    "Corpus",
    "Recording",
    "build_corpus",
    "checkpoint_paths",
    "cut_clips",
    "generate",
    "generate_codes",
    "lm_dataset",
    "load_bundle",
    "load_corpus",
    "load_manifest",
    "load_stem_recording",
    "record_metrics",
    "save_corpus",
    "split_recordings",
    "stage_seeds",
    "synthesize_recording",
    "train_all",
    "train_stage",
    "write_manifest",
]

"""Drum Accompaniment - beat-aware drum generation for drumless music.

Two mel-spectrogram VQ-VAEs turn drumless and drum audio into discrete codes,
a seq2seq Transformer with factorized chunk attention predicts drum codes from
drumless codes and beat information, and Griffin-Lim turns the decoded mel
back into audio. Rhythm metrics compare generated and reference drums.
"""

from .beat import BeatFeatures, BeatTracker, decode_beats, load_features, pick_peaks, save_features, track_audio
from .codec import VQCodec, load_codec, train_codec
from .dsp import AudioClip, MelSpec, griffin_lim, load_wav, mel_spectrogram, save_wav, slice_paired_clips
from .errors import (
    AudioError,
    CheckpointError,
    ConfigError,
    DrumAccompanimentError,
    FeatureFileError,
    PipelineError,
    TrainingError,
)
from .lm import CodeLM, build_pattern, sample, train_lm
from .metrics import act_entropy, beat_f1, evaluate_run, trackemb_mse
from .pipeline import build_corpus, generate, load_bundle, train_all
from .schema import (
    Architecture,
    BeatLevel,
    CliConfig,
    CodecConfig,
    DspConfig,
    LMConfig,
    MetricReport,
    RunManifest,
    Split,
    Stage,
    VariantSpec,
)

__version__ = "0.1.0"
__author__ = "Drum Accompaniment Team"

__all__ = [
    # Audio
    "AudioClip",
    "MelSpec",
    "load_wav",
    "save_wav",
    "mel_spectrogram",
    "griffin_lim",
    "slice_paired_clips",
    # Models
    "VQCodec",
    "BeatTracker",
    "CodeLM",
    "train_codec",
    "load_codec",
    "train_lm",
    "build_pattern",
    "sample",
    # Beat features
    "BeatFeatures",
    "decode_beats",
    "pick_peaks",
    "track_audio",
    "load_features",
    "save_features",
    # Pipeline
    "build_corpus",
    "train_all",
    "load_bundle",
    "generate",
    # Metrics
    "trackemb_mse",
    "act_entropy",
    "beat_f1",
    "evaluate_run",
    # Schema
    "Architecture",
    "BeatLevel",
    "CliConfig",
    "CodecConfig",
    "DspConfig",
    "LMConfig",
    "MetricReport",
    "RunManifest",
    "Split",
    "Stage",
    "VariantSpec",
    # Errors
    "DrumAccompanimentError",
    "AudioError",
    "CheckpointError",
    "ConfigError",
    "FeatureFileError",
    "PipelineError",
    "TrainingError",
]

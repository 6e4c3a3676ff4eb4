"""Beat tracking features and the beat condition embeddings built from them."""

from .conditioning import (
    BeatConditioner,
    cond_high,
    cond_low,
    cond_mid,
    pooled_embeddings,
    prepare_condition,
    resample_frames,
    step_labels,
    step_peaks,
)
from .decode import decode_beats, path_score, pick_peaks, place_downbeats, viterbi_beats
from .features import BEAT, DOWNBEAT, NON_BEAT, BeatFeatures, frame_labels, load_features, save_features
from .tracker import (
    BeatTracker,
    build_tracker,
    extract_features,
    frame_accuracy,
    load_tracker,
    track_audio,
    tracker_forward,
    train_tracker,
)

__all__ = [
    "BEAT",
    "DOWNBEAT",
    "NON_BEAT",
    "BeatConditioner",
    "BeatFeatures",
    "BeatTracker",
    "build_tracker",
    "cond_high",
    "cond_low",
    "cond_mid",
    "decode_beats",
    "extract_features",
    "frame_accuracy",
    "frame_labels",
    "load_features",
    "load_tracker",
    "path_score",
    "pick_peaks",
    "place_downbeats",
    "pooled_embeddings",
    "prepare_condition",
    "resample_frames",
    "save_features",
    "step_labels",
    "step_peaks",
    "track_audio",
    "tracker_forward",
    "train_tracker",
    "viterbi_beats",
]

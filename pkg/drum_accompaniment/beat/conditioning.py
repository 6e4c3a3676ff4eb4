"""Beat condition embeddings at the code rate.

Each level is split in two: ``prepare_condition`` does the parameter-free
work (resampling, pooling, labelling, peak picking) on numpy arrays, and
``BeatConditioner`` maps the prepared array to d_model vectors so the
learned part stays in the autograd graph of the language model.
"""

import numpy as np
import torch
from torch import Tensor, nn

from ..schema import BeatLevel, PeakConfig
from .decode import pick_peaks
from .features import BEAT, DOWNBEAT, NON_BEAT, BeatFeatures

PEAK, NO_PEAK = 1, 0

# lower rank wins when several labels share one code step
_RANK = np.array([1, 0, 2])  # indexed by BEAT, DOWNBEAT, NON_BEAT
_FRAME_EPS = 1e-9


def resample_frames(values: np.ndarray, n: int) -> np.ndarray:
    """Linearly resample rows to ``n`` frames; first and last rows are kept exactly."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] == 0:
        raise ValueError("cannot resample zero frames")
    if values.shape[0] == 1:
        return np.repeat(values, n, axis=0)
    positions = np.linspace(0.0, values.shape[0] - 1, n)
    lower = np.floor(positions).astype(np.int64)
    upper = np.minimum(lower + 1, values.shape[0] - 1)
    weight = (positions - lower)[:, None]
    return (1.0 - weight) * values[lower] + weight * values[upper]


def pooled_embeddings(feats: BeatFeatures, steps: int, frames_per_code: int) -> np.ndarray:
    """Tracker embeddings resampled to steps * L frames and mean-pooled per code step."""
    if feats.frames == 0:
        raise ValueError("beat features are empty")
    frames = resample_frames(feats.embeddings, steps * frames_per_code)
    return frames.reshape(steps, frames_per_code, -1).mean(axis=1).astype(np.float32)


def event_frames(t: float, mel_frame_rate: float) -> range:
    """Mel frames less than one frame away from an event at ``t`` seconds."""
    position = t * mel_frame_rate
    return range(int(np.floor(position + _FRAME_EPS)), int(np.ceil(position - _FRAME_EPS)) + 1)


def step_labels(feats: BeatFeatures, steps: int, frames_per_code: int, mel_frame_rate: float) -> np.ndarray:
    """One of BEAT / DOWNBEAT / NON_BEAT per code step, downbeat first.

    An event labels every frame within one frame of it; each step then takes
    the strongest label among its frames.
    """
    n_frames = steps * frames_per_code
    frame_labels = np.full(n_frames, NON_BEAT, dtype=np.int64)
    for times, label in ((feats.beats, BEAT), (feats.downbeats, DOWNBEAT)):
        for t in times:
            for frame in event_frames(t, mel_frame_rate):
                if 0 <= frame < n_frames:
                    frame_labels[frame] = label
    ranks = _RANK[frame_labels].reshape(steps, frames_per_code).min(axis=1)
    return np.argsort(_RANK)[ranks]


def step_peaks(feats: BeatFeatures, steps: int, frames_per_code: int, mel_frame_rate: float, peaks: PeakConfig) -> np.ndarray:
    """PEAK for code steps holding a beat or downbeat activation peak, NO_PEAK elsewhere."""
    distance = peaks.min_distance_frames(feats.frame_rate)
    found = np.union1d(
        pick_peaks(feats.activations[:, BEAT], peaks.min_height, distance),
        pick_peaks(feats.activations[:, DOWNBEAT], peaks.min_height, distance),
    )
    flags = np.full(steps, NO_PEAK, dtype=np.int64)
    for frame in found:
        mel_frame = int(round(frame * mel_frame_rate / feats.frame_rate))
        if 0 <= mel_frame < steps * frames_per_code:
            flags[mel_frame // frames_per_code] = PEAK
    return flags


def prepare_condition(
    feats: BeatFeatures | None,
    level: BeatLevel,
    steps: int,
    frames_per_code: int,
    mel_frame_rate: float,
    peaks: PeakConfig,
) -> np.ndarray:
    """Parameter-free input of ``BeatConditioner`` for one clip.

    Returns (T, E) float32 pooled embeddings for LOW, (T,) int64 class ids
    for MID and HIGH, and (T,) zeros for NONE.
    """
    level = BeatLevel(level)
    if level == BeatLevel.NONE:
        return np.zeros(steps, dtype=np.int64)
    if feats is None:
        raise ValueError(f"beat level {level.value} needs beat features")
    if level == BeatLevel.LOW:
        return pooled_embeddings(feats, steps, frames_per_code)
    if level == BeatLevel.MID:
        return step_peaks(feats, steps, frames_per_code, mel_frame_rate, peaks)
    return step_labels(feats, steps, frames_per_code, mel_frame_rate)


class BeatConditioner(nn.Module):
    """Learned maps from prepared beat information to d_model vectors."""

    def __init__(self, embedding_dim: int, d_model: int):
        super().__init__()
        self.d_model = d_model
        self.low = nn.Linear(embedding_dim, d_model)
        self.mid = nn.Embedding(2, d_model)
        self.high = nn.Embedding(3, d_model)

    def forward(self, level: BeatLevel, prepared: Tensor) -> Tensor:
        """(B, T, ...) prepared input -> (B, T, d_model)."""
        level = BeatLevel(level)
        if level == BeatLevel.LOW:
            return self.low(prepared.to(self.low.weight.dtype))
        if level == BeatLevel.MID:
            return self.mid(prepared.long())
        if level == BeatLevel.HIGH:
            return self.high(prepared.long())
        return torch.zeros(*prepared.shape[:2], self.d_model, dtype=self.low.weight.dtype, device=prepared.device)


def _condition(conditioner: BeatConditioner, level: BeatLevel, prepared: np.ndarray) -> np.ndarray:
    with torch.no_grad():
        return conditioner(level, torch.from_numpy(prepared).unsqueeze(0))[0].numpy()


def cond_low(feats: BeatFeatures, conditioner: BeatConditioner, steps: int, frames_per_code: int) -> np.ndarray:
    return _condition(conditioner, BeatLevel.LOW, pooled_embeddings(feats, steps, frames_per_code))


def cond_mid(
    feats: BeatFeatures,
    conditioner: BeatConditioner,
    steps: int,
    frames_per_code: int,
    peaks: PeakConfig,
    mel_frame_rate: float | None = None,
) -> np.ndarray:
    rate = feats.frame_rate if mel_frame_rate is None else mel_frame_rate
    return _condition(conditioner, BeatLevel.MID, step_peaks(feats, steps, frames_per_code, rate, peaks))


def cond_high(
    feats: BeatFeatures,
    conditioner: BeatConditioner,
    steps: int,
    frames_per_code: int,
    hop: int,
    sample_rate: int,
) -> np.ndarray:
    return _condition(conditioner, BeatLevel.HIGH, step_labels(feats, steps, frames_per_code, sample_rate / hop))

"""BLSTM beat tracker: forward pass, feature extraction and training."""

import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from ..checkpoint import load_checkpoint, save_checkpoint
from ..dsp import AudioClip, MelSpec, mel_spectrogram, rms
from ..errors import TrainingError
from ..schema import DecoderConfig, DspConfig, TrackerConfig, TrainConfig
from ..training import check_finite, log_step, progress, seed_step
from .decode import decode_beats
from .features import BeatFeatures

logger = logging.getLogger(__name__)


class BeatTracker(nn.Module):
    """Frame-wise beat/downbeat/non-beat classifier.

    A bidirectional LSTM over normalised mel frames yields the per-frame
    embedding; a two-layer head maps it to three class logits.
    """

    def __init__(self, cfg: TrackerConfig):
        super().__init__()
        self.cfg = cfg
        self.norm = nn.LayerNorm(cfg.n_mels)
        self.rnn = nn.LSTM(cfg.n_mels, cfg.hidden_size, batch_first=True, bidirectional=True)
        self.head = nn.Sequential(
            nn.Linear(cfg.embedding_dim, cfg.head_hidden),
            nn.ReLU(),
            nn.Linear(cfg.head_hidden, 3),
        )

    def forward(self, mel: Tensor) -> tuple[Tensor, Tensor]:
        """(B, F, n_mels) -> embeddings (B, F, 2H) and logits (B, F, 3)."""
        embeddings, _ = self.rnn(self.norm(mel))
        return embeddings, self.head(embeddings)


@torch.no_grad()
def tracker_forward(mel: MelSpec, tracker: BeatTracker, frame_rate: float) -> BeatFeatures:
    """Embeddings and activations of one clip; no decoded events."""
    dtype = next(tracker.parameters()).dtype
    embeddings, logits = tracker(torch.from_numpy(mel.values).to(dtype).unsqueeze(0))
    activations = torch.softmax(logits[0].float(), dim=-1).numpy()
    return BeatFeatures(frame_rate=frame_rate, embeddings=embeddings[0].float().numpy(), activations=activations)


def extract_features(mel: MelSpec, tracker: BeatTracker, frame_rate: float, decoder: DecoderConfig) -> BeatFeatures:
    """All three feature levels: embeddings, activations and decoded beats."""
    feats = tracker_forward(mel, tracker, frame_rate)
    beats, downbeats = decode_beats(feats.activations, frame_rate, decoder)
    return feats.model_copy(update={"beats": beats, "downbeats": downbeats})


def track_audio(clip: AudioClip, tracker: BeatTracker, dsp: DspConfig, decoder: DecoderConfig) -> BeatFeatures:
    """Features of a waveform; silent audio has no beats."""
    mel = mel_spectrogram(clip, dsp)
    if rms(clip) < dsp.silence_rms:
        return tracker_forward(mel, tracker, dsp.frame_rate)
    return extract_features(mel, tracker, dsp.frame_rate, decoder)


# =============================================================================
# TRAINING
# =============================================================================


def sample_labelled_batch(
    corpus: Sequence[tuple[MelSpec, np.ndarray]],
    batch_size: int,
    crop_frames: Optional[int],
    generator: torch.Generator,
) -> tuple[Tensor, Tensor]:
    picks = torch.randint(len(corpus), (batch_size,), generator=generator).tolist()
    mels, labels = [], []
    for index in picks:
        mel, label = corpus[index]
        values, label = torch.from_numpy(mel.values), torch.from_numpy(np.asarray(label, dtype=np.int64))
        if crop_frames is not None and values.shape[0] > crop_frames:
            start = int(torch.randint(values.shape[0] - crop_frames + 1, (1,), generator=generator))
            values, label = values[start : start + crop_frames], label[start : start + crop_frames]
        mels.append(values)
        labels.append(label)
    if len({m.shape[0] for m in mels}) != 1:
        raise TrainingError("mels in a batch must share a frame count")
    return torch.stack(mels), torch.stack(labels)


def build_tracker(cfg: TrackerConfig, seed: int) -> BeatTracker:
    torch.manual_seed(seed)
    return BeatTracker(cfg)


def load_tracker(path: str | Path) -> BeatTracker:
    package = load_checkpoint(path, "tracker")
    tracker = BeatTracker(TrackerConfig.model_validate(package["config"]))
    tracker.load_state_dict(package["state_dict"])
    return tracker.eval()


def frame_accuracy(tracker: BeatTracker, corpus: Sequence[tuple[MelSpec, np.ndarray]]) -> float:
    correct = total = 0
    with torch.no_grad():
        for mel, labels in corpus:
            _, logits = tracker(torch.from_numpy(mel.values).unsqueeze(0))
            correct += int((logits[0].argmax(dim=-1).numpy() == labels).sum())
            total += len(labels)
    return correct / max(total, 1)


def train_tracker(
    corpus: Sequence[tuple[MelSpec, np.ndarray]],
    cfg: TrackerConfig,
    train: TrainConfig,
    seed: int,
    stage: str = "tracker",
    checkpoint_path: Optional[Path] = None,
    resume: Optional[Path] = None,
) -> tuple[BeatTracker, list[dict]]:
    """Fit the tracker with per-frame cross-entropy and Adam."""
    if not corpus:
        raise TrainingError("empty corpus", stage=stage)
    for mel, labels in corpus:
        if len(labels) != mel.frames:
            raise TrainingError(f"{len(labels)} labels for {mel.frames} frames", stage=stage)

    tracker = build_tracker(cfg, seed)
    optimizer = torch.optim.Adam(tracker.parameters(), lr=train.lr)
    trace: list[dict] = []
    start = 0
    if resume is not None:
        package = load_checkpoint(resume, "tracker")
        tracker.load_state_dict(package["state_dict"])
        optimizer.load_state_dict(package["optimizer"])
        start, trace = package["step"], list(package["trace"])
        logger.info("Resuming %s at step %d", stage, start)

    tracker.train()
    for step in progress(range(start, train.steps), stage, train.steps - start):
        generator = seed_step(seed, step)
        mels, labels = sample_labelled_batch(corpus, train.batch_size, train.crop_frames, generator)
        _, logits = tracker(mels)
        loss = F.cross_entropy(logits.reshape(-1, 3), labels.reshape(-1))
        check_finite(loss, stage, step)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()

        accuracy = float((logits.detach().argmax(dim=-1) == labels).float().mean())
        record = {"step": step + 1, "loss": float(loss), "accuracy": accuracy}
        trace.append(record)
        log_step(stage, step, record, train.log_every)
        if checkpoint_path is not None and (step + 1) % train.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, "tracker", cfg, tracker, optimizer, step + 1, trace)

    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, "tracker", cfg, tracker, optimizer, train.steps, trace)
    return tracker.eval(), trace

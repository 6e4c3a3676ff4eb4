"""Beat feature container, frame labels and the binary feature file."""

import logging
from pathlib import Path
from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from ..errors import FeatureFileError

logger = logging.getLogger(__name__)

BEAT, DOWNBEAT, NON_BEAT = 0, 1, 2
SIMPLEX_TOLERANCE = 1e-6

FEATURE_MAGIC = b"BTFT"
FEATURE_VERSION = 1
HEADER = np.dtype(
    [
        ("magic", "S4"),
        ("version", "<u2"),
        ("emb_dim", "<u2"),
        ("frames", "<u4"),
        ("n_beats", "<u4"),
        ("n_downbeats", "<u4"),
        ("frame_rate", "<f8"),
        ("reserved", "<u4"),
    ]
)


class BeatFeatures(BaseModel):
    """Tracker embeddings, 3-class activations and decoded event times of one clip."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    frame_rate: float
    embeddings: np.ndarray  # frames x emb_dim
    activations: np.ndarray  # frames x 3, columns (beat, downbeat, non-beat)
    beats: np.ndarray = np.zeros(0)
    downbeats: np.ndarray = np.zeros(0)

    @field_validator("embeddings", "activations", mode="before")
    @classmethod
    def as_float_matrix(cls, value) -> np.ndarray:
        values = np.asarray(value, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"expected a frames x dim matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values must be finite")
        return values

    @field_validator("beats", "downbeats", mode="before")
    @classmethod
    def as_times(cls, value) -> np.ndarray:
        times = np.asarray(value, dtype=np.float64).reshape(-1)
        if np.any(np.diff(times) <= 0):
            raise ValueError("event times must be strictly increasing")
        return times

    @model_validator(mode="after")
    def check_consistency(self) -> "BeatFeatures":
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")
        if self.activations.shape[1] != 3:
            raise ValueError(f"activations must have 3 columns, got {self.activations.shape[1]}")
        if self.embeddings.shape[0] != self.activations.shape[0]:
            raise ValueError("embeddings and activations differ in frame count")
        acts = self.activations.astype(np.float64)
        if np.any(acts < 0) or np.any(np.abs(acts.sum(axis=1) - 1.0) > SIMPLEX_TOLERANCE):
            raise ValueError("activation rows must be probability vectors")
        tolerance = 1.0 / self.frame_rate + 1e-9
        for t in self.downbeats:
            if self.beats.size == 0 or np.min(np.abs(self.beats - t)) > tolerance:
                raise ValueError(f"downbeat at {t:.3f}s is not a beat")
        return self

    @property
    def frames(self) -> int:
        return int(self.activations.shape[0])

    @property
    def emb_dim(self) -> int:
        return int(self.embeddings.shape[1])


def frame_labels(
    beats: np.ndarray,
    downbeats: np.ndarray,
    frames: int,
    frame_rate: float,
    widen: int = 0,
) -> np.ndarray:
    """Per-frame class ids from annotated times.

    Each event lands on frame round(t * frame_rate) and spreads ``widen``
    frames to each side. Downbeats override beats; events outside the clip
    are ignored.
    """
    labels = np.full(frames, NON_BEAT, dtype=np.int64)
    for times, label in ((beats, BEAT), (downbeats, DOWNBEAT)):
        for t in np.asarray(times, dtype=np.float64):
            centre = int(round(t * frame_rate))
            lo, hi = max(centre - widen, 0), min(centre + widen + 1, frames)
            if lo < hi:
                labels[lo:hi] = label
    return labels


# =============================================================================
# FEATURE FILES
# =============================================================================


def save_features(feats: BeatFeatures, path: Union[str, Path]) -> Path:
    """Write features in the little-endian BTFT layout."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.zeros(1, dtype=HEADER)
    header[0] = (FEATURE_MAGIC, FEATURE_VERSION, feats.emb_dim, feats.frames, feats.beats.size, feats.downbeats.size, feats.frame_rate, 0)
    with path.open("wb") as handle:
        handle.write(header.tobytes())
        handle.write(feats.embeddings.astype("<f4").tobytes())
        handle.write(feats.activations.astype("<f4").tobytes())
        handle.write(feats.beats.astype("<f8").tobytes())
        handle.write(feats.downbeats.astype("<f8").tobytes())
    return path


def load_features(path: Union[str, Path]) -> BeatFeatures:
    """Read and validate a feature file written by save_features (or any tool using the same layout)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Feature file not found: {path}")
    data = path.read_bytes()
    if len(data) < HEADER.itemsize:
        raise FeatureFileError(f"{path}: truncated header")
    header = np.frombuffer(data[: HEADER.itemsize], dtype=HEADER)[0]
    if bytes(header["magic"]) != FEATURE_MAGIC:
        raise FeatureFileError(f"{path}: bad magic {bytes(header['magic'])!r}")
    if int(header["version"]) != FEATURE_VERSION:
        raise FeatureFileError(f"{path}: unsupported version {int(header['version'])}")

    frames, emb_dim = int(header["frames"]), int(header["emb_dim"])
    n_beats, n_downbeats = int(header["n_beats"]), int(header["n_downbeats"])
    sizes = [frames * emb_dim * 4, frames * 3 * 4, n_beats * 8, n_downbeats * 8]
    if len(data) != HEADER.itemsize + sum(sizes):
        raise FeatureFileError(f"{path}: expected {HEADER.itemsize + sum(sizes)} bytes, found {len(data)}")

    blocks, offset = [], HEADER.itemsize
    for size, dtype in zip(sizes, ("<f4", "<f4", "<f8", "<f8")):
        blocks.append(np.frombuffer(data[offset : offset + size], dtype=dtype))
        offset += size
    try:
        return BeatFeatures(
            frame_rate=float(header["frame_rate"]),
            embeddings=blocks[0].reshape(frames, emb_dim),
            activations=blocks[1].reshape(frames, 3),
            beats=blocks[2],
            downbeats=blocks[3],
        )
    except ValueError as exc:
        raise FeatureFileError(f"{path}: {exc}") from exc

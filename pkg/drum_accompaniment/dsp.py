"""Audio I/O, STFT/mel analysis, Griffin-Lim inversion and clip slicing."""

import logging
from functools import lru_cache
from pathlib import Path
from typing import Union

import librosa
import numpy as np
import soundfile as sf
from pydantic import BaseModel, ConfigDict, field_validator

from .errors import AudioError
from .schema import DspConfig

logger = logging.getLogger(__name__)

SAMPLE_RATE = 44100
SUPPORTED_SUBTYPES = {"PCM_16", "PCM_24", "PCM_32", "FLOAT", "DOUBLE"}


# =============================================================================
# CONTAINERS
# =============================================================================


class AudioClip(BaseModel):
    """Mono waveform at 44.1 kHz, amplitudes nominally in [-1, 1]."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    @field_validator("samples", mode="before")
    @classmethod
    def as_mono_float(cls, value) -> np.ndarray:
        samples = np.asarray(value, dtype=np.float32)
        if samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {samples.shape}")
        if samples.size == 0:
            raise ValueError("samples must not be empty")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        return samples

    @field_validator("sample_rate")
    @classmethod
    def check_rate(cls, value: int) -> int:
        if value != SAMPLE_RATE:
            raise ValueError(f"sample_rate must be {SAMPLE_RATE}")
        return value

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


class MelSpec(BaseModel):
    """Frames x 80 matrix of log-mel energies."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def as_matrix(cls, value) -> np.ndarray:
        values = np.asarray(value, dtype=np.float32)
        if values.ndim != 2 or values.shape[1] != 80:
            raise ValueError(f"mel must be frames x 80, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("mel values must be finite")
        return values

    @property
    def frames(self) -> int:
        return int(self.values.shape[0])

    @property
    def bins(self) -> int:
        return int(self.values.shape[1])


# =============================================================================
# WAV I/O
# =============================================================================


def load_wav(path: Union[str, Path]) -> AudioClip:
    """Read a WAV file as a 44.1 kHz mono clip.

    Args:
        path: PCM (16/24/32-bit) or float WAV file, any channel count

    Returns:
        Downmixed, resampled clip with fixed-point data scaled by 1/2^(bits-1)
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Audio file not found: {path}")
    try:
        info = sf.info(str(path))
    except (RuntimeError, sf.LibsndfileError) as exc:
        raise AudioError(f"cannot read {path}: {exc}") from exc
    if info.format != "WAV" or info.subtype not in SUPPORTED_SUBTYPES:
        raise AudioError(f"{path}: unsupported encoding {info.format}/{info.subtype}")

    data, sample_rate = sf.read(str(path), dtype="float64", always_2d=True)
    if data.shape[0] == 0:
        raise AudioError(f"{path} contains no audio")
    mono = data.mean(axis=1)
    if not np.all(np.isfinite(mono)):
        raise AudioError(f"{path} contains NaN or infinite samples")
    if sample_rate != SAMPLE_RATE:
        logger.debug("Resampling %s from %d Hz", path.name, sample_rate)
        mono = librosa.resample(mono, orig_sr=sample_rate, target_sr=SAMPLE_RATE)
    return AudioClip(samples=mono)


def save_wav(clip: AudioClip, path: Union[str, Path], subtype: str = "PCM_16") -> Path:
    """Write a clip as WAV (PCM_16 or FLOAT)."""
    if subtype not in ("PCM_16", "FLOAT"):
        raise AudioError(f"unsupported output subtype {subtype}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sf.write(str(path), np.clip(clip.samples, -1.0, 1.0), clip.sample_rate, subtype=subtype, format="WAV")
    return path


# =============================================================================
# ANALYSIS
# =============================================================================


def rms(clip: AudioClip) -> float:
    return float(np.sqrt(np.mean(np.square(clip.samples, dtype=np.float64))))


def stft_mag(clip: AudioClip, cfg: DspConfig) -> np.ndarray:
    """Magnitude STFT, frames x (win/2 + 1), with reflect center padding.

    The trailing frame centred past the end is dropped, so a clip of n samples
    has exactly n // hop frames.
    """
    n = len(clip)
    if n < cfg.win_length:
        raise AudioError(f"clip of {n} samples is shorter than one window ({cfg.win_length})")
    spec = librosa.stft(
        clip.samples.astype(np.float64),
        n_fft=cfg.win_length,
        hop_length=cfg.hop,
        win_length=cfg.win_length,
        window="hann",
        center=True,
        pad_mode="reflect",
    )
    return np.abs(spec[:, : n // cfg.hop]).T


@lru_cache(maxsize=8)
def _filterbank(sample_rate: int, n_fft: int, n_mels: int, fmin: float, fmax: float) -> np.ndarray:
    return librosa.filters.mel(sr=sample_rate, n_fft=n_fft, n_mels=n_mels, fmin=fmin, fmax=fmax, htk=False, norm="slaney")


def mel_filterbank(cfg: DspConfig) -> np.ndarray:
    """Triangular, area-normalised filterbank of shape n_mels x (win/2 + 1)."""
    return _filterbank(cfg.sample_rate, cfg.win_length, cfg.n_mels, cfg.mel_fmin, cfg.mel_fmax)


def mel_project(mag: np.ndarray, cfg: DspConfig) -> MelSpec:
    """Project magnitudes onto the mel filterbank and take log(max(., floor))."""
    mag = np.asarray(mag, dtype=np.float64)
    if mag.ndim != 2 or mag.shape[1] != cfg.n_fft_bins:
        raise ValueError(f"expected frames x {cfg.n_fft_bins} magnitudes, got shape {mag.shape}")
    energies = mag @ mel_filterbank(cfg).T
    return MelSpec(values=np.log(np.maximum(energies, cfg.log_floor)))


def mel_spectrogram(clip: AudioClip, cfg: DspConfig) -> MelSpec:
    return mel_project(stft_mag(clip, cfg), cfg)


# =============================================================================
# SYNTHESIS
# =============================================================================


def griffin_lim(mel: MelSpec, cfg: DspConfig) -> AudioClip:
    """Invert a log-mel to audio of exactly frames * hop samples.

    The floor is subtracted and magnitudes clamped at zero before the NNLS
    pseudo-inverse, so a floor-only mel inverts to silence.
    """
    linear_mel = np.maximum(np.exp(mel.values.astype(np.float64)) - cfg.log_floor, 0.0).T
    length = mel.frames * cfg.hop
    if not np.any(linear_mel):
        return AudioClip(samples=np.zeros(length, dtype=np.float32))

    magnitude = librosa.feature.inverse.mel_to_stft(
        linear_mel,
        sr=cfg.sample_rate,
        n_fft=cfg.win_length,
        power=1.0,
        fmin=cfg.mel_fmin,
        fmax=cfg.mel_fmax,
        htk=False,
        norm="slaney",
    )
    # centered STFT of `length` samples has one more frame than the mel
    magnitude = np.concatenate([magnitude, magnitude[:, -1:]], axis=1)
    audio = librosa.griffinlim(
        magnitude,
        n_iter=cfg.griffin_lim_iters,
        hop_length=cfg.hop,
        win_length=cfg.win_length,
        n_fft=cfg.win_length,
        window="hann",
        center=True,
        pad_mode="reflect",
        length=length,
        random_state=0,
    )
    return AudioClip(samples=np.clip(audio, -1.0, 1.0))


# =============================================================================
# CLIP UTILITIES
# =============================================================================


def mix(*clips: AudioClip) -> AudioClip:
    """Sample-wise sum of equal-length clips, clipped to [-1, 1]."""
    if not clips:
        raise ValueError("mix needs at least one clip")
    lengths = {len(c) for c in clips}
    if len(lengths) != 1:
        raise AudioError(f"cannot mix clips of different lengths {sorted(lengths)}")
    total = np.sum([c.samples.astype(np.float64) for c in clips], axis=0)
    return AudioClip(samples=np.clip(total, -1.0, 1.0))


def fit_length(clip: AudioClip, n: int) -> AudioClip:
    """Zero-pad or trim to n samples."""
    if len(clip) == n:
        return clip
    if len(clip) > n:
        return AudioClip(samples=clip.samples[:n])
    return AudioClip(samples=np.pad(clip.samples, (0, n - len(clip))))


def clip_offsets(drums: AudioClip, cfg: DspConfig) -> list[int]:
    """Start samples of the full clips kept by slice_paired_clips."""
    offsets = []
    for offset in range(0, len(drums) - cfg.clip_samples + 1, cfg.clip_stride):
        if rms(AudioClip(samples=drums.samples[offset : offset + cfg.clip_samples])) < cfg.silence_rms:
            logger.debug("Dropping drum-silent clip at offset %d", offset)
            continue
        offsets.append(offset)
    return offsets


def slice_paired_clips(drumless: AudioClip, drums: AudioClip, cfg: DspConfig) -> list[tuple[AudioClip, AudioClip]]:
    """Cut aligned stems into overlapping clips, dropping clips without drums."""
    if len(drumless) != len(drums):
        raise AudioError(f"stems differ in length ({len(drumless)} vs {len(drums)})")
    pairs = []
    for offset in clip_offsets(drums, cfg):
        window = slice(offset, offset + cfg.clip_samples)
        pairs.append((AudioClip(samples=drumless.samples[window]), AudioClip(samples=drums.samples[window])))
    return pairs

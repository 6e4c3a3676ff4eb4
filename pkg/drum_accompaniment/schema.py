from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

# =============================================================================
# SHARED ENUMS
# =============================================================================


class Architecture(str, Enum):
    """Code language model architectures."""

    SEQ2SEQ = "seq2seq"  # Encoder over drumless codes, decoder over drum codes
    DECODER_ONLY = "decoder_only"  # Decoder alone, no encoder/decoder attention


class BeatLevel(str, Enum):
    """Granularity of the beat condition injected into the language model."""

    LOW = "low"  # Tracker embeddings, pooled and projected
    MID = "mid"  # Activation peaks
    HIGH = "high"  # Decoded beat/downbeat positions
    NONE = "none"  # No beat condition (all-zero embedding)


class Stage(str, Enum):
    """Training stages, in the order they run."""

    VQVAE_DRUMLESS = "vqvae-drumless"
    VQVAE_DRUM = "vqvae-drum"
    TRACKER = "tracker"
    LM = "lm"


class Split(str, Enum):
    """Recording-level dataset splits."""

    TRAIN = "train"
    VALID = "valid"
    TEST = "test"


# =============================================================================
# SIGNAL PROCESSING
# =============================================================================


class DspConfig(BaseModel):
    """STFT, mel and clip slicing parameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    sample_rate: int = Field(44100, description="Sample rate of every clip in Hz.")
    win_length: int = Field(1024, gt=0, description="Hann window and FFT size in samples.")
    hop: int = Field(256, gt=0, description="STFT hop size in samples.")
    n_mels: int = Field(80, description="Number of mel bands.")
    clip_samples: int = Field(2**20, gt=0, description="Length of a training/generation clip in samples.")
    overlap: float = Field(0.5, ge=0.0, lt=1.0, description="Fractional overlap between consecutive clips.")
    mel_fmin: float = Field(0.0, ge=0.0, description="Lowest mel filter edge in Hz.")
    mel_fmax: float = Field(22050.0, gt=0.0, description="Highest mel filter edge in Hz.")
    log_floor: float = Field(1e-5, gt=0.0, description="Energy floor applied before the log.")
    griffin_lim_iters: int = Field(64, ge=1, description="Phase reconstruction iterations.")
    silence_rms: float = Field(1e-4, ge=0.0, description="Clips with RMS below this count as silent.")

    @model_validator(mode="after")
    def check_consistency(self) -> "DspConfig":
        if self.sample_rate != 44100:
            raise ValueError("sample_rate must be 44100")
        if self.n_mels != 80:
            raise ValueError("n_mels must be 80")
        if self.clip_samples % self.hop:
            raise ValueError(f"clip_samples ({self.clip_samples}) must be divisible by hop ({self.hop})")
        if self.clip_samples < self.win_length:
            raise ValueError("clip_samples must cover at least one window")
        if self.mel_fmax <= self.mel_fmin or self.mel_fmax > self.sample_rate / 2:
            raise ValueError("mel_fmax must lie in (mel_fmin, sample_rate / 2]")
        return self

    @property
    def n_fft_bins(self) -> int:
        return self.win_length // 2 + 1

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop

    @property
    def clip_frames(self) -> int:
        return self.clip_samples // self.hop

    @property
    def clip_stride(self) -> int:
        return int(round(self.clip_samples * (1.0 - self.overlap)))


# =============================================================================
# VQ-VAE CODECS
# =============================================================================


class CodecConfig(BaseModel):
    """Mel-domain VQ-VAE hyperparameters."""

    model_config = ConfigDict(
        frozen=True,
        extra="forbid",
        json_schema_extra={"example": {"codebook_size": 32, "latent_dim": 64, "frames_per_code": 4, "channels": 128}},
    )

    codebook_size: int = Field(..., ge=2, description="Number of prototype vectors K.")
    latent_dim: int = Field(64, ge=1, description="Latent / prototype dimension D.")
    frames_per_code: int = Field(4, ge=1, description="Mel frames summarised by one code (L).")
    encoder_layers: int = Field(2, ge=1, description="Stride-2 convolutional blocks in the encoder.")
    decoder_layers: int = Field(2, ge=1, description="Stride-2 transposed blocks in the decoder.")
    channels: int = Field(128, ge=1, description="Hidden channel width.")
    n_mels: int = Field(80, description="Mel bands of the input/target.")
    mel_mean: float = Field(-5.0, description="Fixed offset removed from mels before encoding and restored after decoding.")
    mel_std: float = Field(4.0, gt=0.0, description="Fixed scale applied together with mel_mean.")
    ema_decay: float = Field(0.99, ge=0.0, le=1.0, description="Codebook EMA decay.")
    commitment_beta: float = Field(0.25, ge=0.0, description="Commitment loss weight.")
    dead_code_threshold: float = Field(1e-2, ge=0.0, description="EMA usage below which an entry is reseeded.")

    @model_validator(mode="after")
    def check_downsampling(self) -> "CodecConfig":
        if self.decoder_layers != self.encoder_layers:
            raise ValueError("encoder and decoder must have the same number of layers")
        if self.frames_per_code != 2**self.encoder_layers:
            raise ValueError(f"frames_per_code must be 2**encoder_layers = {2 ** self.encoder_layers}")
        return self


# =============================================================================
# BEAT TRACKING
# =============================================================================


class TrackerConfig(BaseModel):
    """Bidirectional recurrent beat/downbeat tracker."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_mels: int = Field(80, description="Mel bands of the input.")
    hidden_size: int = Field(25, ge=1, description="Recurrent units per direction.")
    head_hidden: int = Field(32, ge=1, description="Width of the hidden fully-connected layer.")
    label_widen: int = Field(1, ge=0, description="Frames on each side of an annotation that share its label.")

    @property
    def embedding_dim(self) -> int:
        return 2 * self.hidden_size


class PeakConfig(BaseModel):
    """Peak picking on activation functions."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    min_height: float = Field(0.3, ge=0.0, description="Minimum activation of a peak.")
    min_distance_s: float = Field(0.1, gt=0.0, description="Minimum spacing between kept peaks in seconds.")

    def min_distance_frames(self, frame_rate: float) -> int:
        return max(1, int(round(self.min_distance_s * frame_rate)))


class DecoderConfig(BaseModel):
    """Interval-constrained Viterbi beat decoder."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    min_interval_s: float = Field(0.25, gt=0.0, description="Shortest inter-beat interval.")
    max_interval_s: float = Field(1.0, gt=0.0, description="Longest inter-beat interval.")
    tempo_sigma: float = Field(0.1, gt=0.0, description="Std-dev of the log interval ratio between beats.")
    beat_floor: float = Field(0.05, ge=0.0, le=1.0, description="Frames with beat probability below this cannot hold a beat.")
    beats_per_bar: int = Field(4, ge=1, description="Fixed bar length used to place downbeats.")

    @model_validator(mode="after")
    def check_intervals(self) -> "DecoderConfig":
        if self.max_interval_s < self.min_interval_s:
            raise ValueError("max_interval_s must be >= min_interval_s")
        return self


# =============================================================================
# LANGUAGE MODEL
# =============================================================================


class LMConfig(BaseModel):
    """Seq2seq code language model."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    d_model: int = Field(512, ge=1, description="Width of every embedding and attention layer.")
    heads: int = Field(2, ge=1, description="Attention heads.")
    chunk: int = Field(16, ge=1, description="Chunk size of the factorized attention.")
    encoder_layers: int = Field(9, ge=1, description="Encoder layers (cycling in/cross/previous chunk).")
    decoder_layers: int = Field(20, ge=1, description="Seq2seq decoder layers including encoder/decoder attention.")
    seq_len: int = Field(1024, ge=1, description="Code sequence length T.")
    drumless_vocab: int = Field(1024, ge=2, description="Drumless codebook size K^m.")
    drum_vocab: int = Field(32, ge=2, description="Drum codebook size K^d.")
    dropout: float = Field(0.0, ge=0.0, lt=1.0, description="Dropout on attention and residual paths.")
    ff_mult: int = Field(4, ge=1, description="Feed-forward expansion factor.")
    cond_dim: int = Field(50, ge=1, description="Width of the tracker embeddings fed to the low-level condition.")
    architecture: Architecture = Field(Architecture.SEQ2SEQ, description="seq2seq or decoder_only.")
    cond_in_encoder: bool = Field(True, description="Add the beat condition to the encoder input.")
    cond_in_decoder: bool = Field(True, description="Add the beat condition to the decoder input.")

    @model_validator(mode="after")
    def check_shapes(self) -> "LMConfig":
        if self.seq_len % self.chunk:
            raise ValueError(f"seq_len ({self.seq_len}) must be divisible by chunk ({self.chunk})")
        if self.d_model % self.heads:
            raise ValueError(f"heads ({self.heads}) must divide d_model ({self.d_model})")
        return self

    @property
    def vocab_in(self) -> int:
        return self.drumless_vocab + 1

    @property
    def vocab_out(self) -> int:
        return self.drum_vocab + 1

    @property
    def start_token(self) -> int:
        return self.drum_vocab


class SamplingConfig(BaseModel):
    """Autoregressive sampling of drum codes."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    temperature: float = Field(1.0, gt=0.0, description="Softmax temperature.")
    top_k: int = Field(32, ge=1, description="Keep only the k most likely codes.")


# =============================================================================
# TRAINING
# =============================================================================


class TrainConfig(BaseModel):
    """Optimisation settings shared by all trainers."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    steps: int = Field(1000, ge=0, description="Optimizer steps.")
    batch_size: int = Field(16, ge=1, description="Items per minibatch.")
    lr: float = Field(3e-4, ge=0.0, description="Adam learning rate.")
    crop_frames: Optional[int] = Field(None, ge=1, description="Random crop length in mel frames (None = whole clip).")
    log_every: int = Field(50, ge=1, description="Log the loss every N steps.")
    checkpoint_every: int = Field(500, ge=1, description="Write a resumable checkpoint every N steps.")


class SyntheticSpec(BaseModel):
    """Programmatic paired corpus of drumless tracks and drum renders."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_recordings: int = Field(10, ge=1, description="Number of recordings to render.")
    duration_s: float = Field(48.0, gt=0.0, description="Length of each recording in seconds.")
    min_bpm: float = Field(80.0, gt=0.0, description="Slowest tempo.")
    max_bpm: float = Field(160.0, gt=0.0, description="Fastest tempo.")

    @model_validator(mode="after")
    def check_tempo(self) -> "SyntheticSpec":
        if self.max_bpm < self.min_bpm:
            raise ValueError("max_bpm must be >= min_bpm")
        return self


# =============================================================================
# VARIANTS AND RUNS
# =============================================================================

VALID_VARIANTS = {
    (Architecture.SEQ2SEQ, BeatLevel.LOW),
    (Architecture.SEQ2SEQ, BeatLevel.MID),
    (Architecture.SEQ2SEQ, BeatLevel.HIGH),
    (Architecture.SEQ2SEQ, BeatLevel.NONE),
    (Architecture.DECODER_ONLY, BeatLevel.LOW),
    (Architecture.DECODER_ONLY, BeatLevel.NONE),
}


class VariantSpec(BaseModel):
    """One of the six evaluated model variants."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    architecture: Architecture = Field(Architecture.SEQ2SEQ, description="seq2seq or decoder_only.")
    beat_level: BeatLevel = Field(BeatLevel.LOW, description="Beat condition level.")

    @model_validator(mode="after")
    def check_combination(self) -> "VariantSpec":
        if (self.architecture, self.beat_level) not in VALID_VARIANTS:
            raise ValueError(f"{self.architecture.value} with beat level {self.beat_level.value} is not a supported variant")
        return self

    @property
    def name(self) -> str:
        prefix = "seq2seq" if self.architecture == Architecture.SEQ2SEQ else "decoder"
        if self.beat_level == BeatLevel.NONE:
            return f"{prefix} w/o beat"
        return f"{prefix}+beat ({self.beat_level.value})"

    @property
    def slug(self) -> str:
        return f"{self.architecture.value}-{self.beat_level.value}"

    @classmethod
    def from_name(cls, name: str) -> "VariantSpec":
        """Parse a display name ("seq2seq+beat (low)", "decoder w/o beat") or a slug."""
        key = name.replace(" ", "").lower()
        for architecture, beat_level in VALID_VARIANTS:
            spec = cls(architecture=architecture, beat_level=beat_level)
            if key in (spec.name.replace(" ", "").lower(), spec.slug):
                return spec
        raise ValueError(f"unknown variant {name!r}")


class PathsConfig(BaseModel):
    """Where corpora and runs live."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    corpus_dir: str = Field("corpus", description="Directory written by build-corpus.")
    run_dir: str = Field("runs/default", description="Checkpoints, traces and manifests.")


class CliConfig(BaseModel):
    """Top-level configuration file."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(0, description="Base seed; every stage derives its own generator from it.")
    dsp: DspConfig = Field(default_factory=DspConfig)
    drumless_codec: CodecConfig = Field(default_factory=lambda: CodecConfig(codebook_size=1024))
    drum_codec: CodecConfig = Field(default_factory=lambda: CodecConfig(codebook_size=32))
    tracker: TrackerConfig = Field(default_factory=TrackerConfig)
    peaks: PeakConfig = Field(default_factory=PeakConfig)
    beat_decoder: DecoderConfig = Field(default_factory=DecoderConfig)
    lm: LMConfig = Field(default_factory=LMConfig)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    codec_train: TrainConfig = Field(default_factory=lambda: TrainConfig(batch_size=4, crop_frames=256))
    tracker_train: TrainConfig = Field(default_factory=lambda: TrainConfig(steps=500, batch_size=4))
    lm_train: TrainConfig = Field(default_factory=lambda: TrainConfig(steps=2000, batch_size=16))
    synthetic: SyntheticSpec = Field(default_factory=SyntheticSpec)
    variant: VariantSpec = Field(default_factory=VariantSpec)
    paths: PathsConfig = Field(default_factory=PathsConfig)

    @model_validator(mode="after")
    def check_cross_fields(self) -> "CliConfig":
        if self.drumless_codec.codebook_size < self.drum_codec.codebook_size:
            raise ValueError("drumless_codec.codebook_size must be >= drum_codec.codebook_size")
        if self.drumless_codec.frames_per_code != self.drum_codec.frames_per_code:
            raise ValueError("both codecs must use the same frames_per_code")
        if self.lm.drumless_vocab != self.drumless_codec.codebook_size:
            raise ValueError("lm.drumless_vocab must equal drumless_codec.codebook_size")
        if self.lm.drum_vocab != self.drum_codec.codebook_size:
            raise ValueError("lm.drum_vocab must equal drum_codec.codebook_size")
        if self.lm.seq_len * self.drum_codec.frames_per_code != self.dsp.clip_frames:
            raise ValueError(f"lm.seq_len * frames_per_code must equal the clip frame count ({self.dsp.clip_frames})")
        if self.lm.cond_dim != self.tracker.embedding_dim:
            raise ValueError("lm.cond_dim must equal 2 * tracker.hidden_size")
        if self.sampling.top_k > self.lm.drum_vocab:
            raise ValueError("sampling.top_k must not exceed lm.drum_vocab")
        if self.codec_train.crop_frames is not None and self.codec_train.crop_frames % self.drum_codec.frames_per_code:
            raise ValueError("codec_train.crop_frames must be a multiple of frames_per_code")
        return self

    @property
    def codes_per_clip(self) -> int:
        return self.dsp.clip_frames // self.drum_codec.frames_per_code

    def lm_for(self, variant: VariantSpec) -> LMConfig:
        """LM config with the architecture the variant asks for."""
        return self.lm.model_copy(update={"architecture": variant.architecture})


# =============================================================================
# RUN RECORDS
# =============================================================================


class RunManifest(BaseModel):
    """What a run used and produced."""

    config: dict = Field(default_factory=dict, description="Snapshot of the CliConfig used.")
    seeds: dict[str, int] = Field(default_factory=dict, description="Seed used by each stage.")
    splits: dict[Split, list[str]] = Field(default_factory=dict, description="Recording ids per split.")
    checkpoints: dict[str, str] = Field(default_factory=dict, description="Checkpoint path per component.")
    metrics: dict[str, dict[str, float]] = Field(default_factory=dict, description="Aggregate metrics per variant.")

    @model_validator(mode="after")
    def check_split_hygiene(self) -> "RunManifest":
        seen: dict[str, Split] = {}
        for split, ids in self.splits.items():
            for rec in ids:
                if rec in seen and seen[rec] != split:
                    raise ValueError(f"recording {rec!r} appears in both {seen[rec].value} and {Split(split).value}")
                seen[rec] = Split(split)
        return self


class ClipMetrics(BaseModel):
    """Rhythm agreement between one generated clip and its reference drums."""

    clip_id: str
    trackemb_mse: float = Field(..., ge=0.0)
    act_entropy: float = Field(..., ge=0.0)
    beat_f1: float = Field(..., ge=0.0, le=1.0)
    downbeat_f1: float = Field(..., ge=0.0, le=1.0)

    @property
    def bdb_f1(self) -> float:
        return 0.5 * (self.beat_f1 + self.downbeat_f1)


class MetricSummary(BaseModel):
    """Mean and standard deviation of one metric across clips."""

    mean: float
    std: float


class MetricReport(BaseModel):
    """Per-clip rows plus aggregates."""

    clips: list[ClipMetrics]
    summary: dict[str, MetricSummary] = Field(default_factory=dict)

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "clips": [{"clip_id": "rec003_0", "trackemb_mse": 0.068, "act_entropy": 0.928, "beat_f1": 0.34, "downbeat_f1": 0.34}],
                "summary": {"beat_f1": {"mean": 0.34, "std": 0.0}},
            }
        }
    )

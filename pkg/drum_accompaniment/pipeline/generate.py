"""Inference: drumless clip -> drum codes -> drum clip."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import torch

from ..beat import BeatTracker, load_tracker, prepare_condition, track_audio
from ..codec import VQCodec, load_codec
from ..dsp import AudioClip, fit_length, griffin_lim, mel_spectrogram
from ..errors import PipelineError
from ..lm import CodeLM, load_lm, sample
from ..schema import BeatLevel, CliConfig, VariantSpec
from .train import checkpoint_paths

logger = logging.getLogger(__name__)


@dataclass
class Bundle:
    """Every trained component one variant needs at inference time."""

    variant: VariantSpec
    drumless_codec: VQCodec
    drum_codec: VQCodec
    lm: CodeLM
    tracker: Optional[BeatTracker] = None


def load_bundle(run_dir: Union[str, Path], variant: VariantSpec, config: Optional[CliConfig] = None) -> Bundle:
    """Load the checkpoints of ``variant`` from a run directory and check they fit together.

    With ``config``, the language model length must also match the configured clip.
    """
    paths = checkpoint_paths(run_dir, variant)
    needed = ["codec_drumless", "codec_drum", "lm"]
    if variant.beat_level != BeatLevel.NONE:
        needed.append("tracker_drumless")
    for name in needed:
        if not paths[name].exists():
            raise PipelineError(f"missing checkpoint {paths[name]}", stage="generate")

    lm, level = load_lm(paths["lm"])
    if level != variant.beat_level or lm.cfg.architecture != variant.architecture:
        raise PipelineError(
            f"{paths['lm'].name} holds {lm.cfg.architecture.value}/{level.value}, not {variant.slug}",
            stage="generate",
        )
    drumless_codec, drum_codec = load_codec(paths["codec_drumless"]), load_codec(paths["codec_drum"])
    if drumless_codec.cfg.codebook_size != lm.cfg.drumless_vocab or drum_codec.cfg.codebook_size != lm.cfg.drum_vocab:
        raise PipelineError("codec codebook sizes do not match the language model vocabularies", stage="generate")
    check_code_rate(lm, drumless_codec, drum_codec, config)
    tracker = load_tracker(paths["tracker_drumless"]) if "tracker_drumless" in needed else None
    return Bundle(variant=variant, drumless_codec=drumless_codec, drum_codec=drum_codec, lm=lm, tracker=tracker)


def check_code_rate(lm: CodeLM, drumless_codec: VQCodec, drum_codec: VQCodec, config: Optional[CliConfig]) -> None:
    if drumless_codec.cfg.frames_per_code != drum_codec.cfg.frames_per_code:
        raise PipelineError("drumless and drum codecs use different frames per code", stage="generate")
    if config is None:
        return
    frames = lm.cfg.seq_len * drum_codec.cfg.frames_per_code
    if frames != config.dsp.clip_frames:
        raise PipelineError(
            f"language model covers {frames} mel frames but clips have {config.dsp.clip_frames}; "
            "retrain it or use the config it was trained with",
            stage="generate",
        )


def fit_input(clip: AudioClip, config: CliConfig) -> AudioClip:
    if len(clip) != config.dsp.clip_samples:
        logger.warning("Input has %d samples; padding/trimming to %d", len(clip), config.dsp.clip_samples)
    return fit_length(clip, config.dsp.clip_samples)


@torch.no_grad()
def generate_codes(drumless: AudioClip, bundle: Bundle, config: CliConfig, seed: int) -> np.ndarray:
    """Sampled drum code sequence for one drumless clip."""
    check_code_rate(bundle.lm, bundle.drumless_codec, bundle.drum_codec, config)
    clip = fit_input(drumless, config)
    lm, level = bundle.lm, bundle.variant.beat_level
    feats = track_audio(clip, bundle.tracker, config.dsp, config.beat_decoder) if bundle.tracker is not None else None
    prepared = prepare_condition(
        feats, level, lm.cfg.seq_len, bundle.drum_codec.cfg.frames_per_code, config.dsp.frame_rate, config.peaks
    )
    cond = lm.conditioner(level, torch.from_numpy(prepared).unsqueeze(0))
    memory = None
    if lm.has_encoder:
        codes = bundle.drumless_codec.mel_to_codes(mel_spectrogram(clip, config.dsp))
        memory = lm.encoder_forward(torch.from_numpy(codes).unsqueeze(0), cond)
    return sample(lm, memory, cond, config.sampling.temperature, config.sampling.top_k, seed)


def generate(drumless: AudioClip, bundle: Bundle, config: CliConfig, seed: int) -> AudioClip:
    """Drum track for a drumless clip, with exactly as many samples as the input."""
    codes = generate_codes(drumless, bundle, config, seed)
    mel = bundle.drum_codec.codes_to_mel(codes, config.dsp.log_floor)
    return fit_length(griffin_lim(mel, config.dsp), len(drumless))

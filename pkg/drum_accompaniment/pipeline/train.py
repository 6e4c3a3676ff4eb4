"""Staged training: both codecs, both trackers, then the language model on frozen codecs."""

import logging
from pathlib import Path
from typing import Callable, Optional, TypeVar, Union

import numpy as np
import yaml

from ..beat import frame_labels, load_tracker, prepare_condition, track_audio, train_tracker
from ..checkpoint import load_checkpoint
from ..codec import load_codec, train_codec
from ..config import dump_config
from ..dsp import mel_spectrogram
from ..errors import DrumAccompanimentError, PipelineError
from ..lm import LMBatch, train_lm
from ..schema import BeatLevel, CliConfig, MetricReport, RunManifest, Split, Stage, TrainConfig, VariantSpec
from .corpus import ClipPair, Corpus

logger = logging.getLogger(__name__)

T = TypeVar("T")

MANIFEST_FILE = "manifest.yaml"
STAGE_ORDER = (Stage.VQVAE_DRUMLESS, Stage.VQVAE_DRUM, Stage.TRACKER, Stage.LM)


def checkpoint_paths(run_dir: Union[str, Path], variant: VariantSpec) -> dict[str, Path]:
    run_dir = Path(run_dir)
    return {
        "codec_drumless": run_dir / "codec_drumless.pt",
        "codec_drum": run_dir / "codec_drum.pt",
        "tracker_drumless": run_dir / "tracker_drumless.pt",
        "tracker_drum": run_dir / "tracker_drum.pt",
        "lm": run_dir / f"lm_{variant.slug}.pt",
    }


def stage_seeds(seed: int) -> dict[str, int]:
    return {stage.value: seed + index for index, stage in enumerate(STAGE_ORDER)}


def run_stage(stage: str, fn: Callable[[], T]) -> T:
    """Run one stage, relabelling any failure with the stage name."""
    try:
        return fn()
    except PipelineError:
        raise
    except DrumAccompanimentError as exc:
        raise PipelineError(exc.message, stage=stage) from exc
    except (ValueError, RuntimeError, KeyError) as exc:
        raise PipelineError(str(exc), stage=stage) from exc


def resume_point(path: Path, kind: str, train: TrainConfig) -> tuple[bool, Optional[Path]]:
    """(finished, checkpoint to resume from) for an existing checkpoint."""
    if not path.exists():
        return False, None
    step = load_checkpoint(path, kind)["step"]
    if step >= train.steps:
        logger.info("%s already trained (%d steps)", path.name, step)
        return True, None
    return False, path


def training_clips(corpus: Corpus, config: CliConfig) -> list[ClipPair]:
    clips = corpus.clips(Split.TRAIN, config.dsp)
    if not clips:
        raise PipelineError("corpus has no training clips", stage="build_corpus")
    return clips


# =============================================================================
# STAGES
# =============================================================================


def _train_codec_stage(stage: Stage, clips: list[ClipPair], config: CliConfig, path: Path, seed: int, resume: Optional[Path]) -> None:
    finished, auto = resume_point(path, "codec", config.codec_train)
    if finished and resume is None:
        return
    side = "drumless" if stage == Stage.VQVAE_DRUMLESS else "drums"
    cfg = config.drumless_codec if stage == Stage.VQVAE_DRUMLESS else config.drum_codec
    mels = [mel_spectrogram(getattr(clip, side), config.dsp) for clip in clips]
    train_codec(mels, cfg, config.codec_train, seed, stage=stage.value, checkpoint_path=path, resume=resume or auto)


def _train_tracker_stage(clips: list[ClipPair], config: CliConfig, paths: dict[str, Path], seed: int) -> None:
    annotated = [clip for clip in clips if clip.beats is not None]
    if not annotated:
        raise PipelineError("tracker training needs recordings with beat annotations", stage=Stage.TRACKER.value)
    for side in ("drumless", "drums"):
        path = paths["tracker_drumless" if side == "drumless" else "tracker_drum"]
        finished, auto = resume_point(path, "tracker", config.tracker_train)
        if finished:
            continue
        corpus = []
        for clip in annotated:
            mel = mel_spectrogram(getattr(clip, side), config.dsp)
            labels = frame_labels(clip.beats, clip.downbeats, mel.frames, config.dsp.frame_rate, config.tracker.label_widen)
            corpus.append((mel, labels))
        train_tracker(corpus, config.tracker, config.tracker_train, seed, stage=f"tracker-{side}", checkpoint_path=path, resume=auto)


def lm_dataset(clips: list[ClipPair], config: CliConfig, paths: dict[str, Path], level: BeatLevel) -> LMBatch:
    """Drumless codes, drum codes and prepared beat conditions of every clip."""
    for name in ("codec_drumless", "codec_drum"):
        if not paths[name].exists():
            raise PipelineError(f"codec checkpoint required: {paths[name]}", stage=Stage.LM.value)
    drumless_codec, drum_codec = load_codec(paths["codec_drumless"]), load_codec(paths["codec_drum"])
    tracker = None
    if level != BeatLevel.NONE:
        if not paths["tracker_drumless"].exists():
            raise PipelineError(f"tracker checkpoint required: {paths['tracker_drumless']}", stage=Stage.LM.value)
        tracker = load_tracker(paths["tracker_drumless"])

    src, tgt, prepared = [], [], []
    for clip in clips:
        src.append(drumless_codec.mel_to_codes(mel_spectrogram(clip.drumless, config.dsp)))
        tgt.append(drum_codec.mel_to_codes(mel_spectrogram(clip.drums, config.dsp)))
        feats = track_audio(clip.drumless, tracker, config.dsp, config.beat_decoder) if tracker is not None else None
        prepared.append(
            prepare_condition(feats, level, config.codes_per_clip, config.drum_codec.frames_per_code, config.dsp.frame_rate, config.peaks)
        )
    return LMBatch.from_arrays(np.stack(src), np.stack(tgt), np.stack(prepared))


def _train_lm_stage(clips: list[ClipPair], config: CliConfig, paths: dict[str, Path], variant: VariantSpec, seed: int, resume: Optional[Path]) -> None:
    finished, auto = resume_point(paths["lm"], "lm", config.lm_train)
    if finished and resume is None:
        return
    data = lm_dataset(clips, config, paths, variant.beat_level)
    train_lm(
        data,
        config.lm_for(variant),
        config.lm_train,
        variant.beat_level,
        seed,
        stage=Stage.LM.value,
        checkpoint_path=paths["lm"],
        resume=resume or auto,
    )


def train_stage(
    stage: Stage,
    corpus: Corpus,
    config: CliConfig,
    run_dir: Union[str, Path],
    variant: Optional[VariantSpec] = None,
    resume: Optional[Path] = None,
) -> dict[str, str]:
    """Train one stage, continuing from its own checkpoint when one exists.

    Returns:
        Checkpoint path per component written by the stage
    """
    stage = Stage(stage)
    variant = variant or config.variant
    paths = checkpoint_paths(run_dir, variant)
    seed = stage_seeds(config.seed)[stage.value]
    clips = training_clips(corpus, config)
    logger.info("Stage %s on %d clips", stage.value, len(clips))

    if stage == Stage.TRACKER:
        if resume is not None:
            raise PipelineError("--resume is not supported for the tracker stage; rerun to continue from the saved checkpoints", stage=stage.value)
        run_stage(stage.value, lambda: _train_tracker_stage(clips, config, paths, seed))
        return {name: str(paths[name]) for name in ("tracker_drumless", "tracker_drum")}
    if stage == Stage.LM:
        run_stage(stage.value, lambda: _train_lm_stage(clips, config, paths, variant, seed, resume))
        return {"lm": str(paths["lm"])}
    name = "codec_drumless" if stage == Stage.VQVAE_DRUMLESS else "codec_drum"
    run_stage(stage.value, lambda: _train_codec_stage(stage, clips, config, paths[name], seed, resume))
    return {name: str(paths[name])}


def train_all(
    corpus: Corpus,
    config: CliConfig,
    run_dir: Optional[Union[str, Path]] = None,
    variant: Optional[VariantSpec] = None,
) -> RunManifest:
    """Run every stage in order and write the run manifest.

    Stages whose checkpoints already hold all their steps are skipped and
    partially trained ones resume, so an interrupted run can simply be
    started again.
    """
    run_dir = Path(run_dir or config.paths.run_dir)
    variant = variant or config.variant
    checkpoints: dict[str, str] = {}
    for stage in STAGE_ORDER:
        checkpoints.update(train_stage(stage, corpus, config, run_dir, variant))
    previous = run_dir / MANIFEST_FILE
    manifest = RunManifest(
        config=dump_config(config),
        seeds=stage_seeds(config.seed),
        splits=corpus.splits,
        checkpoints=checkpoints,
        metrics=load_manifest(previous).metrics if previous.exists() else {},
    )
    write_manifest(manifest, run_dir / MANIFEST_FILE)
    return manifest


def write_manifest(manifest: RunManifest, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(manifest.model_dump(mode="json"), sort_keys=False))
    return path


def load_manifest(path: Union[str, Path]) -> RunManifest:
    path = Path(path)
    if not path.exists():
        raise PipelineError(f"run manifest not found: {path}")
    return RunManifest.model_validate(yaml.safe_load(path.read_text()))


def record_metrics(run_dir: Union[str, Path], variant: VariantSpec, report: MetricReport) -> RunManifest:
    """Store the mean of every metric under the variant in the run manifest."""
    path = Path(run_dir) / MANIFEST_FILE
    if not path.exists():
        raise PipelineError(f"run manifest not found: {path}", stage="evaluate")
    manifest = load_manifest(path)
    metrics = {**manifest.metrics, variant.slug: {name: summary.mean for name, summary in report.summary.items()}}
    manifest = manifest.model_copy(update={"metrics": metrics})
    write_manifest(manifest, path)
    return manifest

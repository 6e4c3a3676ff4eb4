"""Paired drumless/drum recordings: synthesis, stem loading, splits and on-disk layout."""

import logging
import math
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict

from ..dsp import SAMPLE_RATE, AudioClip, clip_offsets, load_wav, mix, save_wav
from ..errors import AudioError, PipelineError
from ..schema import DspConfig, Split, SyntheticSpec

logger = logging.getLogger(__name__)

DRUM_STEM = "drums.wav"
DRUMLESS_FILE = "drumless.wav"
ANNOTATION_FILE = "beats.yaml"
CORPUS_MANIFEST = "corpus.yaml"
HOLDOUT_FRACTION = 0.1


class Recording(BaseModel):
    """One song: the summed non-drum stems, the drum stem and optional beat annotations."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    id: str
    drumless: AudioClip
    drums: AudioClip
    beats: Optional[np.ndarray] = None
    downbeats: Optional[np.ndarray] = None

    @property
    def annotated(self) -> bool:
        return self.beats is not None


class ClipPair(BaseModel):
    """Aligned drumless/drum clips cut from one recording; times are clip-relative."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    clip_id: str
    recording_id: str
    offset: int
    drumless: AudioClip
    drums: AudioClip
    beats: Optional[np.ndarray] = None
    downbeats: Optional[np.ndarray] = None


class Corpus(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    recordings: list[Recording]
    splits: dict[Split, list[str]]
    seed: int = 0

    def recording(self, rec_id: str) -> Recording:
        for rec in self.recordings:
            if rec.id == rec_id:
                return rec
        raise KeyError(rec_id)

    def clips(self, split: Split, dsp: DspConfig) -> list[ClipPair]:
        """All kept clips of the recordings in one split, in recording order."""
        pairs = []
        for rec_id in self.splits.get(Split(split), []):
            pairs.extend(cut_clips(self.recording(rec_id), dsp))
        return pairs


def _clip_times(times: Optional[np.ndarray], start: float, duration: float) -> Optional[np.ndarray]:
    if times is None:
        return None
    inside = times[(times >= start) & (times < start + duration)]
    return inside - start


def cut_clips(rec: Recording, dsp: DspConfig) -> list[ClipPair]:
    if len(rec.drumless) != len(rec.drums):
        raise AudioError(f"recording {rec.id}: stems differ in length ({len(rec.drumless)} vs {len(rec.drums)})")
    pairs = []
    duration = dsp.clip_samples / dsp.sample_rate
    for index, offset in enumerate(clip_offsets(rec.drums, dsp)):
        window = slice(offset, offset + dsp.clip_samples)
        start = offset / dsp.sample_rate
        pairs.append(
            ClipPair(
                clip_id=f"{rec.id}_{index}",
                recording_id=rec.id,
                offset=offset,
                drumless=AudioClip(samples=rec.drumless.samples[window]),
                drums=AudioClip(samples=rec.drums.samples[window]),
                beats=_clip_times(rec.beats, start, duration),
                downbeats=_clip_times(rec.downbeats, start, duration),
            )
        )
    return pairs


# =============================================================================
# SYNTHETIC RECORDINGS
# =============================================================================


def _envelope(n: int, decay_s: float) -> np.ndarray:
    return np.exp(-np.arange(n) / (decay_s * SAMPLE_RATE))


def _place(track: np.ndarray, times: np.ndarray, sound: np.ndarray) -> None:
    for t in times:
        start = int(round(t * SAMPLE_RATE))
        stop = min(start + sound.size, track.size)
        if 0 <= start < stop:
            track[start:stop] += sound[: stop - start]


def synthesize_recording(spec: SyntheticSpec, rng: np.random.Generator, rec_id: str) -> tuple[Recording, dict[str, AudioClip]]:
    """Render one steady-tempo song: bass and keys stems plus a kick/snare/hat drum stem.

    Returns:
        The recording (drumless = bass + keys) with its beat/downbeat times, and the raw stems
    """
    n = int(round(spec.duration_s * SAMPLE_RATE))
    bpm = rng.uniform(spec.min_bpm, spec.max_bpm)
    period = 60.0 / bpm
    beats = np.arange(rng.uniform(0.0, period), spec.duration_s, period)
    phase = int(rng.integers(4))
    bar_position = (np.arange(beats.size) - phase) % 4
    downbeats = beats[bar_position == 0]

    short = np.arange(int(0.25 * SAMPLE_RATE)) / SAMPLE_RATE
    kick = np.sin(2 * np.pi * (50.0 * short + 60.0 * (1 - np.exp(-short / 0.03)))) * _envelope(short.size, 0.08)
    snare = rng.standard_normal(short.size) * _envelope(short.size, 0.05) * 0.5
    hat = rng.standard_normal(short.size // 4) * _envelope(short.size // 4, 0.01) * 0.2

    drums = np.zeros(n)
    _place(drums, beats[(bar_position == 0) | (bar_position == 2)], kick * 0.8)
    _place(drums, beats[(bar_position == 1) | (bar_position == 3)], snare)
    _place(drums, np.concatenate([beats, beats + period / 2]), hat)

    roots = rng.choice([55.0, 61.7, 65.4, 73.4, 82.4, 98.0], size=downbeats.size + 1)
    bar_index = np.searchsorted(downbeats, beats, side="right")
    note = np.arange(int(period * 0.9 * SAMPLE_RATE)) / SAMPLE_RATE
    bass = np.zeros(n)
    keys = np.zeros(n)
    for t, bar in zip(beats, bar_index):
        root = roots[bar]
        _place(bass, [t], 0.3 * np.sin(2 * np.pi * root * note) * _envelope(note.size, 0.3))
        chord = sum(np.sin(2 * np.pi * root * 4 * ratio * note) for ratio in (1.0, 1.26, 1.5))
        _place(keys, [t], 0.05 * chord * _envelope(note.size, 0.5))

    stems = {name: AudioClip(samples=np.clip(track, -1.0, 1.0)) for name, track in (("bass", bass), ("keys", keys), ("drums", drums))}
    recording = Recording(
        id=rec_id,
        drumless=mix(stems["bass"], stems["keys"]),
        drums=stems["drums"],
        beats=beats,
        downbeats=downbeats,
    )
    return recording, stems


# =============================================================================
# STEM DIRECTORIES
# =============================================================================


def _read_annotations(path: Path) -> tuple[Optional[np.ndarray], Optional[np.ndarray]]:
    if not path.exists():
        return None, None
    data = yaml.safe_load(path.read_text()) or {}
    return np.asarray(data.get("beats", []), dtype=np.float64), np.asarray(data.get("downbeats", []), dtype=np.float64)


def load_stem_recording(directory: Path) -> Recording:
    """Sum every non-drum WAV of a recording directory into the drumless track."""
    drum_path = directory / DRUM_STEM
    if not drum_path.exists():
        raise PipelineError(f"recording {directory.name} has no {DRUM_STEM}", stage="build_corpus")
    others = sorted(p for p in directory.glob("*.wav") if p.name not in (DRUM_STEM, DRUMLESS_FILE))
    if not others:
        raise PipelineError(f"recording {directory.name} has no non-drum stems", stage="build_corpus")
    try:
        drumless = mix(*(load_wav(p) for p in others))
        drums = load_wav(drum_path)
    except AudioError as exc:
        raise PipelineError(f"recording {directory.name}: {exc.message}", stage="build_corpus") from exc
    beats, downbeats = _read_annotations(directory / ANNOTATION_FILE)
    return Recording(id=directory.name, drumless=drumless, drums=drums, beats=beats, downbeats=downbeats)


# =============================================================================
# CORPUS
# =============================================================================


def split_recordings(ids: Sequence[str], seed: int) -> dict[Split, list[str]]:
    """Recording-level split: floor(10%) test, floor(10%) valid, the rest train."""
    order = [str(i) for i in np.random.default_rng(seed).permutation(sorted(ids))]
    n_holdout = math.floor(HOLDOUT_FRACTION * len(order))
    return {
        Split.TRAIN: sorted(order[2 * n_holdout :]),
        Split.VALID: sorted(order[n_holdout : 2 * n_holdout]),
        Split.TEST: sorted(order[:n_holdout]),
    }


def build_corpus(source: Union[SyntheticSpec, Sequence[Union[str, Path]]], seed: int) -> Corpus:
    """Paired recordings from a synthetic spec or a list of stem directories, split 80/10/10."""
    if isinstance(source, SyntheticSpec):
        rng = np.random.default_rng(seed)
        recordings = [synthesize_recording(source, rng, f"rec{i:03d}")[0] for i in range(source.n_recordings)]
    else:
        recordings = [load_stem_recording(Path(d)) for d in source]
    if not recordings:
        raise PipelineError("no recordings to build a corpus from", stage="build_corpus")
    ids = [rec.id for rec in recordings]
    if len(set(ids)) != len(ids):
        raise PipelineError("recording ids must be unique", stage="build_corpus")
    logger.info("Built corpus of %d recordings", len(recordings))
    return Corpus(recordings=recordings, splits=split_recordings(ids, seed), seed=seed)


def save_corpus(corpus: Corpus, out_dir: Union[str, Path]) -> Path:
    """Write one directory per recording plus a corpus.yaml split manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for rec in corpus.recordings:
        rec_dir = out_dir / rec.id
        save_wav(rec.drumless, rec_dir / DRUMLESS_FILE, subtype="FLOAT")
        save_wav(rec.drums, rec_dir / DRUM_STEM, subtype="FLOAT")
        if rec.annotated:
            annotations = {"beats": rec.beats.tolist(), "downbeats": rec.downbeats.tolist()}
            (rec_dir / ANNOTATION_FILE).write_text(yaml.safe_dump(annotations))
    manifest = {
        "seed": corpus.seed,
        "recordings": [rec.id for rec in corpus.recordings],
        "splits": {split.value: ids for split, ids in corpus.splits.items()},
    }
    path = out_dir / CORPUS_MANIFEST
    path.write_text(yaml.safe_dump(manifest, sort_keys=False))
    return path


def load_corpus(corpus_dir: Union[str, Path]) -> Corpus:
    """Read a corpus written by save_corpus."""
    corpus_dir = Path(corpus_dir)
    manifest_path = corpus_dir / CORPUS_MANIFEST
    if not manifest_path.exists():
        raise PipelineError(f"{corpus_dir} has no {CORPUS_MANIFEST}", stage="load_corpus")
    manifest = yaml.safe_load(manifest_path.read_text())
    recordings = []
    for rec_id in manifest["recordings"]:
        rec_dir = corpus_dir / rec_id
        try:
            drumless, drums = load_wav(rec_dir / DRUMLESS_FILE), load_wav(rec_dir / DRUM_STEM)
        except (FileNotFoundError, AudioError) as exc:
            raise PipelineError(f"recording {rec_id}: {exc}", stage="load_corpus") from exc
        beats, downbeats = _read_annotations(rec_dir / ANNOTATION_FILE)
        recordings.append(Recording(id=rec_id, drumless=drumless, drums=drums, beats=beats, downbeats=downbeats))
    splits = {Split(name): list(ids) for name, ids in manifest["splits"].items()}
    return Corpus(recordings=recordings, splits=splits, seed=int(manifest.get("seed", 0)))

"""Peak picking and interval-constrained Viterbi beat/downbeat decoding."""

import math
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks

from ..schema import DecoderConfig

_LOG_EPS = 1e-12


def pick_peaks(values: np.ndarray, min_height: float, min_distance: int) -> np.ndarray:
    """Strict local maxima at least ``min_height`` high and ``min_distance`` frames apart.

    Peaks closer than ``min_distance`` are suppressed greedily, tallest first.
    The first and last frame never count as peaks.
    """
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(values)):
        raise ValueError("activation values must be finite")
    if values.size < 3:
        return np.zeros(0, dtype=np.int64)
    peaks, _ = find_peaks(values, height=min_height, distance=max(int(min_distance), 1), plateau_size=(1, 1))
    return peaks.astype(np.int64)


def interval_bounds(frame_rate: float, cfg: DecoderConfig) -> tuple[int, int]:
    """Inter-beat interval range in frames."""
    return math.ceil(cfg.min_interval_s * frame_rate - 1e-9), math.floor(cfg.max_interval_s * frame_rate + 1e-9)


def beat_emission(activations: np.ndarray) -> np.ndarray:
    """Log-odds of any beat (beat + downbeat) against non-beat, per frame."""
    acts = np.asarray(activations, dtype=np.float64)
    p_beat = acts[:, 0] + acts[:, 1]
    return np.log(np.maximum(p_beat, _LOG_EPS)) - np.log(np.maximum(acts[:, 2], _LOG_EPS))


def tempo_penalty(interval: np.ndarray, previous: np.ndarray, sigma: float) -> np.ndarray:
    return -np.square(np.log(interval / previous)) / (2.0 * sigma**2)


def path_score(beat_frames: Sequence[int], activations: np.ndarray, frame_rate: float, cfg: DecoderConfig) -> float:
    """Score the decoder maximises; -inf for paths it is not allowed to take."""
    frames = [int(f) for f in beat_frames]
    if not frames:
        return 0.0
    acts = np.asarray(activations, dtype=np.float64)
    emission = beat_emission(acts)
    lo, hi = interval_bounds(frame_rate, cfg)
    if any(f < 0 or f >= len(acts) or acts[f, 0] + acts[f, 1] < cfg.beat_floor for f in frames):
        return -math.inf
    intervals = np.diff(frames)
    if np.any(intervals < lo) or np.any(intervals > hi):
        return -math.inf
    score = float(emission[frames].sum())
    if intervals.size > 1:
        score += float(tempo_penalty(intervals[1:].astype(np.float64), intervals[:-1].astype(np.float64), cfg.tempo_sigma).sum())
    return score


def viterbi_beats(activations: np.ndarray, frame_rate: float, cfg: DecoderConfig) -> np.ndarray:
    """Best-scoring beat frame sequence under the interval and tempo constraints.

    States are (last beat frame, interval to the beat before it). Column 0 of
    the score table holds paths whose last beat is also their first one.
    """
    acts = np.asarray(activations, dtype=np.float64)
    n_frames = acts.shape[0]
    lo, hi = interval_bounds(frame_rate, cfg)
    if n_frames < lo or hi < lo:
        return np.zeros(0, dtype=np.int64)

    emission = beat_emission(acts)
    candidate = acts[:, 0] + acts[:, 1] >= cfg.beat_floor
    intervals = np.arange(lo, hi + 1)
    n_int = intervals.size

    penalty = np.zeros((n_int, n_int + 1))
    penalty[:, 1:] = tempo_penalty(intervals[:, None].astype(np.float64), intervals[None, :].astype(np.float64), cfg.tempo_sigma)

    score = np.full((n_frames, n_int + 1), -np.inf)
    back = np.zeros((n_frames, n_int + 1), dtype=np.int64)
    for frame in np.flatnonzero(candidate):
        score[frame, 0] = emission[frame]
        sources = frame - intervals
        valid = sources >= 0
        if not np.any(valid):
            continue
        totals = score[sources[valid]] + penalty[valid]
        best = totals.argmax(axis=1)
        score[frame, 1:][valid] = emission[frame] + totals[np.arange(best.size), best]
        back[frame, 1:][valid] = best

    end_frame, end_state = np.unravel_index(np.argmax(score), score.shape)
    if not score[end_frame, end_state] > 0.0:
        return np.zeros(0, dtype=np.int64)

    path = [int(end_frame)]
    frame, state = int(end_frame), int(end_state)
    while state > 0:
        frame, state = frame - int(intervals[state - 1]), int(back[frame, state])
        path.append(frame)
    return np.asarray(path[::-1], dtype=np.int64)


def place_downbeats(beat_frames: np.ndarray, activations: np.ndarray, beats_per_bar: int) -> np.ndarray:
    """Bar phase whose beats carry the most downbeat activation; ties go to the earliest phase."""
    beat_frames = np.asarray(beat_frames, dtype=np.int64)
    if beat_frames.size == 0:
        return beat_frames
    downbeat_act = np.asarray(activations, dtype=np.float64)[:, 1]
    totals = [downbeat_act[beat_frames[phase::beats_per_bar]].sum() for phase in range(beats_per_bar)]
    return beat_frames[int(np.argmax(totals)) :: beats_per_bar]


def decode_beats(activations: np.ndarray, frame_rate: float, cfg: DecoderConfig) -> tuple[np.ndarray, np.ndarray]:
    """Beat and downbeat times in seconds from 3-class activations."""
    beat_frames = viterbi_beats(activations, frame_rate, cfg)
    downbeat_frames = place_downbeats(beat_frames, activations, cfg.beats_per_bar)
    return beat_frames / frame_rate, downbeat_frames / frame_rate

"""Rhythm agreement between generated and reference drums."""

import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from rich.console import Console
from rich.table import Table

from .beat import BeatFeatures, BeatTracker, resample_frames, track_audio
from .dsp import AudioClip
from .errors import PipelineError
from .schema import ClipMetrics, DecoderConfig, DspConfig, MetricReport, MetricSummary

logger = logging.getLogger(__name__)

BEAT_TOLERANCE = 0.07
ENTROPY_EPS = 1e-9
METRICS = ("trackemb_mse", "act_entropy", "beat_f1", "downbeat_f1", "bdb_f1")


def trackemb_mse(ref: BeatFeatures, gen: BeatFeatures) -> float:
    """Mean squared tracker-embedding difference; gen is resampled to ref's frame count."""
    if ref.frames == 0 or gen.frames == 0:
        raise ValueError("cannot compare features with zero frames")
    gen_emb = gen.embeddings.astype(np.float64)
    if gen.frames != ref.frames:
        gen_emb = resample_frames(gen_emb, ref.frames)
    return float(np.mean(np.square(ref.embeddings.astype(np.float64) - gen_emb)))


def act_entropy(ref: BeatFeatures, gen: BeatFeatures) -> float:
    """Cross entropy of gen's activations under ref's, averaged over frames."""
    if ref.frames == 0 or gen.frames == 0:
        raise ValueError("cannot compare features with zero frames")
    gen_act = gen.activations.astype(np.float64)
    if gen.frames != ref.frames:
        gen_act = resample_frames(gen_act, ref.frames)
    ref_act = ref.activations.astype(np.float64)
    return float(np.mean(-np.sum(ref_act * np.log(gen_act + ENTROPY_EPS), axis=1)))


def _check_sorted(times: np.ndarray, name: str) -> np.ndarray:
    times = np.asarray(times, dtype=np.float64).reshape(-1)
    if np.any(np.diff(times) < 0):
        raise ValueError(f"{name} times must be sorted")
    return times


def match_count(ref: np.ndarray, est: np.ndarray, tolerance: float) -> int:
    """Size of a one-to-one matching within +/- tolerance, built greedily in time order."""
    i = j = matched = 0
    while i < ref.size and j < est.size:
        if abs(ref[i] - est[j]) <= tolerance:
            matched += 1
            i += 1
            j += 1
        elif est[j] < ref[i]:
            j += 1
        else:
            i += 1
    return matched


def beat_f1(ref_times: np.ndarray, est_times: np.ndarray, tolerance: float = BEAT_TOLERANCE) -> tuple[float, float, float]:
    """Precision, recall and F-measure of estimated against reference events.

    Two empty lists agree perfectly; one empty list scores zero.
    """
    ref, est = _check_sorted(ref_times, "reference"), _check_sorted(est_times, "estimated")
    if ref.size == 0 and est.size == 0:
        return 1.0, 1.0, 1.0
    if ref.size == 0 or est.size == 0:
        return 0.0, 0.0, 0.0
    matched = match_count(ref, est, tolerance)
    precision, recall = matched / est.size, matched / ref.size
    if matched == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def clip_metrics(clip_id: str, ref: BeatFeatures, gen: BeatFeatures, tolerance: float = BEAT_TOLERANCE) -> ClipMetrics:
    return ClipMetrics(
        clip_id=clip_id,
        trackemb_mse=trackemb_mse(ref, gen),
        act_entropy=act_entropy(ref, gen),
        beat_f1=beat_f1(ref.beats, gen.beats, tolerance)[2],
        downbeat_f1=beat_f1(ref.downbeats, gen.downbeats, tolerance)[2],
    )


def summarize(clips: Sequence[ClipMetrics]) -> dict[str, MetricSummary]:
    summary = {}
    for name in METRICS:
        values = np.array([getattr(clip, name) for clip in clips], dtype=np.float64)
        summary[name] = MetricSummary(mean=float(values.mean()), std=float(values.std()))
    return summary


def evaluate_run(
    references: Sequence[tuple[str, AudioClip]],
    generated: Sequence[AudioClip],
    tracker: BeatTracker,
    dsp: DspConfig,
    decoder: DecoderConfig,
    tolerance: float = BEAT_TOLERANCE,
) -> MetricReport:
    """Compare generated drum clips with their references through the drum tracker."""
    if len(references) != len(generated):
        raise PipelineError(f"{len(references)} reference clips but {len(generated)} generated clips", stage="evaluate")
    if not references:
        raise PipelineError("nothing to evaluate", stage="evaluate")
    rows = []
    for (clip_id, ref_clip), gen_clip in zip(references, generated):
        ref = track_audio(ref_clip, tracker, dsp, decoder)
        gen = track_audio(gen_clip, tracker, dsp, decoder)
        rows.append(clip_metrics(clip_id, ref, gen, tolerance))
        logger.debug("%s: beat F1 %.3f", clip_id, rows[-1].beat_f1)
    return MetricReport(clips=rows, summary=summarize(rows))


# =============================================================================
# REPORTS
# =============================================================================


def report_rows(report: MetricReport) -> list[list[str]]:
    rows = [["clip_id", *METRICS]]
    for clip in report.clips:
        rows.append([clip.clip_id, *(f"{getattr(clip, name):.6f}" for name in METRICS)])
    for stat in ("mean", "std"):
        rows.append([stat, *(f"{getattr(report.summary[name], stat):.6f}" for name in METRICS)])
    return rows


def write_report(report: MetricReport, path: Union[str, Path]) -> Path:
    """Tab-separated report: header, one row per clip, then mean and std rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join("\t".join(row) for row in report_rows(report)) + "\n")
    return path


def render_report(report: MetricReport, console: Optional[Console] = None) -> None:
    rows = report_rows(report)
    table = Table(title="Rhythm metrics")
    for column in rows[0]:
        table.add_column(column, justify="left" if column == "clip_id" else "right")
    for row in rows[1:]:
        table.add_row(*row, end_section=row[0] == report.clips[-1].clip_id)
    (console or Console()).print(table)

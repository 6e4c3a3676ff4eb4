"""Beat condition embeddings at the code rate."""

import numpy as np
import pytest
import torch

from drum_accompaniment.beat import (
    BeatConditioner,
    BeatFeatures,
    cond_high,
    cond_low,
    cond_mid,
    prepare_condition,
    resample_frames,
    step_labels,
)
from drum_accompaniment.beat.conditioning import NO_PEAK, PEAK
from drum_accompaniment.beat.features import BEAT, NON_BEAT
from drum_accompaniment.schema import BeatLevel, PeakConfig

MEL_RATE = 44100 / 256


def _feats(frames: int, beats=(), downbeats=(), activations=None, emb_dim: int = 50) -> BeatFeatures:
    if activations is None:
        activations = np.tile([0.0, 0.0, 1.0], (frames, 1))
    return BeatFeatures(
        frame_rate=MEL_RATE,
        embeddings=np.zeros((frames, emb_dim)),
        activations=activations,
        beats=beats,
        downbeats=downbeats,
    )


@pytest.fixture
def conditioner() -> BeatConditioner:
    torch.manual_seed(0)
    return BeatConditioner(embedding_dim=50, d_model=512)


def test_resample_keeps_endpoints_and_interpolates():
    source = np.arange(2048, dtype=np.float64)[:, None]
    out = resample_frames(source, 4096)
    assert out.shape == (4096, 1)
    assert out[0, 0] == 0.0 and out[-1, 0] == 2047.0
    expected = np.arange(4096) * (2047 / 4095)
    assert np.allclose(out[:, 0], expected, atol=1e-9)


def test_low_level_shape_and_constant_rows(conditioner):
    feats = _feats(4096)
    out = cond_low(feats, conditioner, steps=1024, frames_per_code=4)
    assert out.shape == (1024, 512)
    assert np.all(out == out[0])


def test_high_level_rows_come_from_the_table(conditioner):
    table = conditioner.high.weight.detach().numpy()
    feats = _feats(4096)
    out = cond_high(feats, conditioner, 1024, 4, hop=256, sample_rate=44100)
    assert np.all(out == table[2])

    feats = _feats(4096, beats=[0.0, 1.0], downbeats=[0.0])
    out = cond_high(feats, conditioner, 1024, 4, hop=256, sample_rate=44100)
    assert np.array_equal(out[0], table[1])
    assert np.array_equal(out[43], table[0])
    assert all(any(np.array_equal(row, entry) for entry in table) for row in out)


def test_step_labels_give_downbeats_priority():
    feats = _feats(64, beats=[0.0, 1 / MEL_RATE], downbeats=[1 / MEL_RATE])
    labels = step_labels(feats, steps=16, frames_per_code=4, mel_frame_rate=MEL_RATE)
    assert labels[0] == 1
    assert np.all(labels[1:] == 2)


def test_events_label_the_frames_around_them():
    # 7.6 frames in: frames 7 and 8, i.e. the end of step 1 and the start of step 2
    feats = _feats(64, beats=[7.6 / MEL_RATE])
    labels = step_labels(feats, steps=16, frames_per_code=4, mel_frame_rate=MEL_RATE)
    assert labels[1] == BEAT and labels[2] == BEAT
    assert np.all(np.delete(labels, [1, 2]) == NON_BEAT)

    # exactly on frame 8: only step 2
    feats = _feats(64, beats=[8 * 256 / 44100])
    labels = step_labels(feats, steps=16, frames_per_code=4, mel_frame_rate=MEL_RATE)
    assert labels[2] == BEAT
    assert np.all(np.delete(labels, [2]) == NON_BEAT)


def test_mid_level_marks_peak_steps(conditioner):
    table = conditioner.mid.weight.detach().numpy()
    peaks = PeakConfig()

    flat = cond_mid(_feats(64), conditioner, 16, 4, peaks)
    assert np.all(flat == table[NO_PEAK])

    acts = np.tile([0.0, 0.0, 1.0], (64, 1))
    acts[7] = [0.9, 0.0, 0.1]
    out = cond_mid(_feats(64, activations=acts), conditioner, 16, 4, peaks)
    assert np.array_equal(out[1], table[PEAK])
    assert all(np.array_equal(out[i], table[NO_PEAK]) for i in range(16) if i != 1)


def test_none_level_is_zero(conditioner):
    prepared = prepare_condition(None, BeatLevel.NONE, 16, 4, MEL_RATE, PeakConfig())
    assert prepared.shape == (16,)
    out = conditioner(BeatLevel.NONE, torch.from_numpy(prepared).unsqueeze(0))
    assert out.shape == (1, 16, 512)
    assert not torch.any(out)


def test_prepare_condition_shapes_and_requirements():
    feats = _feats(64, beats=[0.1])
    assert prepare_condition(feats, BeatLevel.LOW, 16, 4, MEL_RATE, PeakConfig()).shape == (16, 50)
    assert prepare_condition(feats, BeatLevel.MID, 16, 4, MEL_RATE, PeakConfig()).dtype == np.int64
    assert prepare_condition(feats, BeatLevel.HIGH, 16, 4, MEL_RATE, PeakConfig()).shape == (16,)
    with pytest.raises(ValueError):
        prepare_condition(None, BeatLevel.HIGH, 16, 4, MEL_RATE, PeakConfig())

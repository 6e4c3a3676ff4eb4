"""Audio I/O, STFT/mel analysis, Griffin-Lim and clip slicing."""

import numpy as np
import pytest
import soundfile as sf

from conftest import sine
from drum_accompaniment.dsp import (
    AudioClip,
    MelSpec,
    fit_length,
    griffin_lim,
    load_wav,
    mel_filterbank,
    mel_project,
    mel_spectrogram,
    mix,
    save_wav,
    slice_paired_clips,
    stft_mag,
)
from drum_accompaniment.errors import AudioError
from drum_accompaniment.schema import DspConfig


def test_load_wav_downmixes_stereo(tmp_path):
    """A 24 s stereo file becomes 1,058,400 mono samples."""
    path = tmp_path / "stereo.wav"
    left = np.full(44100 * 24, 0.5)
    right = np.full(44100 * 24, -0.25)
    sf.write(str(path), np.stack([left, right], axis=1), 44100, subtype="FLOAT")

    clip = load_wav(path)
    assert len(clip) == 1_058_400
    assert clip.sample_rate == 44100
    assert np.allclose(clip.samples, 0.125)


def test_load_wav_scales_pcm16(tmp_path):
    path = tmp_path / "max.wav"
    sf.write(str(path), np.array([0, 32767, -32768, 0], dtype=np.int16), 44100, subtype="PCM_16")
    clip = load_wav(path)
    assert clip.samples[1] == 32767 / 32768
    assert clip.samples[2] == -1.0


def test_load_wav_resamples_to_44k(tmp_path):
    path = tmp_path / "half_rate.wav"
    sf.write(str(path), 0.1 * np.sin(np.arange(22050) / 10.0), 22050, subtype="FLOAT")
    assert len(load_wav(path)) == 44100


def test_load_wav_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_wav(tmp_path / "missing.wav")

    garbage = tmp_path / "garbage.wav"
    garbage.write_bytes(b"this is not a wav file at all")
    with pytest.raises(AudioError):
        load_wav(garbage)

    broken = np.zeros(1000)
    broken[10] = np.nan
    sf.write(str(tmp_path / "nan.wav"), broken, 44100, subtype="FLOAT")
    with pytest.raises(AudioError, match="NaN"):
        load_wav(tmp_path / "nan.wav")


def test_save_wav_is_deterministic(tmp_path):
    clip = sine(220.0, 4096)
    first, second = save_wav(clip, tmp_path / "a.wav"), save_wav(clip, tmp_path / "b.wav")
    assert first.read_bytes() == second.read_bytes()
    assert sf.info(str(first)).subtype == "PCM_16"


@pytest.mark.parametrize("n", [2**14, 2**17, 2**20])
def test_stft_frame_count(n):
    mag = stft_mag(AudioClip(samples=np.zeros(n)), DspConfig())
    assert mag.shape == (n // 256, 513)


def test_stft_of_silence_is_zero():
    assert not np.any(stft_mag(AudioClip(samples=np.zeros(8192)), DspConfig()))


def test_stft_of_sine_peaks_at_its_bin():
    """440 Hz lands in bin round(440 * 1024 / 44100) = 10."""
    mag = stft_mag(sine(440.0, 8192), DspConfig())
    assert np.all(mag[4:-4].argmax(axis=1) == 10)


def test_short_clip_is_rejected():
    with pytest.raises(AudioError):
        stft_mag(AudioClip(samples=np.zeros(512)), DspConfig())


def test_mel_of_silence_sits_at_the_floor():
    cfg = DspConfig()
    mel = mel_project(np.zeros((32, 513)), cfg)
    assert mel.values.shape == (32, 80)
    assert np.allclose(mel.values, np.log(1e-5))


def test_mel_of_single_bin_touches_only_its_bands():
    cfg = DspConfig()
    k = 40
    mag = np.zeros((1, 513))
    mag[0, k] = 1e6
    mel = mel_project(mag, cfg)
    weights = mel_filterbank(cfg)[:, k]
    above_floor = mel.values[0] > np.log(cfg.log_floor) + 1e-6
    assert np.array_equal(above_floor, weights > 0)


def test_mel_is_monotone_in_magnitude(rng):
    cfg = DspConfig()
    mag = rng.random((8, 513))
    low, high = mel_project(mag, cfg), mel_project(2 * mag, cfg)
    assert np.all(high.values >= low.values)


def test_mel_rejects_wrong_bin_count():
    with pytest.raises(ValueError):
        mel_project(np.zeros((4, 512)), DspConfig())


def test_griffin_lim_of_floor_is_silence():
    cfg = DspConfig(griffin_lim_iters=2)
    audio = griffin_lim(MelSpec(values=np.full((64, 80), np.log(1e-5))), cfg)
    assert len(audio) == 64 * 256
    assert np.sqrt(np.mean(audio.samples**2)) < 1e-3


def test_griffin_lim_length_at_full_clip_size():
    """4096 mel frames invert to 1,048,576 samples."""
    cfg = DspConfig(griffin_lim_iters=1)
    mel = MelSpec(values=np.full((4096, 80), -4.0))
    assert len(griffin_lim(mel, cfg)) == 1_048_576


def test_griffin_lim_keeps_the_pitch_of_a_tone():
    cfg = DspConfig(clip_samples=2**14)
    clip = AudioClip(samples=sine(440.0, 2**14).samples + sine(1000.0, 2**14, 0.25).samples)
    mel = mel_spectrogram(clip, cfg)
    audio = griffin_lim(mel, cfg)

    mag = stft_mag(audio, cfg)[8:-8].mean(axis=0)
    peak_hz = mag.argmax() * cfg.sample_rate / cfg.win_length
    assert abs(peak_hz - 440.0) <= 70.0

    again = mel_spectrogram(audio, cfg)
    profile = np.corrcoef(mel.values[8:-8].mean(axis=0), again.values[8:-8].mean(axis=0))[0, 1]
    assert profile >= 0.9


def test_slice_counts_full_windows_only(rng):
    cfg = DspConfig()

    def windows(n):
        drums = AudioClip(samples=0.1 * rng.standard_normal(n))
        return slice_paired_clips(AudioClip(samples=np.zeros(n)), drums, cfg)

    assert len(windows(2**20)) == 1
    assert len(windows(2**20 + 2**19 + 1000)) == 2
    assert len(windows(2**21)) == 3
    assert all(len(a) == len(b) == 2**20 for a, b in windows(2**21))


def test_slice_drops_drum_silent_clips():
    cfg = DspConfig(clip_samples=2**14)
    silent = AudioClip(samples=np.zeros(2**15))
    assert slice_paired_clips(sine(220.0, 2**15), silent, cfg) == []


def test_slice_rejects_unequal_stems():
    cfg = DspConfig(clip_samples=2**14)
    with pytest.raises(AudioError):
        slice_paired_clips(sine(220.0, 2**15), sine(220.0, 2**15 + 1), cfg)


def test_mix_clips_and_fit_length():
    loud = AudioClip(samples=np.full(100, 0.8))
    assert np.all(mix(loud, loud).samples == 1.0)
    with pytest.raises(AudioError):
        mix(loud, AudioClip(samples=np.zeros(99)))

    assert len(fit_length(loud, 150)) == 150
    assert np.all(fit_length(loud, 150).samples[100:] == 0)
    assert len(fit_length(loud, 40)) == 40

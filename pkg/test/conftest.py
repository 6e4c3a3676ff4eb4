"""Shared fixtures: tiny configurations that train in seconds on a CPU."""

import numpy as np
import pytest
import torch
import yaml

from drum_accompaniment.dsp import AudioClip
from drum_accompaniment.schema import (
    CliConfig,
    CodecConfig,
    DecoderConfig,
    DspConfig,
    LMConfig,
    SyntheticSpec,
    TrackerConfig,
    TrainConfig,
)

TINY_CLIP = 2**14  # 64 mel frames


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: overfitting runs that take minutes on a CPU")


def tiny_config_dict(tmp_path=None) -> dict:
    config = {
        "seed": 7,
        "dsp": {"clip_samples": TINY_CLIP, "griffin_lim_iters": 4},
        "drumless_codec": {"codebook_size": 8, "latent_dim": 8, "channels": 8},
        "drum_codec": {"codebook_size": 4, "latent_dim": 8, "channels": 8},
        "tracker": {"hidden_size": 3, "head_hidden": 4},
        "lm": {
            "d_model": 16,
            "heads": 2,
            "chunk": 4,
            "encoder_layers": 3,
            "decoder_layers": 4,
            "seq_len": 16,
            "drumless_vocab": 8,
            "drum_vocab": 4,
            "ff_mult": 2,
            "cond_dim": 6,
        },
        "sampling": {"top_k": 4},
        "codec_train": {"steps": 3, "batch_size": 2, "log_every": 1},
        "tracker_train": {"steps": 3, "batch_size": 2, "log_every": 1},
        "lm_train": {"steps": 3, "batch_size": 2, "log_every": 1},
        "synthetic": {"n_recordings": 10, "duration_s": 1.2},
    }
    if tmp_path is not None:
        config["paths"] = {"corpus_dir": str(tmp_path / "corpus"), "run_dir": str(tmp_path / "run")}
    return config


@pytest.fixture
def dsp() -> DspConfig:
    return DspConfig(clip_samples=TINY_CLIP)


@pytest.fixture
def tiny_config(tmp_path) -> CliConfig:
    return CliConfig.model_validate(tiny_config_dict(tmp_path))


@pytest.fixture
def tiny_config_file(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(tiny_config_dict(tmp_path)))
    return path


@pytest.fixture
def codec_cfg() -> CodecConfig:
    return CodecConfig(codebook_size=8, latent_dim=8, channels=8)


@pytest.fixture
def tracker_cfg() -> TrackerConfig:
    return TrackerConfig(hidden_size=3, head_hidden=4)


@pytest.fixture
def lm_cfg() -> LMConfig:
    return LMConfig(
        d_model=16,
        heads=2,
        chunk=4,
        encoder_layers=3,
        decoder_layers=4,
        seq_len=16,
        drumless_vocab=8,
        drum_vocab=4,
        ff_mult=2,
        cond_dim=6,
    )


@pytest.fixture
def decoder_cfg() -> DecoderConfig:
    return DecoderConfig()


@pytest.fixture
def quick_train() -> TrainConfig:
    return TrainConfig(steps=4, batch_size=2, log_every=1)


@pytest.fixture
def synthetic_spec() -> SyntheticSpec:
    return SyntheticSpec(n_recordings=10, duration_s=1.2)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def sine(freq: float, n: int, amplitude: float = 0.5) -> AudioClip:
    t = np.arange(n) / 44100.0
    return AudioClip(samples=amplitude * np.sin(2 * np.pi * freq * t))


def randomize_head(lm, std: float = 1.0, seed: int = 0) -> None:
    """Give an untrained LM a non-uniform output distribution."""
    torch.manual_seed(seed)
    with torch.no_grad():
        torch.nn.init.normal_(lm.head.weight, std=std)
        torch.nn.init.normal_(lm.head.bias, std=std)


def finite_difference_check(loss_fn, params, eps: float = 1e-6, max_entries: int = 64, seed: int = 0, rtol: float = 1e-3, atol: float = 1e-7) -> int:
    """Compare autograd gradients of ``loss_fn`` with central differences.

    Checks up to ``max_entries`` randomly chosen entries of every parameter
    and returns the number of entries checked.
    """
    for p in params:
        p.grad = None
    loss_fn().backward()
    generator = torch.Generator().manual_seed(seed)
    checked = 0
    for p in params:
        grad = p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
        flat = p.data.view(-1)
        picks = torch.randperm(flat.numel(), generator=generator)[:max_entries]
        for index in picks.tolist():
            original = float(flat[index])
            with torch.no_grad():
                flat[index] = original + eps
                upper = float(loss_fn())
                flat[index] = original - eps
                lower = float(loss_fn())
                flat[index] = original
            numeric = (upper - lower) / (2 * eps)
            analytic = float(grad.view(-1)[index])
            assert abs(numeric - analytic) <= rtol * max(abs(numeric), abs(analytic)) + atol, (p.shape, index, numeric, analytic)
            checked += 1
    return checked

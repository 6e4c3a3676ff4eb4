"""VQ-VAE codec: quantizer, shapes, losses, gradients, EMA and training."""

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from conftest import finite_difference_check
from drum_accompaniment.codec import Codebook, VQCodec, build_codec, load_codec, train_codec
from drum_accompaniment.dsp import AudioClip, MelSpec, mel_spectrogram
from drum_accompaniment.errors import TrainingError
from drum_accompaniment.pipeline import synthesize_recording
from drum_accompaniment.schema import CodecConfig, DspConfig, SyntheticSpec, TrainConfig


def _codebook(vectors) -> Codebook:
    vectors = torch.as_tensor(vectors, dtype=torch.float64)
    codebook = Codebook(vectors.shape[0], vectors.shape[1]).double()
    codebook.vectors.copy_(vectors)
    codebook.ema_sum.copy_(vectors)
    return codebook


def _random_mel(frames: int, seed: int = 0) -> torch.Tensor:
    generator = torch.Generator().manual_seed(seed)
    return torch.randn(1, frames, 80, generator=generator) * 2.0 - 5.0


# =============================================================================
# QUANTIZER
# =============================================================================


def test_quantizer_matches_exhaustive_search():
    """argmin over squared distances, first index on ties, on 1000 random instances."""
    rng = np.random.default_rng(0)
    for _ in range(1000):
        k, d = int(rng.integers(2, 65)), int(rng.integers(1, 65))
        vectors, latents = rng.standard_normal((k, d)), rng.standard_normal((5, d))
        ids, quantized = _codebook(vectors).quantize(torch.from_numpy(latents))
        expected = np.argmin(((latents[:, None, :] - vectors[None]) ** 2).sum(-1), axis=1)
        assert ids.tolist() == expected.tolist()
        assert np.array_equal(quantized.numpy(), vectors[expected])


def test_quantizer_examples():
    codebook = _codebook([[0.9, 0.1], [-1.0, 0.0]])
    assert codebook.quantize(torch.tensor([[1.0, 0.0]], dtype=torch.float64))[0].tolist() == [0]

    tie = _codebook([[10, 10], [10, -10], [1, 0], [-10, 10], [-10, -10], [-1, 0]])
    assert tie.quantize(torch.zeros(1, 2, dtype=torch.float64))[0].tolist() == [2]

    exact = _codebook(np.eye(8))
    assert exact.quantize(torch.from_numpy(np.eye(8)[7:8]))[0].tolist() == [7]


def test_lookup_rejects_out_of_range_ids():
    codebook = _codebook(np.eye(4))
    with pytest.raises(ValueError):
        codebook.lookup(torch.tensor([0, 4]))
    with pytest.raises(ValueError):
        codebook.quantize(torch.zeros(1, 3, dtype=torch.float64))


def test_ema_with_zero_decay_moves_to_the_mean():
    codebook = _codebook([[0.0, 0.0], [5.0, 5.0], [-5.0, 5.0], [5.0, -5.0]])
    codebook.decay = 0.0
    latents = torch.tensor([[0.1, 0.2], [0.3, -0.2], [-0.1, 0.3]], dtype=torch.float64)
    ids = torch.zeros(3, dtype=torch.long)
    codebook.ema_update(latents, ids, torch.Generator().manual_seed(0))
    assert torch.allclose(codebook.vectors[0], latents.mean(dim=0))


def test_ema_with_unit_decay_freezes_the_codebook():
    codebook = _codebook(np.eye(4))
    codebook.decay = 1.0
    before = codebook.vectors.clone()
    codebook.ema_update(torch.ones(3, 4, dtype=torch.float64), torch.zeros(3, dtype=torch.long), torch.Generator())
    assert torch.equal(codebook.vectors, before)


def test_dead_codes_are_reseeded_from_the_batch():
    codebook = _codebook([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [9.0, 9.0]])
    codebook.decay, codebook.dead_code_threshold = 0.5, 0.01
    latents = torch.tensor([[0.1, 0.0], [0.9, 0.1], [0.0, 1.1], [0.05, 0.05]], dtype=torch.float64)
    ids = torch.tensor([0, 1, 2, 0])
    generator = torch.Generator().manual_seed(0)

    for _ in range(6):
        codebook.ema_update(latents, ids, generator)
    assert torch.allclose(codebook.vectors[3], torch.tensor([9.0, 9.0], dtype=torch.float64))

    codebook.ema_update(latents, ids, generator)
    assert any(torch.equal(codebook.vectors[3], row) for row in latents)
    assert float(codebook.usage[3]) == 1.0


# =============================================================================
# MODEL
# =============================================================================


def test_shape_chain_at_full_size():
    """4096 x 80 mel -> 1024 x 64 latents -> 1024 codes -> 4096 x 80 mel."""
    torch.manual_seed(0)
    codec = VQCodec(CodecConfig(codebook_size=32)).eval()
    mel = _random_mel(4096)
    with torch.no_grad():
        out = codec(mel)
    assert out.latents.shape == (1, 1024, 64)
    assert out.ids.shape == (1, 1024)
    assert out.reconstruction.shape == (1, 4096, 80)


def test_encoder_is_deterministic(codec_cfg):
    codec = build_codec(codec_cfg, seed=0).eval()
    mel = _random_mel(16)
    with torch.no_grad():
        assert torch.equal(codec.encode(mel), codec.encode(mel.clone()))


def test_frame_count_must_divide(codec_cfg):
    codec = build_codec(codec_cfg, seed=0)
    with pytest.raises(ValueError):
        codec.encode(_random_mel(18))


def test_commitment_is_zero_on_exact_prototypes(codec_cfg):
    codec = build_codec(codec_cfg, seed=0)
    mel = _random_mel(16)
    with torch.no_grad():
        latents = codec.encode(mel)[0]
        codec.codebook.vectors[: latents.shape[0]] = latents
    _, commitment, _ = codec.losses(mel)
    assert float(commitment) == 0.0


def test_straight_through_matches_identity_quantizer(codec_cfg):
    """With every latent on a prototype, encoder gradients equal those of an unquantized model."""
    codec = build_codec(codec_cfg, seed=0)
    mel = _random_mel(16)
    with torch.no_grad():
        latents = codec.encode(mel)[0]
        codec.codebook.vectors[: latents.shape[0]] = latents

    reconstruction, _, _ = codec.losses(mel)
    codec.zero_grad()
    reconstruction.backward()
    quantized_grads = [p.grad.clone() for p in codec.encoder.parameters()]

    codec.zero_grad()
    F.mse_loss(codec.decode(codec.encode(mel)), mel).backward()
    identity_grads = [p.grad.clone() for p in codec.encoder.parameters()]
    assert all(torch.equal(a, b) for a, b in zip(quantized_grads, identity_grads))


def _gradcheck_codec() -> VQCodec:
    cfg = CodecConfig(codebook_size=4, latent_dim=4, channels=4, frames_per_code=4)
    codec = build_codec(cfg, seed=0).double()
    assert sum(p.numel() for p in codec.parameters()) <= 10_000
    return codec


def test_decoder_gradients_match_finite_differences():
    codec = _gradcheck_codec()
    mel = _random_mel(8).double()
    checked = finite_difference_check(lambda: codec.total_loss(mel), list(codec.decoder.parameters()), max_entries=32)
    assert checked > 0


def test_encoder_gradients_match_finite_differences():
    """The encoder is smooth once the quantizer is replaced by the identity."""
    codec = _gradcheck_codec()
    mel = _random_mel(8).double()

    def loss():
        latents = codec.encode(mel)
        prototypes = codec.codebook.lookup(codec.quantize(latents)[0]).to(latents.dtype)
        commitment = (latents - prototypes).pow(2).sum(dim=-1).mean()
        return F.mse_loss(codec.decode(latents), mel) + codec.cfg.commitment_beta * commitment

    checked = finite_difference_check(loss, list(codec.encoder.parameters()), max_entries=32)
    assert checked > 0


def test_codes_to_mel_is_clamped_at_the_floor(codec_cfg):
    codec = build_codec(codec_cfg, seed=0).eval()
    mel = MelSpec(values=_random_mel(16)[0].numpy())
    codes = codec.mel_to_codes(mel)
    assert codes.shape == (4,)
    assert codes.min() >= 0 and codes.max() < codec_cfg.codebook_size
    decoded = codec.codes_to_mel(codes, log_floor=1e-5)
    assert decoded.values.shape == (16, 80)
    assert decoded.values.min() >= np.float32(np.log(1e-5))


# =============================================================================
# TRAINING
# =============================================================================


def _drum_mels(n: int = 4) -> list[MelSpec]:
    dsp = DspConfig(clip_samples=2**14)
    rec, _ = synthesize_recording(SyntheticSpec(duration_s=2.0), np.random.default_rng(3), "rec000")
    return [mel_spectrogram(AudioClip(samples=rec.drums.samples[i * 2**13 : i * 2**13 + 2**14]), dsp) for i in range(n)]


def test_zero_steps_returns_the_initial_model(codec_cfg):
    mels = [MelSpec(values=_random_mel(16)[0].numpy())]
    codec, trace = train_codec(mels, codec_cfg, TrainConfig(steps=0), seed=5)
    initial = build_codec(codec_cfg, seed=5)
    assert trace == []
    for name, value in initial.state_dict().items():
        assert torch.equal(codec.state_dict()[name], value), name


def test_training_is_reproducible(codec_cfg, quick_train):
    mels = [MelSpec(values=_random_mel(16, seed=i)[0].numpy()) for i in range(3)]
    first, trace_a = train_codec(mels, codec_cfg, quick_train, seed=1)
    second, trace_b = train_codec(mels, codec_cfg, quick_train, seed=1)
    assert trace_a == trace_b
    for name, value in first.state_dict().items():
        assert torch.equal(second.state_dict()[name], value), name


def test_resume_matches_uninterrupted_training(codec_cfg, tmp_path):
    mels = [MelSpec(values=_random_mel(16, seed=i)[0].numpy()) for i in range(3)]
    straight, _ = train_codec(mels, codec_cfg, TrainConfig(steps=6, batch_size=2), seed=2)

    path = tmp_path / "codec.pt"
    train_codec(mels, codec_cfg, TrainConfig(steps=3, batch_size=2), seed=2, checkpoint_path=path)
    resumed, trace = train_codec(mels, codec_cfg, TrainConfig(steps=6, batch_size=2), seed=2, resume=path)
    assert len(trace) == 6
    for name, value in straight.state_dict().items():
        assert torch.equal(resumed.state_dict()[name], value), name

    reloaded = load_codec(path)
    assert reloaded.cfg == codec_cfg


def test_empty_corpus_is_an_error(codec_cfg, quick_train):
    with pytest.raises(TrainingError):
        train_codec([], codec_cfg, quick_train, seed=0)


@pytest.mark.slow
def test_codec_overfits_a_few_drum_clips():
    """Desk-scale settings: lr 1e-3 as in configs/desk.yaml, not the 3e-4 of configs/full.yaml."""
    cfg = CodecConfig(codebook_size=16, latent_dim=16, channels=32)
    codec, trace = train_codec(_drum_mels(), cfg, TrainConfig(steps=1000, batch_size=4, lr=1e-3, log_every=100), seed=0)
    assert trace[-1]["reconstruction"] <= 0.1 * trace[9]["reconstruction"]

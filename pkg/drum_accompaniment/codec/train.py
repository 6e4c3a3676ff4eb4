import logging
from pathlib import Path
from typing import Optional, Sequence

import torch

from ..checkpoint import load_checkpoint, save_checkpoint
from ..dsp import MelSpec
from ..errors import TrainingError
from ..schema import CodecConfig, TrainConfig
from ..training import check_finite, log_step, progress, seed_step
from .model import VQCodec

logger = logging.getLogger(__name__)


def sample_mel_batch(
    corpus: Sequence[MelSpec],
    batch_size: int,
    crop_frames: Optional[int],
    generator: torch.Generator,
    dtype: torch.dtype = torch.float32,
) -> torch.Tensor:
    """Draw a minibatch of (optionally cropped) mels with replacement."""
    picks = torch.randint(len(corpus), (batch_size,), generator=generator).tolist()
    items = []
    for index in picks:
        values = torch.from_numpy(corpus[index].values)
        if crop_frames is not None and values.shape[0] > crop_frames:
            start = int(torch.randint(values.shape[0] - crop_frames + 1, (1,), generator=generator))
            values = values[start : start + crop_frames]
        items.append(values)
    lengths = {item.shape[0] for item in items}
    if len(lengths) != 1:
        raise TrainingError(f"mels in a batch must share a frame count, got {sorted(lengths)}")
    return torch.stack(items).to(dtype)


def build_codec(cfg: CodecConfig, seed: int) -> VQCodec:
    torch.manual_seed(seed)
    return VQCodec(cfg)


def load_codec(path: str | Path) -> VQCodec:
    package = load_checkpoint(path, "codec")
    codec = VQCodec(CodecConfig.model_validate(package["config"]))
    codec.load_state_dict(package["state_dict"])
    return codec.eval()


def train_codec(
    corpus: Sequence[MelSpec],
    cfg: CodecConfig,
    train: TrainConfig,
    seed: int,
    stage: str = "vqvae",
    checkpoint_path: Optional[Path] = None,
    resume: Optional[Path] = None,
) -> tuple[VQCodec, list[dict]]:
    """Fit a VQ-VAE with Adam on reconstruction + beta * commitment.

    Codebook EMA updates run after every optimizer step; the codebook is
    seeded from the latents of the first batch.

    Returns:
        Trained codec and its per-step loss trace
    """
    if not corpus:
        raise TrainingError("empty corpus", stage=stage)

    codec = build_codec(cfg, seed)
    optimizer = torch.optim.Adam(codec.parameters(), lr=train.lr)
    trace: list[dict] = []
    start = 0
    if resume is not None:
        package = load_checkpoint(resume, "codec")
        codec.load_state_dict(package["state_dict"])
        optimizer.load_state_dict(package["optimizer"])
        start, trace = package["step"], list(package["trace"])
        logger.info("Resuming %s at step %d", stage, start)

    codec.train()
    for step in progress(range(start, train.steps), stage, train.steps - start):
        generator = seed_step(seed, step)
        batch = sample_mel_batch(corpus, train.batch_size, train.crop_frames, generator)
        if not bool(codec.codebook.initialized):
            with torch.no_grad():
                codec.codebook.init_from(codec.encode(batch), generator)

        reconstruction, commitment, out = codec.losses(batch)
        loss = reconstruction + cfg.commitment_beta * commitment
        check_finite(loss, stage, step)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        codec.codebook.ema_update(out.latents.detach(), out.ids, generator)

        record = {"step": step + 1, "loss": float(loss), "reconstruction": float(reconstruction), "commitment": float(commitment)}
        record.update(codec.codebook.stats(out.ids))
        trace.append(record)
        log_step(stage, step, record, train.log_every)
        if checkpoint_path is not None and (step + 1) % train.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, "codec", cfg, codec, optimizer, step + 1, trace)

    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, "codec", cfg, codec, optimizer, train.steps, trace)
    return codec.eval(), trace

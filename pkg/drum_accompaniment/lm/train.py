"""Teacher-forced training of the code language model on frozen codec codes."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor

from ..checkpoint import load_checkpoint, save_checkpoint
from ..errors import TrainingError
from ..schema import BeatLevel, LMConfig, TrainConfig
from ..training import check_finite, log_step, progress, seed_step
from .model import CodeLM

logger = logging.getLogger(__name__)


@dataclass
class LMBatch:
    src: Tensor  # (B, T) drumless codes
    tgt: Tensor  # (B, T) drum codes
    prepared: Tensor  # (B, T) or (B, T, E) prepared beat condition

    def __len__(self) -> int:
        return int(self.src.shape[0])

    def select(self, index: Tensor) -> "LMBatch":
        return LMBatch(self.src[index], self.tgt[index], self.prepared[index])

    @classmethod
    def from_arrays(cls, src: np.ndarray, tgt: np.ndarray, prepared: np.ndarray) -> "LMBatch":
        src_t = torch.as_tensor(np.asarray(src), dtype=torch.long)
        tgt_t = torch.as_tensor(np.asarray(tgt), dtype=torch.long)
        if src_t.shape != tgt_t.shape or src_t.ndim != 2:
            raise ValueError(f"src {tuple(src_t.shape)} and tgt {tuple(tgt_t.shape)} must both be (N, T)")
        prepared_t = torch.from_numpy(np.ascontiguousarray(prepared))
        if tuple(prepared_t.shape[:2]) != tuple(src_t.shape):
            raise ValueError(f"prepared condition of shape {tuple(prepared_t.shape)} does not match codes {tuple(src_t.shape)}")
        return cls(src_t, tgt_t, prepared_t)


def shift_right(tgt: Tensor, start_token: int) -> Tensor:
    """Decoder input: start token followed by all but the last target code."""
    start = torch.full_like(tgt[:, :1], start_token)
    return torch.cat([start, tgt[:, :-1]], dim=1)


def lm_logits(lm: CodeLM, batch: LMBatch, level: BeatLevel) -> Tensor:
    cond = lm.conditioner(level, batch.prepared)
    memory = lm.encoder_forward(batch.src, cond) if lm.has_encoder else None
    return lm.decoder_forward(shift_right(batch.tgt, lm.cfg.start_token), memory, cond)


def lm_loss(lm: CodeLM, batch: LMBatch, level: BeatLevel) -> tuple[Tensor, Tensor]:
    """Teacher-forced next-code cross-entropy averaged over every position."""
    if batch.tgt.shape[-1] != lm.cfg.seq_len:
        raise ValueError(f"expected sequences of {lm.cfg.seq_len} codes, got {batch.tgt.shape[-1]}")
    logits = lm_logits(lm, batch, level)
    loss = F.cross_entropy(logits.reshape(-1, logits.shape[-1]), batch.tgt.reshape(-1))
    return loss, logits


def train_step_lm(
    lm: CodeLM,
    optimizer: torch.optim.Optimizer,
    batch: LMBatch,
    level: BeatLevel,
    stage: str = "lm",
    step: int = 0,
) -> float:
    """One Adam update; returns the mean loss before the update."""
    loss, _ = lm_loss(lm, batch, level)
    value = check_finite(loss, stage, step)
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return value


@torch.no_grad()
def teacher_forced_accuracy(lm: CodeLM, batch: LMBatch, level: BeatLevel) -> float:
    logits = lm_logits(lm, batch, level)
    return float((logits.argmax(dim=-1) == batch.tgt).float().mean())


def build_lm(cfg: LMConfig, seed: int) -> CodeLM:
    torch.manual_seed(seed)
    return CodeLM(cfg)


def load_lm(path: str | Path) -> tuple[CodeLM, BeatLevel]:
    """Language model and the beat level it was trained with."""
    package = load_checkpoint(path, "lm")
    lm = CodeLM(LMConfig.model_validate(package["config"]))
    lm.load_state_dict(package["state_dict"])
    return lm.eval(), BeatLevel(package["extra"]["beat_level"])


def train_lm(
    data: LMBatch,
    cfg: LMConfig,
    train: TrainConfig,
    level: BeatLevel,
    seed: int,
    stage: str = "lm",
    checkpoint_path: Optional[Path] = None,
    resume: Optional[Path] = None,
) -> tuple[CodeLM, list[dict]]:
    """Fit the LM on frozen codec outputs with minibatches drawn with replacement.

    Randomness depends only on (seed, step), so resuming from any checkpoint
    reproduces the uninterrupted run exactly.
    """
    if len(data) == 0:
        raise TrainingError("empty training set", stage=stage)
    level = BeatLevel(level)
    extra = {"beat_level": level.value}

    lm = build_lm(cfg, seed)
    optimizer = torch.optim.Adam(lm.parameters(), lr=train.lr)
    trace: list[dict] = []
    start = 0
    if resume is not None:
        package = load_checkpoint(resume, "lm")
        if package["extra"].get("beat_level") != level.value:
            raise TrainingError(f"{resume} was trained with beat level {package['extra'].get('beat_level')}", stage=stage)
        lm.load_state_dict(package["state_dict"])
        optimizer.load_state_dict(package["optimizer"])
        start, trace = package["step"], list(package["trace"])
        logger.info("Resuming %s at step %d", stage, start)

    lm.train()
    for step in progress(range(start, train.steps), stage, train.steps - start):
        generator = seed_step(seed, step)
        batch = data.select(torch.randint(len(data), (train.batch_size,), generator=generator))
        loss = train_step_lm(lm, optimizer, batch, level, stage, step)
        record = {"step": step + 1, "loss": loss}
        trace.append(record)
        log_step(stage, step, record, train.log_every)
        if checkpoint_path is not None and (step + 1) % train.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, "lm", cfg, lm, optimizer, step + 1, trace, extra)

    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, "lm", cfg, lm, optimizer, train.steps, trace, extra)
    return lm.eval(), trace

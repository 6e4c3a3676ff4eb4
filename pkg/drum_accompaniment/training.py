"""Helpers shared by the codec, tracker and LM training loops."""

import logging
import math
from typing import Iterable, Iterator

import torch
from tqdm import tqdm

from .errors import TrainingError

logger = logging.getLogger(__name__)

_STEP_STRIDE = 1_000_003


def step_seed(seed: int, step: int) -> int:
    return (seed * _STEP_STRIDE + step) % (2**63 - 1)


def seed_step(seed: int, step: int) -> torch.Generator:
    """Seed torch for one optimisation step and return that step's generator.

    Randomness is a function of (seed, step) alone, so a run resumed at any
    step replays exactly what an uninterrupted run would have done.
    """
    derived = step_seed(seed, step)
    torch.manual_seed(derived)
    return torch.Generator().manual_seed(derived)


def check_finite(loss: torch.Tensor, stage: str, step: int) -> float:
    value = float(loss.detach())
    if not math.isfinite(value):
        raise TrainingError(f"non-finite loss {value} at step {step}", stage=stage)
    return value


def progress(steps: Iterable[int], stage: str, total: int) -> Iterator[int]:
    return iter(tqdm(steps, desc=stage, total=total, leave=False, disable=not logger.isEnabledFor(logging.INFO)))


def log_step(stage: str, step: int, record: dict, every: int) -> None:
    if (step + 1) % every == 0:
        fields = " ".join(f"{k}={v:.4f}" for k, v in record.items() if k != "step")
        logger.info("%s step %d: %s", stage, step + 1, fields)

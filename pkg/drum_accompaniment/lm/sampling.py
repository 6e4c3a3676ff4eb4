"""Seeded top-k sampling of drum codes."""

from typing import Optional

import numpy as np
import torch
from torch import Tensor

from .model import CodeLM


@torch.no_grad()
def sample(
    lm: CodeLM,
    memory: Optional[Tensor],
    cond: Optional[Tensor],
    temperature: float,
    top_k: int,
    seed: int,
) -> np.ndarray:
    """Draw one drum code sequence of length seq_len.

    Each step samples from the softmax of the top-k logits divided by the
    temperature. ``top_k=1`` is greedy decoding.

    Args:
        memory: (1, T, d_model) encoder output, None for decoder-only models
        cond: (1, T, d_model) beat condition, None for no condition
    """
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if not 1 <= top_k <= lm.cfg.drum_vocab:
        raise ValueError(f"top_k must lie in [1, {lm.cfg.drum_vocab}], got {top_k}")

    lm.eval()
    generator = torch.Generator().manual_seed(seed)
    prefix = torch.full((1, 1), lm.cfg.start_token, dtype=torch.long)
    codes = []
    for _ in range(lm.cfg.seq_len):
        logits = lm.decoder_forward(prefix, memory, cond)[0, -1] / temperature
        values, indices = torch.topk(logits, top_k)
        choice = torch.multinomial(torch.softmax(values, dim=-1), 1, generator=generator)
        code = indices[choice]
        codes.append(int(code))
        prefix = torch.cat([prefix, code.view(1, 1)], dim=1)
    return np.asarray(codes, dtype=np.int64)

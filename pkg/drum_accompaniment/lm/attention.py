"""Factorized chunk attention patterns and layer layouts."""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import torch
from torch import Tensor

from ..schema import Architecture, LMConfig


class AttentionKind(str, Enum):
    IN_CHUNK = "in_chunk"  # same chunk
    CROSS_CHUNK = "cross_chunk"  # same offset within every chunk
    PREV_CHUNK = "prev_chunk"  # whole previous chunk plus self
    ENC_DEC = "enc_dec"  # every encoder step


SELF_CYCLE = (AttentionKind.IN_CHUNK, AttentionKind.CROSS_CHUNK, AttentionKind.PREV_CHUNK)
DECODER_CYCLE = SELF_CYCLE + (AttentionKind.ENC_DEC,)


@dataclass(frozen=True)
class AttentionPattern:
    kind: AttentionKind
    mask: Optional[Tensor]  # (T, T) bool, True = may attend; None for ENC_DEC


def build_pattern(kind: AttentionKind, length: int, chunk: int, causal: bool) -> AttentionPattern:
    """Boolean attention mask of one factorized layer.

    Row i lists the positions j that position i may attend to. Every self
    pattern contains the diagonal.
    """
    kind = AttentionKind(kind)
    if length % chunk:
        raise ValueError(f"sequence length {length} is not divisible by chunk {chunk}")
    if kind == AttentionKind.ENC_DEC:
        return AttentionPattern(kind, None)

    i = torch.arange(length).unsqueeze(1)
    j = torch.arange(length).unsqueeze(0)
    if kind == AttentionKind.IN_CHUNK:
        mask = (i // chunk) == (j // chunk)
    elif kind == AttentionKind.CROSS_CHUNK:
        mask = (i - j) % chunk == 0
    else:
        mask = ((j // chunk) == (i // chunk) - 1) | (i == j)
    if causal:
        mask = mask & (j <= i)
    return AttentionPattern(kind, mask)


def encoder_layout(cfg: LMConfig) -> list[AttentionKind]:
    return [SELF_CYCLE[layer % len(SELF_CYCLE)] for layer in range(cfg.encoder_layers)]


def decoder_layout(cfg: LMConfig) -> list[AttentionKind]:
    """Decoder layer kinds; the decoder-only model drops every encoder/decoder layer."""
    kinds = [DECODER_CYCLE[layer % len(DECODER_CYCLE)] for layer in range(cfg.decoder_layers)]
    if cfg.architecture == Architecture.DECODER_ONLY:
        kinds = [kind for kind in kinds if kind != AttentionKind.ENC_DEC]
    return kinds

"""Seq2seq code language model over drumless and drum codes."""

from .attention import AttentionKind, AttentionPattern, build_pattern, decoder_layout, encoder_layout
from .model import Attention, Block, CodeLM
from .sampling import sample
from .train import (
    LMBatch,
    build_lm,
    lm_logits,
    lm_loss,
    load_lm,
    shift_right,
    teacher_forced_accuracy,
    train_lm,
    train_step_lm,
)

__all__ = [
    "Attention",
    "AttentionKind",
    "AttentionPattern",
    "Block",
    "CodeLM",
    "LMBatch",
    "build_lm",
    "build_pattern",
    "decoder_layout",
    "encoder_layout",
    "lm_logits",
    "lm_loss",
    "load_lm",
    "sample",
    "shift_right",
    "teacher_forced_accuracy",
    "train_lm",
    "train_step_lm",
]

"""Code language model with row, column and previous-row factorized attention."""

import math
from typing import Optional

import torch
import torch.nn.functional as F
from einops import rearrange
from torch import Tensor, nn

from ..beat.conditioning import BeatConditioner
from ..schema import Architecture, LMConfig
from .attention import SELF_CYCLE, AttentionKind, build_pattern, decoder_layout, encoder_layout


class Attention(nn.Module):
    """Multi-head attention with an explicit boolean mask."""

    def __init__(self, d_model: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.query = nn.Linear(d_model, d_model)
        self.key = nn.Linear(d_model, d_model)
        self.value = nn.Linear(d_model, d_model)
        self.out = nn.Linear(d_model, d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: Tensor, context: Tensor, mask: Optional[Tensor] = None) -> Tensor:
        q = rearrange(self.query(x), "b t (h d) -> b h t d", h=self.heads)
        k = rearrange(self.key(context), "b s (h d) -> b h s d", h=self.heads)
        v = rearrange(self.value(context), "b s (h d) -> b h s d", h=self.heads)
        scores = torch.einsum("bhtd,bhsd->bhts", q, k) / math.sqrt(q.shape[-1])
        if mask is not None:
            # masked weights come out exactly zero, which keeps the decoder bitwise causal
            scores = scores.masked_fill(~mask, float("-inf"))
        weights = self.dropout(F.softmax(scores, dim=-1))
        return self.out(rearrange(torch.einsum("bhts,bhsd->bhtd", weights, v), "b h t d -> b t (h d)"))


class Block(nn.Module):
    """Pre-norm attention + feed-forward layer of one attention kind."""

    def __init__(self, kind: AttentionKind, cfg: LMConfig):
        super().__init__()
        self.kind = kind
        self.norm_attn = nn.LayerNorm(cfg.d_model)
        self.attn = Attention(cfg.d_model, cfg.heads, cfg.dropout)
        self.norm_ff = nn.LayerNorm(cfg.d_model)
        self.ff = nn.Sequential(
            nn.Linear(cfg.d_model, cfg.ff_mult * cfg.d_model),
            nn.GELU(),
            nn.Linear(cfg.ff_mult * cfg.d_model, cfg.d_model),
        )
        self.dropout = nn.Dropout(cfg.dropout)

    def forward(self, x: Tensor, mask: Optional[Tensor], memory: Optional[Tensor] = None) -> Tensor:
        h = self.norm_attn(x)
        context = memory if self.kind == AttentionKind.ENC_DEC else h
        x = x + self.dropout(self.attn(h, context, mask))
        return x + self.dropout(self.ff(self.norm_ff(x)))


class CodeLM(nn.Module):
    """Drumless codes -> drum codes with factorized chunk attention.

    The encoder reads the drumless code sequence, the decoder predicts drum
    codes autoregressively from a start-token-prefixed input. Token, position
    and beat condition embeddings are summed at the input of both stacks.
    """

    def __init__(self, cfg: LMConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.d_model
        self.conditioner = BeatConditioner(cfg.cond_dim, d)

        self.encoder_kinds = encoder_layout(cfg) if self.has_encoder else []
        if self.has_encoder:
            self.src_embed = nn.Embedding(cfg.vocab_in, d)
            self.src_pos = nn.Parameter(torch.empty(cfg.seq_len, d))
            self.encoder = nn.ModuleList(Block(kind, cfg) for kind in self.encoder_kinds)
            self.encoder_norm = nn.LayerNorm(d)

        self.decoder_kinds = decoder_layout(cfg)
        self.tgt_embed = nn.Embedding(cfg.vocab_out, d)
        self.tgt_pos = nn.Parameter(torch.empty(cfg.seq_len, d))
        self.decoder = nn.ModuleList(Block(kind, cfg) for kind in self.decoder_kinds)
        self.decoder_norm = nn.LayerNorm(d)
        self.head = nn.Linear(d, cfg.drum_vocab)

        for kind in SELF_CYCLE:
            self.register_buffer(f"mask_{kind.value}", build_pattern(kind, cfg.seq_len, cfg.chunk, causal=False).mask, persistent=False)
            self.register_buffer(f"causal_{kind.value}", build_pattern(kind, cfg.seq_len, cfg.chunk, causal=True).mask, persistent=False)
        self.reset_parameters()

    def reset_parameters(self) -> None:
        for embed in (self.tgt_embed, getattr(self, "src_embed", None)):
            if embed is not None:
                nn.init.normal_(embed.weight, std=0.02)
        for pos in (self.tgt_pos, getattr(self, "src_pos", None)):
            if pos is not None:
                nn.init.normal_(pos, std=0.01)
        # zero output layer: every code starts equally likely
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    @property
    def has_encoder(self) -> bool:
        return self.cfg.architecture == Architecture.SEQ2SEQ

    @property
    def n_params(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def _mask(self, kind: AttentionKind, causal: bool, length: int) -> Optional[Tensor]:
        if kind == AttentionKind.ENC_DEC:
            return None
        mask = getattr(self, f"{'causal' if causal else 'mask'}_{kind.value}")
        return mask[:length, :length]

    def encoder_forward(self, codes: Tensor, cond: Optional[Tensor] = None) -> Tensor:
        """(B, T) drumless codes -> (B, T, d_model) memory."""
        if not self.has_encoder:
            raise ValueError("a decoder-only model has no encoder")
        if codes.shape[-1] != self.cfg.seq_len:
            raise ValueError(f"expected {self.cfg.seq_len} drumless codes, got {codes.shape[-1]}")
        x = self.src_embed(codes) + self.src_pos
        if cond is not None and self.cfg.cond_in_encoder:
            x = x + cond
        for kind, block in zip(self.encoder_kinds, self.encoder):
            x = block(x, self._mask(kind, causal=False, length=x.shape[1]))
        return self.encoder_norm(x)

    def decoder_forward(self, prefix: Tensor, memory: Optional[Tensor] = None, cond: Optional[Tensor] = None) -> Tensor:
        """(B, P) start-prefixed drum codes -> (B, P, K^d) next-code logits.

        Logits at position i see only prefix[:i + 1], the memory and cond[:i + 1].
        """
        length = prefix.shape[-1]
        if length > self.cfg.seq_len:
            raise ValueError(f"prefix of {length} codes exceeds seq_len {self.cfg.seq_len}")
        if self.has_encoder and memory is None:
            raise ValueError("a seq2seq decoder needs encoder memory")
        x = self.tgt_embed(prefix) + self.tgt_pos[:length]
        if cond is not None and self.cfg.cond_in_decoder:
            x = x + cond[:, :length]
        for kind, block in zip(self.decoder_kinds, self.decoder):
            x = block(x, self._mask(kind, causal=True, length=length), memory)
        return self.head(self.decoder_norm(x))

    def forward(self, src: Tensor, prefix: Tensor, cond: Optional[Tensor] = None) -> Tensor:
        memory = self.encoder_forward(src, cond) if self.has_encoder else None
        return self.decoder_forward(prefix, memory, cond)

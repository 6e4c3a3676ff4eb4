"""Mel-spectrogram VQ-VAE: conv encoder, quantizer and decoder."""

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from einops import rearrange
from torch import Tensor, nn

from ..dsp import MelSpec
from ..schema import CodecConfig
from .quantizer import Codebook


@dataclass
class CodecOutput:
    latents: Tensor  # (B, T, D) encoder output h
    ids: Tensor  # (B, T) code ids z
    quantized: Tensor  # (B, T, D) straight-through h'
    reconstruction: Tensor  # (B, F, n_mels)


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv1d(channels, channels, kernel_size=3, padding=1),
            nn.ReLU(),
            nn.Conv1d(channels, channels, kernel_size=1),
        )

    def forward(self, x: Tensor) -> Tensor:
        return x + self.body(x)


class Encoder(nn.Module):
    """Mel frames -> latents, halving the time axis once per layer."""

    def __init__(self, cfg: CodecConfig):
        super().__init__()
        self.mel_mean, self.mel_std = cfg.mel_mean, cfg.mel_std
        self.stem = nn.Conv1d(cfg.n_mels, cfg.channels, kernel_size=3, padding=1)
        self.blocks = nn.ModuleList(
            nn.Sequential(
                nn.Conv1d(cfg.channels, cfg.channels, kernel_size=4, stride=2, padding=1),
                nn.ReLU(),
                ResidualBlock(cfg.channels),
            )
            for _ in range(cfg.encoder_layers)
        )
        self.head = nn.Conv1d(cfg.channels, cfg.latent_dim, kernel_size=1)

    def forward(self, mel: Tensor) -> Tensor:
        x = self.stem(rearrange((mel - self.mel_mean) / self.mel_std, "b f m -> b m f"))
        for block in self.blocks:
            x = block(x)
        return rearrange(self.head(x), "b d t -> b t d")


class Decoder(nn.Module):
    """Mirror of the encoder with transposed convolutions."""

    def __init__(self, cfg: CodecConfig):
        super().__init__()
        self.mel_mean, self.mel_std = cfg.mel_mean, cfg.mel_std
        self.stem = nn.Conv1d(cfg.latent_dim, cfg.channels, kernel_size=3, padding=1)
        self.blocks = nn.ModuleList(
            nn.Sequential(
                ResidualBlock(cfg.channels),
                nn.ConvTranspose1d(cfg.channels, cfg.channels, kernel_size=4, stride=2, padding=1),
                nn.ReLU(),
            )
            for _ in range(cfg.decoder_layers)
        )
        self.head = nn.Conv1d(cfg.channels, cfg.n_mels, kernel_size=3, padding=1)

    def forward(self, latents: Tensor) -> Tensor:
        x = self.stem(rearrange(latents, "b t d -> b d t"))
        for block in self.blocks:
            x = block(x)
        return rearrange(self.head(x), "b m f -> b f m") * self.mel_std + self.mel_mean


class VQCodec(nn.Module):
    """Mel VQ-VAE: convolutional encoder, nearest-prototype quantizer, decoder."""

    def __init__(self, cfg: CodecConfig):
        super().__init__()
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        self.decoder = Decoder(cfg)
        self.codebook = Codebook(cfg.codebook_size, cfg.latent_dim, cfg.ema_decay, cfg.dead_code_threshold)

    def _check_frames(self, mel: Tensor) -> None:
        if mel.shape[-1] != self.cfg.n_mels:
            raise ValueError(f"expected {self.cfg.n_mels} mel bins, got {mel.shape[-1]}")
        if mel.shape[-2] % self.cfg.frames_per_code:
            raise ValueError(f"frame count {mel.shape[-2]} is not divisible by L={self.cfg.frames_per_code}")

    def encode(self, mel: Tensor) -> Tensor:
        """(B, F, n_mels) -> (B, F / L, D)."""
        self._check_frames(mel)
        return self.encoder(mel)

    def quantize(self, latents: Tensor) -> tuple[Tensor, Tensor]:
        return self.codebook.quantize(latents)

    def decode(self, quantized: Tensor) -> Tensor:
        """(B, T, D) -> (B, T * L, n_mels)."""
        if quantized.shape[-1] != self.cfg.latent_dim:
            raise ValueError(f"expected latent dim {self.cfg.latent_dim}, got {quantized.shape[-1]}")
        return self.decoder(quantized)

    def forward(self, mel: Tensor) -> CodecOutput:
        latents = self.encode(mel)
        ids, prototypes = self.quantize(latents)
        # straight-through: forward uses e_z, backward passes dL/dh' to h unchanged
        quantized = latents + (prototypes.to(latents.dtype) - latents).detach()
        return CodecOutput(latents=latents, ids=ids, quantized=quantized, reconstruction=self.decode(quantized))

    def losses(self, mel: Tensor) -> tuple[Tensor, Tensor, CodecOutput]:
        """Reconstruction MSE and commitment ||h - sg(e_z)||^2 averaged over steps."""
        out = self(mel)
        reconstruction = F.mse_loss(out.reconstruction, mel)
        prototypes = self.codebook.lookup(out.ids).to(out.latents.dtype)
        commitment = (out.latents - prototypes.detach()).pow(2).sum(dim=-1).mean()
        return reconstruction, commitment, out

    def total_loss(self, mel: Tensor) -> Tensor:
        reconstruction, commitment, _ = self.losses(mel)
        return reconstruction + self.cfg.commitment_beta * commitment

    # -------------------------------------------------------------------------
    # MelSpec-facing inference helpers
    # -------------------------------------------------------------------------

    def _as_batch(self, mel: MelSpec) -> Tensor:
        dtype = next(self.parameters()).dtype
        return torch.from_numpy(mel.values).to(dtype).unsqueeze(0)

    @torch.no_grad()
    def encode_mel(self, mel: MelSpec) -> Tensor:
        """LatentSeq of one clip, shape (T, D)."""
        return self.encode(self._as_batch(mel))[0]

    @torch.no_grad()
    def mel_to_codes(self, mel: MelSpec) -> np.ndarray:
        """CodeSeq of one clip, shape (T,)."""
        ids, _ = self.quantize(self.encode(self._as_batch(mel)))
        return ids[0].cpu().numpy().astype(np.int64)

    @torch.no_grad()
    def codes_to_mel(self, ids: np.ndarray, log_floor: float = 1e-5) -> MelSpec:
        """Decode a CodeSeq, clamping the result at the log floor."""
        ids_t = torch.as_tensor(np.asarray(ids), dtype=torch.long).unsqueeze(0)
        dtype = next(self.parameters()).dtype
        mel = self.decode(self.codebook.lookup(ids_t).to(dtype))[0]
        return MelSpec(values=mel.clamp_min(float(np.log(log_floor))).cpu().numpy())

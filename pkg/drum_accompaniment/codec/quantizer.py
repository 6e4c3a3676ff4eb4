"""EMA vector-quantization codebook with dead-code restarts."""

import torch
import torch.nn.functional as F
from torch import Tensor, nn

_EPS = 1e-12


class Codebook(nn.Module):
    """K prototype vectors with EMA cluster statistics.

    Prototypes are buffers, not parameters: they move by exponential moving
    averages of the latents assigned to them, never by gradient descent.
    """

    def __init__(self, codebook_size: int, latent_dim: int, decay: float = 0.99, dead_code_threshold: float = 1e-2):
        super().__init__()
        self.codebook_size = codebook_size
        self.latent_dim = latent_dim
        self.decay = decay
        self.dead_code_threshold = dead_code_threshold

        self.register_buffer("vectors", torch.randn(codebook_size, latent_dim))
        self.register_buffer("usage", torch.ones(codebook_size))
        self.register_buffer("ema_sum", self.vectors.clone())
        self.register_buffer("initialized", torch.tensor(False))

    def quantize(self, latents: Tensor) -> tuple[Tensor, Tensor]:
        """Nearest prototype per latent; ties go to the lowest index.

        Args:
            latents: (..., D)

        Returns:
            ids (...,) and quantized (..., D) prototype rows
        """
        if latents.shape[-1] != self.latent_dim:
            raise ValueError(f"latent dim {latents.shape[-1]} does not match codebook dim {self.latent_dim}")
        flat = latents.detach().reshape(-1, self.latent_dim).to(self.vectors.dtype)
        # exact differences keep ties exact; argmin returns the first minimum
        distances = torch.cdist(flat, self.vectors, compute_mode="donot_use_mm_for_euclid_dist")
        ids = distances.argmin(dim=1).reshape(latents.shape[:-1])
        return ids, self.vectors[ids]

    def lookup(self, ids: Tensor) -> Tensor:
        if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= self.codebook_size):
            raise ValueError(f"code ids must lie in [0, {self.codebook_size})")
        return self.vectors[ids]

    @torch.no_grad()
    def init_from(self, latents: Tensor, generator: torch.Generator) -> None:
        """Seed every prototype with a latent drawn from the batch."""
        flat = latents.reshape(-1, self.latent_dim).to(self.vectors.dtype)
        picks = torch.randint(flat.shape[0], (self.codebook_size,), generator=generator)
        self.vectors.copy_(flat[picks])
        self.ema_sum.copy_(self.vectors)
        self.usage.fill_(1.0)
        self.initialized.fill_(True)

    @torch.no_grad()
    def ema_update(self, latents: Tensor, ids: Tensor, generator: torch.Generator) -> "Codebook":
        """Move prototypes toward the mean of their assigned latents.

        With decay 0 this is one batch k-means step; with decay 1 the codebook
        is frozen. Entries whose usage drops below the dead-code threshold are
        reseeded to random latents of the batch.
        """
        if self.decay >= 1.0:
            return self
        flat = latents.reshape(-1, self.latent_dim).to(self.vectors.dtype)
        one_hot = F.one_hot(ids.reshape(-1), self.codebook_size).to(flat.dtype)
        counts = one_hot.sum(dim=0)
        sums = one_hot.t() @ flat

        self.usage.mul_(self.decay).add_(counts, alpha=1.0 - self.decay)
        self.ema_sum.mul_(self.decay).add_(sums, alpha=1.0 - self.decay)
        live = self.usage > _EPS
        self.vectors[live] = self.ema_sum[live] / self.usage[live].unsqueeze(1)

        dead = self.usage < self.dead_code_threshold
        n_dead = int(dead.sum())
        if n_dead:
            picks = torch.randint(flat.shape[0], (n_dead,), generator=generator)
            self.vectors[dead] = flat[picks]
            self.ema_sum[dead] = flat[picks]
            self.usage[dead] = 1.0
        return self

    def stats(self, ids: Tensor) -> dict[str, float]:
        """Perplexity of the code histogram and number of unused entries."""
        counts = torch.bincount(ids.reshape(-1), minlength=self.codebook_size).to(torch.float64)
        probs = counts / counts.sum().clamp_min(1.0)
        entropy = -(probs[probs > 0] * probs[probs > 0].log()).sum()
        return {"perplexity": float(entropy.exp()), "unused": float((counts == 0).sum())}

"""Single-file checkpoints for codecs, trackers and language models."""

import logging
from pathlib import Path
from typing import Any, Optional, Union

import torch
import yaml
from pydantic import BaseModel

from .errors import CheckpointError

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
KINDS = ("codec", "tracker", "lm")


def save_checkpoint(
    path: Union[str, Path],
    kind: str,
    config: BaseModel,
    model: torch.nn.Module,
    optimizer: Optional[torch.optim.Optimizer] = None,
    step: int = 0,
    trace: Optional[list[dict]] = None,
    extra: Optional[dict[str, Any]] = None,
) -> Path:
    """Write model weights, config and optional optimizer state to one file.

    The loss trace is also written next to the checkpoint as ``<name>.trace.yaml``.
    """
    if kind not in KINDS:
        raise CheckpointError(f"unknown checkpoint kind {kind!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    package = {
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "config": config.model_dump(mode="json"),
        "state_dict": model.state_dict(),
        "optimizer": optimizer.state_dict() if optimizer is not None else None,
        "step": step,
        "trace": trace or [],
        "extra": extra or {},
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(package, tmp)
    tmp.replace(path)
    if trace:
        path.with_suffix(".trace.yaml").write_text(yaml.safe_dump(trace, sort_keys=False))
    logger.debug("Saved %s checkpoint at step %d to %s", kind, step, path)
    return path


def load_checkpoint(path: Union[str, Path], kind: str) -> dict[str, Any]:
    """Read a checkpoint written by save_checkpoint and check its header."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        package = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"cannot read {path}: {exc}") from exc
    if not isinstance(package, dict) or "version" not in package:
        raise CheckpointError(f"{path} has no version field")
    if package["version"] != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path} has version {package['version']}, expected {CHECKPOINT_VERSION}")
    if package.get("kind") != kind:
        raise CheckpointError(f"{path} holds a {package.get('kind')} checkpoint, expected {kind}")
    return package

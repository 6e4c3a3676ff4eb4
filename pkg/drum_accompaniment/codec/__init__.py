"""Mel-domain VQ-VAE codecs for drumless and drum audio."""

from .model import CodecOutput, VQCodec
from .quantizer import Codebook
from .train import build_codec, load_codec, sample_mel_batch, train_codec

__all__ = [
    "Codebook",
    "CodecOutput",
    "VQCodec",
    "build_codec",
    "load_codec",
    "sample_mel_batch",
    "train_codec",
]

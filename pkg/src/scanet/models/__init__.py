"""Network components: attention generator, scene reconstructor, discriminator."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from ..config import ModelConfig
from .agn import AttentionGenerator, ChannelAttention, DualAttentionUnit, MultiScalePixelAttention
from .discriminator import PatchDiscriminator
from .srn import DeformableConv2d, ResidualBlock, SceneReconstructor


class AlphaGates(nn.Module):
    """Learnable mixing scalars for the two attention injection points."""

    def __init__(self, init: float = 0.5):
        super().__init__()
        self.stem = nn.Parameter(torch.tensor(float(init)))
        self.bottleneck = nn.Parameter(torch.tensor(float(init)))

    def values(self):
        return (self.stem, self.bottleneck)


class SCANet(nn.Module):
    """Generator: attention network + scene reconstructor + injection gates.

    Inference runs the attention network and feeds its map straight into the
    reconstructor; during training the caller may pass a pre-blended map via
    ``attention`` instead. Built with ``with_agn=False`` the model degrades to
    the plain reconstructor (the reconstruction-only ablation topology).
    """

    def __init__(self, config: ModelConfig | None = None, with_agn: bool = True):
        super().__init__()
        cfg = config or ModelConfig()
        self.config = cfg
        self.agn = AttentionGenerator(cfg.agn) if with_agn else None
        self.srn = SceneReconstructor(cfg.srn)
        self.alpha = AlphaGates()

    def forward(self, hazy: torch.Tensor,
                attention: torch.Tensor | None = None) -> tuple[torch.Tensor, torch.Tensor | None]:
        """Returns (dehazed, predicted attention map or None)."""
        m_g = None
        if self.agn is not None:
            m_g, _ = self.agn(hazy)
        m = attention if attention is not None else m_g
        if m is None:
            return self.srn(hazy), None
        return self.srn(hazy, m, self.alpha.values()), m_g


def dehaze_image(model: SCANet, image: np.ndarray) -> np.ndarray:
    """Dehaze one HxWx3 [0,1] image; output has the input's dimensions."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 image, got shape {image.shape}")
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            t = torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1))).float()[None]
            out, _ = model(t)
    finally:
        model.train(was_training)
    return out[0].clamp(0, 1).permute(1, 2, 0).numpy().astype(np.float64)


__all__ = [
    "AlphaGates",
    "dehaze_image",
    "AttentionGenerator",
    "ChannelAttention",
    "DeformableConv2d",
    "DualAttentionUnit",
    "MultiScalePixelAttention",
    "PatchDiscriminator",
    "ResidualBlock",
    "SCANet",
    "SceneReconstructor",
]

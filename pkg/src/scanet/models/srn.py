"""Scene reconstruction network: 4x-downsampling encoder-decoder with deformable convs."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F
from torchvision.ops import deform_conv2d

from ..config import SRNConfig
from ..curriculum import apply_attention


class DeformableConv2d(nn.Module):
    """3x3 conv sampling at learned per-location offsets (bilinear, zero padding).

    Offsets come from an internal zero-initialized predictor unless passed
    explicitly; with all offsets zero this is exactly a standard convolution.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3):
        super().__init__()
        self.kernel_size = kernel_size
        self.padding = kernel_size // 2
        ref = nn.Conv2d(in_channels, out_channels, kernel_size)
        self.weight = nn.Parameter(ref.weight.detach().clone())
        self.bias = nn.Parameter(ref.bias.detach().clone())
        self.offset_conv = nn.Conv2d(in_channels, 2 * kernel_size * kernel_size,
                                     kernel_size, padding=self.padding)
        nn.init.zeros_(self.offset_conv.weight)
        nn.init.zeros_(self.offset_conv.bias)

    def forward(self, x, offsets: torch.Tensor | None = None):
        if offsets is None:
            offsets = self.offset_conv(x)
        if not torch.isfinite(offsets).all():
            raise ValueError("deformable conv offsets must be finite")
        return deform_conv2d(x, offsets, self.weight, self.bias, padding=self.padding)


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, 3, padding=1),
        )

    def forward(self, x):
        return x + self.body(x)


def _pad_to_multiple(x: torch.Tensor, multiple: int) -> torch.Tensor:
    h, w = x.shape[-2:]
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph or pw:
        x = F.pad(x, (0, pw, 0, ph), mode="reflect")
    return x


class SceneReconstructor(nn.Module):
    """Encoder-decoder that turns a hazy image into a dehazed one.

    Stem conv at full resolution, two stride-2 convs down to 1/4, a residual
    stack plus two deformable convs, two stride-2 transposed convs back up and
    a reflection-padded 7x7 tanh tail mapped to [0,1]. An attention map can be
    injected after the stem and at the bottleneck, each gated by a learnable
    mixing scalar (see ``curriculum.apply_attention``); the map is area-resized
    to the feature resolution where needed. Inputs whose sides are not
    multiples of 4 are reflection-padded and cropped back after decoding.
    """

    def __init__(self, config: SRNConfig | None = None):
        super().__init__()
        cfg = config or SRNConfig()
        self.config = cfg
        c0, c1, c2 = cfg.stem_channels, cfg.mid_channels, cfg.base_channels
        self.stem = nn.Sequential(nn.Conv2d(3, c0, 3, padding=1), nn.ReLU(inplace=True))
        self.down1 = nn.Sequential(nn.Conv2d(c0, c1, 3, stride=2, padding=1), nn.ReLU(inplace=True))
        self.down2 = nn.Sequential(nn.Conv2d(c1, c2, 3, stride=2, padding=1), nn.ReLU(inplace=True))
        self.res_blocks = nn.Sequential(*(ResidualBlock(c2) for _ in range(cfg.n_res_blocks)))
        self.deform = nn.ModuleList(DeformableConv2d(c2, c2) for _ in range(cfg.n_deform_layers))
        self.up1 = nn.Sequential(nn.ConvTranspose2d(c2, c1, 4, stride=2, padding=1), nn.ReLU(inplace=True))
        self.up2 = nn.Sequential(nn.ConvTranspose2d(c1, c0, 4, stride=2, padding=1), nn.ReLU(inplace=True))
        self.tail = nn.Sequential(nn.ReflectionPad2d(3), nn.Conv2d(c0, 3, 7), nn.Tanh())

    def encode(self, hazy: torch.Tensor) -> torch.Tensor:
        """Features at 1/4 resolution (input padded to a multiple of 4 first)."""
        x = _pad_to_multiple(hazy, 4)
        return self.down2(self.down1(self.stem(x)))

    def decode(self, feats: torch.Tensor, out_size: tuple[int, int] | None = None) -> torch.Tensor:
        """Dehazed image in [0,1] at 4x the feature resolution, cropped to ``out_size``."""
        y = (self.tail(self.up2(self.up1(feats))) + 1.0) / 2.0
        if out_size is not None:
            y = y[..., :out_size[0], :out_size[1]]
        return y

    def forward(self, hazy: torch.Tensor, attention: torch.Tensor | None = None,
                alphas=(0.5, 0.5)) -> torch.Tensor:
        if hazy.ndim != 4 or hazy.shape[1] != 3:
            raise ValueError(f"expected [B,3,H,W], got {tuple(hazy.shape)}")
        h, w = hazy.shape[-2:]
        if attention is not None:
            if attention.ndim != 4 or attention.shape[-2:] != (h, w):
                raise ValueError(f"attention map shape {tuple(attention.shape)} does not "
                                 f"match input {tuple(hazy.shape)}")
            attention = _pad_to_multiple(attention, 4)
        x = _pad_to_multiple(hazy, 4)

        f = self.stem(x)
        if attention is not None and self.config.inject_stem:
            f = apply_attention(f, attention, alphas[0])
        f = self.down2(self.down1(f))
        if attention is not None and self.config.inject_bottleneck:
            m = F.interpolate(attention, size=f.shape[-2:], mode="area")
            f = apply_attention(f, m, alphas[1])
        f = self.res_blocks(f)
        for layer in self.deform:
            f = F.relu(layer(f))
        return self.decode(f, out_size=(h, w))

"""Attention generator: stacked dual-attention units producing a spatial map."""

from __future__ import annotations

import torch
import torch.nn as nn

from ..config import AGNConfig


class ChannelAttention(nn.Module):
    """Two 3x3 convs, then a pooled channel gate applied to their output."""

    def __init__(self, channels: int, reduction: int = 4):
        super().__init__()
        self.channels = channels
        hidden = max(channels // reduction, 1)
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, 3, padding=1),
        )
        self.gate = nn.Sequential(
            nn.AdaptiveAvgPool2d(1),
            nn.Conv2d(channels, hidden, 1),
            nn.ReLU(inplace=True),
            nn.Conv2d(hidden, channels, 1),
            nn.Sigmoid(),
        )

    def forward(self, x):
        if x.shape[1] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {x.shape[1]}")
        h = self.body(x)
        return h * self.gate(h)


class MultiScalePixelAttention(nn.Module):
    """Two 3x3 convs, then a single-channel gate built from parallel dilated convs.

    Three dilated 3x3 branches (ratios 3/5/7 by default) see increasingly wide
    context; their concatenation is fused by two 1x1 convs into a sigmoid gate
    that reweights the conv output per pixel.
    """

    def __init__(self, channels: int, dilations: tuple[int, ...] = (3, 5, 7)):
        super().__init__()
        self.channels = channels
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, 3, padding=1),
        )
        self.branches = nn.ModuleList(
            nn.Conv2d(channels, channels, 3, padding=d, dilation=d) for d in dilations
        )
        self.fuse = nn.Sequential(
            nn.Conv2d(channels * len(dilations), channels, 1),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, 1, 1),
            nn.Sigmoid(),
        )

    def forward(self, x):
        if x.shape[1] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {x.shape[1]}")
        h = self.body(x)
        gate = self.fuse(torch.cat([b(h) for b in self.branches], dim=1))
        return h * gate


class DualAttentionUnit(nn.Module):
    """Channel attention then multi-scale pixel attention, with a residual skip."""

    def __init__(self, channels: int, dilations: tuple[int, ...] = (3, 5, 7),
                 reduction: int = 4):
        super().__init__()
        self.ca = ChannelAttention(channels, reduction)
        self.mspa = MultiScalePixelAttention(channels, dilations)

    def forward(self, x):
        return x + self.mspa(self.ca(x))


class AttentionGenerator(nn.Module):
    """Full-resolution attention network: stem conv, DAU stack, 7x7 sigmoid head.

    ``forward`` returns the attention map in (0,1) plus the pre-head features.
    """

    MIN_SIZE = 16

    def __init__(self, config: AGNConfig | None = None):
        super().__init__()
        cfg = config or AGNConfig()
        self.config = cfg
        self.stem = nn.Sequential(
            nn.Conv2d(cfg.in_channels, cfg.channels, 3, padding=1),
            nn.ReLU(inplace=True),
        )
        self.daus = nn.Sequential(*(
            DualAttentionUnit(cfg.channels, cfg.dilations, cfg.reduction)
            for _ in range(cfg.n_daus)
        ))
        self.head = nn.Sequential(
            nn.ReflectionPad2d(3),
            nn.Conv2d(cfg.channels, 1, 7),
            nn.Sigmoid(),
        )

    def forward(self, hazy: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if hazy.ndim != 4 or hazy.shape[1] != self.config.in_channels:
            raise ValueError(f"expected [B,{self.config.in_channels},H,W], got {tuple(hazy.shape)}")
        if hazy.shape[-2] < self.MIN_SIZE or hazy.shape[-1] < self.MIN_SIZE:
            raise ValueError(f"input must be at least {self.MIN_SIZE}px per side, "
                             f"got {tuple(hazy.shape[-2:])}")
        feats = self.daus(self.stem(hazy))
        return self.head(feats), feats

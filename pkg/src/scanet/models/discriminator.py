"""Patch discriminator for the adversarial term (operates on residual images)."""

from __future__ import annotations

import torch.nn as nn


class PatchDiscriminator(nn.Module):
    """Four-layer strided classifier emitting per-patch probabilities in (0,1).

    Three 4x4 stride-2 convs shrink the input 8x, a final 3x3 conv maps to one
    channel, and a sigmoid yields patch probabilities.
    """

    def __init__(self, in_channels: int = 3, base_channels: int = 64):
        super().__init__()
        c = base_channels
        self.net = nn.Sequential(
            nn.Conv2d(in_channels, c, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(c, c * 2, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(c * 2, c * 4, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(c * 4, 1, 3, padding=1),
            nn.Sigmoid(),
        )

    def forward(self, x):
        return self.net(x)

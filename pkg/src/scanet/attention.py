"""Ground-truth attention targets from luminance deviation.

Haze brightens the regions it occludes, so the Y-channel (BT.601 luma)
difference between a hazy image and its clear counterpart marks where the
reconstruction network should focus. The resulting map is the supervision
target for the attention generator.
"""

from __future__ import annotations

import numpy as np
import torch

# BT.601 luma coefficients
Y_WEIGHTS = (0.299, 0.587, 0.114)


def rgb_to_y(image: np.ndarray) -> np.ndarray:
    """Y = 0.299 R + 0.587 G + 0.114 B for an HxWx3 image in [0,1]."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 image, got shape {image.shape}")
    r, g, b = image[..., 0], image[..., 1], image[..., 2]
    return Y_WEIGHTS[0] * r + Y_WEIGHTS[1] * g + Y_WEIGHTS[2] * b


def attention_target(hazy: np.ndarray, clear: np.ndarray, signed: bool = False) -> np.ndarray:
    """Per-pixel luminance deviation |Y_hazy - Y_clear|, clipped to [0,1].

    ``signed=True`` keeps only positive deviations (haze brightening) instead
    of the absolute value.
    """
    hazy = np.asarray(hazy, dtype=np.float64)
    clear = np.asarray(clear, dtype=np.float64)
    if hazy.shape != clear.shape:
        raise ValueError(f"shape mismatch: hazy {hazy.shape} vs clear {clear.shape}")
    d = rgb_to_y(hazy) - rgb_to_y(clear)
    if not signed:
        d = np.abs(d)
    return np.clip(d, 0.0, 1.0)


def rgb_to_y_batch(images: torch.Tensor) -> torch.Tensor:
    """Batched luma for [B,3,H,W] tensors, returns [B,1,H,W]."""
    if images.ndim != 4 or images.shape[1] != 3:
        raise ValueError(f"expected a [B,3,H,W] tensor, got shape {tuple(images.shape)}")
    w = torch.tensor(Y_WEIGHTS, dtype=images.dtype, device=images.device).view(1, 3, 1, 1)
    return (images * w).sum(dim=1, keepdim=True)


def attention_target_batch(hazy: torch.Tensor, clear: torch.Tensor,
                           signed: bool = False) -> torch.Tensor:
    """Batched luminance-deviation targets, [B,1,H,W] in [0,1]."""
    if hazy.shape != clear.shape:
        raise ValueError(f"shape mismatch: hazy {tuple(hazy.shape)} vs clear {tuple(clear.shape)}")
    d = rgb_to_y_batch(hazy) - rgb_to_y_batch(clear)
    if not signed:
        d = d.abs()
    return d.clamp(0.0, 1.0)

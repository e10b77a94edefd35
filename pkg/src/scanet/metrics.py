"""Evaluation metrics and model budget accounting."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
from scipy.ndimage import correlate1d

from .attention import rgb_to_y
from .models.srn import DeformableConv2d
from .synthdata import read_image

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def psnr(pred: np.ndarray, target: np.ndarray, cap: float = 100.0) -> float:
    """10*log10(1/MSE) for [0,1] images, capped (identical images hit the cap)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    mse = np.mean((pred - target) ** 2)
    if mse == 0.0:
        return cap
    return min(10.0 * np.log10(1.0 / mse), cap)


def _gaussian_kernel1d(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    coords = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _window_mean(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Gaussian-weighted local means over valid windows (no padding)."""
    r = len(kernel) // 2
    t = correlate1d(x, kernel, axis=0, mode="constant")
    t = correlate1d(t, kernel, axis=1, mode="constant")
    return t[r:-r, r:-r]


def ssim(pred: np.ndarray, target: np.ndarray, window_size: int = SSIM_WINDOW,
         sigma: float = SSIM_SIGMA, data_range: float = 1.0) -> float:
    """Mean local structural similarity on the luma channel.

    Gaussian 11x11 windows (sigma 1.5) over the valid interior; color images
    are converted to Y first.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if pred.ndim == 3:
        pred, target = rgb_to_y(pred), rgb_to_y(target)
    elif pred.ndim != 2:
        raise ValueError(f"expected HxW or HxWx3 images, got shape {pred.shape}")
    if min(pred.shape) < window_size:
        raise ValueError(f"image {pred.shape} is smaller than the {window_size}px window")

    k = _gaussian_kernel1d(window_size, sigma)
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    mu_a, mu_b = _window_mean(pred, k), _window_mean(target, k)
    var_a = _window_mean(pred * pred, k) - mu_a ** 2
    var_b = _window_mean(target * target, k) - mu_b ** 2
    cov = _window_mean(pred * target, k) - mu_a * mu_b
    l_map = (2 * mu_a * mu_b + c1) / (mu_a ** 2 + mu_b ** 2 + c1)
    cs_map = (2 * cov + c2) / (var_a + var_b + c2)
    return float(np.mean(l_map * cs_map))


@dataclass
class EvalResult:
    per_image: list[tuple[str, float, float]]  # (name, psnr, ssim)
    psnr_mean: float
    ssim_mean: float


def evaluate_pairs(pairs) -> EvalResult:
    """Score (name, pred, target) triples; means over images."""
    rows = [(name, psnr(p, t), ssim(p, t)) for name, p, t in pairs]
    if not rows:
        return EvalResult([], float("nan"), float("nan"))
    return EvalResult(rows,
                      float(np.mean([r[1] for r in rows])),
                      float(np.mean([r[2] for r in rows])))


def evaluate_dirs(pred_dir: str | os.PathLike, gt_dir: str | os.PathLike) -> EvalResult:
    """Compare same-named images across two directories."""
    pred_names = sorted(os.listdir(pred_dir))
    gt_names = sorted(os.listdir(gt_dir))
    if pred_names != gt_names:
        raise ValueError(f"name sets differ between {pred_dir!r} and {gt_dir!r}")
    pairs = ((name, read_image(os.path.join(pred_dir, name)),
              read_image(os.path.join(gt_dir, name))) for name in pred_names)
    return evaluate_pairs(pairs)


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


@dataclass
class ModelBudget:
    """Parameter count and analytic operation count at a stated input size.

    ``macs`` is the multiply-accumulate count (the convention behind common
    profiler "FLOPs" figures); ``flops`` doubles it (one multiply plus one
    add). Layer types that were executed but not counted are listed.
    """

    parameter_count: int
    macs: int
    flops: int
    input_size: tuple[int, int]
    uncounted: tuple[str, ...] = field(default_factory=tuple)


_IGNORED_LEAF_TYPES = (
    nn.ReLU, nn.LeakyReLU, nn.Sigmoid, nn.Tanh, nn.Identity,
    nn.ReflectionPad2d, nn.ZeroPad2d, nn.AdaptiveAvgPool2d, nn.AvgPool2d,
    nn.MaxPool2d, nn.Dropout, nn.Flatten,
)


def estimate_flops(model: nn.Module, input_size: tuple[int, int],
                   in_channels: int = 3) -> ModelBudget:
    """Analytic per-layer MAC count from one traced forward pass.

    Convs count on the output grid (Cin/groups * Cout * K^2 * Hout * Wout),
    transposed convs on the input grid (their true multiply count), and
    deformable convs add 8 bilinear-interpolation ops per sampled tap.
    """
    counts = {"macs": 0}
    uncounted: set[str] = set()
    hooks = []

    def conv_hook(mod, inputs, output):
        kh, kw = mod.kernel_size
        hout, wout = output.shape[-2:]
        counts["macs"] += (mod.in_channels // mod.groups) * mod.out_channels * kh * kw * hout * wout

    def convt_hook(mod, inputs, output):
        kh, kw = mod.kernel_size
        hin, win = inputs[0].shape[-2:]
        counts["macs"] += mod.in_channels * (mod.out_channels // mod.groups) * kh * kw * hin * win

    def deform_hook(mod, inputs, output):
        k2 = mod.kernel_size ** 2
        cin = mod.weight.shape[1]
        cout = mod.weight.shape[0]
        hout, wout = output.shape[-2:]
        counts["macs"] += cin * cout * k2 * hout * wout  # kernel application
        counts["macs"] += 8 * k2 * cin * hout * wout     # bilinear sampling

    def generic_hook(mod, inputs, output):
        if isinstance(mod, (nn.Conv2d, nn.ConvTranspose2d, DeformableConv2d)):
            return
        if next(mod.children(), None) is not None:  # containers/composites
            return
        if not isinstance(mod, _IGNORED_LEAF_TYPES):
            uncounted.add(type(mod).__name__)

    for mod in model.modules():
        if isinstance(mod, DeformableConv2d):
            hooks.append(mod.register_forward_hook(deform_hook))
        elif isinstance(mod, nn.ConvTranspose2d):
            hooks.append(mod.register_forward_hook(convt_hook))
        elif isinstance(mod, nn.Conv2d):
            hooks.append(mod.register_forward_hook(conv_hook))
        else:
            hooks.append(mod.register_forward_hook(generic_hook))

    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            model(torch.zeros(1, in_channels, input_size[0], input_size[1]))
    finally:
        for h in hooks:
            h.remove()
        model.train(was_training)

    macs = counts["macs"]
    return ModelBudget(parameter_count=count_parameters(model), macs=macs,
                       flops=2 * macs, input_size=tuple(input_size),
                       uncounted=tuple(sorted(uncounted)))

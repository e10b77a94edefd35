"""Training objectives: smooth L1, perceptual, MS-SSIM, adversarial, and their weighted sum."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

PROB_EPS = 1e-7

# standard multi-scale exponents, finest to coarsest
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


class ConfigurationError(RuntimeError):
    pass


class NonFiniteLossError(RuntimeError):
    """A loss component became NaN/inf; training must abort."""

    def __init__(self, component: str, value: float):
        super().__init__(f"non-finite loss component {component!r}: {value}")
        self.component = component


@dataclass(frozen=True)
class LossWeights:
    """Coefficients of the joint objective, in its stated order."""

    sl1: float = 1.0
    sl1_a: float = 0.3
    perceptual: float = 0.01
    msssim: float = 0.5
    adversarial: float = 0.0005

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if v < 0:
                raise ValueError(f"loss weight {name} must be >= 0, got {v}")


@dataclass
class LossReport:
    sl1: float
    sl1_a: float
    perceptual: float
    msssim: float
    adversarial: float
    joint: float


def smooth_l1(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean smooth L1: 0.5*q^2 where |q| < 1, |q| - 0.5 elsewhere."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    q = pred - target
    absq = q.abs()
    return torch.where(absq < 1.0, 0.5 * q * q, absq - 0.5).mean()


def gaussian_window(size: int = 11, sigma: float = 1.5,
                    dtype=torch.float32) -> torch.Tensor:
    """Normalized 2-D Gaussian window (outer product of sampled 1-D kernels)."""
    coords = torch.arange(size, dtype=torch.float64) - (size - 1) / 2.0
    g = torch.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    g = g / g.sum()
    return (g[:, None] * g[None, :]).to(dtype)


def _ssim_maps(a: torch.Tensor, b: torch.Tensor, window: torch.Tensor,
               c1: float, c2: float) -> tuple[torch.Tensor, torch.Tensor]:
    """Local luminance and contrast-structure maps over valid (unpadded) windows."""
    channels = a.shape[1]
    k = window.expand(channels, 1, *window.shape).to(a.dtype)
    mu_a = F.conv2d(a, k, groups=channels)
    mu_b = F.conv2d(b, k, groups=channels)
    var_a = F.conv2d(a * a, k, groups=channels) - mu_a * mu_a
    var_b = F.conv2d(b * b, k, groups=channels) - mu_b * mu_b
    cov = F.conv2d(a * b, k, groups=channels) - mu_a * mu_b
    l_map = (2 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1)
    cs_map = (2 * cov + c2) / (var_a + var_b + c2)
    return l_map, cs_map


def max_scales(height: int, width: int, window_size: int = 11, cap: int = 5) -> int:
    """Largest scale count the image supports (each scale halves the size)."""
    s = 0
    size = min(height, width)
    while s < cap and size >= window_size:
        s += 1
        size //= 2
    return s


def ms_ssim(pred: torch.Tensor, target: torch.Tensor, scales: int | None = None,
            window_size: int = 11, sigma: float = 1.5,
            data_range: float = 1.0) -> torch.Tensor:
    """Multi-scale structural similarity in (0, 1].

    Contrast-structure means are taken at every scale and the full
    luminance-times-cs map at the coarsest; the weighted product uses the
    standard five-scale exponents, renormalized when fewer scales fit.
    ``scales=None`` picks the largest supported count. Negative local terms
    are clamped at zero before exponentiation.
    """
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    if pred.ndim != 4:
        raise ValueError(f"expected [B,C,H,W], got shape {tuple(pred.shape)}")
    h, w = pred.shape[-2:]
    supported = max_scales(h, w, window_size)
    if supported < 1:
        raise ValueError(f"image {h}x{w} is smaller than the {window_size}px window")
    if scales is None:
        scales = supported
    elif not 1 <= scales <= len(MS_SSIM_WEIGHTS):
        raise ValueError(f"scales must lie in [1, {len(MS_SSIM_WEIGHTS)}], got {scales}")
    elif scales > supported:
        raise ValueError(f"image {h}x{w} supports at most {supported} scales, got {scales}")

    weights = torch.tensor(MS_SSIM_WEIGHTS[:scales], dtype=pred.dtype, device=pred.device)
    weights = weights / weights.sum()
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    window = gaussian_window(window_size, sigma, dtype=pred.dtype).to(pred.device)

    a, b = pred, target
    terms = []
    for j in range(scales):
        l_map, cs_map = _ssim_maps(a, b, window, c1, c2)
        if j < scales - 1:
            terms.append(cs_map.mean().clamp(min=0.0))
            a = F.avg_pool2d(a, 2)
            b = F.avg_pool2d(b, 2)
        else:
            terms.append((l_map * cs_map).mean().clamp(min=0.0))
    return torch.stack(terms).pow(weights).prod()


def ms_ssim_loss(pred: torch.Tensor, target: torch.Tensor, scales: int | None = None,
                 **kwargs) -> torch.Tensor:
    return 1.0 - ms_ssim(pred, target, scales=scales, **kwargs)


# VGG16 feature stages up to the third relu of block 3; taps at the last relu
# of each stage
_VGG16_STAGES = (
    ((3, 64), (64, 64)),
    ((64, 128), (128, 128)),
    ((128, 256), (256, 256), (256, 256)),
)
_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


class FeatureExtractor(nn.Module):
    """Frozen VGG16-shaped extractor exposing three feature stages.

    ``weights='pretrained'`` loads torchvision's VGG16 (a configuration error
    if unavailable, e.g. offline); ``weights='random'`` keeps the same stage
    shapes with fixed seeded random weights, so the perceptual term still
    measures feature-space distance without any downloaded model.
    """

    def __init__(self, weights: str = "random", seed: int = 0):
        super().__init__()
        if weights == "pretrained":
            stages = self._pretrained_stages()
        elif weights == "random":
            stages = self._random_stages(seed)
        else:
            raise ValueError(f"weights must be 'pretrained' or 'random', got {weights!r}")
        self.stages = nn.ModuleList(stages)
        self.register_buffer("mean", torch.tensor(_IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(_IMAGENET_STD).view(1, 3, 1, 1))
        self.eval()
        for p in self.parameters():
            p.requires_grad_(False)

    @staticmethod
    def _pretrained_stages():
        try:
            from torchvision.models import VGG16_Weights, vgg16
            features = vgg16(weights=VGG16_Weights.IMAGENET1K_V1).features
        except Exception as exc:
            raise ConfigurationError(
                f"pretrained VGG16 weights unavailable ({exc}); use weights='random' "
                "or disable the perceptual loss") from exc
        return [features[0:4], features[4:9], features[9:16]]

    @staticmethod
    def _random_stages(seed: int):
        stages = []
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            for i, convs in enumerate(_VGG16_STAGES):
                layers = [] if i == 0 else [nn.MaxPool2d(2)]
                for cin, cout in convs:
                    layers += [nn.Conv2d(cin, cout, 3, padding=1), nn.ReLU(inplace=True)]
                stages.append(nn.Sequential(*layers))
        return stages

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        x = (x - self.mean.to(x.dtype)) / self.std.to(x.dtype)
        out = []
        for stage in self.stages:
            x = stage(x)
            out.append(x)
        return out

    def train(self, mode: bool = True):  # stays frozen
        return super().train(False)


def perceptual_loss(pred: torch.Tensor, target: torch.Tensor, extractor) -> torch.Tensor:
    """Mean over feature stages of squared feature distance per element."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    feats_p = extractor(pred)
    with torch.no_grad():
        feats_t = extractor(target)
    total = 0.0
    for fp, ft in zip(feats_p, feats_t):
        total = total + (fp - ft.detach()).pow(2).mean()
    return total / len(feats_p)


def adversarial_loss(residual: torch.Tensor, discriminator) -> torch.Tensor:
    """Generator-side term -mean(log D(residual)), with D's output clamped inside (0,1)."""
    probs = discriminator(residual)
    probs = probs.clamp(PROB_EPS, 1.0 - PROB_EPS)
    return -torch.log(probs).mean()


def discriminator_loss(real_probs: torch.Tensor, fake_probs: torch.Tensor) -> torch.Tensor:
    """Standard binary objective for training the discriminator itself."""
    real = real_probs.clamp(PROB_EPS, 1.0 - PROB_EPS)
    fake = fake_probs.clamp(PROB_EPS, 1.0 - PROB_EPS)
    return -(torch.log(real).mean() + torch.log(1.0 - fake).mean())


def joint_loss(sl1=0.0, sl1_a=0.0, perceptual=0.0, msssim=0.0, adversarial=0.0,
               weights: LossWeights | None = None):
    """Weighted sum of the five components.

    Returns (joint, LossReport); the joint value stays a tensor when any
    component is one, so it can be backpropagated. Non-finite components raise
    NonFiniteLossError naming the offender.
    """
    weights = weights or LossWeights()

    def as_float(v):
        return float(v.detach()) if isinstance(v, torch.Tensor) else float(v)

    components = {"sl1": sl1, "sl1_a": sl1_a, "perceptual": perceptual,
                  "msssim": msssim, "adversarial": adversarial}
    values = {name: as_float(v) for name, v in components.items()}
    for name, v in values.items():
        if not math.isfinite(v):
            raise NonFiniteLossError(name, v)
    joint = (weights.sl1 * sl1 + weights.sl1_a * sl1_a + weights.perceptual * perceptual
             + weights.msssim * msssim + weights.adversarial * adversarial)
    report = LossReport(joint=as_float(joint), **values)
    return joint, report

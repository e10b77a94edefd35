"""Training: patch pipeline, optimization loop, curriculum wiring, checkpoints.

Run directory layout: ``<run>/config.json`` (resolved configuration),
``<run>/metrics.csv`` (one row per optimizer step), ``<run>/checkpoints/`` and
``<run>/samples/``. Setting ``SCANET_DETERMINISTIC=1`` forces single-threaded
execution so two runs with the same configuration and seed produce
byte-identical metrics.
"""

from __future__ import annotations

import dataclasses
import os
import random
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from .attention import attention_target_batch
from .config import ModelConfig, _build
from .curriculum import CurriculumState, blend_attention
from .losses import (FeatureExtractor, LossWeights, adversarial_loss, discriminator_loss,
                     joint_loss, max_scales, ms_ssim_loss, perceptual_loss, smooth_l1)
from .metrics import psnr
from .models import SCANet, PatchDiscriminator
from .synthdata import load_dataset, write_image

CHECKPOINT_FORMAT_VERSION = 1
METRICS_COLUMNS = ("step", "sl1", "sl1_a", "perceptual", "msssim", "adversarial",
                   "joint", "lambda", "psnr_train")


class CheckpointError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    max_steps: int | None = None
    lr: float = 1e-4
    batch: int = 2
    lr_decay_every: int = 150
    lr_decay_gamma: float = 0.5
    scales: tuple[float, ...] = (0.5, 0.7, 1.0)
    patch: int = 128
    stride: int = 96
    rotations: tuple[int, ...] = (0, 90, 180, 270)
    hflip: bool = False
    seed: int = 0

    # ablation switches
    use_agn: bool = True
    use_sl1a: bool = True
    use_scl: bool = True
    use_perceptual: bool = True
    use_msssim: bool = True
    use_adversarial: bool = True

    weights: LossWeights = field(default_factory=LossWeights)
    warmup_fraction: float = 0.25
    loss_hi: float = 0.1
    loss_lo: float = 0.05
    ema_decay: float | None = None
    msssim_scales: int | None = None  # None: largest the patch supports
    pretrained_features: bool = False
    feature_seed: int = 0
    disc_noise: float = 0.01
    sample_every: int = 100

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch < 1:
            raise ValueError(f"batch must be >= 1, got {self.batch}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        bad = set(self.rotations) - {0, 90, 180, 270}
        if bad:
            raise ValueError(f"rotations must be multiples of 90 in [0,270], got {sorted(bad)}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        w = d.pop("weights", None)
        cfg = _build(cls, d, "train")
        if w is not None:
            cfg = dataclasses.replace(cfg, weights=_build(LossWeights, w, "train.weights"))
        return cfg


@dataclass
class TrainResult:
    run_dir: str
    checkpoint_path: str
    metrics_path: str
    model: SCANet
    steps: int
    epoch_lrs: list[float]


def deterministic_requested() -> bool:
    return os.environ.get("SCANET_DETERMINISTIC", "") == "1"


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2 ** 32)
    torch.manual_seed(seed)


def lr_for_epoch(lr0: float, gamma: float, every: int, epoch: int) -> float:
    return lr0 * gamma ** (epoch // every)


def augment(hazy: np.ndarray, clear: np.ndarray, rotation: int,
            hflip: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Rotate (and optionally mirror) both images of a pair identically."""
    if rotation not in (0, 90, 180, 270):
        raise ValueError(f"rotation must be one of 0/90/180/270, got {rotation}")
    k = rotation // 90
    if k:
        hazy = np.rot90(hazy, k=k, axes=(0, 1))
        clear = np.rot90(clear, k=k, axes=(0, 1))
    if hflip:
        hazy = hazy[:, ::-1]
        clear = clear[:, ::-1]
    return np.ascontiguousarray(hazy), np.ascontiguousarray(clear)


def _grid_positions(size: int, patch: int, stride: int) -> list[int]:
    """Stride grid of top-left offsets, plus a final flush-to-edge position."""
    limit = size - patch
    positions = list(range(0, limit + 1, stride))
    if positions[-1] != limit:
        positions.append(limit)
    return positions


def _resize(img: np.ndarray, scale: float) -> np.ndarray:
    if scale == 1.0:
        return img
    t = torch.from_numpy(np.ascontiguousarray(img)).permute(2, 0, 1)[None]
    t = F.interpolate(t, scale_factor=scale, mode="bilinear", align_corners=False)
    return t[0].permute(1, 2, 0).numpy()


def extract_patches(hazy: np.ndarray, clear: np.ndarray, patch: int, stride: int,
                    scale: float = 1.0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Aligned patch pairs on a stride grid (final row/column flush to the edge)."""
    if hazy.shape != clear.shape:
        raise ValueError(f"shape mismatch: hazy {hazy.shape} vs clear {clear.shape}")
    if scale != 1.0:
        hazy, clear = _resize(hazy, scale), _resize(clear, scale)
    h, w = hazy.shape[:2]
    if patch > h or patch > w:
        raise ValueError(f"patch {patch} is larger than the {h}x{w} image")
    out = []
    for y in _grid_positions(h, patch, stride):
        for x in _grid_positions(w, patch, stride):
            out.append((hazy[y:y + patch, x:x + patch], clear[y:y + patch, x:x + patch]))
    return out


def _epoch_patches(data, cfg: TrainConfig, epoch: int):
    """Scaled, cropped, rotated patch pairs for one epoch, in a seeded order."""
    rng = np.random.default_rng([cfg.seed, epoch])
    patches = []
    for idx in rng.permutation(len(data)):
        _, clear, hazy = data[idx]
        scale = float(rng.choice(cfg.scales))
        if round(min(hazy.shape[:2]) * scale) < cfg.patch:
            scale = 1.0  # fall back rather than undershooting the patch size
        for hz, cl in extract_patches(hazy, clear, cfg.patch, cfg.stride, scale=scale):
            rot = int(rng.choice(cfg.rotations))
            flip = bool(cfg.hflip and rng.integers(0, 2))
            patches.append(augment(hz, cl, rot, flip))
    rng.shuffle(patches)
    return patches


def _to_batch(pairs) -> tuple[torch.Tensor, torch.Tensor]:
    hazy = np.stack([p[0] for p in pairs]).transpose(0, 3, 1, 2)
    clear = np.stack([p[1] for p in pairs]).transpose(0, 3, 1, 2)
    return (torch.from_numpy(hazy).float(), torch.from_numpy(clear).float())


def _batch_psnr(dehazed: torch.Tensor, clear: torch.Tensor) -> float:
    d = dehazed.detach().numpy()
    c = clear.detach().numpy()
    return float(np.mean([psnr(d[i], c[i]) for i in range(d.shape[0])]))


def _format_row(values) -> str:
    return ",".join(f"{v:.10g}" if isinstance(v, float) else str(v) for v in values)


def train(model_cfg: ModelConfig, cfg: TrainConfig, data_root: str | os.PathLike,
          run_dir: str | os.PathLike, resume_from: str | None = None) -> TrainResult:
    """Run the optimization loop and write the run directory.

    Per batch: attention forward, attention loss, curriculum blend weight,
    reconstruction forward, active loss terms, generator step; discriminator
    step when the adversarial term is on. The learning rate halves every
    ``lr_decay_every`` epochs.
    """
    if deterministic_requested():
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True)
    seed_everything(cfg.seed)

    data = load_dataset(data_root)
    if not data:
        raise ValueError(f"no training pairs found under {data_root!r}")

    run_dir = os.fspath(run_dir)
    ckpt_dir = os.path.join(run_dir, "checkpoints")
    samples_dir = os.path.join(run_dir, "samples")
    os.makedirs(ckpt_dir, exist_ok=True)
    os.makedirs(samples_dir, exist_ok=True)

    model = SCANet(model_cfg, with_agn=cfg.use_agn)
    disc = PatchDiscriminator() if cfg.use_adversarial else None
    extractor = None
    if cfg.use_perceptual:
        extractor = FeatureExtractor("pretrained" if cfg.pretrained_features else "random",
                                     seed=cfg.feature_seed)
    opt_g = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=(0.9, 0.999))
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.lr, betas=(0.9, 0.999)) if disc else None

    start_epoch = 0
    if resume_from is not None:
        payload = load_checkpoint(resume_from)
        _restore_state(payload, model, disc, opt_g, opt_d)
        start_epoch = payload["epoch"] + 1

    curriculum = CurriculumState(warmup_fraction=cfg.warmup_fraction, loss_hi=cfg.loss_hi,
                                 loss_lo=cfg.loss_lo, ema_decay=cfg.ema_decay)
    msssim_scales = cfg.msssim_scales
    if cfg.use_msssim and msssim_scales is None:
        msssim_scales = max_scales(cfg.patch, cfg.patch)

    _write_config(run_dir, model_cfg, cfg)
    metrics_path = os.path.join(run_dir, "metrics.csv")
    mode = "a" if resume_from is not None and os.path.exists(metrics_path) else "w"

    step = 0 if resume_from is None else payload["step"]
    epoch_lrs: list[float] = []
    stop = False
    with open(metrics_path, mode) as log:
        if mode == "w":
            log.write(",".join(METRICS_COLUMNS) + "\n")
        for epoch in range(start_epoch, cfg.epochs):
            lr = lr_for_epoch(cfg.lr, cfg.lr_decay_gamma, cfg.lr_decay_every, epoch)
            epoch_lrs.append(lr)
            for opt in filter(None, (opt_g, opt_d)):
                for group in opt.param_groups:
                    group["lr"] = lr
            epoch_fraction = (epoch + 1) / cfg.epochs

            patches = _epoch_patches(data, cfg, epoch)
            for i in range(0, len(patches), cfg.batch):
                hazy_b, clear_b = _to_batch(patches[i:i + cfg.batch])
                m_gt = attention_target_batch(hazy_b, clear_b)

                lam = 1.0
                sl1_a_t = torch.zeros(())
                if cfg.use_agn:
                    m_g, _ = model.agn(hazy_b)
                    sl1_a_t = smooth_l1(m_g, m_gt)
                    if cfg.use_scl:
                        lam = curriculum.update(float(sl1_a_t.detach()), epoch_fraction)
                    m = m_g if lam == 1.0 else blend_attention(m_g, m_gt, lam)
                    dehazed = model.srn(hazy_b, m, model.alpha.values())
                else:
                    dehazed = model.srn(hazy_b)

                sl1_t = smooth_l1(dehazed, clear_b)
                perc_t = perceptual_loss(dehazed, clear_b, extractor) if cfg.use_perceptual else 0.0
                ms_t = ms_ssim_loss(dehazed, clear_b, scales=msssim_scales) if cfg.use_msssim else 0.0
                adv_t = adversarial_loss(clear_b - dehazed, disc) if cfg.use_adversarial else 0.0
                joint, report = joint_loss(
                    sl1=sl1_t,
                    sl1_a=sl1_a_t if (cfg.use_agn and cfg.use_sl1a) else 0.0,
                    perceptual=perc_t, msssim=ms_t, adversarial=adv_t,
                    weights=cfg.weights)

                opt_g.zero_grad(set_to_none=True)
                joint.backward()
                opt_g.step()

                if disc is not None:
                    real = torch.randn_like(clear_b) * cfg.disc_noise
                    fake = (clear_b - dehazed).detach()
                    d_loss = discriminator_loss(disc(real), disc(fake))
                    opt_d.zero_grad(set_to_none=True)
                    d_loss.backward()
                    opt_d.step()

                step += 1
                log.write(_format_row((step, report.sl1, report.sl1_a, report.perceptual,
                                       report.msssim, report.adversarial, report.joint,
                                       float(lam), _batch_psnr(dehazed, clear_b))) + "\n")
                if cfg.sample_every and step % cfg.sample_every == 0:
                    img = dehazed[0].detach().clamp(0, 1).permute(1, 2, 0).numpy()
                    write_image(os.path.join(samples_dir, f"step{step:06d}.png"), img)
                if cfg.max_steps is not None and step >= cfg.max_steps:
                    stop = True
                    break
            ckpt_epoch = epoch
            if stop:
                break

    ckpt_path = os.path.join(ckpt_dir, "final.pt")
    save_checkpoint(ckpt_path, generator=model, discriminator=disc, opt_g=opt_g,
                    opt_d=opt_d, epoch=ckpt_epoch, step=step,
                    model_config=model_cfg, train_config=cfg)
    return TrainResult(run_dir=run_dir, checkpoint_path=ckpt_path,
                       metrics_path=metrics_path, model=model, steps=step,
                       epoch_lrs=epoch_lrs)


# ablation grid: reconstruction-only baseline, then attention, attention
# supervision, the curriculum, and the extra loss terms one at a time
ABLATION_TABLE = (
    ("1", "SRN", dict(use_agn=False, use_sl1a=False, use_scl=False,
                      use_perceptual=False, use_msssim=False, use_adversarial=False)),
    ("2", "AGN + SRN", dict(use_agn=True, use_sl1a=False, use_scl=False,
                            use_perceptual=False, use_msssim=False, use_adversarial=False)),
    ("3", "SRN + AGN", dict(use_agn=True, use_sl1a=True, use_scl=False,
                            use_perceptual=False, use_msssim=False, use_adversarial=False)),
    ("4", "SRN + AGN + SCL", dict(use_agn=True, use_sl1a=True, use_scl=True,
                                  use_perceptual=False, use_msssim=False, use_adversarial=False)),
    ("5", "SRN + AGN + SCL", dict(use_agn=True, use_sl1a=True, use_scl=True,
                                  use_perceptual=True, use_msssim=False, use_adversarial=False)),
    ("6", "SRN + AGN + SCL", dict(use_agn=True, use_sl1a=True, use_scl=True,
                                  use_perceptual=True, use_msssim=True, use_adversarial=False)),
    ("7", "SRN + AGN + SCL", dict(use_agn=True, use_sl1a=True, use_scl=True,
                                  use_perceptual=True, use_msssim=True, use_adversarial=True)),
)


def ablation_config(base: TrainConfig, number: str) -> TrainConfig:
    """The base config with one ablation row's component switches applied."""
    for num, _, flags in ABLATION_TABLE:
        if num == str(number):
            return dataclasses.replace(base, **flags)
    raise ValueError(f"unknown ablation configuration {number!r} (1-7)")


def _write_config(run_dir: str, model_cfg: ModelConfig, cfg: TrainConfig) -> None:
    import json
    with open(os.path.join(run_dir, "config.json"), "w") as f:
        json.dump({"model": model_cfg.to_dict(), "train": cfg.to_dict()},
                  f, indent=2, sort_keys=True)


def save_checkpoint(path: str | os.PathLike, *, generator: SCANet,
                    discriminator: PatchDiscriminator | None,
                    opt_g, opt_d, epoch: int, step: int,
                    model_config: ModelConfig, train_config: TrainConfig) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "epoch": epoch,
        "step": step,
        "model_config": model_config.to_dict(),
        "train_config": train_config.to_dict(),
        "generator": generator.state_dict(),
        "discriminator": discriminator.state_dict() if discriminator is not None else None,
        "opt_g": opt_g.state_dict() if opt_g is not None else None,
        "opt_d": opt_d.state_dict() if opt_d is not None else None,
    }
    torch.save(payload, path)


def load_checkpoint(path: str | os.PathLike) -> dict:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {os.fspath(path)!r}: {exc}") from exc
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"checkpoint format version {version!r} unsupported "
                              f"(expected {CHECKPOINT_FORMAT_VERSION})")
    return payload


def build_from_checkpoint(payload: dict) -> tuple[SCANet, PatchDiscriminator | None]:
    """Reconstruct models from a checkpoint payload (strict shape checking)."""
    model_cfg = ModelConfig.from_dict(payload["model_config"])
    train_cfg = TrainConfig.from_dict(payload["train_config"])
    model = SCANet(model_cfg, with_agn=train_cfg.use_agn)
    try:
        model.load_state_dict(payload["generator"])
    except RuntimeError as exc:
        raise CheckpointError(f"generator weights do not fit the configured shapes: {exc}") from exc
    disc = None
    if payload.get("discriminator") is not None:
        disc = PatchDiscriminator()
        try:
            disc.load_state_dict(payload["discriminator"])
        except RuntimeError as exc:
            raise CheckpointError(f"discriminator weights do not fit: {exc}") from exc
    return model, disc


def _restore_state(payload: dict, model: SCANet, disc, opt_g, opt_d) -> None:
    try:
        model.load_state_dict(payload["generator"])
    except RuntimeError as exc:
        raise CheckpointError(f"generator weights do not fit the configured shapes: {exc}") from exc
    if disc is not None and payload.get("discriminator") is not None:
        disc.load_state_dict(payload["discriminator"])
    if opt_g is not None and payload.get("opt_g") is not None:
        opt_g.load_state_dict(payload["opt_g"])
    if opt_d is not None and payload.get("opt_d") is not None:
        opt_d.load_state_dict(payload["opt_d"])

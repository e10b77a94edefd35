"""Synthetic non-homogeneous haze: paired (clear, hazy) data from the scattering model.

A hazy image is rendered from a clear one as I = J*t + A*(1-t), with a smooth
spatially varying transmission field t so the haze density is non-uniform
across the image. Everything is seeded and reproducible, so the full training
pipeline runs without any external dataset.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

DEFAULT_ATMOSPHERIC_LIGHT = 0.9


@dataclass
class TransmissionField:
    """Per-pixel transmission t in (0,1] plus atmospheric light A in [0,1]."""

    t: np.ndarray  # (H, W), strictly positive, <= 1
    atmos: float | np.ndarray = DEFAULT_ATMOSPHERIC_LIGHT

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        if t.ndim != 2:
            raise ValueError(f"transmission must be a 2-D map, got shape {t.shape}")
        if t.min() <= 0 or t.max() > 1:
            raise ValueError("transmission values must lie in (0, 1]")
        a = np.asarray(self.atmos, dtype=np.float64)
        if a.min() < 0 or a.max() > 1:
            raise ValueError("atmospheric light must lie in [0, 1]")
        self.t = t
        self.atmos = float(a) if a.ndim == 0 else a


@dataclass
class SynthPair:
    clear: np.ndarray  # (H, W, 3) in [0, 1]
    hazy: np.ndarray   # same shape as clear
    t: TransmissionField
    seed: int


def make_transmission(height: int, width: int, smoothness: float = 1.0,
                      t_min: float = 0.3, seed: int = 0, n_bumps: int = 4,
                      atmos: float | np.ndarray = DEFAULT_ATMOSPHERIC_LIGHT) -> TransmissionField:
    """Smooth random transmission field rescaled into [t_min, 1].

    The field is a sum of ``n_bumps`` random anisotropic Gaussian bumps whose
    widths scale with ``smoothness``; min-max normalization then maps it onto
    [t_min, 1]. Deterministic for a given seed.
    """
    if height <= 0 or width <= 0:
        raise ValueError(f"image dimensions must be positive, got {height}x{width}")
    if not 0 < t_min < 1:
        raise ValueError(f"t_min must lie in (0, 1), got {t_min}")
    if smoothness <= 0:
        raise ValueError(f"smoothness must be positive, got {smoothness}")

    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    scale = float(min(height, width))
    f = np.zeros((height, width), dtype=np.float64)
    for _ in range(n_bumps):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        s1, s2 = rng.uniform(0.15, 0.45, size=2) * smoothness * scale
        theta = rng.uniform(0, np.pi)
        amp = rng.uniform(0.5, 1.0)
        dy, dx = ys - cy, xs - cx
        u = np.cos(theta) * dx + np.sin(theta) * dy
        v = -np.sin(theta) * dx + np.cos(theta) * dy
        f += amp * np.exp(-0.5 * ((u / s1) ** 2 + (v / s2) ** 2))

    lo, hi = f.min(), f.max()
    if hi - lo < 1e-9:  # degenerate (very large smoothness): constant field
        t = np.full((height, width), (t_min + 1.0) / 2.0)
    else:
        t = t_min + (1.0 - t_min) * (f - lo) / (hi - lo)
    return TransmissionField(t=t, atmos=atmos)


def apply_haze(clear: np.ndarray, t: TransmissionField | np.ndarray,
               atmos: float | np.ndarray | None = None) -> np.ndarray:
    """Render I = J*t + A*(1-t), clipped to [0, 1]."""
    if isinstance(t, TransmissionField):
        if atmos is None:
            atmos = t.atmos
        t = t.t
    clear = np.asarray(clear, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if atmos is None:
        atmos = DEFAULT_ATMOSPHERIC_LIGHT
    if clear.ndim != 3 or clear.shape[2] != 3:
        raise ValueError(f"clear image must be HxWx3, got shape {clear.shape}")
    if t.shape != clear.shape[:2]:
        raise ValueError(f"transmission shape {t.shape} does not match image {clear.shape[:2]}")
    if clear.min() < 0 or clear.max() > 1:
        raise ValueError("clear image values must lie in [0, 1]")
    a = np.asarray(atmos, dtype=np.float64)
    if a.ndim == 2:
        if a.shape != t.shape:
            raise ValueError(f"atmospheric light shape {a.shape} does not match {t.shape}")
        a = a[..., None]
    t3 = t[..., None]
    hazy = clear * t3 + a * (1.0 - t3)
    return np.clip(hazy, 0.0, 1.0)


def make_clear_image(height: int, width: int, seed: int = 0) -> np.ndarray:
    """Procedural clear image: gradient background plus random shapes or a checkerboard."""
    if height <= 0 or width <= 0:
        raise ValueError(f"image dimensions must be positive, got {height}x{width}")
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    gy, gx = ys / max(height - 1, 1), xs / max(width - 1, 1)

    c0, c1 = rng.uniform(0, 1, size=3), rng.uniform(0, 1, size=3)
    ang = rng.uniform(0, 2 * np.pi)
    ramp = np.clip(0.5 + (np.cos(ang) * (gx - 0.5) + np.sin(ang) * (gy - 0.5)), 0, 1)
    img = c0[None, None, :] + ramp[..., None] * (c1 - c0)[None, None, :]

    kind = rng.integers(0, 3)
    if kind == 0:  # checkerboard overlay
        n = int(rng.integers(4, 9))
        mask = ((ys * n // height + xs * n // width) % 2).astype(bool)
        color = rng.uniform(0, 1, size=3)
        img[mask] = 0.5 * img[mask] + 0.5 * color
    elif kind == 1:  # random rectangles
        for _ in range(int(rng.integers(3, 7))):
            y0, x0 = rng.integers(0, height), rng.integers(0, width)
            hh = int(rng.integers(height // 8 + 1, height // 2 + 2))
            ww = int(rng.integers(width // 8 + 1, width // 2 + 2))
            color = rng.uniform(0, 1, size=3)
            img[y0:y0 + hh, x0:x0 + ww] = color
    else:  # random disks
        for _ in range(int(rng.integers(3, 7))):
            cy, cx = rng.uniform(0, height), rng.uniform(0, width)
            r = rng.uniform(0.05, 0.3) * min(height, width)
            color = rng.uniform(0, 1, size=3)
            mask = (ys - cy) ** 2 + (xs - cx) ** 2 <= r * r
            img[mask] = color
    return np.clip(img, 0.0, 1.0)


def make_pair(height: int, width: int, seed: int, smoothness: float = 1.0,
              t_min: float = 0.3, atmos: float = DEFAULT_ATMOSPHERIC_LIGHT) -> SynthPair:
    """One reproducible (clear, hazy, transmission) triple."""
    clear = make_clear_image(height, width, seed=seed)
    field = make_transmission(height, width, smoothness=smoothness, t_min=t_min,
                              seed=seed + 1, atmos=atmos)
    # quantize the clear image first so on-disk pairs satisfy the scattering
    # model up to the hazy image's own 8-bit rounding
    clear = from_uint8(to_uint8(clear))
    hazy = apply_haze(clear, field)
    return SynthPair(clear=clear, hazy=hazy, t=field, seed=seed)


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)


def from_uint8(img: np.ndarray) -> np.ndarray:
    return np.asarray(img, dtype=np.float64) / 255.0


def write_image(path: str | os.PathLike, img: np.ndarray) -> None:
    """Write a float [0,1] image (HxWx3 or HxW) as 8-bit PNG."""
    Image.fromarray(to_uint8(img)).save(path, format="PNG")


def read_image(path: str | os.PathLike) -> np.ndarray:
    """Read an image file as float64 in [0,1], RGB for color files."""
    with Image.open(path) as im:
        if im.mode not in ("RGB", "L"):
            im = im.convert("RGB")
        arr = np.asarray(im)
    return from_uint8(arr)


def generate_dataset(n_pairs: int, size: int, out_dir: str | os.PathLike, seed: int = 0,
                     smoothness: float = 1.0, t_min: float = 0.3,
                     atmos: float = DEFAULT_ATMOSPHERIC_LIGHT) -> dict:
    """Write paired clear/hazy PNGs plus a manifest; returns the manifest.

    Layout: ``<out_dir>/clear/<name>.png``, ``<out_dir>/hazy/<name>.png`` with
    matching names, and ``<out_dir>/manifest.json`` recording seeds and haze
    parameters. Regeneration with the same arguments is byte-identical.
    """
    if n_pairs < 0:
        raise ValueError(f"n_pairs must be >= 0, got {n_pairs}")
    out_dir = os.fspath(out_dir)
    clear_dir = os.path.join(out_dir, "clear")
    hazy_dir = os.path.join(out_dir, "hazy")
    os.makedirs(clear_dir, exist_ok=True)
    os.makedirs(hazy_dir, exist_ok=True)

    entries = []
    for i in range(n_pairs):
        pair_seed = seed + 1000 * i
        pair = make_pair(size, size, seed=pair_seed, smoothness=smoothness,
                         t_min=t_min, atmos=atmos)
        name = f"{i:04d}.png"
        write_image(os.path.join(clear_dir, name), pair.clear)
        write_image(os.path.join(hazy_dir, name), pair.hazy)
        entries.append({"name": name, "seed": pair_seed})

    manifest = {
        "n_pairs": n_pairs,
        "size": size,
        "seed": seed,
        "smoothness": smoothness,
        "t_min": t_min,
        "atmos": atmos,
        "pairs": entries,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return manifest


def load_dataset(root: str | os.PathLike) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """Load (name, clear, hazy) triples from the paired-directory layout."""
    root = os.fspath(root)
    clear_dir = os.path.join(root, "clear")
    hazy_dir = os.path.join(root, "hazy")
    if not os.path.isdir(clear_dir) or not os.path.isdir(hazy_dir):
        raise FileNotFoundError(f"dataset root {root!r} must contain clear/ and hazy/")
    clear_names = sorted(os.listdir(clear_dir))
    hazy_names = sorted(os.listdir(hazy_dir))
    if clear_names != hazy_names:
        raise ValueError(f"clear/ and hazy/ name sets differ under {root!r}")
    out = []
    for name in clear_names:
        clear = read_image(os.path.join(clear_dir, name))
        hazy = read_image(os.path.join(hazy_dir, name))
        if clear.shape != hazy.shape:
            raise ValueError(f"pair {name!r} has mismatched shapes")
        out.append((name, clear, hazy))
    return out

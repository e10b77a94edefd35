import numpy as np
import pytest
import torch
import torch.nn as nn

from oracles import ssim_bruteforce
from scanet.attention import rgb_to_y
from scanet.metrics import (EvalResult, count_parameters, estimate_flops, evaluate_dirs,
                            evaluate_pairs, psnr, ssim)
from scanet.synthdata import make_clear_image, write_image


def test_psnr_reference_values():
    a = np.random.default_rng(0).uniform(0, 1, size=(16, 16, 3))
    assert psnr(a, a) == 100.0  # cap at zero error
    assert psnr(np.zeros((8, 8, 3)), np.ones((8, 8, 3))) == 0.0
    assert abs(psnr(a, np.clip(a, 0, 0.9)) - psnr(np.clip(a, 0, 0.9), a)) < 1e-12
    base = np.full((10, 10, 3), 0.5)
    assert abs(psnr(base + 0.1, base) - 20.0) < 1e-9  # MSE 0.01


def test_psnr_decreases_with_noise():
    rng = np.random.default_rng(1)
    img = rng.uniform(0.3, 0.7, size=(24, 24, 3))
    noise = rng.standard_normal(img.shape)
    values = [psnr(np.clip(img + amp * noise, 0, 1), img) for amp in (0.01, 0.05, 0.2)]
    assert values[0] > values[1] > values[2]


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))


def test_ssim_identical_and_constant():
    img = make_clear_image(24, 24, seed=3)
    assert abs(ssim(img, img) - 1.0) < 1e-12
    flat = np.full((16, 16, 3), 0.25)
    assert abs(ssim(flat, flat.copy()) - 1.0) < 1e-12


def test_ssim_negated_high_variance_image():
    # checkerboard vs its negative: structure fully anti-correlated
    ys, xs = np.mgrid[0:16, 0:16]
    img = ((ys + xs) % 2).astype(np.float64)[..., None].repeat(3, axis=2)
    assert ssim(img, 1.0 - img) < 0.1


def test_ssim_matches_bruteforce_on_luma():
    rng = np.random.default_rng(5)
    a = rng.uniform(0, 1, size=(20, 20, 3))
    b = np.clip(a + rng.normal(0, 0.1, size=a.shape), 0, 1)
    assert abs(ssim(a, b) - ssim_bruteforce(rgb_to_y(a), rgb_to_y(b))) < 1e-9
    assert abs(ssim(a, b) - ssim(b, a)) < 1e-12


def test_ssim_undersized_image():
    with pytest.raises(ValueError):
        ssim(np.zeros((8, 8, 3)), np.zeros((8, 8, 3)))


def test_count_parameters():
    assert count_parameters(nn.Sequential()) == 0
    conv = nn.Conv2d(3, 16, 3)
    assert count_parameters(conv) == 3 * 16 * 9 + 16  # 448
    before = count_parameters(conv)
    conv(torch.zeros(1, 3, 8, 8))
    assert count_parameters(conv) == before


def test_estimate_flops_single_conv():
    model = nn.Conv2d(3, 16, 3, padding=1)
    budget = estimate_flops(model, (64, 64))
    assert budget.macs == 3 * 16 * 9 * 64 * 64
    assert budget.flops == 2 * 3 * 16 * 9 * 64 * 64  # 3,538,944
    assert budget.parameter_count == 448
    assert budget.uncounted == ()


def test_estimate_flops_empty_model():
    class Identity(nn.Module):
        def forward(self, x):
            return x

    budget = estimate_flops(Identity(), (32, 32))
    assert budget.macs == 0 and budget.flops == 0 and budget.parameter_count == 0


def test_estimate_flops_lists_uncounted_layers():
    class Odd(nn.Module):
        def __init__(self):
            super().__init__()
            self.norm = nn.BatchNorm2d(3)

        def forward(self, x):
            return self.norm(x)

    budget = estimate_flops(Odd(), (16, 16))
    assert "BatchNorm2d" in budget.uncounted


def test_evaluate_pairs_and_dirs(tmp_path):
    imgs = [make_clear_image(24, 24, seed=s) for s in range(3)]
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    for i, img in enumerate(imgs):
        write_image(tmp_path / "a" / f"{i}.png", img)
        write_image(tmp_path / "b" / f"{i}.png", img)
    result = evaluate_dirs(tmp_path / "a", tmp_path / "b")
    assert isinstance(result, EvalResult)
    assert len(result.per_image) == 3
    assert result.psnr_mean == 100.0
    assert abs(result.ssim_mean - 1.0) < 1e-12

    (tmp_path / "a" / "extra.png").write_bytes((tmp_path / "a" / "0.png").read_bytes())
    with pytest.raises(ValueError):
        evaluate_dirs(tmp_path / "a", tmp_path / "b")


def test_evaluate_pairs_empty():
    result = evaluate_pairs([])
    assert result.per_image == []
    assert np.isnan(result.psnr_mean)

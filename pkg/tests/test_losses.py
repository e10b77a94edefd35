import math

import numpy as np
import pytest
import torch
import torch.nn as nn

from conftest import check_gradient
from oracles import ms_ssim_bruteforce, ssim_bruteforce
from scanet.losses import (ConfigurationError, FeatureExtractor, LossReport, LossWeights,
                           NonFiniteLossError, adversarial_loss, discriminator_loss,
                           gaussian_window, joint_loss, max_scales, ms_ssim, ms_ssim_loss,
                           perceptual_loss, smooth_l1)
from scanet.models import PatchDiscriminator


# ---------------------------------------------------------------- smooth L1

def test_smooth_l1_values():
    x = torch.rand(2, 3, 8, 8)
    assert smooth_l1(x, x).item() == 0.0
    assert abs(smooth_l1(x + 0.5, x).item() - 0.125) < 1e-6
    assert abs(smooth_l1(x + 2.0, x).item() - 1.5) < 1e-6


def test_smooth_l1_continuous_at_branch_point():
    target = torch.zeros(1)
    eps = 1e-6
    below = smooth_l1(torch.tensor([1.0 - eps]), target).item()
    above = smooth_l1(torch.tensor([1.0 + eps]), target).item()
    assert abs(below - 0.5) < 2e-6 and abs(above - 0.5) < 2e-6
    for q in (1.0 - 1e-4, 1.0 + 1e-4):
        pred = torch.tensor([q], requires_grad=True)
        smooth_l1(pred, target).backward()
        assert abs(pred.grad.item() - 1.0) < 2e-4


def test_smooth_l1_shape_mismatch():
    with pytest.raises(ValueError):
        smooth_l1(torch.zeros(2, 2), torch.zeros(3, 2))


def test_smooth_l1_gradient():
    pred = torch.randn(1, 1, 6, 6, dtype=torch.float64, requires_grad=True) * 2
    target = torch.randn(1, 1, 6, 6, dtype=torch.float64)
    check_gradient(lambda: smooth_l1(pred, target), [pred])


# ------------------------------------------------------------- perceptual

class _StubExtractor:
    def __init__(self, deltas):
        self.deltas = deltas

    def __call__(self, x):
        base = [torch.zeros(1, 2, 4, 4), torch.zeros(1, 3, 2, 2), torch.zeros(1, 4, 1, 1)]
        if x.sum() == 0:
            return base
        return [f + d for f, d in zip(base, self.deltas)]


def test_perceptual_zero_at_equal():
    ext = FeatureExtractor("random", seed=0)
    x = torch.rand(1, 3, 32, 32)
    assert perceptual_loss(x, x, ext).item() == 0.0


def test_perceptual_constant_feature_shift_is_delta_squared():
    delta = 0.3
    ext = _StubExtractor([delta, delta, delta])
    pred = torch.ones(1, 3, 8, 8)  # any nonzero input
    target = torch.zeros(1, 3, 8, 8)
    got = perceptual_loss(pred, target, ext)
    assert abs(float(got) - delta ** 2) < 1e-6


def test_perceptual_matches_layerwise_recompute():
    ext = FeatureExtractor("random", seed=3).double()
    rng = torch.Generator().manual_seed(5)
    pred = torch.rand(2, 3, 32, 32, generator=rng, dtype=torch.float64)
    target = torch.rand(2, 3, 32, 32, generator=rng, dtype=torch.float64)
    got = float(perceptual_loss(pred, target, ext))

    # independent recomputation: push both images through the stages by hand
    def stage_outputs(x):
        x = (x - ext.mean) / ext.std
        outs = []
        for stage in ext.stages:
            x = stage(x)
            outs.append(x)
        return outs

    with torch.no_grad():
        fp, ft = stage_outputs(pred), stage_outputs(target)
        acc = 0.0
        for a, b in zip(fp, ft):
            c, h, w = a.shape[1:]
            per_image = ((a - b) ** 2).sum(dim=(1, 2, 3)) / (c * h * w)
            acc += float(per_image.mean())
        expect = acc / 3
    assert abs(got - expect) < 1e-9


def test_perceptual_gradient():
    torch.manual_seed(0)
    stages = nn.ModuleList([
        nn.Sequential(nn.Conv2d(3, 4, 3, padding=1), nn.ReLU()),
        nn.Sequential(nn.Conv2d(4, 4, 3, padding=1), nn.ReLU()),
        nn.Sequential(nn.Conv2d(4, 4, 3, padding=1), nn.ReLU()),
    ]).double()

    def tiny_extractor(x):
        outs = []
        for stage in stages:
            x = stage(x)
            outs.append(x)
        return outs

    pred = torch.rand(1, 3, 6, 6, dtype=torch.float64, requires_grad=True)
    target = torch.rand(1, 3, 6, 6, dtype=torch.float64)
    check_gradient(lambda: perceptual_loss(pred, target, tiny_extractor), [pred])


def test_extractor_stage_shapes_and_determinism():
    ext = FeatureExtractor("random", seed=4)
    feats = ext(torch.rand(1, 3, 64, 64))
    assert [tuple(f.shape) for f in feats] == [
        (1, 64, 64, 64), (1, 128, 32, 32), (1, 256, 16, 16)]
    again = FeatureExtractor("random", seed=4)
    for p, q in zip(ext.parameters(), again.parameters()):
        assert torch.equal(p, q)
    assert not any(p.requires_grad for p in ext.parameters())


def test_extractor_pretrained_unavailable_is_config_error(monkeypatch):
    import torchvision.models as tvm

    def boom(*a, **k):
        raise RuntimeError("no network")

    monkeypatch.setattr(tvm, "vgg16", boom)
    with pytest.raises(ConfigurationError):
        FeatureExtractor("pretrained")


# ---------------------------------------------------------------- MS-SSIM

def test_ms_ssim_identical_images():
    x = torch.rand(1, 3, 32, 32, dtype=torch.float64)
    sim = ms_ssim(x, x, scales=2)
    assert abs(sim.item() - 1.0) < 1e-9
    assert abs(ms_ssim_loss(x, x, scales=2).item()) < 1e-9


def test_ms_ssim_constant_images():
    a = torch.full((1, 1, 24, 24), 0.4, dtype=torch.float64)
    assert abs(ms_ssim(a, a.clone(), scales=1).item() - 1.0) < 1e-9


def test_ms_ssim_single_scale_matches_bruteforce_shift():
    torch.manual_seed(2)
    pred = torch.rand(1, 1, 24, 24, dtype=torch.float64) * 0.8
    target = (pred + 0.1).clamp(0, 1)
    got = float(ms_ssim(pred, target, scales=1))
    expect = ssim_bruteforce(pred[0, 0].numpy(), target[0, 0].numpy())
    assert abs(got - expect) < 1e-9


def test_ms_ssim_matches_bruteforce_multiscale():
    torch.manual_seed(3)
    pred = torch.rand(2, 3, 32, 32, dtype=torch.float64)
    target = (pred + 0.1 * torch.randn_like(pred)).clamp(0, 1)
    got = float(ms_ssim(pred, target, scales=2))
    expect = ms_ssim_bruteforce(pred.numpy(), target.numpy(), scales=2)
    assert abs(got - expect) < 1e-9


def test_ms_ssim_symmetry_and_range():
    torch.manual_seed(4)
    a = torch.rand(1, 3, 32, 32, dtype=torch.float64)
    b = torch.rand(1, 3, 32, 32, dtype=torch.float64)
    sab, sba = float(ms_ssim(a, b, scales=2)), float(ms_ssim(b, a, scales=2))
    assert abs(sab - sba) < 1e-12
    assert 0.0 < sab <= 1.0


def test_ms_ssim_scale_capacity():
    assert max_scales(128, 128) == 4
    assert max_scales(512, 512) == 5
    assert max_scales(32, 32) == 2
    assert max_scales(10, 128) == 0
    x = torch.rand(1, 1, 32, 32)
    with pytest.raises(ValueError):
        ms_ssim(x, x, scales=3)  # 32px supports only 2
    with pytest.raises(ValueError):
        ms_ssim(torch.rand(1, 1, 8, 8), torch.rand(1, 1, 8, 8))
    with pytest.raises(ValueError):
        ms_ssim(x, torch.rand(1, 1, 16, 16))


def test_ms_ssim_auto_scales():
    x = torch.rand(1, 1, 32, 32)
    y = (x + 0.05).clamp(0, 1)
    assert torch.isclose(ms_ssim(x, y), ms_ssim(x, y, scales=2))


def test_ms_ssim_gradient_small_window():
    torch.manual_seed(5)
    pred = torch.rand(1, 1, 8, 8, dtype=torch.float64, requires_grad=True)
    target = torch.rand(1, 1, 8, 8, dtype=torch.float64)
    check_gradient(lambda: ms_ssim_loss(pred, target, scales=1, window_size=5), [pred])


def test_gaussian_window_normalized():
    w = gaussian_window(11, 1.5, dtype=torch.float64)
    assert w.shape == (11, 11)
    assert abs(w.sum().item() - 1.0) < 1e-12
    assert torch.equal(w, w.T)


# ------------------------------------------------------------ adversarial

class _ConstD:
    def __init__(self, value):
        self.value = value

    def __call__(self, x):
        return torch.full((x.shape[0], 1, 1, 1), self.value, dtype=x.dtype)


def test_adversarial_reference_values():
    residual = torch.zeros(1, 3, 8, 8)
    assert abs(adversarial_loss(residual, _ConstD(1.0)).item()) < 1e-6
    assert abs(adversarial_loss(residual, _ConstD(math.exp(-1))).item() - 1.0) < 1e-6
    assert abs(adversarial_loss(residual, _ConstD(0.5)).item() - math.log(2)) < 1e-6


def test_adversarial_clamps_out_of_range_outputs():
    residual = torch.zeros(1, 3, 8, 8)
    assert math.isfinite(adversarial_loss(residual, _ConstD(0.0)).item())
    assert adversarial_loss(residual, _ConstD(1.5)).item() >= 0.0


def test_adversarial_gradient_through_discriminator():
    torch.manual_seed(6)
    disc = PatchDiscriminator(base_channels=4).double()
    residual = torch.randn(1, 3, 8, 8, dtype=torch.float64, requires_grad=True) * 0.1
    check_gradient(lambda: adversarial_loss(residual, disc), [residual])


def test_discriminator_output_contract():
    disc = PatchDiscriminator()
    out = disc(torch.randn(1, 3, 64, 64))
    assert out.shape == (1, 1, 8, 8)  # three stride-2 stages
    assert torch.all(out > 0.0) and torch.all(out < 1.0)


def test_discriminator_loss_drops_when_separating():
    good = discriminator_loss(torch.full((4,), 0.9), torch.full((4,), 0.1))
    bad = discriminator_loss(torch.full((4,), 0.5), torch.full((4,), 0.5))
    assert good < bad


# ------------------------------------------------------------------ joint

def test_joint_zero_and_unit_components():
    joint, report = joint_loss()
    assert joint == 0.0 and report.joint == 0.0
    joint, report = joint_loss(sl1=1.0, sl1_a=1.0, perceptual=1.0, msssim=1.0, adversarial=1.0)
    assert abs(joint - 1.8105) < 1e-6
    assert report == LossReport(1.0, 1.0, 1.0, 1.0, 1.0, report.joint)


def test_joint_default_weights():
    w = LossWeights()
    assert (w.sl1, w.sl1_a, w.perceptual, w.msssim, w.adversarial) == (1, 0.3, 0.01, 0.5, 0.0005)


def test_joint_linear_in_each_component():
    base = dict(sl1=0.5, sl1_a=0.25, perceptual=2.0, msssim=0.125, adversarial=4.0)
    w = LossWeights()
    j0, _ = joint_loss(**base)
    for name, gamma in (("sl1", w.sl1), ("sl1_a", w.sl1_a), ("perceptual", w.perceptual),
                        ("msssim", w.msssim), ("adversarial", w.adversarial)):
        bumped = dict(base)
        bumped[name] += 1.0
        j1, _ = joint_loss(**bumped)
        assert abs((j1 - j0) - gamma) < 1e-12


def test_joint_keeps_tensor_for_backward():
    sl1 = torch.tensor(0.5, requires_grad=True)
    joint, report = joint_loss(sl1=sl1, msssim=0.2)
    assert isinstance(joint, torch.Tensor)
    joint.backward()
    assert sl1.grad.item() == 1.0
    assert abs(report.joint - 0.6) < 1e-12


def test_joint_rejects_non_finite():
    with pytest.raises(NonFiniteLossError) as info:
        joint_loss(sl1=0.1, perceptual=float("nan"))
    assert info.value.component == "perceptual"
    with pytest.raises(NonFiniteLossError) as info:
        joint_loss(msssim=torch.tensor(float("inf")))
    assert info.value.component == "msssim"


def test_weights_reject_negative():
    with pytest.raises(ValueError):
        LossWeights(msssim=-0.1)

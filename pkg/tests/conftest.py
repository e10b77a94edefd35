import numpy as np
import pytest
import torch

from scanet.config import AGNConfig, ModelConfig, SRNConfig
from scanet.synthdata import generate_dataset


@pytest.fixture(autouse=True)
def _seeded():
    torch.manual_seed(0)
    np.random.seed(0)


@pytest.fixture
def tiny_model_config():
    """Small-but-complete architecture for fast training tests."""
    return ModelConfig(
        agn=AGNConfig(channels=8, n_daus=1),
        srn=SRNConfig(stem_channels=8, mid_channels=12, base_channels=16, n_res_blocks=2),
    )


@pytest.fixture(scope="session")
def dataset4(tmp_path_factory):
    """Four 32px synthetic pairs on disk."""
    root = tmp_path_factory.mktemp("data4")
    generate_dataset(4, 32, root, seed=11)
    return root


def finite_diff_grad(fn, x: torch.Tensor, eps: float = 1e-5) -> torch.Tensor:
    """Central-difference gradient of the scalar ``fn()`` w.r.t. ``x`` (in place)."""
    grad = torch.zeros_like(x)
    flat = x.view(-1)
    gflat = grad.view(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + eps
            f_plus = float(fn())
            flat[i] = orig - eps
            f_minus = float(fn())
            flat[i] = orig
            gflat[i] = (f_plus - f_minus) / (2 * eps)
    return grad


def relative_grad_error(analytic: torch.Tensor, numeric: torch.Tensor) -> float:
    denom = max(numeric.norm().item(), 1e-12)
    return (analytic - numeric).norm().item() / denom


def check_gradient(build_scalar, tensors, eps: float = 1e-5, tol: float = 1e-3):
    """Autograd vs central differences for each tensor feeding ``build_scalar``.

    ``tensors`` must be float64 leaves with requires_grad; the scalar is
    rebuilt per evaluation so in-place finite-difference perturbations are
    picked up.
    """
    out = build_scalar()
    grads = torch.autograd.grad(out, tensors)
    for t, g in zip(tensors, grads):
        num = finite_diff_grad(lambda: build_scalar(), t.data, eps=eps)
        err = relative_grad_error(g, num)
        assert err < tol, f"gradient mismatch: rel err {err:.2e} >= {tol}"

"""Non-homogeneous image dehazing: attention-guided reconstruction with a
self-paced attention curriculum, trained end-to-end on synthetic haze."""

__version__ = "0.1.0"

from .attention import attention_target, rgb_to_y
from .config import AGNConfig, ModelConfig, SRNConfig
from .curriculum import CurriculumState, apply_attention, blend_attention, lambda_schedule
from .losses import (FeatureExtractor, LossReport, LossWeights, adversarial_loss,
                     joint_loss, ms_ssim, ms_ssim_loss, perceptual_loss, smooth_l1)
from .metrics import EvalResult, ModelBudget, count_parameters, estimate_flops, psnr, ssim
from .models import SCANet, dehaze_image
from .synthdata import (SynthPair, TransmissionField, apply_haze, generate_dataset,
                        make_clear_image, make_pair, make_transmission)
from .trainer import TrainConfig, TrainResult, train

__all__ = [
    "AGNConfig", "CurriculumState", "EvalResult", "FeatureExtractor", "LossReport",
    "LossWeights", "ModelBudget", "ModelConfig", "SCANet", "SRNConfig", "SynthPair",
    "TrainConfig", "TrainResult", "TransmissionField", "adversarial_loss",
    "apply_attention", "apply_haze", "attention_target", "blend_attention",
    "count_parameters", "dehaze_image", "estimate_flops", "generate_dataset",
    "joint_loss", "lambda_schedule", "make_clear_image", "make_pair",
    "make_transmission", "ms_ssim", "ms_ssim_loss", "perceptual_loss", "psnr",
    "rgb_to_y", "smooth_l1", "ssim", "train",
]

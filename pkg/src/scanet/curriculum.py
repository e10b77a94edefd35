"""Self-paced attention curriculum.

Early in training the attention generator is unreliable, so the map fed to the
reconstruction network is a blend M = lam*M_g + (1-lam)*M_GT whose weight lam
grows as the attention loss shrinks: lam = 0 while the loss is above ``loss_hi``,
ramps linearly to 1 between ``loss_hi`` and ``loss_lo``, and is 1 at or below
``loss_lo``. The blending is only active during the first ``warmup_fraction``
of the epochs; afterwards the network relies on its own map (lam = 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch


def lambda_schedule(attention_loss: float, epoch_fraction: float, *,
                    warmup_fraction: float = 0.25,
                    loss_hi: float = 0.1, loss_lo: float = 0.05) -> float:
    """Blend weight for the predicted attention map, in [0, 1].

    ``epoch_fraction`` is the fraction of training epochs complete at the end
    of the current epoch; past ``warmup_fraction`` the curriculum is off and
    the weight is pinned to 1.
    """
    if attention_loss < 0:
        raise ValueError(f"attention loss must be >= 0, got {attention_loss}")
    if not loss_lo < loss_hi:
        raise ValueError(f"need loss_lo < loss_hi, got {loss_lo} >= {loss_hi}")
    if epoch_fraction > warmup_fraction:
        return 1.0
    if attention_loss > loss_hi:
        return 0.0
    if attention_loss > loss_lo:
        return (loss_hi - attention_loss) / (loss_hi - loss_lo)
    return 1.0


@dataclass
class CurriculumState:
    """Schedule parameters plus the most recent (loss, lambda) observation.

    ``ema_decay`` switches the driving loss from the per-batch value to an
    exponential moving average.
    """

    warmup_fraction: float = 0.25
    loss_hi: float = 0.1
    loss_lo: float = 0.05
    ema_decay: float | None = None

    epoch_fraction: float = 0.0
    attention_loss: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        if not 0 < self.warmup_fraction <= 1:
            raise ValueError(f"warmup_fraction must lie in (0, 1], got {self.warmup_fraction}")
        if not self.loss_lo < self.loss_hi:
            raise ValueError(f"need loss_lo < loss_hi, got {self.loss_lo} >= {self.loss_hi}")
        self._ema: float | None = None

    def update(self, attention_loss: float, epoch_fraction: float) -> float:
        """Record the current attention loss and return the new blend weight."""
        if self.ema_decay is not None:
            if self._ema is None:
                self._ema = attention_loss
            else:
                self._ema = self.ema_decay * self._ema + (1 - self.ema_decay) * attention_loss
            driving = self._ema
        else:
            driving = attention_loss
        self.attention_loss = attention_loss
        self.epoch_fraction = epoch_fraction
        self.lam = lambda_schedule(driving, epoch_fraction,
                                   warmup_fraction=self.warmup_fraction,
                                   loss_hi=self.loss_hi, loss_lo=self.loss_lo)
        return self.lam


def blend_attention(m_g: torch.Tensor, m_gt: torch.Tensor, lam: float) -> torch.Tensor:
    """M = lam*M_g + (1-lam)*M_GT, per pixel.

    Gradient flows through M_g only; the target map and the schedule weight
    are constants.
    """
    if m_g.shape != m_gt.shape:
        raise ValueError(f"shape mismatch: M_g {tuple(m_g.shape)} vs M_GT {tuple(m_gt.shape)}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    return lam * m_g + (1.0 - lam) * m_gt.detach()


def apply_attention(f_in: torch.Tensor, m: torch.Tensor, alpha) -> torch.Tensor:
    """F_out = (1 - alpha)*F_in + alpha*(M (*) F_in), with (*) pixel-wise.

    ``m`` must broadcast over the channel dimension of ``f_in`` (same spatial
    size); ``alpha`` may be a learnable scalar tensor.
    """
    if m.ndim != f_in.ndim or m.shape[-2:] != f_in.shape[-2:]:
        raise ValueError(
            f"attention map shape {tuple(m.shape)} does not match features {tuple(f_in.shape)}")
    return (1.0 - alpha) * f_in + alpha * (m * f_in)

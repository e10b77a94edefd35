"""Model architecture configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field


@dataclass(frozen=True)
class AGNConfig:
    """Attention generator: a stack of dual-attention units at full resolution."""

    channels: int = 8
    n_daus: int = 2
    dilations: tuple[int, ...] = (3, 5, 7)
    reduction: int = 4
    in_channels: int = 3

    def __post_init__(self):
        if self.channels < 1:
            raise ValueError(f"channels must be >= 1, got {self.channels}")
        if self.n_daus < 1:
            raise ValueError(f"n_daus must be >= 1, got {self.n_daus}")
        if any(d <= 0 for d in self.dilations):
            raise ValueError(f"dilations must be positive, got {self.dilations}")
        if self.reduction < 1:
            raise ValueError(f"reduction must be >= 1, got {self.reduction}")


@dataclass(frozen=True)
class SRNConfig:
    """Scene reconstruction encoder-decoder working at 1/4 resolution."""

    stem_channels: int = 16
    mid_channels: int = 32
    base_channels: int = 96
    n_res_blocks: int = 12
    n_deform_layers: int = 2
    # attention injection points: after the stem conv and at the bottleneck
    inject_stem: bool = True
    inject_bottleneck: bool = True

    downsample_factor: int = 4  # two stride-2 stages; fixed

    def __post_init__(self):
        if self.n_res_blocks < 1:
            raise ValueError(f"n_res_blocks must be >= 1, got {self.n_res_blocks}")
        if self.downsample_factor != 4:
            raise ValueError("downsample_factor is fixed at 4 (two stride-2 stages)")


@dataclass(frozen=True)
class ModelConfig:
    agn: AGNConfig = field(default_factory=AGNConfig)
    srn: SRNConfig = field(default_factory=SRNConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        agn = _build(AGNConfig, d.pop("agn", {}), "model.agn")
        srn = _build(SRNConfig, d.pop("srn", {}), "model.srn")
        if d:
            raise ValueError(f"unknown model config keys: {sorted(d)}")
        return cls(agn=agn, srn=srn)


def _build(cls, d: dict, where: str):
    """Construct a dataclass from a dict, rejecting unknown keys."""
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown {where} config keys: {sorted(unknown)}")
    d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    return cls(**d)

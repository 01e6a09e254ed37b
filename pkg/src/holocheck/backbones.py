"""Backbone zoo: resnet18, mobilenetv3_small050, mobilevit_xxs.

All backbones expose the same contract: forward a (N, 3, 224, 224) batch to
a (N, embedding_dim) globally pooled feature matrix, no classification head.
resnet18 and the half-width MobileNetV3-Small come from torchvision (the
half-width variant is assembled from torchvision's config helper since no
stock constructor exposes width_mult). MobileViT-XXS is implemented here:
MobileNetV2-style blocks interleaved with transformer blocks that attend
over 2x2 patch grids.
"""

from __future__ import annotations

import logging

import torch
from torch import nn
import torch.nn.functional as F

log = logging.getLogger(__name__)

ARCHITECTURES = ("resnet18", "mobilevit_xxs", "mobilenetv3_small050")


# ---------------------------------------------------------------------------
# torchvision-backed architectures


class _PooledBackbone(nn.Module):
    """Wrap a feature trunk with global average pooling to a flat vector."""

    def __init__(self, trunk: nn.Module):
        super().__init__()
        self.trunk = trunk
        self.pool = nn.AdaptiveAvgPool2d(1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.flatten(self.pool(self.trunk(x)), 1)


def _build_resnet18(init: str) -> tuple[nn.Module, int]:
    from torchvision.models import resnet18
    if init == "pretrained":
        from torchvision.models import ResNet18_Weights
        net = resnet18(weights=ResNet18_Weights.IMAGENET1K_V1)
    else:
        net = resnet18(weights=None)
    net.fc = nn.Identity()
    return net, 512


def _build_mobilenetv3_small050(init: str) -> tuple[nn.Module, int]:
    from torchvision.models.mobilenetv3 import (MobileNetV3,
                                                _mobilenet_v3_conf)
    if init == "pretrained":
        raise ValueError("no published weights for the half-width "
                         "MobileNetV3-Small; use init='scratch'")
    setting, last_channel = _mobilenet_v3_conf("mobilenet_v3_small",
                                               width_mult=0.5)
    net = MobileNetV3(setting, last_channel, num_classes=2)
    dim = setting[-1].out_channels * 6  # lastconv widens 6x
    return _PooledBackbone(net.features), dim


# ---------------------------------------------------------------------------
# MobileViT-XXS


def _conv_bn_act(cin: int, cout: int, kernel: int = 3, stride: int = 1,
                 groups: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, kernel, stride, kernel // 2, groups=groups,
                  bias=False),
        nn.BatchNorm2d(cout),
        nn.SiLU(inplace=True))


class _InvertedResidual(nn.Module):
    def __init__(self, cin: int, cout: int, stride: int, expansion: int):
        super().__init__()
        hidden = cin * expansion
        self.use_residual = stride == 1 and cin == cout
        layers = []
        if expansion != 1:
            layers.append(_conv_bn_act(cin, hidden, kernel=1))
        layers.append(_conv_bn_act(hidden, hidden, stride=stride,
                                   groups=hidden))
        layers.extend([nn.Conv2d(hidden, cout, 1, bias=False),
                       nn.BatchNorm2d(cout)])
        self.block = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.block(x)
        return x + out if self.use_residual else out


class _MobileViTBlock(nn.Module):
    """Local conv features + transformer over a 2x2 patch grid, then fusion."""

    def __init__(self, channels: int, dim: int, depth: int, patch: int = 2):
        super().__init__()
        self.patch = patch
        self.local_rep = nn.Sequential(
            _conv_bn_act(channels, channels),
            nn.Conv2d(channels, dim, 1, bias=False))
        layer = nn.TransformerEncoderLayer(
            d_model=dim, nhead=4, dim_feedforward=2 * dim, dropout=0.0,
            activation=F.silu, batch_first=True, norm_first=True)
        self.transformer = nn.TransformerEncoder(layer, depth,
                                                 enable_nested_tensor=False)
        self.norm = nn.LayerNorm(dim)
        self.proj = _conv_bn_act(dim, channels, kernel=1)
        self.fusion = _conv_bn_act(2 * channels, channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        residual = x
        b, _, h, w = x.shape
        y = self.local_rep(x)
        p = self.patch
        # pad odd grids up to a patch multiple, restore afterwards
        nh, nw = -(-h // p) * p, -(-w // p) * p
        if (nh, nw) != (h, w):
            y = F.interpolate(y, size=(nh, nw), mode="bilinear",
                              align_corners=False)
        d = y.shape[1]
        gh, gw = nh // p, nw // p
        # (b, d, gh, p, gw, p) -> one sequence of gh*gw tokens per pixel
        # offset inside the patch
        y = y.reshape(b, d, gh, p, gw, p).permute(0, 3, 5, 2, 4, 1)
        y = y.reshape(b * p * p, gh * gw, d)
        y = self.norm(self.transformer(y))
        y = y.reshape(b, p, p, gh, gw, d).permute(0, 5, 3, 1, 4, 2)
        y = y.reshape(b, d, nh, nw)
        if (nh, nw) != (h, w):
            y = F.interpolate(y, size=(h, w), mode="bilinear",
                              align_corners=False)
        y = self.proj(y)
        return self.fusion(torch.cat([residual, y], dim=1))


class MobileViTXXS(nn.Module):
    """The XXS variant: expansion 2, transformer dims 64/80/96, 320-d output."""

    def __init__(self):
        super().__init__()
        e = 2
        self.stem = _conv_bn_act(3, 16, stride=2)
        self.stage1 = _InvertedResidual(16, 16, 1, e)
        self.stage2 = nn.Sequential(
            _InvertedResidual(16, 24, 2, e),
            _InvertedResidual(24, 24, 1, e),
            _InvertedResidual(24, 24, 1, e))
        self.stage3 = nn.Sequential(
            _InvertedResidual(24, 48, 2, e),
            _MobileViTBlock(48, 64, depth=2))
        self.stage4 = nn.Sequential(
            _InvertedResidual(48, 64, 2, e),
            _MobileViTBlock(64, 80, depth=4))
        self.stage5 = nn.Sequential(
            _InvertedResidual(64, 80, 2, e),
            _MobileViTBlock(80, 96, depth=3))
        self.head = _conv_bn_act(80, 320, kernel=1)
        self.pool = nn.AdaptiveAvgPool2d(1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.stem(x)
        x = self.stage1(x)
        x = self.stage2(x)
        x = self.stage3(x)
        x = self.stage4(x)
        x = self.stage5(x)
        x = self.head(x)
        return torch.flatten(self.pool(x), 1)


def _build_mobilevit_xxs(init: str) -> tuple[nn.Module, int]:
    if init == "pretrained":
        raise ValueError("mobilevit_xxs has no bundled pretrained weights; "
                         "use init='scratch'")
    return MobileViTXXS(), 320


# ---------------------------------------------------------------------------


_BUILDERS = {
    "resnet18": _build_resnet18,
    "mobilenetv3_small050": _build_mobilenetv3_small050,
    "mobilevit_xxs": _build_mobilevit_xxs,
}


def build_backbone(architecture: str, init: str = "scratch"
                   ) -> tuple[nn.Module, int]:
    """Return (module, embedding_dim) for one of the supported backbones."""
    if architecture not in _BUILDERS:
        raise ValueError(f"unknown architecture {architecture!r}; "
                         f"choose from {ARCHITECTURES}")
    if init not in ("pretrained", "scratch"):
        raise ValueError(f"unknown init {init!r}")
    net, dim = _BUILDERS[architecture](init)
    n_params = sum(p.numel() for p in net.parameters())
    log.info("built %s (%s init, %d params, %d-d embedding)",
             architecture, init, n_params, dim)
    return net, dim


def parameter_count(net: nn.Module) -> int:
    return sum(p.numel() for p in net.parameters())

"""Miniature encoder-decoder that maps a camera frame to the two-channel
complex-domain target at 4x resolution.

Topology mirrors the training target's needs at desk scale: a small conv
encoder with pooling, a mirrored decoder with skip connections, and two
extra upsampling blocks for the x4 super-resolution output. The upsampling
interpolation mode is configurable because it is the knob that decides
whether sub-pixel positions survive (bilinear) or snap to the grid
(nearest).
"""

import torch
import torch.nn as nn

from phasorloc.errors import ValidationError

from .config import ToyNetConfig


def _conv_block(c_in, c_out):
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 3, padding=1),
        nn.GELU(),
        nn.BatchNorm2d(c_out),
        nn.Conv2d(c_out, c_out, 3, padding=1),
        nn.GELU(),
        nn.BatchNorm2d(c_out),
    )


class ToyMapNet(nn.Module):
    def __init__(self, cfg: ToyNetConfig):
        super().__init__()
        self.cfg = cfg
        ch = [cfg.base_channels * (2**i) for i in range(cfg.depth + 1)]

        self.encoders = nn.ModuleList()
        c_prev = 1
        for c in ch[:-1]:
            self.encoders.append(_conv_block(c_prev, c))
            c_prev = c
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = _conv_block(ch[-2], ch[-1])

        up = dict(scale_factor=2, mode=cfg.upsample_mode)
        if cfg.upsample_mode == "bilinear":
            up["align_corners"] = False
        self.upsample = nn.Upsample(**up)

        self.decoders = nn.ModuleList()
        c_prev = ch[-1]
        for c in reversed(ch[:-1]):
            # input: upsampled previous + skip connection
            self.decoders.append(_conv_block(c_prev + c, c))
            c_prev = c

        # two densely connected super-resolution blocks (x2 each -> x4)
        self.super1 = _conv_block(c_prev, c_prev)
        self.super2 = _conv_block(2 * c_prev, c_prev)
        self.head = nn.Conv2d(3 * c_prev, 2, 1)

    def forward(self, x):
        h, w = x.shape[-2:]
        factor = 2**self.cfg.depth
        if h % factor or w % factor:
            raise ValidationError(
                f"frame size {h}x{w} must be divisible by {factor}")
        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for dec, skip in zip(self.decoders, reversed(skips)):
            x = self.upsample(x)
            x = dec(torch.cat([x, skip], dim=1))
        # super-resolution stage with dense connections
        a = self.upsample(x)
        b = self.super1(a)
        c = self.upsample(torch.cat([a, b], dim=1))
        d = self.super2(c)
        return self.head(torch.cat([c, d], dim=1))

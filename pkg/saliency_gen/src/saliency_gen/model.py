"""Multi-level visual-attention network.

A VGG-16-style backbone feeds three convolutional stages (mid to high
level) into a concatenated 1280-channel tensor; a dropout (retain 0.5) ->
5x5 conv (64 maps) -> 1x1 weighting conv head plus a learned multiplicative
prior produce the attention map. Outputs are max-normalized to [0, 1] per
frame by the inference wrapper.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

# native inference resolution (height, width); multiples of 16 keep the
# three tapped stages cleanly aligned
NATIVE_H, NATIVE_W = 240, 320


def _vgg_block(in_ch: int, out_ch: int, convs: int) -> nn.Sequential:
    layers: list[nn.Module] = []
    for i in range(convs):
        layers.append(nn.Conv2d(in_ch if i == 0 else out_ch, out_ch, 3, padding=1))
        layers.append(nn.ReLU(inplace=True))
    return nn.Sequential(*layers)


class SaliencyNet(nn.Module):
    """Backbone taps at 1/4, 1/8, and 1/16 scale, merged at 1/8."""

    def __init__(self, prior_shape: tuple[int, int] = (6, 8)):
        super().__init__()
        self.block1 = _vgg_block(3, 64, 2)
        self.block2 = _vgg_block(64, 128, 2)
        self.block3 = _vgg_block(128, 256, 3)
        self.block4 = _vgg_block(256, 512, 3)
        self.block5 = _vgg_block(512, 512, 3)   # last max pooling removed
        self.pool = nn.MaxPool2d(2, 2)
        self.dropout = nn.Dropout(p=0.5)        # retain probability 0.5
        self.encode = nn.Conv2d(1280, 64, kernel_size=5, stride=1, padding=2)
        self.weighting = nn.Conv2d(64, 1, kernel_size=1)
        self.prior = nn.Parameter(torch.ones(1, 1, *prior_shape))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.pool(self.block1(x))
        x = self.pool(self.block2(x))
        tap3 = self.block3(x)                    # 256 ch @ 1/4
        x = self.pool(tap3)
        tap4 = self.block4(x)                    # 512 ch @ 1/8
        x = self.pool(tap4)
        tap5 = self.block5(x)                    # 512 ch @ 1/16
        size = tap4.shape[-2:]
        merged = torch.cat([
            F.interpolate(tap3, size=size, mode="bilinear", align_corners=False),
            tap4,
            F.interpolate(tap5, size=size, mode="bilinear", align_corners=False),
        ], dim=1)                                # 1280 channels
        feats = F.relu(self.encode(self.dropout(merged)))
        raw = F.relu(self.weighting(feats))
        prior = F.softplus(
            F.interpolate(self.prior, size=size, mode="bilinear",
                          align_corners=False))
        return raw * prior


def init_weights_file(path, seed: int = 0) -> None:
    """Write a reproducible randomly initialized weight file.

    Stands in for trained weights when none are available; the inference
    contract (geometry, range, normalization, determinism) does not depend
    on what the model learned.
    """
    torch.manual_seed(seed)
    model = SaliencyNet()
    torch.save(model.state_dict(), path)


def load_model(weights_path) -> SaliencyNet:
    model = SaliencyNet()
    state = torch.load(weights_path, map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model

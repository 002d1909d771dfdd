"""Model assembly: a convolutional backbone plus a configurable FC head.

The head follows the recipe of appending fully-connected layers with ReLU and
dropout, terminating in a 3-way output. Backbones: a small from-scratch CNN
for desk-scale runs, or torchvision's vgg19/resnet18 for users with trained
weights (loaded from a file; this package never downloads anything).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from trainharness import HarnessError

BACKBONES = ("smallcnn", "vgg19", "resnet18")


@dataclass(frozen=True)
class HeadSpec:
    widths: tuple = (4096, 1024, 3)
    dropout: float = 0.5

    def validate(self) -> None:
        if not self.widths or self.widths[-1] != 3:
            raise HarnessError("head widths must end in 3 outputs")
        if any(w < 1 for w in self.widths):
            raise HarnessError("head widths must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise HarnessError("dropout must be in [0, 1)")


def build_head(in_features: int, spec: HeadSpec) -> nn.Sequential:
    spec.validate()
    layers = []
    prev = in_features
    for width in spec.widths[:-1]:
        layers += [nn.Linear(prev, width), nn.ReLU(inplace=True), nn.Dropout(spec.dropout)]
        prev = width
    final = nn.Linear(prev, spec.widths[-1])
    # zero-init the output layer: first-batch loss starts at exactly ln(3)
    nn.init.zeros_(final.weight)
    nn.init.zeros_(final.bias)
    layers.append(final)
    return nn.Sequential(*layers)


class SmallCnn(nn.Module):
    """Four strided conv-BN-ReLU blocks + global average pooling; 64 channels.

    Batch norm matters here: without it a randomly initialized stack buries
    the global color statistics the desk-scale tasks depend on and training
    stalls at the base rate.
    """

    def __init__(self):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 16, 5, stride=2, padding=2), nn.BatchNorm2d(16), nn.ReLU(inplace=True),
            nn.Conv2d(16, 32, 3, stride=2, padding=1), nn.BatchNorm2d(32), nn.ReLU(inplace=True),
            nn.Conv2d(32, 64, 3, stride=2, padding=1), nn.BatchNorm2d(64), nn.ReLU(inplace=True),
            nn.Conv2d(64, 64, 3, stride=2, padding=1), nn.BatchNorm2d(64), nn.ReLU(inplace=True),
        )
        # 2x2 pooling keeps coarse layout; a 1x1 global average makes scenes
        # that share a background nearly indistinguishable
        self.pool = nn.AdaptiveAvgPool2d(2)
        self.feature_dim = 64 * 4


class ClassifierNet(nn.Module):
    """Backbone features -> pool -> FC head; exposes feature maps for CAM use."""

    def __init__(self, features: nn.Module, pool: nn.Module, feature_dim: int, head: nn.Sequential):
        super().__init__()
        self.features = features
        self.pool = pool
        self.head = head
        self.feature_dim = feature_dim

    def feature_maps(self, x: torch.Tensor) -> torch.Tensor:
        return self.features(x)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        maps = self.features(x)
        pooled = torch.flatten(self.pool(maps), 1)
        return self.head(pooled)


def _backbone(backbone_id: str):
    if backbone_id == "smallcnn":
        net = SmallCnn()
        return net.features, net.pool, net.feature_dim
    import torchvision.models as tvm

    if backbone_id == "vgg19":
        net = tvm.vgg19(weights=None)
        return net.features, net.avgpool, 512 * 7 * 7
    if backbone_id == "resnet18":
        net = tvm.resnet18(weights=None)
        features = nn.Sequential(
            net.conv1, net.bn1, net.relu, net.maxpool,
            net.layer1, net.layer2, net.layer3, net.layer4,
        )
        return features, net.avgpool, 512
    raise HarnessError(f"unknown backbone {backbone_id!r}; choose from {BACKBONES}")


def build_model(
    backbone: str = "smallcnn",
    head: HeadSpec | None = None,
    weights_path=None,
    random_init: bool = False,
) -> ClassifierNet:
    """Assemble a 224x224 RGB -> 3-logit classifier.

    Pass weights_path to load a state dict produced by this harness, or set
    random_init for a fresh model; asking for neither is an error so silent
    untrained runs cannot happen.
    """
    if weights_path is None and not random_init:
        raise HarnessError("no weights_path given and random_init not set")
    if head is None:
        head = HeadSpec((128, 3), 0.5) if backbone == "smallcnn" else HeadSpec()
    features, pool, dim = _backbone(backbone)
    model = ClassifierNet(features, pool, dim, build_head(dim, head))
    if weights_path is not None:
        try:
            state = torch.load(weights_path, map_location="cpu", weights_only=True)
            if "model" in state:
                state = state["model"]
            model.load_state_dict(state)
        except (RuntimeError, KeyError, FileNotFoundError) as exc:
            raise HarnessError(f"cannot load weights from {weights_path}: {exc}") from None
    return model


def save_checkpoint(model: nn.Module, path, extra: dict | None = None) -> None:
    payload = {"model": model.state_dict()}
    if extra:
        payload.update(extra)
    torch.save(payload, path)

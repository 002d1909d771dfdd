"""Gradient-free class activation mapping.

For each final-conv channel: upsample the activation map to input size,
normalize it to [0, 1] (a constant map normalizes to all-ones, i.e. the mask
keeps the whole image), mask the input with it, and use the target-class
softmax gain over the zero-evidence baseline as the channel weight. The
heatmap is the rectified weighted sum of the masks, normalized to max 1.

Masked-out regions are filled with the image's mean color rather than black:
small from-scratch models classify black frames confidently, which drowns the
per-channel gains; the mean-color fill keeps masked inputs near the training
distribution. The baseline is the full-fill image, i.e. the mask-everything
limit of the same operator.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from trainharness import HarnessError


def _normalize_maps(maps: torch.Tensor) -> torch.Tensor:
    """Per-channel min-max normalization of (C, H, W) maps; flat maps -> ones."""
    c = maps.shape[0]
    flat = maps.reshape(c, -1)
    lo = flat.min(dim=1).values.reshape(c, 1, 1)
    hi = flat.max(dim=1).values.reshape(c, 1, 1)
    span = hi - lo
    out = torch.where(span > 0, (maps - lo) / torch.where(span > 0, span, torch.ones_like(span)), torch.ones_like(maps))
    return out


def score_cam(model, image: torch.Tensor, target_class: int, batch_size: int = 32):
    """Compute the heatmap for one (3, H, W) image tensor in [0, 1].

    Returns (heatmap (H, W) float in [0, 1], degenerate flag). The flag is set
    when no channel raised the target score over the baseline, in which case
    the heatmap is all zeros.
    """
    if image.dim() != 3 or image.shape[0] != 3:
        raise HarnessError("score_cam expects a (3, H, W) image tensor")
    if not 0 <= target_class <= 2:
        raise HarnessError("target_class must be 0, 1 or 2")
    model.eval()
    x = image.unsqueeze(0)
    h, w = image.shape[1], image.shape[2]

    with torch.no_grad():
        maps = model.feature_maps(x)[0]
        masks = _normalize_maps(
            F.interpolate(maps.unsqueeze(0), size=(h, w), mode="bilinear", align_corners=False)[0]
        )
        fill = image.mean(dim=(1, 2)).reshape(1, 3, 1, 1)
        baseline = float(
            torch.softmax(model(fill.expand_as(x)), dim=1)[0, target_class]
        )
        weights = torch.empty(masks.shape[0])
        for start in range(0, masks.shape[0], batch_size):
            chunk = masks[start : start + batch_size].unsqueeze(1)
            masked = x * chunk + fill * (1.0 - chunk)
            scores = torch.softmax(model(masked), dim=1)[:, target_class]
            weights[start : start + len(chunk)] = scores - baseline

        heatmap = torch.relu((weights.reshape(-1, 1, 1) * masks).sum(dim=0))

    peak = float(heatmap.max())
    if peak <= 0.0:
        return np.zeros((h, w), dtype=np.float32), True
    return (heatmap / peak).numpy().astype(np.float32), False


def occlude(image: torch.Tensor, mask: np.ndarray) -> torch.Tensor:
    """Replace the masked pixels of a (3, H, W) image with its mean color."""
    keep = torch.from_numpy(~mask).float()
    fill = image.mean(dim=(1, 2)).reshape(3, 1, 1)
    return image * keep + fill * (1.0 - keep)


def top_fraction_mask(heatmap: np.ndarray, fraction: float) -> np.ndarray:
    k = max(1, int(round(heatmap.size * fraction)))
    threshold = np.sort(heatmap, axis=None)[-k]
    mask = heatmap >= threshold
    return mask


def random_fraction_mask(shape, fraction: float, rng: np.random.Generator) -> np.ndarray:
    size = shape[0] * shape[1]
    k = max(1, int(round(size * fraction)))
    mask = np.zeros(size, dtype=bool)
    mask[rng.choice(size, size=k, replace=False)] = True
    return mask.reshape(shape)


def deletion_check(model, image: torch.Tensor, target_class: int, fraction: float, rng) -> tuple:
    """Score drops from deleting the top-heatmap region vs a random region."""
    heatmap, degenerate = score_cam(model, image, target_class)
    model.eval()
    with torch.no_grad():
        def score(img):
            return float(torch.softmax(model(img.unsqueeze(0)), dim=1)[0, target_class])

        base = score(image)
        drop_top = base - score(occlude(image, top_fraction_mask(heatmap, fraction)))
        drop_random = base - score(
            occlude(image, random_fraction_mask(heatmap.shape, fraction, rng))
        )
    return drop_top, drop_random, degenerate

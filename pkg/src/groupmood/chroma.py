"""Color filtering: strip near-uniform studio backdrops from face photos."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from groupmood.core import GroupMoodError


@dataclass(frozen=True)
class ChromaParams:
    """Parameters for background estimation and masking.

    tolerance is a scalar radius in the perceptually weighted color space
    (see color_distance); border_width is the sampling ring in pixels;
    border_spread_max caps how heterogeneous the border may be before the
    image is rejected; on_uniform selects the behaviour for images with no
    foreground at all ("error" or "empty").
    """

    tolerance: float = 50.0
    border_width: int = 3
    border_spread_max: float = 40.0
    on_uniform: str = "error"

    def validate(self) -> None:
        if self.tolerance <= 0:
            raise GroupMoodError("chroma tolerance must be > 0")
        if self.border_width < 1:
            raise GroupMoodError("chroma border_width must be >= 1")
        if self.border_spread_max <= 0:
            raise GroupMoodError("chroma border_spread_max must be > 0")
        if self.on_uniform not in ("error", "empty"):
            raise GroupMoodError("chroma on_uniform must be 'error' or 'empty'")


def color_distance(rgb: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Hue-weighted RGB distance ("redmean" weighting, scaled like CIE deltas).

    Weights the red and blue channels by the mean red level so that distances
    track perceived color difference better than plain euclidean RGB.
    """
    rgb = rgb.astype(np.float64)
    ref = ref.astype(np.float64)
    rbar = (rgb[..., 0] + ref[..., 0]) / 2.0
    dr = rgb[..., 0] - ref[..., 0]
    dg = rgb[..., 1] - ref[..., 1]
    db = rgb[..., 2] - ref[..., 2]
    return np.sqrt(
        (2.0 + rbar / 256.0) * dr * dr
        + 4.0 * dg * dg
        + (2.0 + (255.0 - rbar) / 256.0) * db * db
    )


def _border_pixels(img: np.ndarray, width: int) -> np.ndarray:
    h, w = img.shape[:2]
    width = min(width, h // 2 if h // 2 else 1, w // 2 if w // 2 else 1)
    width = max(width, 1)
    top = img[:width, :, :].reshape(-1, 3)
    bottom = img[-width:, :, :].reshape(-1, 3)
    left = img[width:-width, :width, :].reshape(-1, 3)
    right = img[width:-width, -width:, :].reshape(-1, 3)
    return np.concatenate([top, bottom, left, right], axis=0)


def remove_background(img: np.ndarray, params: ChromaParams | None = None) -> np.ndarray:
    """Estimate the backdrop color from a border ring and mask it out.

    Returns a float32 mask in [0, 1] with the same spatial shape as img:
    0 on pixels within tolerance of the estimated background color, 1
    elsewhere. The raw mask is cleaned by keeping the largest connected
    foreground component and closing with a 3x3 structuring element.
    """
    if params is None:
        params = ChromaParams()
    params.validate()
    if img.ndim != 3 or img.shape[2] != 3 or img.size == 0:
        raise GroupMoodError("remove_background expects a non-empty HxWx3 RGB raster")

    border = _border_pixels(img, params.border_width)
    bg_color = np.median(border.astype(np.float64), axis=0)
    spread = float(np.mean(color_distance(border, bg_color)))
    if spread > params.border_spread_max:
        raise GroupMoodError(
            f"no uniform background detected (border spread {spread:.1f} "
            f"> {params.border_spread_max:.1f})"
        )

    fg = color_distance(img, bg_color) > params.tolerance
    if not fg.any():
        if params.on_uniform == "error":
            raise GroupMoodError("image has no foreground after color filtering")
        return np.zeros(img.shape[:2], dtype=np.float32)

    labels, n = ndimage.label(fg)
    if n > 1:
        sizes = ndimage.sum_labels(fg, labels, index=np.arange(1, n + 1))
        fg = labels == (int(np.argmax(sizes)) + 1)
    fg = ndimage.binary_closing(fg, structure=np.ones((3, 3), dtype=bool))
    return fg.astype(np.float32)

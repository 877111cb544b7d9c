"""Per-pixel patch descriptors for cross-image correspondence search.

Each pixel is described by the flattened patch of a 12-channel feature
stack: the 3 RGB intensities, 3 chroma channels scaled by a chroma weight
and 6 forward-difference gradient channels scaled by a gradient weight.
Patches use replicate padding at the border, so descriptors exist for
every pixel and have dimension 12 * side * side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import RgbImage

FEATURE_CHANNELS = 12


@dataclass(frozen=True)
class DescriptorConfig:
    """Patch descriptor parameters.

    patch_side is the odd window side length.  chroma_weight and
    gradient_weight scale the chroma and gradient channels before
    patches are extracted.  eps guards the chroma denominator.
    """

    patch_side: int = 5
    chroma_weight: float = 0.25
    gradient_weight: float = 0.5
    eps: float = 1e-6

    def __post_init__(self) -> None:
        if self.patch_side < 1 or self.patch_side % 2 == 0:
            msg = f"patch_side must be odd and positive, got {self.patch_side}"
            raise ValueError(msg)
        if self.chroma_weight < 0 or self.gradient_weight < 0:
            raise ValueError("channel weights must be nonnegative")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    @property
    def dim(self) -> int:
        return FEATURE_CHANNELS * self.patch_side * self.patch_side


@dataclass(frozen=True)
class DescriptorField:
    """Descriptors for every pixel of one image.

    vectors has shape (height * width, dim) in row-major pixel order,
    float64, read-only.
    """

    height: int
    width: int
    vectors: np.ndarray

    def __post_init__(self) -> None:
        vec = np.asarray(self.vectors, dtype=np.float64)
        if vec.ndim != 2 or vec.shape[0] != self.height * self.width:
            msg = f"expected ({self.height * self.width}, dim) vectors, got {vec.shape}"
            raise ValueError(msg)
        if not np.all(np.isfinite(vec)):
            raise ValueError("descriptor vectors contain NaN or infinite entries")
        vec = np.ascontiguousarray(vec)
        vec.flags.writeable = False
        object.__setattr__(self, "vectors", vec)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def chroma(image: RgbImage, eps: float = 1e-6) -> np.ndarray:
    """Per-pixel channel fractions I_c / (sum_c I_c + eps), shape (3, H, W).

    Rows of the channel simplex: scaling all three intensities by the same
    factor leaves chroma unchanged up to the eps guard.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    planes = image.data.astype(np.float64)
    total = planes.sum(axis=0, keepdims=True) + eps
    return planes / total


def gradients(image: RgbImage) -> np.ndarray:
    """Forward-difference gradients, shape (6, H, W).

    Channels 0..2 are row differences for R, G, B and channels 3..5 are
    column differences.  The last row and column replicate their inward
    neighbor, so the difference there is zero.
    """
    planes = image.data.astype(np.float64)
    dy = np.zeros_like(planes)
    dx = np.zeros_like(planes)
    dy[:, :-1, :] = planes[:, 1:, :] - planes[:, :-1, :]
    dx[:, :, :-1] = planes[:, :, 1:] - planes[:, :, :-1]
    return np.concatenate([dy, dx], axis=0)


def feature_stack(image: RgbImage, config: DescriptorConfig) -> np.ndarray:
    """Weighted 12-channel stack (intensity, chroma, gradients), float64."""
    planes = image.data.astype(np.float64)
    return np.concatenate(
        [
            planes,
            config.chroma_weight * chroma(image, config.eps),
            config.gradient_weight * gradients(image),
        ],
        axis=0,
    )


def build_descriptors(image: RgbImage, config: DescriptorConfig) -> DescriptorField:
    """Extract the patch descriptor of every pixel.

    The 12-channel stack is padded by replication, then each pixel's
    side * side window is flattened channel-major (channel, then patch
    row, then patch column).  Output rows follow row-major pixel order.
    """
    stack = feature_stack(image, config)
    side = config.patch_side
    radius = side // 2
    padded = np.pad(stack, ((0, 0), (radius, radius), (radius, radius)), mode="edge")
    # windows: (12, H, W, side, side) -> (H, W, 12, side, side) -> flatten
    windows = sliding_window_view(padded, (side, side), axis=(1, 2))
    ordered = windows.transpose(1, 2, 0, 3, 4)
    height, width = image.height, image.width
    vectors = ordered.reshape(height * width, config.dim)
    return DescriptorField(height=height, width=width, vectors=vectors)

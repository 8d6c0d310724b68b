"""Trimaps, transition regions and alpha compositing.

Images are float arrays of shape (H, W, 3) and alpha mattes float arrays of
shape (H, W), both with values in [0, 1]. Masks are boolean (H, W) arrays.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .validation import check_alpha, check_image, check_same_size

BG, TRANSITION, FG = 0, 1, 2
N_CLASSES = 3

DEFAULT_DILATION_RADIUS = 25


@dataclass(frozen=True)
class Trimap:
    """Three-class label map with ``labels`` in {BG, TRANSITION, FG}."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ValueError(f"trimap labels must be 2-D, got {labels.shape}")
        if not np.isin(labels, (BG, TRANSITION, FG)).all():
            raise ValueError("trimap labels must be in {0, 1, 2}")
        object.__setattr__(self, "labels", labels.astype(np.uint8))

    @property
    def shape(self):
        return self.labels.shape

    @property
    def one_hot(self):
        """(3, H, W) array, channel order BG, TRANSITION, FG."""
        return (np.arange(N_CLASSES)[:, None, None] == self.labels[None]).astype(
            np.float64
        )

    @classmethod
    def from_gray(cls, gray):
        """Decode a {0, 128, 255} single-channel trimap image."""
        gray = np.asarray(gray)
        if gray.ndim == 3:
            gray = gray[..., 0]
        labels = np.full(gray.shape, TRANSITION, dtype=np.uint8)
        labels[gray <= 64] = BG
        labels[gray >= 192] = FG
        return cls(labels)

    def to_gray(self):
        return np.array([0, 128, 255], dtype=np.uint8)[self.labels]


def disk(radius):
    """Boolean disk structuring element of the given integer radius."""
    r = int(radius)
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return xx * xx + yy * yy <= r * r


def soft_region(alpha):
    """Pixels with fractional opacity, 0 < alpha < 1."""
    alpha = np.asarray(alpha)
    return (alpha > 0) & (alpha < 1)


def generate_trimap(alpha, dilation_radius=DEFAULT_DILATION_RADIUS):
    """Build a trimap by dilating the soft band of ``alpha`` with a disk.

    The transition class is {0 < alpha < 1} grown by ``dilation_radius``
    pixels. Remaining opaque pixels are FG and remaining clear pixels BG.
    """
    if dilation_radius < 0:
        raise ValueError("dilation_radius must be >= 0")
    alpha = check_alpha(alpha)
    band = soft_region(alpha)
    if dilation_radius > 0 and band.any():
        band = ndimage.binary_dilation(band, structure=disk(dilation_radius))
    labels = np.where(alpha >= 1.0, FG, BG).astype(np.uint8)
    labels[band] = TRANSITION
    return Trimap(labels)


def transition_mask(trimap):
    return np.asarray(trimap.labels) == TRANSITION


def composite(alpha, fg, bg):
    alpha = check_alpha(alpha)
    fg = check_image(fg, "fg", min_side=0)
    bg = check_image(bg, "bg", min_side=0)
    check_same_size(alpha, fg, bg, names=["alpha", "fg", "bg"])
    a = alpha[..., None]
    return np.clip(a * fg + (1.0 - a) * bg, 0.0, 1.0)

"""Input validation helpers shared by every public entry point."""

import numpy as np

MIN_SIDE = 32


def check_image(image, name="image", min_side=MIN_SIDE):
    """Return ``image`` as a float64 H x W x 3 array with values in [0, 1].

    uint8 input is mapped by value / 255.
    """
    arr = np.asarray(image)
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    else:
        arr = arr.astype(np.float64, copy=False)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    _check_range(arr, name)
    if min_side and min(arr.shape[:2]) < min_side:
        raise ValueError(f"{name} sides must be >= {min_side}, got {arr.shape[:2]}")
    return arr


def check_alpha(alpha, name="alpha"):
    """Return ``alpha`` as a float64 H x W array with values in [0, 1]."""
    arr = np.asarray(alpha)
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    else:
        arr = arr.astype(np.float64, copy=False)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[..., 0]
    if arr.ndim != 2:
        raise ValueError(f"{name} must have shape (H, W), got {arr.shape}")
    _check_range(arr, name)
    return arr


def check_mask(mask, shape=None, name="mask"):
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"{name} must have shape (H, W), got {arr.shape}")
    if arr.dtype != bool:
        if not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name} must be binary")
        arr = arr.astype(bool)
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    return arr


def check_same_size(*arrays, names=None):
    """Raise ``ValueError`` unless all arrays share their leading H x W."""
    sizes = [np.shape(a)[:2] for a in arrays]
    if any(s != sizes[0] for s in sizes[1:]):
        names = names or [f"arg{i}" for i in range(len(arrays))]
        desc = ", ".join(f"{n}={s}" for n, s in zip(names, sizes))
        raise ValueError(f"spatial size mismatch: {desc}")


def check_divisible(height, width, factor=32):
    if height % factor or width % factor:
        raise ValueError(
            f"input size {height}x{width} must be divisible by {factor}"
        )


def _check_range(arr, name):
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError(
            f"{name} values must lie in [0, 1], got [{arr.min()}, {arr.max()}]"
        )

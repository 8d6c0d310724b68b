"""Reading and writing 8-bit image, alpha, mask and trimap files."""

from pathlib import Path

import cv2
import numpy as np

from .core import Trimap

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def _read(path, flags):
    arr = cv2.imread(str(path), flags)
    if arr is None:
        raise OSError(f"cannot read image file {path}")
    return arr


def read_image(path):
    """RGB float image in [0, 1]."""
    bgr = _read(path, cv2.IMREAD_COLOR)
    return cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB).astype(np.float64) / 255.0


def read_alpha(path):
    return _read(path, cv2.IMREAD_GRAYSCALE).astype(np.float64) / 255.0


def read_mask(path):
    return _read(path, cv2.IMREAD_GRAYSCALE) > 127


def read_trimap(path):
    return Trimap.from_gray(_read(path, cv2.IMREAD_GRAYSCALE))


def to_uint8(arr):
    arr = np.asarray(arr)
    if arr.dtype == np.uint8:
        return arr
    return np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)


def write_image(path, image):
    rgb = to_uint8(image)
    _write(path, cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR))


def write_alpha(path, alpha):
    _write(path, to_uint8(alpha))


def write_mask(path, mask):
    _write(path, np.asarray(mask, dtype=bool).astype(np.uint8) * 255)


def write_trimap(path, trimap):
    _write(path, trimap.to_gray())


def _write(path, arr):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), arr):
        raise OSError(f"cannot write image file {path}")


def list_images(path):
    """Sorted image files under a directory, or ``[path]`` for a file."""
    path = Path(path)
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not path.exists():
        raise FileNotFoundError(path)
    return [path]

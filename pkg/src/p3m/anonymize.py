"""Landmark-driven face obfuscation that leaves the matte boundary intact.

The face region is the polygon traced by the jawline and eyebrow landmarks.
Pixels with fractional alpha are removed from it so that hair and cheek
boundaries keep their original detail, and the rest is Gaussian blurred.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import soft_region
from .validation import check_alpha, check_mask, check_same_size

TRUNCATE = 4.0
DEFAULT_FEATHER = 2

JAWLINE_68 = list(range(0, 17))
EYEBROWS_68 = list(range(17, 27))


def _outline_ibug68(points):
    # jaw runs left temple -> chin -> right temple; brows run left -> right,
    # so walking the brows backwards closes the loop over the forehead
    return np.concatenate([points[JAWLINE_68], points[EYEBROWS_68][::-1]])


def _outline_polygon(points):
    return points


# scheme -> (minimum point count, outline builder)
SCHEMES = {
    "ibug68": (68, _outline_ibug68),
    "polygon": (3, _outline_polygon),
}


@dataclass
class LandmarkSet:
    """Facial landmarks as an (N, 2) array of (x, y) pixel coordinates.

    ``scheme="ibug68"`` is the common 68-point layout (jaw 0-16, brows
    17-26). ``scheme="polygon"`` uses the points directly as the outline.
    """

    points: np.ndarray
    scheme: str = "ibug68"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
            raise ValueError(f"landmarks must be a non-empty (N, 2) array, got {pts.shape}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown landmark scheme {self.scheme!r}")
        required, _ = SCHEMES[self.scheme]
        if len(pts) < required:
            raise ValueError(
                f"scheme {self.scheme!r} needs {required} landmarks, got {len(pts)}"
            )
        self.points = pts

    def outline(self):
        return SCHEMES[self.scheme][1](self.points)

    def translate(self, dx, dy):
        return LandmarkSet(self.points + np.array([dx, dy]), self.scheme)


def load_landmarks(path, scheme=None):
    """Read a landmark file.

    Plain text files hold one ``x y`` pair per line. JSON files hold either a
    list of ``[x, y]`` pairs or ``{"points": [...], "scheme": "..."}``.
    """
    path = Path(path)
    text = path.read_text()
    file_scheme = None
    if path.suffix.lower() == ".json":
        data = json.loads(text)
        if isinstance(data, dict):
            file_scheme = data.get("scheme")
            data = data["points"]
        points = np.asarray(data, dtype=np.float64)
    else:
        rows = [line.split() for line in text.splitlines() if line.strip()]
        points = np.asarray(rows, dtype=np.float64)
    if scheme is None:
        scheme = file_scheme or ("ibug68" if len(points) >= 68 else "polygon")
    return LandmarkSet(points, scheme)


def save_landmarks(path, landmarks):
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(
            json.dumps({"scheme": landmarks.scheme, "points": landmarks.points.tolist()})
        )
    else:
        path.write_text("".join(f"{x:.6g} {y:.6g}\n" for x, y in landmarks.points))


def polygon_mask(vertices, shape):
    """Rasterize a closed polygon onto pixel centers.

    A pixel at integer (x, y) is set when that point lies inside the polygon
    (even-odd rule) or on its boundary.
    """
    h, w = shape
    v = np.asarray(vertices, dtype=np.float64)
    mask = np.zeros((h, w), dtype=bool)
    x0 = max(int(np.floor(v[:, 0].min())), 0)
    x1 = min(int(np.ceil(v[:, 0].max())), w - 1)
    y0 = max(int(np.floor(v[:, 1].min())), 0)
    y1 = min(int(np.ceil(v[:, 1].max())), h - 1)
    if x1 < x0 or y1 < y0:
        return mask
    py, px = np.mgrid[y0 : y1 + 1, x0 : x1 + 1].astype(np.float64)
    inside = np.zeros(px.shape, dtype=bool)
    on_edge = np.zeros(px.shape, dtype=bool)
    for (ax, ay), (bx, by) in zip(v, np.roll(v, -1, axis=0)):
        straddles = (ay > py) != (by > py)
        if ay != by:
            x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
            inside ^= straddles & (px < x_cross)
        cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        within = (
            (px >= min(ax, bx)) & (px <= max(ax, bx))
            & (py >= min(ay, by)) & (py <= max(ay, by))
        )
        on_edge |= within & (np.abs(cross) <= 1e-9 * max(1.0, abs(bx - ax) + abs(by - ay)))
    mask[y0 : y1 + 1, x0 : x1 + 1] = inside | on_edge
    return mask


def face_mask_from_landmarks(landmarks, image_size):
    h, w = image_size
    pts = landmarks.points
    if (pts[:, 0] < 0).any() or (pts[:, 0] > w - 1).any() or (pts[:, 1] < 0).any() or (
        pts[:, 1] > h - 1
    ).any():
        raise ValueError(f"landmarks fall outside the {h}x{w} image")
    return polygon_mask(landmarks.outline(), (h, w))


def exclude_transition(mask, alpha):
    """Drop the soft-alpha pixels from a face mask."""
    alpha = check_alpha(alpha)
    mask = check_mask(mask)
    check_same_size(mask, alpha, names=["mask", "alpha"])
    return mask & ~soft_region(alpha)


def default_sigma(landmarks):
    """0.12 x the diagonal of the face outline's bounding box, at least 3 px."""
    outline = landmarks.outline()
    extent = outline.max(axis=0) - outline.min(axis=0)
    return max(0.12 * float(np.hypot(*extent)), 3.0)


def feather_weights(mask, feather=DEFAULT_FEATHER):
    """Blend weight of the blurred image: 0 outside ``mask``, ramping to 1
    over ``feather`` pixels inside it."""
    mask = np.asarray(mask, dtype=bool)
    if feather <= 0:
        return mask.astype(np.float64)
    dist = ndimage.distance_transform_edt(mask)
    return np.clip(dist / (feather + 1.0), 0.0, 1.0)


def gaussian_blur(image, sigma):
    return ndimage.gaussian_filter(
        image, sigma=(sigma, sigma, 0), mode="reflect", truncate=TRUNCATE
    )


def blur_face(image, mask, sigma, feather=DEFAULT_FEATHER):
    """Gaussian-blur ``image`` inside ``mask``.

    Pixels outside the mask are copied through untouched, so for uint8 input
    every byte outside the mask is preserved.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"image must have shape (H, W, 3), got {image.shape}")
    mask = check_mask(mask, image.shape[:2])
    out = image.copy()
    if not mask.any():
        return out

    # blurring a crop padded by the kernel radius gives the same values
    # inside the mask as blurring the full frame
    radius = int(TRUNCATE * sigma + 0.5)
    ys, xs = np.nonzero(mask)
    y0, y1 = max(ys.min() - radius, 0), min(ys.max() + radius + 1, image.shape[0])
    x0, x1 = max(xs.min() - radius, 0), min(xs.max() + radius + 1, image.shape[1])
    crop = image[y0:y1, x0:x1].astype(np.float64)
    blurred = gaussian_blur(crop, sigma)

    sub_mask = mask[y0:y1, x0:x1]
    weight = feather_weights(sub_mask, feather)[sub_mask][:, None]
    mixed = weight * blurred[sub_mask] + (1.0 - weight) * crop[sub_mask]
    if image.dtype == np.uint8:
        mixed = np.clip(np.rint(mixed), 0, 255)
    region = out[y0:y1, x0:x1]
    region[sub_mask] = mixed.astype(image.dtype)
    return out


def anonymize(image, landmarks, alpha, sigma=None, feather=DEFAULT_FEATHER, mask=None):
    """Obfuscate the face in ``image``.

    ``mask`` overrides landmark-based mask generation (manually annotated
    faces). Returns the blurred image and the adjusted mask actually used.
    """
    image_arr = np.asarray(image)
    alpha = check_alpha(alpha)
    check_same_size(image_arr, alpha, names=["image", "alpha"])
    if mask is None:
        if landmarks is None:
            raise ValueError("either landmarks or a face mask is required")
        mask = face_mask_from_landmarks(landmarks, alpha.shape)
    else:
        mask = check_mask(mask, alpha.shape)
    adjusted = exclude_transition(mask, alpha)
    if sigma is None:
        if landmarks is not None:
            sigma = default_sigma(landmarks)
        elif mask.any():
            ys, xs = np.nonzero(mask)
            sigma = max(0.12 * float(np.hypot(np.ptp(xs), np.ptp(ys))), 3.0)
        else:
            sigma = 3.0
    return blur_face(image_arr, adjusted, sigma, feather), adjusted

"""Synthetic portrait fixtures shared by the test modules."""

import numpy as np

from p3m import io
from p3m.anonymize import LandmarkSet, save_landmarks
from p3m.core import composite
from p3m.data import DatasetManifest, Record
from p3m.network import P3MNetConfig

SLIM_CHANNELS = (8, 8, 16, 16, 32, 32)
SLIM_BLOCKS = (1, 1, 1, 1, 1)


def slim_config(**kw):
    return P3MNetConfig(channels=SLIM_CHANNELS, blocks=SLIM_BLOCKS, stem_kernel=3, **kw)


def smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3 - 2 * t)


def portrait(seed, size=64, soft=3.0, face=True):
    """Image, alpha and 68 landmarks of a synthetic head-and-shoulders shape.

    The alpha is a union of a head ellipse and a body ellipse with a soft
    edge ``soft`` pixels wide; landmarks trace a face inside the head that
    reaches into the soft band at the cheeks.
    """
    rng = np.random.default_rng(seed)
    h = w = size
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    cx = w * rng.uniform(0.4, 0.6)
    cy = h * rng.uniform(0.3, 0.4)
    rx, ry = w * rng.uniform(0.17, 0.22), h * rng.uniform(0.2, 0.25)
    head = 1 - np.hypot((xx - cx) / rx, (yy - cy) / ry)
    body = 1 - np.hypot((xx - w / 2) / (w * 0.4), (yy - h * 1.05) / (h * 0.4))
    dist = np.maximum(head * min(rx, ry), body * w * 0.4)
    alpha = smoothstep(dist / soft + 0.5)
    alpha = np.round(alpha * 255) / 255

    bg_color = rng.uniform(0, 1, 3)
    fg_color = rng.uniform(0, 1, 3)
    bg = np.clip(bg_color + 0.15 * np.sin(xx / 3.0 + rng.uniform(0, 6))[..., None], 0, 1)
    fg = np.clip(fg_color + 0.1 * np.cos(yy / 4.0)[..., None], 0, 1)
    image = np.round(composite(alpha, fg, bg) * 255) / 255

    lms = face_landmarks(cx, cy, rx * 1.0, ry * 0.85) if face else None
    return image, alpha, lms


def face_landmarks(cx, cy, rx, ry, offset=0.37):
    """68-point layout: jaw 0-16 along the lower half ellipse, brows 17-26,
    the remaining points scattered inside the face."""
    theta = np.pi - np.arange(17) * np.pi / 16
    jaw = np.stack([cx + rx * np.cos(theta), cy + ry * np.sin(theta)], axis=1)
    bx = np.linspace(cx - 0.8 * rx, cx + 0.8 * rx, 10)
    brows = np.stack([bx, cy - 0.45 * ry - 0.1 * ry * np.cos((bx - cx) / rx * np.pi / 2)], axis=1)
    inner_t = np.linspace(0, 2 * np.pi, 41, endpoint=False)
    inner = np.stack([cx + 0.4 * rx * np.cos(inner_t), cy + 0.4 * ry * np.sin(inner_t)], axis=1)
    return LandmarkSet(np.concatenate([jaw, brows, inner]) + offset, "ibug68")


def write_fixture_set(root, n, size=64, variant="blurred", split="train", seed=0,
                      blur=False, faces=True):
    """Write ``n`` portraits plus a manifest under ``root``; return the manifest.

    ``faces`` may be a bool or a per-image list. With ``blur`` the faces are
    anonymized before writing.
    """
    from p3m.anonymize import anonymize

    root.mkdir(parents=True, exist_ok=True)
    faces = [faces] * n if isinstance(faces, bool) else list(faces)
    records = []
    for i in range(n):
        image, alpha, lms = portrait(seed + i, size, face=faces[i])
        img_u8 = io.to_uint8(image)
        if blur and lms is not None:
            img_u8, _ = anonymize(img_u8, lms, alpha)
        stem = f"p{i:03d}"
        io.write_image(root / "image" / f"{stem}.png", img_u8)
        io.write_alpha(root / "alpha" / f"{stem}.png", alpha)
        lm_path = None
        if lms is not None:
            lm_path = root / "landmarks" / f"{stem}.txt"
            lm_path.parent.mkdir(parents=True, exist_ok=True)
            save_landmarks(lm_path, lms)
        records.append(Record(root / "image" / f"{stem}.png", root / "alpha" / f"{stem}.png",
                              landmarks=lm_path))
    manifest = DatasetManifest(records, split, variant)
    manifest.save(root / "manifest.csv")
    return manifest

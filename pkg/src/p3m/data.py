"""Dataset manifests and training-time augmentation."""

import csv
import os
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from . import io
from .validation import check_alpha, check_image, check_same_size

DATA_ROOT_ENV = "P3M_DATA_ROOT"

SPLITS = ("train", "test-P", "test-NP")
VARIANTS = ("blurred", "normal")
MANIFEST_COLUMNS = ["image", "alpha", "trimap", "landmarks", "mask", "split", "variant"]


class ManifestError(ValueError):
    pass


@dataclass
class Record:
    image: Path
    alpha: Path
    trimap: Path = None
    landmarks: Path = None
    mask: Path = None

    @property
    def name(self):
        return self.image.stem


@dataclass
class DatasetManifest:
    records: list
    split: str = "train"
    variant: str = "blurred"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ManifestError(f"unknown split {self.split!r}, expected one of {SPLITS}")
        if self.variant not in VARIANTS:
            raise ManifestError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        rec = self.records[i]
        image, alpha = io.read_image(rec.image), io.read_alpha(rec.alpha)
        check_same_size(image, alpha, names=[str(rec.image), str(rec.alpha)])
        return rec.name, image, alpha

    def subset(self, n):
        return DatasetManifest(self.records[:n], self.split, self.variant)

    def validate(self, check_sizes=True):
        """Raise ``ManifestError`` if a file is missing or sizes disagree."""
        for rec in self.records:
            paths = [p for p in (rec.image, rec.alpha, rec.trimap, rec.mask, rec.landmarks) if p]
            for p in paths:
                if not p.exists():
                    raise ManifestError(f"missing file {p}")
            if check_sizes:
                shapes = {
                    str(p): cv2.imread(str(p), cv2.IMREAD_UNCHANGED).shape[:2]
                    for p in (rec.image, rec.alpha, rec.trimap, rec.mask) if p
                }
                if len(set(shapes.values())) > 1:
                    raise ManifestError(f"spatial sizes differ: {shapes}")
        return self

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=MANIFEST_COLUMNS)
            writer.writeheader()
            for rec in self.records:
                writer.writerow({
                    "image": rec.image, "alpha": rec.alpha,
                    "trimap": rec.trimap or "", "landmarks": rec.landmarks or "",
                    "mask": rec.mask or "", "split": self.split, "variant": self.variant,
                })
        return path


def _resolve(value, base):
    if not value:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def load_manifest(path, validate=True):
    """Read a manifest CSV.

    Relative paths resolve against ``$P3M_DATA_ROOT`` when set, otherwise
    against the manifest's own directory.
    """
    path = Path(path)
    base = Path(os.environ.get(DATA_ROOT_ENV) or path.parent)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ManifestError(f"manifest {path} is empty")
    splits = {r["split"] for r in rows}
    variants = {r["variant"] for r in rows}
    if len(splits) != 1 or len(variants) != 1:
        raise ManifestError(f"manifest mixes splits {splits} or variants {variants}")
    records = [
        Record(*(_resolve(r.get(k), base) for k in ("image", "alpha", "trimap", "landmarks", "mask")))
        for r in rows
    ]
    manifest = DatasetManifest(records, splits.pop(), variants.pop())
    return manifest.validate() if validate else manifest


def build_manifest(image_dir, alpha_dir, split="train", variant="blurred",
                   trimap_dir=None, landmark_dir=None, mask_dir=None):
    """Pair files in parallel directories by file stem."""
    def by_stem(d, suffixes=None):
        if d is None:
            return {}
        files = io.list_images(d) if suffixes is None else sorted(
            p for p in Path(d).iterdir() if p.suffix.lower() in suffixes
        )
        return {p.stem: p for p in files}

    images = by_stem(image_dir)
    alphas = by_stem(alpha_dir)
    trimaps = by_stem(trimap_dir)
    masks = by_stem(mask_dir)
    landmarks = by_stem(landmark_dir, (".txt", ".json"))
    missing = sorted(set(images) - set(alphas))
    if missing:
        raise ManifestError(f"no alpha matte for {missing[:5]}")
    records = [
        Record(images[s], alphas[s], trimaps.get(s), landmarks.get(s), masks.get(s))
        for s in sorted(images)
    ]
    if not records:
        raise ManifestError(f"no images found in {image_dir}")
    return DatasetManifest(records, split, variant)


class ArrayDataset:
    """In-memory (image, alpha) pairs with the same interface as a manifest."""

    def __init__(self, images, alphas, names=None):
        if len(images) != len(alphas):
            raise ValueError("images and alphas differ in length")
        self.images = [check_image(im, min_side=0) for im in images]
        self.alphas = [check_alpha(a) for a in alphas]
        for im, a in zip(self.images, self.alphas):
            check_same_size(im, a, names=["image", "alpha"])
        self.names = list(names) if names is not None else [f"{i:05d}" for i in range(len(images))]

    def __len__(self):
        return len(self.images)

    def __getitem__(self, i):
        return self.names[i], self.images[i], self.alphas[i]

    def subset(self, n):
        return ArrayDataset(self.images[:n], self.alphas[:n], self.names[:n])


@dataclass(frozen=True)
class AugmentParams:
    crop: int
    top: int
    left: int
    flip: bool
    resized: tuple  # (H, W) after the small-image fallback resize


def sample_augment(shape, rng, crop_sizes=(512, 768, 1024), flip_prob=0.5):
    h, w = shape
    crop = int(rng.choice(crop_sizes))
    scale = max(1.0, crop / min(h, w))
    rh, rw = max(crop, int(round(h * scale))), max(crop, int(round(w * scale)))
    top = int(rng.integers(0, rh - crop + 1))
    left = int(rng.integers(0, rw - crop + 1))
    flip = bool(rng.random() < flip_prob)
    return AugmentParams(crop, top, left, flip, (rh, rw))


def _resize(arr, h, w):
    if arr.shape[:2] == (h, w):
        return arr
    return cv2.resize(arr, (w, h), interpolation=cv2.INTER_LINEAR)


def apply_augment(image, alpha, params, target_size=512):
    """Apply one set of geometric parameters to both image and alpha."""
    out = []
    for arr in (image, alpha):
        arr = _resize(arr, *params.resized)
        arr = arr[params.top : params.top + params.crop, params.left : params.left + params.crop]
        arr = _resize(arr, target_size, target_size)
        if params.flip:
            arr = arr[:, ::-1]
        out.append(np.clip(np.ascontiguousarray(arr), 0.0, 1.0))
    return out[0], out[1]


def augment(image, alpha, rng, crop_sizes=(512, 768, 1024), target_size=512, flip_prob=0.5):
    """Random square crop (size drawn from ``crop_sizes``), resize to
    ``target_size`` and random horizontal flip, identical for both inputs.

    Images whose shorter side is below the drawn crop size are first
    upscaled so that the shorter side equals it.
    """
    image = check_image(image, min_side=0)
    alpha = check_alpha(alpha)
    check_same_size(image, alpha, names=["image", "alpha"])
    params = sample_augment(alpha.shape, rng, crop_sizes, flip_prob)
    return apply_augment(image, alpha, params, target_size)

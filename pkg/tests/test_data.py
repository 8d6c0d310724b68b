import numpy as np
import pytest
from helpers import portrait, write_fixture_set

from p3m import io
from p3m.data import (DATA_ROOT_ENV, ArrayDataset, AugmentParams,
                      DatasetManifest, ManifestError, apply_augment, augment,
                      build_manifest, load_manifest, sample_augment)


def coordinate_pair(h, w):
    yy, xx = np.mgrid[0:h, 0:w]
    x, y = xx / (w - 1), yy / (h - 1)
    image = np.stack([x, y, 0.5 * np.ones_like(x)], axis=2)
    return image, x.copy()


def test_augment_is_deterministic_for_a_seed():
    image, alpha, _ = portrait(0, 96)
    a = augment(image, alpha, np.random.default_rng(11), (64, 80), 48)
    b = augment(image, alpha, np.random.default_rng(11), (64, 80), 48)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_flip_is_an_involution():
    image, alpha, _ = portrait(1, 64)
    params = AugmentParams(64, 0, 0, True, (64, 64))
    im1, a1 = apply_augment(image, alpha, params, 64)
    np.testing.assert_array_equal(im1[:, ::-1], image)
    np.testing.assert_array_equal(a1[:, ::-1], alpha)
    im2, a2 = apply_augment(im1, a1, params, 64)
    np.testing.assert_array_equal(im2, image)
    np.testing.assert_array_equal(a2, alpha)


def test_small_source_is_upscaled_then_cropped():
    image, alpha = coordinate_pair(600, 600)
    rng = np.random.default_rng(0)
    params = sample_augment(alpha.shape, rng, (768,), flip_prob=0.0)
    assert params.resized == (768, 768) and params.top == params.left == 0
    im, a = apply_augment(image, alpha, params, 512)
    assert im.shape == (512, 512, 3) and a.shape == (512, 512)
    # the image's x-coordinate channel and the alpha are transported identically
    np.testing.assert_allclose(im[..., 0], a, atol=1e-6)
    # the full source extent is retained: coordinates run edge to edge
    assert a[:, 0].max() < 0.01 and a[:, -1].min() > 0.99
    np.testing.assert_allclose(np.diff(a[256]), 1 / 511, atol=2e-3)


def test_random_crops_stay_aligned():
    image, alpha = coordinate_pair(120, 90)
    rng = np.random.default_rng(5)
    for _ in range(10):
        im, a = augment(image, alpha, rng, (64, 100, 128), 48, flip_prob=0.5)
        assert a.shape == (48, 48)
        np.testing.assert_allclose(im[..., 0], a, atol=1e-6)


def test_manifest_round_trip(tmp_path):
    manifest = write_fixture_set(tmp_path / "set", 3, size=32)
    loaded = load_manifest(tmp_path / "set" / "manifest.csv")
    assert len(loaded) == 3 and loaded.split == "train" and loaded.variant == "blurred"
    name, image, alpha = loaded[1]
    assert name == "p001" and image.shape == (32, 32, 3) and alpha.shape == (32, 32)
    assert [r.name for r in loaded.records] == [r.name for r in manifest.records]
    built = build_manifest(tmp_path / "set" / "image", tmp_path / "set" / "alpha",
                           landmark_dir=tmp_path / "set" / "landmarks")
    assert [r.landmarks.name for r in built.records] == ["p000.txt", "p001.txt", "p002.txt"]


def test_manifest_relative_paths_use_env_root(tmp_path, monkeypatch):
    write_fixture_set(tmp_path / "data", 2, size=32)
    csv_path = tmp_path / "lists" / "m.csv"
    csv_path.parent.mkdir()
    csv_path.write_text(
        "image,alpha,trimap,landmarks,mask,split,variant\n"
        "image/p000.png,alpha/p000.png,,,,test-P,normal\n"
    )
    with pytest.raises(ManifestError):
        load_manifest(csv_path)
    monkeypatch.setenv(DATA_ROOT_ENV, str(tmp_path / "data"))
    m = load_manifest(csv_path)
    assert m.split == "test-P" and m.records[0].image == tmp_path / "data" / "image" / "p000.png"


def test_manifest_rejects_mixed_variants(tmp_path):
    write_fixture_set(tmp_path, 1, size=32)
    path = tmp_path / "mixed.csv"
    path.write_text(
        "image,alpha,trimap,landmarks,mask,split,variant\n"
        "image/p000.png,alpha/p000.png,,,,train,blurred\n"
        "image/p000.png,alpha/p000.png,,,,train,normal\n"
    )
    with pytest.raises(ManifestError):
        load_manifest(path)
    with pytest.raises(ManifestError):
        DatasetManifest([], "train", "sharpened")


def test_manifest_detects_size_mismatch(tmp_path):
    manifest = write_fixture_set(tmp_path, 1, size=32)
    io.write_alpha(manifest.records[0].alpha, np.zeros((16, 16)))
    with pytest.raises(ManifestError):
        manifest.validate()


def test_build_manifest_requires_alpha(tmp_path):
    write_fixture_set(tmp_path, 2, size=32)
    (tmp_path / "alpha" / "p001.png").unlink()
    with pytest.raises(ManifestError):
        build_manifest(tmp_path / "image", tmp_path / "alpha")


def test_array_dataset():
    image, alpha, _ = portrait(3, 32)
    ds = ArrayDataset([image, image], [alpha, alpha])
    assert len(ds) == 2 and ds[1][0] == "00001" and len(ds.subset(1)) == 1
    with pytest.raises(ValueError):
        ArrayDataset([image], [alpha[:-1]])

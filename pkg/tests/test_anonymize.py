import numpy as np
import pytest
from helpers import face_landmarks, portrait

from p3m import io
from p3m.anonymize import (LandmarkSet, anonymize, blur_face, default_sigma,
                           exclude_transition, face_mask_from_landmarks,
                           load_landmarks, polygon_mask, save_landmarks)
from p3m.core import soft_region


def winding_number_inside(px, py, poly):
    """Pure-python winding-number test; boundary points count as inside."""
    n = len(poly)
    wn = 0
    for i in range(n):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % n]
        cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        if abs(cross) < 1e-9 and min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by):
            return True
        if ay <= py:
            if by > py and cross > 0:
                wn += 1
        elif by <= py and cross < 0:
            wn -= 1
    return wn != 0


def gaussian_conv_oracle(image, sigma, truncate=4.0):
    radius = int(truncate * sigma + 0.5)
    u = np.arange(-radius, radius + 1)
    g = np.exp(-0.5 * (u / sigma) ** 2)
    kernel = np.outer(g, g)
    kernel /= kernel.sum()
    pad = np.pad(image, ((radius, radius), (radius, radius), (0, 0)), mode="symmetric")
    h, w = image.shape[:2]
    out = np.zeros_like(image)
    for dy in range(2 * radius + 1):
        for dx in range(2 * radius + 1):
            out += kernel[dy, dx] * pad[dy : dy + h, dx : dx + w]
    return out


def square():
    return LandmarkSet([[10, 10], [20, 10], [20, 20], [10, 20]], "polygon")


def test_square_landmarks_fill_square():
    mask = face_mask_from_landmarks(square(), (32, 32))
    expected = np.zeros((32, 32), bool)
    expected[10:21, 10:21] = True
    np.testing.assert_array_equal(mask, expected)


@pytest.mark.parametrize("dx,dy", [(3, 0), (0, 5), (-4, 2), (7, -6)])
def test_mask_translates_with_landmarks(dx, dy):
    lms = face_landmarks(30.0, 28.0, 12.0, 10.0)
    base = face_mask_from_landmarks(lms, (64, 64))
    moved = face_mask_from_landmarks(lms.translate(dx, dy), (64, 64))
    np.testing.assert_array_equal(moved, np.roll(np.roll(base, dy, axis=0), dx, axis=1))


def test_68_point_mask_matches_point_in_polygon_scan():
    lms = face_landmarks(256.0, 230.0, 110.0, 130.0)
    mask = face_mask_from_landmarks(lms, (512, 512))
    outline = lms.outline()
    x0, y0 = np.floor(outline.min(axis=0)).astype(int)
    x1, y1 = np.ceil(outline.max(axis=0)).astype(int)
    expected = np.zeros((512, 512), bool)
    for y in range(y0, y1 + 1):
        for x in range(x0, x1 + 1):
            expected[y, x] = winding_number_inside(x, y, outline)
    assert mask.sum() == expected.sum()
    np.testing.assert_array_equal(mask, expected)


def test_68_point_mask_is_connected():
    from scipy import ndimage

    mask = face_mask_from_landmarks(face_landmarks(40.3, 30.1, 15.0, 12.0), (80, 80))
    assert ndimage.label(mask)[1] == 1


def test_landmark_validation():
    with pytest.raises(ValueError):
        LandmarkSet(np.zeros((10, 2)), "ibug68")
    with pytest.raises(ValueError):
        LandmarkSet(np.zeros((0, 2)), "polygon")
    with pytest.raises(ValueError):
        face_mask_from_landmarks(LandmarkSet([[0, 0], [40, 0], [0, 10]], "polygon"), (32, 32))


def test_landmark_files_round_trip(tmp_path):
    lms = face_landmarks(30.0, 30.0, 10.0, 12.0)
    for name in ("lm.txt", "lm.json"):
        save_landmarks(tmp_path / name, lms)
        back = load_landmarks(tmp_path / name)
        assert back.scheme == "ibug68"
        np.testing.assert_allclose(back.points, lms.points, atol=1e-4)
    (tmp_path / "sq.json").write_text("[[1, 1], [5, 1], [5, 5]]")
    assert load_landmarks(tmp_path / "sq.json").scheme == "polygon"


def test_exclude_transition_cases():
    mask = np.zeros((8, 8), bool)
    mask[2:6, 2:6] = True
    binary = (np.arange(64).reshape(8, 8) % 2).astype(float)
    np.testing.assert_array_equal(exclude_transition(mask, binary), mask)
    assert not exclude_transition(mask, np.full((8, 8), 0.5)).any()


def test_exclude_transition_elementwise():
    _, alpha, lms = portrait(1)
    mask = face_mask_from_landmarks(lms, alpha.shape)
    out = exclude_transition(mask, alpha)
    for (y, x), m in np.ndenumerate(mask):
        assert out[y, x] == (m and not (0 < alpha[y, x] < 1))
    assert (mask & ~out).any()
    with pytest.raises(ValueError):
        exclude_transition(mask, alpha[:-1])


def test_blur_empty_mask_is_identity():
    image = np.random.default_rng(0).random((20, 20, 3))
    out = blur_face(image, np.zeros((20, 20), bool), 2.0)
    np.testing.assert_array_equal(out, image)


def test_blur_constant_image_full_mask():
    image = np.full((24, 24, 3), 0.3)
    out = blur_face(image, np.ones((24, 24), bool), 3.0)
    np.testing.assert_allclose(out, 0.3, atol=1e-12)
    u8 = np.full((24, 24, 3), 77, np.uint8)
    np.testing.assert_array_equal(blur_face(u8, np.ones((24, 24), bool), 3.0), u8)


def test_blur_half_plane_against_direct_convolution():
    image = np.zeros((32, 40, 3))
    image[:, 20:] = 1.0
    image[..., 1] *= 0.5
    mask = np.zeros((32, 40), bool)
    mask[:, :22] = True
    sigma = 2.5
    out = blur_face(image, mask, sigma, feather=0)
    np.testing.assert_array_equal(out[:, 22:], image[:, 22:])
    reference = gaussian_conv_oracle(image, sigma)
    np.testing.assert_allclose(out[mask], reference[mask], atol=1e-6)


def test_blur_feather_blends_edge_only():
    rng = np.random.default_rng(4)
    image = rng.random((30, 30, 3))
    mask = np.zeros((30, 30), bool)
    mask[5:25, 5:25] = True
    hard = blur_face(image, mask, 2.0, feather=0)
    soft = blur_face(image, mask, 2.0, feather=2)
    np.testing.assert_array_equal(soft[~mask], image[~mask])
    np.testing.assert_allclose(soft[8:22, 8:22], hard[8:22, 8:22])
    # the outermost mask ring is a one-third blend
    np.testing.assert_allclose(soft[5, 10], image[5, 10] + (hard[5, 10] - image[5, 10]) / 3)


def test_blur_rejects_bad_sigma():
    with pytest.raises(ValueError):
        blur_face(np.zeros((8, 8, 3)), np.ones((8, 8), bool), 0.0)


def test_anonymize_binary_alpha_blurs_full_square():
    rng = np.random.default_rng(2)
    image = rng.random((32, 32, 3))
    alpha = np.ones((32, 32))
    out, adjusted = anonymize(image, square(), alpha, sigma=2.0, feather=0)
    expected = np.zeros((32, 32), bool)
    expected[10:21, 10:21] = True
    np.testing.assert_array_equal(adjusted, expected)
    assert (np.abs(out - image).max(axis=2) > 0)[expected].all()


def test_anonymize_soft_alpha_leaves_image_unchanged():
    image = np.random.default_rng(5).random((32, 32, 3))
    out, adjusted = anonymize(image, square(), np.full((32, 32), 0.4), sigma=2.0)
    assert not adjusted.any()
    np.testing.assert_array_equal(out, image)


def test_anonymize_changes_only_adjusted_mask():
    image, alpha, lms = portrait(7, size=96)
    img = io.to_uint8(image)
    out, adjusted = anonymize(img, lms, alpha)
    changed = (out != img).any(axis=2)
    assert changed.any()
    assert not (changed & ~adjusted).any()
    assert not (adjusted & soft_region(alpha)).any()


def test_manual_mask_override():
    image = np.random.default_rng(8).random((32, 32, 3))
    mask = np.zeros((32, 32), bool)
    mask[4:12, 4:12] = True
    out, adjusted = anonymize(image, None, np.ones((32, 32)), sigma=2.0, mask=mask)
    np.testing.assert_array_equal(adjusted, mask)
    np.testing.assert_array_equal(out[~mask], image[~mask])


def test_default_sigma_scales_with_face():
    small = default_sigma(face_landmarks(30, 30, 5, 5))
    large = default_sigma(face_landmarks(200, 200, 100, 120))
    assert small == 3.0
    outline = face_landmarks(200, 200, 100, 120).outline()
    ext = outline.max(0) - outline.min(0)
    assert large == pytest.approx(0.12 * np.hypot(*ext))


def test_polygon_mask_clipped_to_image():
    mask = polygon_mask([[-5, -5], [10, -5], [10, 10], [-5, 10]], (8, 8))
    assert mask.all()

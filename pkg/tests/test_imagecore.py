import numpy as np
import pytest
from PIL import Image as PilImage

from rclut.errors import DataError, EmptyImageError, UnsupportedImageError
from rclut.imagecore import (
    Colorspace,
    Image,
    bicubic_resize,
    load_png,
    pad_replicate,
    quantize_u8,
    rgb_to_ycbcr,
    rotate90,
    save_png,
    to_unit,
    ycbcr_to_rgb,
)


def _img(arr, cs=Colorspace.RGB):
    return Image(cs, np.asarray(arr, dtype=np.uint8))


# ---------------------------------------------------------------------------
# PNG round trips
# ---------------------------------------------------------------------------


def test_load_constant_rgb(tmp_path):
    data = np.zeros((2, 2, 3), np.uint8)
    data[..., 0] = 255
    save_png(_img(data), tmp_path / "red.png")
    img = load_png(tmp_path / "red.png")
    assert img.colorspace is Colorspace.RGB
    assert img.width == 2 and img.height == 2 and img.channels == 3
    assert (img.data == data).all()


def test_load_gray_single_pixel(tmp_path):
    save_png(_img(np.full((1, 1, 1), 128), Colorspace.GRAY), tmp_path / "g.png")
    img = load_png(tmp_path / "g.png")
    assert img.channels == 1
    assert img.colorspace is Colorspace.GRAY
    assert img.data[0, 0, 0] == 128


def test_roundtrip_random(tmp_path, rng):
    for shape, cs in (((5, 7, 3), Colorspace.RGB), ((4, 3, 1), Colorspace.GRAY)):
        data = rng.integers(0, 256, shape).astype(np.uint8)
        path = tmp_path / "t.png"
        save_png(Image(cs, data), path)
        back = load_png(path)
        assert (back.data == data).all()


def test_sixteen_bit_rejected(tmp_path):
    path = tmp_path / "deep.png"
    PilImage.fromarray(np.zeros((2, 2), np.uint16), mode="I;16").save(path)
    with pytest.raises(UnsupportedImageError):
        load_png(path)


def test_palette_rejected(tmp_path):
    path = tmp_path / "pal.png"
    pil = PilImage.fromarray(np.zeros((2, 2), np.uint8), mode="L").convert("P")
    pil.save(path)
    with pytest.raises(UnsupportedImageError):
        load_png(path)


def test_missing_file():
    with pytest.raises(DataError):
        load_png("/nonexistent/nope.png")


def test_corrupt_stream(tmp_path, rng):
    path = tmp_path / "c.png"
    save_png(_img(rng.integers(0, 256, (8, 8, 3)).astype(np.uint8)), path)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(DataError):
        load_png(path)


def test_save_empty_rejected():
    with pytest.raises(EmptyImageError):
        save_png(Image(Colorspace.GRAY, np.zeros((0, 0, 1), np.uint8)), "x.png")


def test_save_ycbcr_rejected(tmp_path):
    img = Image(Colorspace.YCBCR, np.full((2, 2, 3), 100, np.uint8))
    with pytest.raises(DataError):
        save_png(img, tmp_path / "y.png")


# ---------------------------------------------------------------------------
# color conversion
# ---------------------------------------------------------------------------


def test_ycbcr_anchors():
    white = _img(np.full((1, 1, 3), 255))
    black = _img(np.zeros((1, 1, 3)))
    assert (rgb_to_ycbcr(white).data[0, 0] == [255, 128, 128]).all()
    assert (rgb_to_ycbcr(black).data[0, 0] == [0, 128, 128]).all()
    assert (ycbcr_to_rgb(Image(Colorspace.YCBCR, np.array([[[255, 128, 128]]], np.uint8))).data[0, 0] == 255).all()
    assert (ycbcr_to_rgb(Image(Colorspace.YCBCR, np.array([[[0, 128, 128]]], np.uint8))).data[0, 0] == 0).all()


def test_pure_red_bt601():
    # independent evaluation of the full-range matrix at (255, 0, 0)
    r, g, b = 255.0, 0.0, 0.0
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    expect = [round(y), round(cb), min(255, int(np.floor(cr + 0.5)))]
    assert expect == [76, 85, 255]
    got = rgb_to_ycbcr(_img(np.array([[[255, 0, 0]]])))
    assert list(got.data[0, 0]) == expect


def test_roundtrip_error_bound_coarse_grid():
    # exhaustive 17^3 RGB lattice: double round trip within 2 levels/channel
    levels = np.minimum(np.arange(17) * 16, 255).astype(np.uint8)
    grid = np.stack(np.meshgrid(levels, levels, levels, indexing="ij"), axis=-1)
    img = Image(Colorspace.RGB, grid.reshape(1, -1, 3))
    back = ycbcr_to_rgb(rgb_to_ycbcr(img))
    diff = np.abs(back.data.astype(int) - img.data.astype(int))
    assert diff.max() <= 2


def test_wrong_colorspace_raises():
    gray = Image(Colorspace.GRAY, np.zeros((2, 2, 1), np.uint8))
    with pytest.raises(DataError):
        rgb_to_ycbcr(gray)
    rgb = _img(np.zeros((2, 2, 3)))
    with pytest.raises(DataError):
        ycbcr_to_rgb(rgb)


# ---------------------------------------------------------------------------
# bicubic resampling
# ---------------------------------------------------------------------------


def _keys_kernel(t, a=-0.5):
    t = abs(t)
    if t <= 1.0:
        return (a + 2) * t**3 - (a + 3) * t**2 + 1
    if t < 2.0:
        return a * t**3 - 5 * a * t**2 + 8 * a * t - 4 * a
    return 0.0


def _bicubic_oracle(plane, out_w, out_h):
    """Direct 2D kernel sum at every output pixel (edge replicate)."""
    in_h, in_w = plane.shape
    out = np.zeros((out_h, out_w))
    for oy in range(out_h):
        sy = (oy + 0.5) * in_h / out_h - 0.5
        by = int(np.floor(sy))
        for ox in range(out_w):
            sx = (ox + 0.5) * in_w / out_w - 0.5
            bx = int(np.floor(sx))
            acc = 0.0
            for dy in (-1, 0, 1, 2):
                wy = _keys_kernel(sy - (by + dy))
                yy = min(max(by + dy, 0), in_h - 1)
                for dx in (-1, 0, 1, 2):
                    wx = _keys_kernel(sx - (bx + dx))
                    xx = min(max(bx + dx, 0), in_w - 1)
                    acc += wy * wx * plane[yy, xx]
            out[oy, ox] = acc
    return np.clip(out, 0.0, 1.0)


def test_bicubic_constant_preserved():
    plane = np.full((6, 9), 0.5)
    for w, h in ((3, 2), (12, 18), (9, 6)):
        out = bicubic_resize(plane, w, h)
        assert np.abs(out - 0.5).max() < 1e-12


def test_bicubic_identity():
    rng = np.random.default_rng(0)
    plane = rng.uniform(0, 1, (7, 5))
    out = bicubic_resize(plane, 5, 7)
    assert np.abs(out - plane).max() < 1e-6


def test_bicubic_vs_direct_oracle():
    ramp = np.linspace(0, 1, 64).reshape(8, 8)
    got = bicubic_resize(ramp, 4, 4)
    want = _bicubic_oracle(ramp, 4, 4)
    assert np.abs(got - want).max() < 1e-6
    rng = np.random.default_rng(3)
    plane = rng.uniform(0, 1, (6, 7))
    for w, h in ((13, 9), (3, 4)):
        got = bicubic_resize(plane, w, h)
        want = _bicubic_oracle(plane, w, h)
        assert np.abs(got - want).max() < 1e-6


def test_bicubic_zero_size_rejected():
    with pytest.raises(DataError):
        bicubic_resize(np.zeros((4, 4)), 0, 4)


# ---------------------------------------------------------------------------
# padding and rotation
# ---------------------------------------------------------------------------


def test_pad_replicate_basics():
    one = np.array([[0.25]])
    assert (pad_replicate(one, 1, 1, 1, 1) == 0.25).all()
    plane = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert (pad_replicate(plane, 0, 0, 0, 0) == plane).all()
    padded = pad_replicate(plane, 0, 0, 1, 1)
    assert padded.shape == (3, 3)
    assert list(padded[2]) == [3.0, 4.0, 4.0]


def test_pad_then_crop_identity(rng):
    plane = rng.uniform(0, 1, (5, 8))
    for t, l, b, r in ((1, 2, 3, 0), (2, 2, 2, 2)):
        padded = pad_replicate(plane, t, l, b, r)
        crop = padded[t : padded.shape[0] - b, l : padded.shape[1] - r]
        assert (crop == plane).all()


def test_rotate90_definition():
    plane = np.arange(6, dtype=float).reshape(2, 3)
    rot = rotate90(plane, 1)
    assert rot.shape == (3, 2)
    rows, cols = plane.shape
    for r in range(rows):
        for c in range(cols):
            assert rot[cols - 1 - c, r] == plane[r, c]


def test_rotate90_composition(rng):
    plane = rng.uniform(0, 1, (4, 7))
    assert (rotate90(plane, 0) == plane).all()
    assert (rotate90(rotate90(plane, 2), 2) == plane).all()
    for k1 in range(4):
        for k2 in range(4):
            a = rotate90(rotate90(plane, k1), k2)
            b = rotate90(plane, k1 + k2)
            assert (a == b).all()
    for k in range(4):
        assert (rotate90(rotate90(plane, k), 4 - k) == plane).all()


def test_quantize_roundtrip(rng):
    u8 = rng.integers(0, 256, (5, 5)).astype(np.uint8)
    assert (quantize_u8(to_unit(u8)) == u8).all()

import numpy as np
import pytest

from dnavault.errors import ImageFormatError
from dnavault.imageio import decode_pnm, encode_pnm, merge_planes, read_raw, split_planes


def test_pgm_roundtrip():
    img = np.arange(12, dtype=np.uint8).reshape(3, 4)
    data = encode_pnm(img)
    assert data.startswith(b"P5\n4 3\n255\n")
    arr, w, h, ch = decode_pnm(data)
    assert (w, h, ch) == (4, 3, 1)
    assert np.array_equal(arr, img)


def test_pgm_with_comments_and_whitespace_raster():
    raster = bytes([10, 32, 13, 35])  # pixel values that look like whitespace / '#'
    data = b"P5 # made by hand\n# another\n2\t2\n255\n" + raster
    arr, w, h, _ = decode_pnm(data)
    assert arr.tobytes() == raster


def test_ppm_planes():
    rgb = np.random.default_rng(0).integers(0, 256, (5, 6, 3)).astype(np.uint8)
    arr, w, h, ch = decode_pnm(encode_pnm(rgb))
    assert ch == 3 and np.array_equal(arr, rgb)
    planes = split_planes(arr)
    assert all(p.shape == (5, 6) for p in planes)
    assert np.array_equal(merge_planes(planes), rgb)


@pytest.mark.parametrize("data", [
    b"P2\n2 2\n255\n1 2 3 4",
    b"P5\n2 2\n65535\n" + bytes(8),
    b"P5\n2 2\n255\n\x00\x01",
    b"P5\n2",
    b"P5\nx 2\n255\n" + bytes(4),
])
def test_bad_pnm(data):
    with pytest.raises(ImageFormatError):
        decode_pnm(data)


def test_raw(tmp_path):
    p = tmp_path / "img.raw"
    p.write_bytes(bytes(range(6)))
    assert read_raw(p, 3, 2).tolist() == [[0, 1, 2], [3, 4, 5]]
    with pytest.raises(ImageFormatError):
        read_raw(p, 4, 2)

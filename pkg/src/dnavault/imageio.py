"""Binary PGM (P5) / PPM (P6) and raw 8-bit image I/O."""

from pathlib import Path

import numpy as np

from .errors import ImageFormatError


def _tokens(data, count):
    """First ``count`` whitespace-separated header tokens and the offset after them."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise ImageFormatError("truncated PNM header")
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def decode_pnm(data):
    """Bytes of a P5/P6 file -> (array, width, height, channels)."""
    tokens, offset = _tokens(data, 4)
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"unsupported PNM type {magic!r} (need P5 or P6)")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ImageFormatError("non-numeric PNM header field") from exc
    if maxval != 255:
        raise ImageFormatError(f"only maxval 255 is supported, got {maxval}")
    if width < 1 or height < 1:
        raise ImageFormatError(f"bad dimensions {width}x{height}")
    channels = 1 if magic == b"P5" else 3
    size = width * height * channels
    raster = data[offset:offset + size]
    if len(raster) != size:
        raise ImageFormatError(f"raster truncated: expected {size} bytes, got {len(raster)}")
    arr = np.frombuffer(raster, dtype=np.uint8)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return arr.reshape(shape), width, height, channels


def encode_pnm(arr):
    arr = np.asarray(arr, dtype=np.uint8)
    if arr.ndim == 2:
        magic = b"P5"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"P6"
    else:
        raise ImageFormatError(f"cannot write array of shape {arr.shape} as PNM")
    height, width = arr.shape[:2]
    return magic + f"\n{width} {height}\n255\n".encode("ascii") + arr.tobytes()


def read_pnm(path):
    return decode_pnm(Path(path).read_bytes())


def write_pnm(path, arr):
    Path(path).write_bytes(encode_pnm(arr))


def read_raw(path, width, height):
    data = Path(path).read_bytes()
    if len(data) != width * height:
        raise ImageFormatError(f"{path}: {len(data)} bytes, expected {width}x{height} = {width * height}")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width)


def split_planes(rgb):
    """(H, W, 3) -> three contiguous (H, W) grayscale planes."""
    return [np.ascontiguousarray(rgb[:, :, c]) for c in range(3)]


def merge_planes(planes):
    return np.stack(planes, axis=-1)

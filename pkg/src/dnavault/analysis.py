"""Statistical checks on plaintext and ciphertext images.

Correlation uses every adjacent pair in a direction (no sampling) and the
raw-sums formula

    r = (n*Sxy - Sx*Sy) / (sqrt(n*Sxx - Sx^2) * sqrt(n*Syy - Sy^2))

evaluated in exact integer arithmetic up to the final division.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .cipher import encrypt, payload_bytes, render_cipher_image
from .errors import DegenerateVariance, DimensionMismatch
from .scramble import PATTERN_COUNT

DIRECTIONS = ("horizontal", "vertical", "diagonal")


@dataclass(frozen=True)
class CorrelationReport:
    direction: str
    r: float
    n: int


def adjacent_pairs(image, direction):
    img = np.asarray(image)
    if direction == "horizontal":
        return img[:, :-1], img[:, 1:]
    if direction == "vertical":
        return img[:-1, :], img[1:, :]
    if direction == "diagonal":
        return img[:-1, :-1], img[1:, 1:]
    raise ValueError(f"unknown direction {direction!r}")


def _as_image(image, width, height):
    arr = np.frombuffer(image, dtype=np.uint8) if isinstance(image, (bytes, bytearray)) else np.asarray(image)
    if arr.size != width * height:
        raise DimensionMismatch(f"{arr.size} values do not fill a {width}x{height} image")
    return arr.reshape(height, width)


def _dot(a, b):
    # int64 products overflow once values pass 2**16; fall back to python ints
    if max(a.max(initial=0), b.max(initial=0)) < 2**16 and a.size < 2**31:
        return int(np.dot(a, b))
    return sum(int(u) * int(v) for u, v in zip(a.tolist(), b.tolist()))


def correlation(image, width, height, direction):
    x, y = adjacent_pairs(_as_image(image, width, height), direction)
    n = x.size
    if n < 2:
        raise DimensionMismatch(f"fewer than 2 {direction} pairs in a {width}x{height} image")
    x = x.ravel().astype(np.int64)
    y = y.ravel().astype(np.int64)
    sx, sy = int(x.sum()), int(y.sum())
    sxy, sxx, syy = _dot(x, y), _dot(x, x), _dot(y, y)
    vx = n * sxx - sx * sx
    vy = n * syy - sy * sy
    if vx == 0 or vy == 0:
        raise DegenerateVariance(f"{direction} pairs have zero variance")
    r = (n * sxy - sx * sy) / (math.sqrt(vx) * math.sqrt(vy))
    return CorrelationReport(direction, max(-1.0, min(1.0, r)), n)


def histogram(data):
    arr = np.frombuffer(data, dtype=np.uint8) if isinstance(data, (bytes, bytearray)) else np.asarray(data, dtype=np.uint8)
    return np.bincount(arr.ravel(), minlength=256)


def histogram_distance(h1, h2):
    """Half the L1 distance between the normalised histograms, in [0, 1]."""
    h1 = np.asarray(h1, dtype=np.float64)
    h2 = np.asarray(h2, dtype=np.float64)
    if h1.sum() <= 0 or h2.sum() <= 0:
        raise ValueError("empty histogram")
    return min(1.0, 0.5 * float(np.abs(h1 / h1.sum() - h2 / h2.sum()).sum()))


@dataclass(frozen=True)
class AvalancheReport:
    flipped_bit: int
    cell_change_ratio: float
    bit_change_ratio: float


def flip_bit(pixels, bit_index):
    """Bit ``bit_index % 8`` (0 = LSB) of pixel ``bit_index // 8``."""
    out = bytearray(pixels)
    if not 0 <= bit_index < 8 * len(out):
        raise ValueError(f"bit index {bit_index} outside {len(out)} pixels")
    out[bit_index // 8] ^= 1 << (bit_index % 8)
    return bytes(out)


def compare_payloads(a, b):
    """(cell change ratio, bit change ratio) between two same-shape containers."""
    cells = float(np.mean(a.payload != b.payload))
    ba = np.frombuffer(payload_bytes(a.payload, a.pointer_width), dtype=np.uint8)
    bb = np.frombuffer(payload_bytes(b.payload, b.pointer_width), dtype=np.uint8)
    bits = float(np.unpackbits(ba ^ bb).mean())
    return cells, bits


def avalanche(pixels, width, height, bit_index, index, pattern, seed_a, seed_b, opts=None):
    pixels = bytes(pixels)
    a = encrypt(pixels, width, height, index, pattern, np.random.default_rng(seed_a), opts)
    b = encrypt(flip_bit(pixels, bit_index), width, height, index, pattern,
                np.random.default_rng(seed_b), opts)
    cells, bits = compare_payloads(a, b)
    return AvalancheReport(bit_index, cells, bits)


@dataclass(frozen=True)
class KeyspaceReport:
    key_count: int
    pattern_count: int
    min_multiplicity: int
    mean_multiplicity: float
    max_multiplicity: int
    mean_log2_choices: float

    @property
    def log2_key_pattern_combinations(self):
        return math.log2(self.key_count * self.pattern_count)


def keyspace_report(registry):
    """Key/pattern combinations plus substitution-level uncertainty.

    Multiplicity statistics are taken over the quadruples present in each
    key and averaged across keys.
    """
    if not len(registry):
        raise ValueError("registry is empty")
    mins, means, maxes, logs = [], [], [], []
    for key_id in registry:
        counts = registry[key_id].counts
        present = counts[counts > 0]
        mins.append(int(present.min()))
        means.append(float(present.mean()))
        maxes.append(int(present.max()))
        logs.append(float(np.log2(present).mean()))
    return KeyspaceReport(
        key_count=len(registry),
        pattern_count=PATTERN_COUNT,
        min_multiplicity=min(mins),
        mean_multiplicity=float(np.mean(means)),
        max_multiplicity=max(maxes),
        mean_log2_choices=float(np.mean(logs)),
    )


def analyze_pair(name, pixels, width, height, container, avalanche_report=None):
    """One CSV row per direction for a plaintext/ciphertext pair."""
    cipher_img = render_cipher_image(container)
    ch, cw = cipher_img.shape
    hist_d = histogram_distance(histogram(pixels), histogram(cipher_img))
    rows = []
    for direction in DIRECTIONS:
        rows.append({
            "image": name,
            "direction": direction,
            "r_plain": _r_or_flag(pixels, width, height, direction),
            "r_cipher": _r_or_flag(cipher_img, cw, ch, direction),
            "hist_distance": f"{hist_d:.6f}",
            "avalanche_cell_ratio": "" if avalanche_report is None else f"{avalanche_report.cell_change_ratio:.6f}",
            "avalanche_bit_ratio": "" if avalanche_report is None else f"{avalanche_report.bit_change_ratio:.6f}",
        })
    return rows


def _r_or_flag(image, width, height, direction):
    try:
        return f"{correlation(image, width, height, direction).r:.6f}"
    except (DegenerateVariance, DimensionMismatch) as exc:
        return f"degenerate:{type(exc).__name__}"


CSV_FIELDS = ("image", "direction", "r_plain", "r_cipher", "hist_distance",
              "avalanche_cell_ratio", "avalanche_bit_ratio")


def write_csv(rows, fh):
    writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
    writer.writeheader()
    writer.writerows(rows)


def histogram_image(hist, height=128):
    """Bar-chart rendering of a 256-bin histogram as a height x 256 grayscale image."""
    hist = np.asarray(hist, dtype=np.float64)
    peak = hist.max() or 1.0
    bars = np.round(hist / peak * height).astype(int)
    rows = np.arange(height)[:, None]
    return np.where(rows >= height - bars[None, :], 0, 255).astype(np.uint8)


def pointer_correlation(container, direction):
    """Correlation of adjacent pointer values in the stored grid (cell level)."""
    return correlation(container.payload, container.width, container.height, direction)

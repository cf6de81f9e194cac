"""Pixel <-> nucleotide coding.

Each 8-bit pixel becomes four nucleotides, most significant bit-pair first,
using the table C=00, T=01, A=10, G=11.  Internally nucleotides are kept as
their 2-bit codes in ``uint8`` arrays; the letter form is only used at the
edges (FASTA text, debugging, tests).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch

NUCLEOTIDES = "CTAG"
CODE_OF = {base: code for code, base in enumerate(NUCLEOTIDES)}

# 256-entry lookup: ASCII byte -> 2-bit code, 255 for anything else
_ASCII_TO_CODE = np.full(256, 255, dtype=np.uint8)
for _base, _code in CODE_OF.items():
    _ASCII_TO_CODE[ord(_base)] = _code
_CODE_TO_ASCII = np.frombuffer(NUCLEOTIDES.encode("ascii"), dtype=np.uint8)

_SHIFTS = np.array([6, 4, 2, 0], dtype=np.uint8)


def quad_from_byte(value):
    """0x1B -> 'CTAG'."""
    if not 0 <= value <= 255:
        raise ValueError(f"byte out of range: {value}")
    return "".join(NUCLEOTIDES[(value >> s) & 3] for s in (6, 4, 2, 0))


def byte_from_quad(quad):
    """'CTAG' -> 0x1B."""
    if len(quad) != 4:
        raise ValueError(f"quadruple must have 4 bases, got {quad!r}")
    value = 0
    for base in quad.upper():
        value = (value << 2) | CODE_OF[base]
    return value


def bases_to_codes(text):
    """Map a string of A/C/G/T to an array of 2-bit codes. Other letters raise."""
    raw = np.frombuffer(text.upper().encode("ascii"), dtype=np.uint8)
    codes = _ASCII_TO_CODE[raw]
    if (codes == 255).any():
        raise ValueError("sequence contains characters outside A/C/G/T")
    return codes


def codes_to_bases(codes):
    return _CODE_TO_ASCII[np.asarray(codes, dtype=np.uint8)].tobytes().decode("ascii")


def pack_quads(bases):
    """(N, 4) array of 2-bit codes -> N packed quadruple codes (0-255)."""
    bases = np.asarray(bases, dtype=np.uint8).reshape(-1, 4)
    return (bases << _SHIFTS).sum(axis=1, dtype=np.uint16).astype(np.uint8)


def unpack_quads(packed):
    packed = np.asarray(packed, dtype=np.uint8)
    return ((packed[:, None] >> _SHIFTS) & 3).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class DnaImage:
    width: int
    height: int
    bases: np.ndarray  # (width*height, 4) nucleotide codes, raster order

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise DimensionMismatch(f"image must be at least 1x1, got {self.width}x{self.height}")
        if self.bases.shape != (self.width * self.height, 4):
            raise DimensionMismatch(
                f"expected {self.width * self.height} quadruples, got array of shape {self.bases.shape}"
            )

    @property
    def quads(self):
        """Quadruples as 4-letter strings."""
        text = codes_to_bases(self.bases.ravel())
        return [text[i:i + 4] for i in range(0, len(text), 4)]

    def packed(self):
        return pack_quads(self.bases)

    def __eq__(self, other):
        if not isinstance(other, DnaImage):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and np.array_equal(
            self.bases, other.bases
        )


def _pixel_array(pixels):
    if isinstance(pixels, (bytes, bytearray, memoryview)):
        return np.frombuffer(pixels, dtype=np.uint8)
    arr = np.asarray(pixels)
    if arr.dtype != np.uint8:
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValueError("pixel values must lie in 0..255")
        arr = arr.astype(np.uint8)
    return arr.ravel()


def synthesize(pixels, width, height):
    """Raster pixel bytes -> DnaImage."""
    arr = _pixel_array(pixels)
    if arr.size != width * height:
        raise DimensionMismatch(f"{arr.size} pixels do not fill a {width}x{height} image")
    return DnaImage(width, height, unpack_quads(arr))


def rev_synthesize(dna):
    """DnaImage -> raster pixel bytes."""
    return pack_quads(dna.bases).tobytes()


def translate(quads):
    """Swap adjacent quadruples pairwise; an odd tail stays put.

    Works on lists (of strings, tuples, ...) and on numpy arrays along
    axis 0.  Applying it twice is the identity.
    """
    out = quads.copy() if isinstance(quads, np.ndarray) else list(quads)
    m = len(quads) - len(quads) % 2
    out[0:m:2] = quads[1:m:2]
    out[1:m:2] = quads[0:m:2]
    return out

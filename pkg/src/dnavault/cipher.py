"""Encryption pipeline and the DVLT ciphertext container.

Encrypt: synthesize -> translate -> pick a random key pointer per
quadruple -> scramble the pointer grid -> optionally re-pick the four corner
pointers so their offsets mod 16 carry (pattern, key_id).  Decrypt runs the
steps backwards and checks the plaintext CRC32.

Container layout, big-endian::

    0   4s  magic b"DVLT"
    4   B   version (1)
    5   B   flags, bit 0 = corner_embedded
    6   H   reserved, 0
    8   I   width
    12  I   height
    16  B   pointer_width (1..4)
    17  B   pattern id, or 0xFF = read from corners
    18  H   key_id, or 0xFFFF = read from corners
    20  I   CRC32 of the plaintext pixels
    24  ... width*height pointers, row-major in stored (scrambled) order,
            pointer_width bytes each
"""

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .codec import DnaImage, pack_quads, rev_synthesize, synthesize, translate, unpack_quads
from .errors import (
    ChecksumMismatch,
    MalformedContainer,
    NoConstrainedPosition,
    NotEmbedded,
    PointerOverflow,
    UnknownKey,
)
from .keystore import MAX_KEY_ID, crypt_select_constrained, crypt_select_many
from .rng import SystemRng
from .scramble import PATTERN_COUNT, check_pattern, descramble_cells, scramble_cells

MAGIC = b"DVLT"
VERSION = 1
HEADER = struct.Struct(">4sBBHIIBBHI")
HEADER_SIZE = HEADER.size
FLAG_CORNER = 0x01
PATTERN_FROM_CORNERS = 0xFF
KEY_FROM_CORNERS = 0xFFFF


@dataclass(frozen=True)
class EncryptOptions:
    pointer_width: int = 4
    corner_embed: bool = True
    seed: int | None = None

    def __post_init__(self):
        if not 1 <= self.pointer_width <= 4:
            raise ValueError(f"pointer_width must be 1..4, got {self.pointer_width}")


@dataclass(eq=False)
class CipherContainer:
    width: int
    height: int
    pointer_width: int
    pattern: int
    key_id: int
    corner_embedded: bool
    plaintext_crc32: int
    payload: np.ndarray  # int64 offsets, stored order

    def __eq__(self, other):
        if not isinstance(other, CipherContainer):
            return NotImplemented
        return self._fields() == other._fields() and np.array_equal(self.payload, other.payload)

    def _fields(self):
        return (
            self.width,
            self.height,
            self.pointer_width,
            self.pattern,
            self.key_id,
            self.corner_embedded,
            self.plaintext_crc32,
        )

    def corner_cells(self):
        """Stored-layout raster indices of TL, TR, BL, BR."""
        w, h = self.width, self.height
        return (0, w - 1, (h - 1) * w, h * w - 1)

    def metadata(self):
        """(pattern, key_id), from the corners when embedded, else the header."""
        if self.corner_embedded:
            return extract_corner_metadata(self)
        return self.pattern, self.key_id


def corner_nibbles(pattern, key_id):
    return (pattern, (key_id >> 8) & 0xF, (key_id >> 4) & 0xF, key_id & 0xF)


def extract_corner_metadata(container):
    if not container.corner_embedded:
        raise NotEmbedded("container carries its metadata in the header")
    if container.width < 2 or container.height < 2:
        raise MalformedContainer("corner embedding needs at least a 2x2 image")
    tl, tr, bl, br = (int(container.payload[i]) % 16 for i in container.corner_cells())
    return tl, (tr << 8) | (bl << 4) | br


def embed_corner_metadata(payload, width, height, index, pattern, key_id, rng):
    """Re-pick the corner pointers of a stored-order payload in place.

    Each corner keeps pointing at the same quadruple; only the occurrence
    changes, chosen so that ``offset % 16`` equals the nibble to carry.
    Raises NoConstrainedPosition (payload untouched) if any corner cannot
    be encoded.
    """
    if width < 2 or height < 2:
        raise NoConstrainedPosition("image too small for corner embedding")
    cells = (0, width - 1, (height - 1) * width, height * width - 1)
    picks = [
        crypt_select_constrained(index, index.quad_at(int(payload[cell])), rng, nibble)
        for cell, nibble in zip(cells, corner_nibbles(pattern, key_id))
    ]
    for cell, offset in zip(cells, picks):
        payload[cell] = offset
    return payload


def _crc(pixels):
    return zlib.crc32(pixels) & 0xFFFFFFFF


def encrypt(pixels, width, height, index, pattern, rng=None, opts=None):
    """Encrypt raster grayscale pixels into a CipherContainer."""
    opts = opts or EncryptOptions()
    pattern = check_pattern(pattern)
    if rng is None:
        rng = np.random.default_rng(opts.seed) if opts.seed is not None else SystemRng()
    key_id = index.key_id
    if not 0 <= key_id <= MAX_KEY_ID:
        raise ValueError(f"key_id out of range: {key_id}")
    max_offset = len(index.key) - 4
    if max_offset >= 1 << (8 * opts.pointer_width):
        raise PointerOverflow(
            f"key of {len(index.key)} bases needs pointers wider than {opts.pointer_width} byte(s)"
        )

    dna = synthesize(pixels, width, height)
    plain = rev_synthesize(dna)
    quads = pack_quads(translate(dna.bases))
    pointers = crypt_select_many(index, quads, rng)
    payload = scramble_cells(pointers, width, height, pattern).astype(np.int64)

    embedded = False
    if opts.corner_embed:
        try:
            embed_corner_metadata(payload, width, height, index, pattern, key_id, rng)
            embedded = True
        except NoConstrainedPosition:
            pass
    return CipherContainer(
        width=width,
        height=height,
        pointer_width=opts.pointer_width,
        pattern=PATTERN_FROM_CORNERS if embedded else pattern,
        key_id=KEY_FROM_CORNERS if embedded else key_id,
        corner_embedded=embedded,
        plaintext_crc32=_crc(plain),
        payload=payload,
    )


def decrypt(container, keys):
    """Recover the pixel bytes.  ``keys`` maps key_id -> KeyIndex."""
    pattern, key_id = container.metadata()
    if not 0 <= pattern < PATTERN_COUNT:
        raise MalformedContainer(f"pattern id {pattern} out of range")
    if key_id not in keys:
        raise UnknownKey(f"key_id {key_id} is not available")
    index = keys[key_id]
    payload = np.asarray(container.payload, dtype=np.int64)
    if payload.size != container.width * container.height:
        raise MalformedContainer("payload length does not match image dimensions")
    if payload.size and (payload.min() < 0 or payload.max() > len(index.key) - 4):
        raise MalformedContainer(f"pointer outside key {key_id} ({len(index.key)} bases)")

    pointers = descramble_cells(payload, container.width, container.height, pattern)
    dna = DnaImage(container.width, container.height, translate(dereference(index, pointers)))
    pixels = rev_synthesize(dna)
    if _crc(pixels) != container.plaintext_crc32:
        raise ChecksumMismatch("plaintext CRC32 mismatch: corrupted container or wrong key")
    return pixels


def dereference(index, pointers):
    """Pointers -> (N, 4) nucleotide codes."""
    return unpack_quads(index.windows[np.asarray(pointers, dtype=np.int64)])


def serialize(container):
    c = container
    payload = np.asarray(c.payload, dtype=np.int64)
    if payload.size != c.width * c.height:
        raise MalformedContainer("payload length does not match image dimensions")
    if payload.size and (payload.min() < 0 or payload.max() >= 1 << (8 * c.pointer_width)):
        raise MalformedContainer(f"pointer does not fit in {c.pointer_width} byte(s)")
    header = HEADER.pack(
        MAGIC,
        VERSION,
        FLAG_CORNER if c.corner_embedded else 0,
        0,
        c.width,
        c.height,
        c.pointer_width,
        c.pattern,
        c.key_id,
        c.plaintext_crc32,
    )
    return header + payload_bytes(payload, c.pointer_width)


def payload_bytes(payload, pointer_width):
    wide = np.asarray(payload, dtype=">u4").view(np.uint8).reshape(-1, 4)
    return wide[:, 4 - pointer_width:].tobytes()


def deserialize(data):
    data = bytes(data)
    if len(data) < HEADER_SIZE:
        raise MalformedContainer(f"truncated header: {len(data)} bytes")
    magic, version, flags, reserved, width, height, pw, pattern, key_id, crc = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MalformedContainer(f"bad magic {magic!r}")
    if version != VERSION:
        raise MalformedContainer(f"unsupported version {version}")
    if flags & ~FLAG_CORNER or reserved:
        raise MalformedContainer("reserved bits set")
    if not 1 <= pw <= 4:
        raise MalformedContainer(f"pointer_width {pw} not in 1..4")
    if width < 1 or height < 1:
        raise MalformedContainer(f"bad dimensions {width}x{height}")
    embedded = bool(flags & FLAG_CORNER)
    if embedded and (width < 2 or height < 2):
        raise MalformedContainer("corner flag set on an image smaller than 2x2")
    if not (pattern < PATTERN_COUNT or pattern == PATTERN_FROM_CORNERS):
        raise MalformedContainer(f"pattern byte {pattern:#x} invalid")
    if not (key_id <= MAX_KEY_ID or key_id == KEY_FROM_CORNERS):
        raise MalformedContainer(f"key_id field {key_id:#x} invalid")
    if not embedded and (pattern == PATTERN_FROM_CORNERS or key_id == KEY_FROM_CORNERS):
        raise MalformedContainer("metadata neither in header nor in corners")
    expected = HEADER_SIZE + width * height * pw
    if len(data) != expected:
        raise MalformedContainer(f"expected {expected} bytes, got {len(data)}")
    raw = np.frombuffer(data, dtype=np.uint8, offset=HEADER_SIZE).reshape(-1, pw)
    wide = np.zeros((raw.shape[0], 4), dtype=np.uint8)
    wide[:, 4 - pw:] = raw
    payload = wide.view(">u4").ravel().astype(np.int64)
    return CipherContainer(width, height, pw, pattern, key_id, embedded, crc, payload)


def render_cipher_image(container):
    """Payload bytes as a height x (width*pointer_width) 8-bit image."""
    raw = payload_bytes(container.payload, container.pointer_width)
    return np.frombuffer(raw, dtype=np.uint8).reshape(
        container.height, container.width * container.pointer_width
    )


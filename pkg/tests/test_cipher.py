import zlib

import numpy as np
import pytest

from dnavault.cipher import (
    HEADER_SIZE,
    KEY_FROM_CORNERS,
    PATTERN_FROM_CORNERS,
    CipherContainer,
    EncryptOptions,
    decrypt,
    deserialize,
    embed_corner_metadata,
    encrypt,
    extract_corner_metadata,
    render_cipher_image,
    serialize,
)
from dnavault.errors import (
    ChecksumMismatch,
    MalformedContainer,
    NotEmbedded,
    PointerOverflow,
    QuadrupleAbsent,
    UnknownKey,
)
from dnavault.keystore import KeySequence, build_index

GOLDEN_HEADER = bytes.fromhex(
    "44564c54"  # DVLT
    "01"        # version
    "00"        # flags
    "0000"      # reserved
    "00000002"  # width
    "00000002"  # height
    "04"        # pointer width
    "03"        # pattern
    "0012"      # key id
    "deadbeef"  # crc32
)


def container(**kw):
    base = dict(width=2, height=2, pointer_width=4, pattern=3, key_id=0x012, corner_embedded=False,
                plaintext_crc32=0xDEADBEEF, payload=np.array([1, 2, 3, 0x01020304], dtype=np.int64))
    base.update(kw)
    return CipherContainer(**base)


def test_golden_bytes():
    blob = serialize(container())
    assert blob[:HEADER_SIZE] == GOLDEN_HEADER
    assert blob[HEADER_SIZE:] == bytes.fromhex("00000001" "00000002" "00000003" "01020304")
    assert len(blob) == 24 + 16
    assert blob[:4] == b"DVLT"


def test_golden_corner_header():
    blob = serialize(container(pattern=PATTERN_FROM_CORNERS, key_id=KEY_FROM_CORNERS, corner_embedded=True))
    assert blob[5] == 1 and blob[17] == 0xFF and blob[18:20] == b"\xff\xff"


@pytest.mark.parametrize("pw", [1, 2, 3, 4])
def test_serialize_widths(pw):
    payload = np.array([0, 1, (1 << (8 * pw)) - 1, 5, 7, 9], dtype=np.int64)
    c = container(width=3, height=2, pointer_width=pw, payload=payload)
    blob = serialize(c)
    assert len(blob) == 24 + 6 * pw
    assert deserialize(blob) == c


def test_serialize_roundtrip_random():
    rng = np.random.default_rng(4)
    for _ in range(200):
        w, h = int(rng.integers(1, 20)), int(rng.integers(1, 20))
        pw = int(rng.integers(1, 5))
        embedded = bool(rng.integers(0, 2)) and w >= 2 and h >= 2
        c = CipherContainer(
            width=w, height=h, pointer_width=pw,
            pattern=PATTERN_FROM_CORNERS if embedded else int(rng.integers(0, 16)),
            key_id=KEY_FROM_CORNERS if embedded else int(rng.integers(0, 4096)),
            corner_embedded=embedded,
            plaintext_crc32=int(rng.integers(0, 2**32)),
            payload=rng.integers(0, 1 << (8 * pw), w * h),
        )
        assert deserialize(serialize(c)) == c


@pytest.mark.parametrize("mutate", [
    lambda b: b[:10],                       # truncated header
    lambda b: b[:-1],                       # truncated payload
    lambda b: b + b"\x00",                  # trailing bytes
    lambda b: b"XVLT" + b[4:],              # magic
    lambda b: b[:4] + b"\x02" + b[5:],      # version
    lambda b: b[:5] + b"\x02" + b[6:],      # unknown flag
    lambda b: b[:6] + b"\x00\x01" + b[8:],  # reserved
    lambda b: b[:16] + b"\x05" + b[17:],    # pointer width
    lambda b: b[:17] + b"\x10" + b[18:],    # pattern 16
    lambda b: b[:18] + b"\x10\x00" + b[20:],  # key id 4096
    lambda b: b[:17] + b"\xff" + b[18:],    # sentinel without corner flag
    lambda b: b[:8] + b"\x00\x00\x00\x00" + b[12:],  # zero width
])
def test_deserialize_rejects(mutate):
    with pytest.raises(MalformedContainer):
        deserialize(mutate(serialize(container())))


def test_encrypt_one_pixel_candidates():
    idx = build_index(KeySequence.from_text("ACGTACGT", 0))
    # pixel whose quadruple is ACGT: A=10 C=00 G=11 T=01
    pixel = bytes([0b10001101])
    for seed in range(20):
        c = encrypt(pixel, 1, 1, idx, 0, np.random.default_rng(seed), EncryptOptions(corner_embed=False))
        assert c.payload.tolist()[0] in {0, 4}
        assert decrypt(c, {0: idx}) == pixel


def test_small_image_falls_back_to_header(small_index, rng):
    c = encrypt(b"\x10\x20", 2, 1, small_index, 5, rng)
    assert not c.corner_embedded and c.pattern == 5 and c.key_id == small_index.key_id
    assert decrypt(c, {small_index.key_id: small_index}) == b"\x10\x20"


def test_corner_fallback_when_no_constrained_position(rng):
    # key too short to offer every residue mod 16
    idx = build_index(KeySequence.from_text("ACGTACGTAC", 2))
    pixels = bytes([0b10001101] * 4)  # ACGT everywhere
    c = encrypt(pixels, 2, 2, idx, 1, rng)
    assert not c.corner_embedded and (c.pattern, c.key_id) == (1, 2)
    assert decrypt(c, {2: idx}) == pixels


def test_roundtrip_all_patterns(small_index, rng):
    keys = {small_index.key_id: small_index}
    for w, h in [(1, 1), (3, 5), (8, 8), (17, 9), (24, 16)]:
        pixels = rng.integers(0, 256, w * h).astype(np.uint8).tobytes()
        for pid in range(16):
            for embed in (True, False):
                c = encrypt(pixels, w, h, small_index, pid, rng, EncryptOptions(corner_embed=embed))
                assert decrypt(c, keys) == pixels
                assert decrypt(deserialize(serialize(c)), keys) == pixels
                assert c.plaintext_crc32 == zlib.crc32(pixels)


def test_corner_metadata_layout():
    payload = np.zeros(16, dtype=np.int64)
    # corners of a 4x4 stored grid: 0, 3, 12, 15
    payload[[0, 3, 12, 15]] = [16 * 5 + 3, 16 * 9 + 0, 16 + 1, 2]
    c = container(width=4, height=4, corner_embedded=True, pattern=PATTERN_FROM_CORNERS,
                  key_id=KEY_FROM_CORNERS, payload=payload)
    assert extract_corner_metadata(c) == (3, 0x012)
    with pytest.raises(NotEmbedded):
        extract_corner_metadata(container())


def test_corner_all_fifteen(mbase_index, rng):
    c = encrypt(bytes(range(64)), 8, 8, mbase_index.with_key_id(4095), 15, rng)
    assert c.corner_embedded
    assert all(int(c.payload[i]) % 16 == 15 for i in c.corner_cells())
    assert extract_corner_metadata(c) == (15, 4095)


def test_embed_keeps_quadruples(small_index, rng):
    w, h = 9, 6
    payload = rng.integers(0, len(small_index.key) - 3, w * h)
    before = small_index.windows[payload].copy()
    embed_corner_metadata(payload, w, h, small_index, 11, 0xABC, rng)
    assert np.array_equal(small_index.windows[payload], before)
    c = container(width=w, height=h, corner_embedded=True, payload=payload)
    assert extract_corner_metadata(c) == (11, 0xABC)


def test_embedded_header_uses_sentinels(small_index, rng):
    c = encrypt(bytes(range(16)), 4, 4, small_index, 6, rng)
    assert c.corner_embedded
    assert (c.pattern, c.key_id) == (PATTERN_FROM_CORNERS, KEY_FROM_CORNERS)
    assert c.metadata() == (6, small_index.key_id)


def test_flipped_payload_byte_is_detected(small_index, rng):
    keys = {small_index.key_id: small_index}
    pixels = rng.integers(0, 256, 64).astype(np.uint8).tobytes()
    blob = bytearray(serialize(encrypt(pixels, 8, 8, small_index, 2, rng, EncryptOptions(corner_embed=False))))
    # flip the low bit of a mid-payload pointer: still in range, different window
    blob[HEADER_SIZE + 4 * 20 + 3] ^= 0x01
    with pytest.raises(ChecksumMismatch):
        decrypt(deserialize(bytes(blob)), keys)


def test_wrong_key_detected(small_index, mbase_index, rng):
    pixels = rng.integers(0, 256, 64).astype(np.uint8).tobytes()
    c = encrypt(pixels, 8, 8, small_index, 2, rng, EncryptOptions(corner_embed=False))
    impostor = mbase_index.with_key_id(small_index.key_id)
    with pytest.raises(ChecksumMismatch):
        decrypt(c, {small_index.key_id: impostor})


def test_unknown_key(small_index, rng):
    c = encrypt(b"\x01\x02\x03\x04", 2, 2, small_index, 0, rng)
    with pytest.raises(UnknownKey):
        decrypt(c, {})


def test_pointer_out_of_key_range(small_index, rng):
    c = encrypt(b"\x01\x02\x03\x04", 2, 2, small_index, 0, rng, EncryptOptions(corner_embed=False))
    c.payload[1] = len(small_index.key)
    with pytest.raises(MalformedContainer):
        decrypt(c, {small_index.key_id: small_index})


def test_quadruple_absent():
    idx = build_index(KeySequence.from_text("AAAAAAAA", 0))
    with pytest.raises(QuadrupleAbsent):
        encrypt(b"\x00", 1, 1, idx, 0, np.random.default_rng(0))


def test_pointer_overflow(small_index):
    with pytest.raises(PointerOverflow):
        encrypt(b"\x00", 1, 1, small_index, 0, np.random.default_rng(0), EncryptOptions(pointer_width=1))
    # 259 bases -> max offset 255 fits one byte
    idx = build_index(KeySequence.from_text("ACGT" * 64 + "ACG", 0))
    c = encrypt(bytes([0b10001101]), 1, 1, idx, 0, np.random.default_rng(0), EncryptOptions(pointer_width=1))
    assert len(serialize(c)) == 25


def test_bad_options():
    with pytest.raises(ValueError):
        EncryptOptions(pointer_width=5)


def test_seeded_determinism(small_index):
    pixels = bytes(range(256))
    a = encrypt(pixels, 16, 16, small_index, 4, opts=EncryptOptions(seed=9))
    b = encrypt(pixels, 16, 16, small_index, 4, opts=EncryptOptions(seed=9))
    assert a == b
    c = encrypt(pixels, 16, 16, small_index, 4, opts=EncryptOptions(seed=10))
    assert a != c


def test_default_rng_is_system(small_index):
    pixels = bytes(range(64))
    a = encrypt(pixels, 8, 8, small_index, 1)
    b = encrypt(pixels, 8, 8, small_index, 1)
    assert decrypt(a, {3: small_index}) == decrypt(b, {3: small_index}) == pixels
    assert not np.array_equal(a.payload, b.payload)


def test_reencryption_differs(small_index):
    # min multiplicity >= 100 -> per-cell collision chance <= 1%
    assert small_index.min_multiplicity >= 100
    pixels = np.random.default_rng(1).integers(0, 256, 64 * 64).astype(np.uint8).tobytes()
    a = encrypt(pixels, 64, 64, small_index, 7, np.random.default_rng(1))
    b = encrypt(pixels, 64, 64, small_index, 7, np.random.default_rng(2))
    assert np.mean(a.payload != b.payload) >= 0.99


def test_render_cipher_image():
    c = container()
    img = render_cipher_image(c)
    assert img.shape == (2, 8)
    assert img.tobytes() == serialize(c)[HEADER_SIZE:]
    assert img.size == c.width * c.height * c.pointer_width

"""Key DNA sequences: FASTA ingest, quadruple position index, pointer selection.

A key is a long nucleotide sequence.  Every overlapping 4-base window
(stride 1) is an occurrence of one of the 256 quadruples, so each pixel
value has many possible pointers into the key.
"""

import hashlib
import os
import shutil
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codec import bases_to_codes, byte_from_quad, codes_to_bases, quad_from_byte
from .errors import EmptyKey, NoConstrainedPosition, QuadrupleAbsent, RegistryError, UnknownKey

MAX_KEY_ID = 4095
MANIFEST_NAME = "keys.manifest"

_VALID = frozenset("ACGT")


@dataclass(frozen=True, eq=False)
class KeySequence:
    key_id: int
    bases: np.ndarray  # 2-bit nucleotide codes
    source_name: str = ""

    def __post_init__(self):
        if not 0 <= self.key_id <= MAX_KEY_ID:
            raise ValueError(f"key_id must be in 0..{MAX_KEY_ID}, got {self.key_id}")
        if len(self.bases) < 4:
            raise EmptyKey(f"key needs at least 4 bases, has {len(self.bases)}")

    def __len__(self):
        return len(self.bases)

    @property
    def text(self):
        return codes_to_bases(self.bases)

    def sha256(self):
        return hashlib.sha256(self.text.encode("ascii")).hexdigest()

    @classmethod
    def from_text(cls, text, key_id=0, source_name=""):
        return cls(key_id, bases_to_codes(text), source_name)


def ingest_fasta(text, key_id=0, source_name=""):
    """Parse FASTA (or bare sequence) text into a KeySequence.

    Header lines ('>' or ';') are skipped, letters uppercased, anything that
    is not A/C/G/T (N, IUPAC codes, digits, whitespace) is dropped.
    """
    kept = []
    for line in text.splitlines():
        if line.startswith((">", ";")):
            continue
        kept.append("".join(ch for ch in line.upper() if ch in _VALID))
    seq = "".join(kept)
    if len(seq) < 4:
        raise EmptyKey(f"{source_name or 'key'}: only {len(seq)} usable bases (need 4)")
    return KeySequence.from_text(seq, key_id, source_name)


def window_codes(bases):
    """Packed quadruple code of every overlapping 4-base window."""
    b = np.asarray(bases, dtype=np.uint8)
    return ((b[:-3] << 6) | (b[1:-2] << 4) | (b[2:-1] << 2) | b[3:]).astype(np.uint8)


def _quad_code(quad):
    return byte_from_quad(quad) if isinstance(quad, str) else int(quad)


@dataclass(frozen=True, eq=False)
class KeyIndex:
    """Position lists for all 256 quadruples of one key.

    ``order`` holds all window offsets grouped by quadruple code (ascending
    within each group); ``starts``/``counts`` slice it per code.
    """

    key: KeySequence
    windows: np.ndarray
    order: np.ndarray
    starts: np.ndarray
    counts: np.ndarray

    @property
    def key_id(self):
        return self.key.key_id

    @property
    def min_multiplicity(self):
        return int(self.counts.min())

    @property
    def complete(self):
        return bool((self.counts > 0).all())

    def positions(self, quad):
        code = _quad_code(quad)
        s = self.starts[code]
        return self.order[s:s + self.counts[code]]

    def quad_at(self, offset):
        return int(self.windows[offset])

    def with_key_id(self, key_id):
        """Same sequence and tables registered under another id."""
        key = KeySequence(key_id, self.key.bases, self.key.source_name)
        return KeyIndex(key, self.windows, self.order, self.starts, self.counts)


def build_index(key):
    windows = window_codes(key.bases)
    order = np.argsort(windows, kind="stable").astype(np.int64)
    counts = np.bincount(windows, minlength=256).astype(np.int64)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1])).astype(np.int64)
    for arr in (windows, order, counts, starts):
        arr.flags.writeable = False
    return KeyIndex(key, windows, order, starts, counts)


def detect(index, quad, start):
    """True iff ``quad`` occurs in the key at some offset >= ``start``."""
    if not 0 <= start < len(index.key):
        raise ValueError(f"start {start} outside key of length {len(index.key)}")
    pos = index.positions(quad)
    return bool(pos.size) and int(pos[-1]) >= start


def crypt_select(index, quad, rng):
    """One offset drawn uniformly from the occurrences of ``quad``."""
    pos = index.positions(quad)
    if not pos.size:
        raise QuadrupleAbsent(f"quadruple {_describe(quad)} does not occur in key {index.key_id}")
    return int(pos[int(rng.integers(0, pos.size))])


def crypt_select_many(index, codes, rng):
    """Vectorised crypt_select over an array of packed quadruple codes."""
    codes = np.asarray(codes, dtype=np.uint8)
    counts = index.counts[codes]
    if codes.size and (counts == 0).any():
        missing = sorted({int(c) for c in codes[counts == 0]})
        raise QuadrupleAbsent(
            f"{len(missing)} quadruple(s) absent from key {index.key_id}, e.g. {_describe(missing[0])}"
        )
    if not codes.size:
        return np.empty(0, dtype=np.int64)
    picks = np.asarray(rng.integers(0, counts), dtype=np.int64)
    return index.order[index.starts[codes] + picks]


def crypt_select_constrained(index, quad, rng, nibble):
    """Like crypt_select, restricted to offsets with ``offset % 16 == nibble``."""
    if not 0 <= nibble < 16:
        raise ValueError(f"nibble must be 0..15, got {nibble}")
    pos = index.positions(quad)
    if not pos.size:
        raise QuadrupleAbsent(f"quadruple {_describe(quad)} does not occur in key {index.key_id}")
    pos = pos[pos % 16 == nibble]
    if not pos.size:
        raise NoConstrainedPosition(
            f"no occurrence of {_describe(quad)} at offset = {nibble} (mod 16) in key {index.key_id}"
        )
    return int(pos[int(rng.integers(0, pos.size))])


def _describe(quad):
    return quad if isinstance(quad, str) else quad_from_byte(int(quad))


@dataclass(frozen=True)
class KeyReport:
    key_id: int
    length: int
    multiplicities: tuple
    min_multiplicity: int
    absent: int

    @property
    def complete(self):
        return self.absent == 0

    def summary(self):
        state = "complete" if self.complete else f"incomplete ({self.absent} absent quadruples)"
        return f"{state}, min_multiplicity={self.min_multiplicity}"


def validate_key(index):
    counts = index.counts
    return KeyReport(
        key_id=index.key_id,
        length=len(index.key),
        multiplicities=tuple(int(c) for c in counts),
        min_multiplicity=int(counts.min()),
        absent=int((counts == 0).sum()),
    )


class KeyRegistry(Mapping):
    """Directory of FASTA keys plus a ``keys.manifest`` sidecar.

    Manifest lines are ``<key_id> <filename> <sha256-of-bases>``.  Indexes
    are built lazily and cached; the registry maps key_id -> KeyIndex.
    """

    def __init__(self, root):
        self.root = Path(root)
        self._entries = {}
        self._cache = {}
        manifest = self.root / MANIFEST_NAME
        if manifest.exists():
            for lineno, line in enumerate(manifest.read_text().splitlines(), 1):
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 3:
                    raise RegistryError(f"{manifest}:{lineno}: expected '<key_id> <filename> <sha256>'")
                key_id = int(parts[0])
                if key_id in self._entries:
                    raise RegistryError(f"{manifest}:{lineno}: duplicate key_id {key_id}")
                self._entries[key_id] = (parts[1], parts[2])

    def __getitem__(self, key_id):
        if key_id not in self._entries:
            raise UnknownKey(f"key_id {key_id} not in registry {self.root}")
        if key_id not in self._cache:
            self._cache[key_id] = build_index(self.load_sequence(key_id))
        return self._cache[key_id]

    def __iter__(self):
        return iter(sorted(self._entries))

    def __len__(self):
        return len(self._entries)

    def __contains__(self, key_id):
        return key_id in self._entries

    def entry(self, key_id):
        return self._entries[key_id]

    def load_sequence(self, key_id):
        filename, digest = self._entries[key_id]
        key = ingest_fasta((self.root / filename).read_text(), key_id, filename)
        if key.sha256() != digest:
            raise RegistryError(f"key {key_id} ({filename}) does not match its manifest checksum")
        return key

    def add(self, fasta_path, key_id=None):
        fasta_path = Path(fasta_path)
        key = ingest_fasta(fasta_path.read_text(), 0, fasta_path.name)
        if key_id is None:
            key_id = max(self._entries, default=-1) + 1
        if not 0 <= key_id <= MAX_KEY_ID:
            raise RegistryError(f"key_id must be in 0..{MAX_KEY_ID}, got {key_id}")
        if key_id in self._entries:
            raise RegistryError(f"duplicate key_id {key_id}")
        self.root.mkdir(parents=True, exist_ok=True)
        filename = f"{key_id:04d}_{'_'.join(fasta_path.name.split())}"
        shutil.copyfile(fasta_path, self.root / filename)
        self._entries[key_id] = (filename, key.sha256())
        self._write_manifest()
        return key_id

    def _write_manifest(self):
        lines = [f"{k} {name} {digest}\n" for k, (name, digest) in sorted(self._entries.items())]
        tmp = self.root / (MANIFEST_NAME + ".tmp")
        tmp.write_text("".join(lines))
        os.replace(tmp, self.root / MANIFEST_NAME)

"""Block scrambling patterns.

Sixteen patterns are available, addressed by a pattern id:

    0-7   doubly-even magic square of order 8, dihedral variant k = id
    8-15  zigzag traversal of an 8x8 block, variant id - 8

Each pattern is a permutation ``perm`` of the 64 cells of a block.  The
scramble direction is a gather: output cell ``i`` takes input cell
``perm[i]``.  Images are cut into aligned 8x8 blocks; cells in partial
blocks along the right/bottom edges stay where they are.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, OrderNotDoublyEven

BLOCK = 8
PATTERN_COUNT = 16
MAGIC_PATTERNS = range(0, 8)
ZIGZAG_PATTERNS = range(8, 16)

CORNERS = ("TL", "TR", "BL", "BR")


@dataclass(frozen=True, eq=False)
class MagicGrid:
    n: int
    cells: np.ndarray  # (n, n) ints 1..n*n

    @property
    def magic_constant(self):
        return self.n * (self.n * self.n + 1) // 2

    def line_sums(self):
        """All row, column and both diagonal sums."""
        c = self.cells
        return np.concatenate([c.sum(axis=1), c.sum(axis=0), [np.trace(c), np.trace(c[:, ::-1])]])

    def is_magic(self):
        c = self.cells
        values_ok = np.array_equal(np.sort(c.ravel()), np.arange(1, self.n * self.n + 1))
        return values_ok and bool((self.line_sums() == self.magic_constant).all())


def magic_square(n):
    """Doubly-even magic square.

    Fill 1..n^2 in raster order, then replace v by n^2+1-v everywhere except
    on the two diagonals of each 4x4 sub-block.
    """
    if n < 4 or n % 4:
        raise OrderNotDoublyEven(f"order must be a positive multiple of 4, got {n}")
    i, j = np.indices((n, n))
    raster = i * n + j + 1
    keep = (i % 4 == j % 4) | ((i % 4) + (j % 4) == 3)
    return MagicGrid(n, np.where(keep, raster, n * n + 1 - raster))


def magic_variant(base, k):
    """Element k of the dihedral group applied to ``base``.

    k = 0..3 rotates k quarter turns counter-clockwise; k = 4..7 transposes
    first, then rotates k - 4 quarter turns.  k = 4 is the plain transpose.
    """
    if not 0 <= k < 8:
        raise ValueError(f"variant must be 0..7, got {k}")
    cells = base.cells.T if k >= 4 else base.cells
    return MagicGrid(base.n, np.ascontiguousarray(np.rot90(cells, k % 4)))


@dataclass(frozen=True, eq=False)
class ZigzagOrder:
    n: int
    visit: np.ndarray  # raster indices in traversal order


def _jpeg_zigzag(n):
    cells = []
    for s in range(2 * n - 1):
        rows = range(max(0, s - n + 1), min(s, n - 1) + 1)
        # even anti-diagonals run bottom-left -> top-right
        for r in (reversed(rows) if s % 2 == 0 else rows):
            cells.append((r, s - r))
    return cells


def zigzag_order(n, variant=0):
    """Zigzag traversal of an n x n block.

    ``variant // 2`` picks the start corner (TL, TR, BL, BR) and
    ``variant % 2`` the first step (0 = along the row, 1 = down the column).
    Variant 0 is the JPEG scan order.
    """
    if n < 1:
        raise ValueError(f"order must be >= 1, got {n}")
    if not 0 <= variant < 8:
        raise ValueError(f"variant must be 0..7, got {variant}")
    corner, column_first = divmod(variant, 2)
    visit = []
    for r, c in _jpeg_zigzag(n):
        if column_first:
            r, c = c, r
        if corner in (2, 3):
            r = n - 1 - r
        if corner in (1, 3):
            c = n - 1 - c
        visit.append(r * n + c)
    return ZigzagOrder(n, np.array(visit, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class BlockPermutation:
    n: int
    perm: np.ndarray
    inv: np.ndarray


def check_pattern(pattern):
    if not isinstance(pattern, (int, np.integer)) or not 0 <= pattern < PATTERN_COUNT:
        raise ValueError(f"pattern id must be 0..{PATTERN_COUNT - 1}, got {pattern!r}")
    return int(pattern)


@lru_cache(maxsize=None)
def pattern_permutation(pattern, n=BLOCK):
    pattern = check_pattern(pattern)
    if pattern < 8:
        perm = magic_variant(magic_square(n), pattern).cells.ravel() - 1
    else:
        perm = zigzag_order(n, pattern - 8).visit
    perm = np.asarray(perm, dtype=np.int64)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    perm.flags.writeable = False
    inv.flags.writeable = False
    return BlockPermutation(n, perm, inv)


def _permute_blocks(cells, width, height, table):
    arr = np.asarray(cells)
    if arr.ndim != 1 or arr.size != width * height:
        raise DimensionMismatch(f"{arr.size} cells do not fill a {width}x{height} image")
    out = arr.reshape(height, width).copy()
    hb, wb = height // BLOCK, width // BLOCK
    if hb and wb:
        full = out[:hb * BLOCK, :wb * BLOCK]
        blocks = full.reshape(hb, BLOCK, wb, BLOCK).swapaxes(1, 2).reshape(hb, wb, BLOCK * BLOCK)
        blocks = blocks[:, :, table]
        full[...] = blocks.reshape(hb, wb, BLOCK, BLOCK).swapaxes(1, 2).reshape(full.shape)
    return out.ravel()


def scramble_cells(cells, width, height, pattern):
    """Permute every full 8x8 block of a raster image with the given pattern."""
    return _permute_blocks(cells, width, height, pattern_permutation(pattern).perm)


def descramble_cells(cells, width, height, pattern):
    return _permute_blocks(cells, width, height, pattern_permutation(pattern).inv)

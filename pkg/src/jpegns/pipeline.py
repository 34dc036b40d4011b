"""Sparse linear operators of the development pipeline.

The pipeline maps a 26x26 patch of photo-sites (a 3x3 grid of 8x8 blocks
plus a one-photo-site border so that interior interpolation kernels never
truncate) to unquantized DCT coefficients of selected blocks:

    dct_coeffs = dct_op . block_select_op . interior_select_op . luminance_op

All vectorization is row-major.  Operators are kept as sparse
coordinate-list matrices and densified only for covariance products.
"""

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps

from .raw_io import BAYER_PATTERNS, DimensionError, UnknownCfaError

PATCH_SIDE = 26  # 3 * 8 + 2
BLOCK = 8

OPERATOR_KINDS = (
    "demosaic_r",
    "demosaic_g",
    "demosaic_b",
    "luminance",
    "selection",
    "permutation",
    "dct",
    "lowpass",
    "assembled",
)

# BT.601 luminance weights; they sum to exactly 1.0 in float64.
LUMA_WEIGHTS = {"r": 0.2126, "g": 0.7152, "b": 0.0722}

# Position of each named block in the 3x3 grid of 8x8 blocks.
GRID_POS = {
    "C": (1, 1),
    "NW": (0, 0),
    "N": (0, 1),
    "NE": (0, 2),
    "W": (1, 0),
    "E": (1, 2),
    "SW": (2, 0),
    "S": (2, 1),
    "SE": (2, 2),
}

# Conditioning neighbor labels per macro-lattice; the central block always
# comes first in the assembled ordering.
NEIGHBOR_LABELS = {
    "L1": (),
    "L2": ("NW", "NE", "SW", "SE"),
    "L3": ("N", "W", "E", "S"),
    "L4": ("NW", "N", "NE", "W", "E", "SW", "S", "SE"),
}


class PipelineError(Exception):
    """Operator construction failure."""


@dataclass(frozen=True)
class SparseOperator:
    """A sparse linear operator with a structural kind tag.

    Stored as CSR; ``entries()`` yields (row, col, value) triplets for
    inspection and CSV dumps.
    """

    kind: str
    rows: int
    cols: int
    matrix: sps.csr_matrix = field(repr=False)

    @classmethod
    def from_entries(cls, kind, rows, cols, triplets):
        if kind not in OPERATOR_KINDS:
            raise PipelineError(f"unknown operator kind {kind!r}")
        r, c, v = (np.asarray(x) for x in zip(*triplets)) if triplets else (
            np.empty(0, int), np.empty(0, int), np.empty(0, float))
        coo = sps.coo_matrix((v.astype(np.float64), (r, c)), shape=(rows, cols))
        if len(r) != len(set(zip(r.tolist(), c.tolist()))):
            raise PipelineError("duplicate (row, col) entry in sparse operator")
        return cls(kind=kind, rows=rows, cols=cols, matrix=coo.tocsr())

    @classmethod
    def from_csr(cls, kind, matrix):
        matrix = matrix.tocsr()
        return cls(kind=kind, rows=matrix.shape[0], cols=matrix.shape[1],
                   matrix=matrix)

    def entries(self):
        coo = self.matrix.tocoo()
        yield from zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())

    def apply(self, vec):
        return self.matrix @ np.asarray(vec, dtype=np.float64)

    def to_dense(self):
        return self.matrix.toarray()

    def compose(self, other, kind="assembled"):
        """self . other as a new operator."""
        if self.cols != other.rows:
            raise PipelineError("operator shapes do not chain")
        return SparseOperator.from_csr(kind, self.matrix @ other.matrix)

    def validate(self):
        """Check the structural invariants of this operator kind."""
        m = self.matrix
        if self.kind in ("permutation", "selection"):
            if not np.all(np.isin(m.data, (0.0, 1.0))):
                raise PipelineError(f"{self.kind} entries must be 0/1")
            per_row = np.diff(m.indptr)
            if np.any(per_row > 1):
                raise PipelineError(f"{self.kind} rows must have <= 1 entry")
        if self.kind.startswith("demosaic"):
            sums = np.asarray(m.sum(axis=1)).ravel()
            if not np.all(sums == 1.0):
                raise PipelineError(f"{self.kind} rows must sum to exactly 1")
        if self.kind == "lowpass":
            # Nine-tap rows hit numpy's unordered reduction, so exactness
            # cannot be promised here; the kernel itself is exactly 12/12.
            sums = np.asarray(m.sum(axis=1)).ravel()
            if np.abs(sums - 1.0).max() > 1e-12:
                raise PipelineError("lowpass rows must sum to 1")
        return self


@dataclass(frozen=True)
class PipelineMatrix:
    """The assembled patch-to-DCT operator for one conditioning neighborhood."""

    m: SparseOperator
    n_blocks: int
    patch_side: int
    block_order: tuple

    def __post_init__(self):
        if self.m.rows != self.n_blocks * 64 or self.m.cols != self.patch_side**2:
            raise PipelineError("assembled operator has inconsistent shape")

    def apply(self, vec):
        return self.m.apply(vec)


def cfa_grid(cfa, side):
    """(side, side) array of channel characters for the given Bayer layout."""
    if cfa not in BAYER_PATTERNS:
        raise UnknownCfaError(f"unknown CFA pattern {cfa!r}")
    tile = np.array([[cfa[0], cfa[1]], [cfa[2], cfa[3]]])
    reps = (side + 1) // 2
    return np.tile(tile, (reps, reps))[:side, :side]


def shift_cfa(cfa, dy, dx):
    """CFA pattern seen by a grid whose origin sits at offset (dy, dx)."""
    grid = cfa_grid(cfa, 4)
    sub = grid[dy % 2 : dy % 2 + 2, dx % 2 : dx % 2 + 2]
    return "".join(sub.ravel().tolist()).upper()


def _kernel_offsets(kind):
    if kind == "native":
        return [(0, 0)]
    if kind == "cross":
        return [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if kind == "hpair":
        return [(0, -1), (0, 1)]
    if kind == "vpair":
        return [(-1, 0), (1, 0)]
    if kind == "corner":
        return [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    raise PipelineError(f"unknown kernel kind {kind!r}")


def classify_site(grid, r, c, channel, green_kernel="cross"):
    """Interpolation kernel kind used to reconstruct ``channel`` at (r, c).

    The classification assumes the CFA is periodic beyond the grid edges, so
    it depends only on parity, and mirrors the full-image development path.
    """
    ch = channel.upper()
    side = grid.shape[0]

    def at(rr, cc):
        return grid[rr % side, cc % side]

    if at(r, c) == ch:
        return "native"
    if ch == "G" and green_kernel == "corner":
        return "corner"
    if all(at(r + dr, c + dc) == ch for dr, dc in _kernel_offsets("cross")):
        return "cross"
    if at(r, c - 1) == ch and at(r, c + 1) == ch:
        return "hpair"
    if at(r - 1, c) == ch and at(r + 1, c) == ch:
        return "vpair"
    if all(at(r + dr, c + dc) == ch for dr, dc in _kernel_offsets("corner")):
        return "corner"
    raise PipelineError(f"no interpolation rule for channel {ch} at ({r},{c})")


def _truncated_weights(offsets, r, c, side):
    """Kept (offset, weight) pairs with in-grid renormalization.

    Weights of out-of-grid taps are redistributed uniformly over the kept
    taps; the last weight is chosen so the kept weights sum to exactly 1.0.
    """
    kept = [(dr, dc) for dr, dc in offsets
            if 0 <= r + dr < side and 0 <= c + dc < side]
    if not kept:
        raise PipelineError("kernel entirely outside the grid")
    n = len(kept)
    if n == len(offsets):
        w = 1.0 / n
        return [(off, w) for off in kept]
    w = 1.0 / n
    partial = 0.0
    out = []
    for off in kept[:-1]:
        out.append((off, w))
        partial += w
    out.append((kept[-1], 1.0 - partial))
    return out


def build_demosaic(channel, cfa, side=PATCH_SIDE, green_kernel="cross"):
    """Bilinear demosaicking of one channel as a side^2 x side^2 operator.

    Row i holds the interpolation kernel reconstructing ``channel`` at
    photo-site i (row-major).  Native sites get an identity row; green uses
    the 4-neighbor cross kernel by default (``green_kernel="corner"``
    selects the 4-corner variant); red/blue use horizontal/vertical pairs at
    green sites and the 4-corner kernel at opposite-color sites.  Kernels
    truncated by the grid edge are renormalized to keep unit row sums.
    """
    channel = channel.lower()
    if channel not in ("r", "g", "b"):
        raise PipelineError(f"unknown channel {channel!r}")
    if side < 3:
        raise PipelineError("side must be >= 3")
    if green_kernel not in ("cross", "corner"):
        raise PipelineError(f"unknown green kernel {green_kernel!r}")
    grid = cfa_grid(cfa, side)
    triplets = []
    for r in range(side):
        for c in range(side):
            kind = classify_site(grid, r, c, channel, green_kernel)
            row = r * side + c
            if kind == "native":
                triplets.append((row, row, 1.0))
                continue
            for (dr, dc), w in _truncated_weights(_kernel_offsets(kind), r, c, side):
                triplets.append((row, (r + dr) * side + (c + dc), w))
    op = SparseOperator.from_entries(f"demosaic_{channel}", side**2, side**2, triplets)
    return op.validate()


def build_luminance(cfa, side=PATCH_SIDE, green_kernel="cross"):
    """BT.601 luminance of the demosaicked channels as one operator."""
    parts = [
        LUMA_WEIGHTS[ch] * build_demosaic(ch, cfa, side, green_kernel).matrix
        for ch in ("r", "g", "b")
    ]
    return SparseOperator.from_csr("luminance", parts[0] + parts[1] + parts[2])


def build_lowpass(side=PATCH_SIDE):
    """3x3 low-pass filter (1/12)[[1,1,1],[1,4,1],[1,1,1]] as an operator.

    Used only for covariance structure analysis; edge kernels are truncated
    and renormalized like the demosaicking kernels.
    """
    offsets = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)]
    base = {off: (4.0 / 12.0 if off == (0, 0) else 1.0 / 12.0) for off in offsets}
    triplets = []
    for r in range(side):
        for c in range(side):
            kept = [(off, base[off]) for off in offsets
                    if 0 <= r + off[0] < side and 0 <= c + off[1] < side]
            total = sum(w for _, w in kept)
            row = r * side + c
            partial = 0.0
            for off, w in kept[:-1]:
                wn = w / total
                triplets.append((row, (r + off[0]) * side + (c + off[1]), wn))
                partial += wn
            off = kept[-1][0]
            triplets.append((row, (r + off[0]) * side + (c + off[1]), 1.0 - partial))
    return SparseOperator.from_entries("lowpass", side**2, side**2, triplets).validate()


def build_selection(side=PATCH_SIDE, border=1):
    """Discard the outer ``border`` photo-sites: (side-2b)^2 x side^2 selector."""
    if side <= 2 * border:
        raise PipelineError("side must exceed twice the border")
    inner = side - 2 * border
    triplets = []
    for r in range(inner):
        for c in range(inner):
            triplets.append((r * inner + c, (r + border) * side + (c + border), 1.0))
    op = SparseOperator.from_entries("selection", inner**2, side**2, triplets)
    return op.validate()


def _block_selector(order, grid_n=3, area_side=None):
    """Stack per-block row-major selectors for blocks of an NxN block grid."""
    if area_side is None:
        area_side = grid_n * BLOCK
    seen = set()
    for (i, j) in order:
        if not (0 <= i < grid_n and 0 <= j < grid_n):
            raise PipelineError(f"block label {(i, j)} outside the grid")
        if (i, j) in seen:
            raise PipelineError(f"duplicate block label {(i, j)}")
        seen.add((i, j))
    triplets = []
    for b, (i, j) in enumerate(order):
        for u in range(BLOCK):
            for v in range(BLOCK):
                row = b * 64 + u * BLOCK + v
                col = (i * BLOCK + u) * area_side + (j * BLOCK + v)
                triplets.append((row, col, 1.0))
    op = SparseOperator.from_entries(
        "permutation", len(order) * 64, area_side**2, triplets)
    return op.validate()


def build_permutation(block_order):
    """Block extraction/permutation operator over the 3x3 grid of 8x8 blocks.

    ``block_order`` lists (i, j) grid positions; the result stacks the
    row-major vectorization of each selected block in that order.
    """
    return _block_selector(list(block_order), grid_n=3)


@functools.lru_cache(maxsize=None)
def dct_matrix():
    """The orthonormal 8-point DCT-II matrix (rows indexed by frequency)."""
    k = np.arange(BLOCK)
    x = np.arange(BLOCK)
    a = np.cos(np.pi * np.outer(k, 2 * x + 1) / (2 * BLOCK)) / 2.0
    a[0, :] /= np.sqrt(2.0)
    return a


def _transpose_permutation():
    """64x64 commutation matrix: vec of X^t from vec of X."""
    rows = np.arange(64)
    cols = 8 * (rows % 8) + rows // 8
    return sps.csr_matrix((np.ones(64), (rows, cols)), shape=(64, 64))


@functools.lru_cache(maxsize=None)
def _block_dct_dense():
    """Cached single-block 64x64 DCT operator on row-major vectorized blocks."""
    a = dct_matrix()
    av = sps.block_diag([sps.csr_matrix(a)] * BLOCK, format="csr")
    tr = _transpose_permutation()
    tb = av @ tr @ av @ tr
    return tb.toarray()


def _dct_op(n_blocks):
    tb = sps.csr_matrix(_block_dct_dense())
    return SparseOperator.from_csr(
        "dct", sps.block_diag([tb] * n_blocks, format="csr"))


def build_dct(n_blocks):
    """Blockwise 2-D DCT on n row-major-vectorized 8x8 blocks (n in 1/5/9)."""
    if n_blocks not in (1, 5, 9):
        raise PipelineError("n_blocks must be one of 1, 5, 9")
    return _dct_op(n_blocks)


@functools.lru_cache(maxsize=None)
def assemble(neighborhood, cfa, green_kernel="cross"):
    """Assemble the full patch-to-DCT operator for one conditioning neighborhood.

    ``neighborhood`` is "L1".."L4"; the block order is the central block
    followed by the lattice's conditioning neighbors.  ``cfa`` is the layout
    of the 26x26 patch grid itself.
    """
    if neighborhood not in NEIGHBOR_LABELS:
        raise PipelineError(f"unknown neighborhood {neighborhood!r}")
    labels = ("C",) + NEIGHBOR_LABELS[neighborhood]
    order = [GRID_POS[lbl] for lbl in labels]
    lum = build_luminance(cfa, PATCH_SIDE, green_kernel)
    sel = build_selection(PATCH_SIDE, 1)
    perm = _block_selector(order, grid_n=3)
    dct = _dct_op(len(order))
    m = dct.compose(perm).compose(sel).compose(lum)
    return PipelineMatrix(
        m=SparseOperator.from_csr("assembled", m.matrix),
        n_blocks=len(order),
        patch_side=PATCH_SIDE,
        block_order=labels,
    )


def patch_cfa_for_image(image_cfa):
    """CFA of a block-neighborhood patch cut from an image with this layout.

    Patches start one photo-site before a block boundary, i.e. at odd image
    coordinates, so the patch grid sees the image CFA shifted by (1, 1).
    """
    return shift_cfa(image_cfa, 1, 1)


def block_support_tensor(image_cfa, green_kernel="cross"):
    """(64, 10, 10) pipeline weights of one 8x8 block on its own photo-sites.

    Entry [coeff, u, v] is the weight of the photo-site at offset
    (u - 1, v - 1) from the block's top-left corner in DCT coefficient
    ``coeff`` (row-major frequency order).  The tensor is identical for
    every block of the image because blocks start at even coordinates.
    """
    pm = assemble("L1", patch_cfa_for_image(image_cfa), green_kernel)
    dense = pm.m.to_dense().reshape(64, PATCH_SIDE, PATCH_SIDE)
    support = dense[:, 8:18, 8:18].copy()
    rest = dense.copy()
    rest[:, 8:18, 8:18] = 0.0
    if np.any(rest != 0.0):
        raise PipelineError("block support wider than 10x10 photo-sites")
    return support

"""Quantization tables, cover development and coefficient-plane file I/O.

Covers are developed with the same bilinear demosaicking and BT.601
luminance as the pipeline operators, level-shifted by half the dynamic
range, transformed blockwise by the 2-D DCT and quantized with the
standard luminance table scaled by the conventional quality-factor rule.
Rounding is half-away-from-zero to match the sampler's bin convention.

Coefficient planes round-trip through a minimal binary container (magic
"JCNS") rather than an entropy-coded JFIF bitstream.
"""

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import pipeline
from .raw_io import DimensionError

# Standard reference luminance quantization table.
STANDARD_LUMINANCE_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)

_MAGIC = b"JCNS"
_VERSION = 1
_ROLES = ("cover", "stego")


class CoefficientsError(Exception):
    """Coefficient plane construction or I/O failure."""


class FormatError(CoefficientsError):
    """Bad magic, version or structural field."""


class TruncationError(CoefficientsError):
    """File shorter than its header promises."""


class ChecksumError(CoefficientsError):
    """CRC32 footer mismatch."""


@dataclass(frozen=True)
class QuantTable:
    """8x8 quantization steps for one quality factor."""

    steps: np.ndarray
    qf: int

    def __post_init__(self):
        s = np.asarray(self.steps, dtype=np.int64)
        if s.shape != (8, 8) or np.any(s < 1):
            raise CoefficientsError("quantization steps must be 8x8 and >= 1")
        object.__setattr__(self, "steps", s)

    @property
    def flat(self):
        """Steps in the row-major coefficient order used by the chain."""
        return self.steps.ravel()


def quant_table(qf):
    """Standard luminance table scaled by the conventional quality rule.

    scale = 5000/qf below 50 else 200 - 2 qf; steps are
    floor((table * scale + 50) / 100) clamped to >= 1, so qf = 100 yields
    the all-ones table and qf = 50 the reference table itself.
    """
    if not (1 <= qf <= 100):
        raise CoefficientsError("quality factor must be in 1..100")
    scale = 5000 // qf if qf < 50 else 200 - 2 * qf
    steps = (STANDARD_LUMINANCE_TABLE * scale + 50) // 100
    return QuantTable(steps=np.maximum(steps, 1), qf=int(qf))


@dataclass
class JpegCoefficients:
    """Quantized 8x8-blocked DCT coefficient plane.

    ``coeffs`` has shape (blocks_h, blocks_w, 8, 8) with integer entries;
    magnitudes must fit the int16 container format.
    """

    coeffs: np.ndarray
    table: QuantTable
    role: str = "cover"

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.ndim != 4 or c.shape[2:] != (8, 8):
            raise CoefficientsError("coefficients must be (bh, bw, 8, 8)")
        if not np.issubdtype(c.dtype, np.integer):
            raise CoefficientsError("coefficients must be integers")
        if np.any(np.abs(c) > 32767):
            raise CoefficientsError("coefficient magnitude exceeds int16 range")
        if self.role not in _ROLES:
            raise CoefficientsError(f"unknown role {self.role!r}")
        self.coeffs = c.astype(np.int32)

    @property
    def blocks_h(self):
        return self.coeffs.shape[0]

    @property
    def blocks_w(self):
        return self.coeffs.shape[1]

    def plane(self):
        """The coefficient plane in image layout (blocks_h*8, blocks_w*8)."""
        bh, bw = self.blocks_h, self.blocks_w
        return self.coeffs.transpose(0, 2, 1, 3).reshape(bh * 8, bw * 8)

    @classmethod
    def from_plane(cls, plane, table, role="cover"):
        plane = np.asarray(plane)
        h, w = plane.shape
        if h % 8 or w % 8:
            raise DimensionError("plane dimensions must be multiples of 8")
        blocks = plane.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)
        return cls(coeffs=blocks.copy(), table=table, role=role)


def round_half_away_array(x):
    """Elementwise round half away from zero."""
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _padded_channel_grid(cfa, height, width):
    """Channel labels on the replicate-padded grid, CFA continued periodically."""
    rows = (np.arange(-1, height + 1) % 2)[:, None]
    cols = (np.arange(-1, width + 1) % 2)[None, :]
    lut = np.array([[cfa[0], cfa[1]], [cfa[2], cfa[3]]])
    return lut[rows, cols]


def demosaic_image(data, cfa, green_kernel="cross"):
    """Bilinear demosaicking of a full mosaic; returns (r, g, b) planes.

    The image is replicate-padded by one photo-site and the CFA extended
    periodically, matching the patch operators exactly, so kernels never
    truncate.
    """
    data = np.asarray(data, dtype=np.float64)
    h, w = data.shape
    pad = np.pad(data, 1, mode="edge")
    grid = _padded_channel_grid(cfa, h, w)

    ctr = pad[1:-1, 1:-1]
    north, south = pad[:-2, 1:-1], pad[2:, 1:-1]
    west, east = pad[1:-1, :-2], pad[1:-1, 2:]
    nw, ne = pad[:-2, :-2], pad[:-2, 2:]
    sw, se = pad[2:, :-2], pad[2:, 2:]

    cross = 0.25 * (north + south + west + east)
    hpair = 0.5 * (west + east)
    vpair = 0.5 * (north + south)
    corner = 0.25 * (nw + ne + sw + se)

    out = []
    for ch in ("R", "G", "B"):
        is_ch = grid == ch
        native = is_ch[1:-1, 1:-1]
        m_n, m_s = is_ch[:-2, 1:-1], is_ch[2:, 1:-1]
        m_w, m_e = is_ch[1:-1, :-2], is_ch[1:-1, 2:]
        use_cross = m_n & m_s & m_w & m_e
        use_h = m_w & m_e & ~use_cross
        use_v = m_n & m_s & ~use_cross
        plane = np.where(native, ctr, corner)
        if ch == "G" and green_kernel == "corner":
            out.append(plane)
            continue
        plane = np.where(use_cross & ~native, cross, plane)
        plane = np.where(use_h & ~native, hpair, plane)
        plane = np.where(use_v & ~native, vpair, plane)
        out.append(plane)
    return tuple(out)


def luminance_image(data, cfa, green_kernel="cross"):
    """Demosaic and reduce to BT.601 luminance."""
    r, g, b = demosaic_image(data, cfa, green_kernel)
    w = pipeline.LUMA_WEIGHTS
    return w["r"] * r + w["g"] * g + w["b"] * b


def blockwise_dct(plane):
    """2-D DCT of every 8x8 block of a plane (same scaling as the operators)."""
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    if h % 8 or w % 8:
        raise DimensionError("plane dimensions must be multiples of 8")
    a = pipeline.dct_matrix()
    blocks = plane.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)
    coeffs = np.einsum("ij,bcjk,lk->bcil", a, blocks, a, optimize=True)
    return coeffs.transpose(0, 2, 1, 3).reshape(h, w)


def develop_cover(raw, qf, green_kernel="cross"):
    """Develop a RAW image into (unquantized DCT plane, cover coefficients).

    The luminance plane is level-shifted by 2**(bit_depth-1) before the
    DCT; quantization divides by the table steps and rounds half away from
    zero.  The stego signal is zero-mean, so the shift affects the cover
    path only.
    """
    if raw.height % 8 or raw.width % 8:
        raise DimensionError("image dimensions must be multiples of 8")
    luma = luminance_image(raw.data, raw.cfa, green_kernel)
    shift = float(2 ** (raw.bit_depth - 1))
    dct_plane = blockwise_dct(luma - shift)
    table = quant_table(qf)
    steps = np.tile(table.steps, (raw.height // 8, raw.width // 8))
    quantized = round_half_away_array(dct_plane / steps).astype(np.int32)
    cover = JpegCoefficients.from_plane(quantized, table, role="cover")
    return dct_plane, cover


def nzac_count(c):
    """Number of nonzero AC coefficients (63 non-DC positions per block)."""
    ac = c.coeffs.reshape(c.blocks_h, c.blocks_w, 64)[:, :, 1:]
    return int(np.count_nonzero(ac))


def write_coeffs(c, path):
    """Write a coefficient plane in the JCNS container.

    Layout: magic "JCNS", version u8, role u8, blocks_h u32, blocks_w u32,
    qf u8 (all big-endian), int16 big-endian coefficients in image-plane
    row-major order, CRC32 footer over everything before it.
    """
    plane = c.plane()
    if np.any(np.abs(plane) > 32767):
        raise FormatError("coefficients exceed int16 range")
    header = _MAGIC + struct.pack(
        ">BBIIB", _VERSION, _ROLES.index(c.role), c.blocks_h, c.blocks_w,
        c.table.qf)
    body = plane.astype(">i2").tobytes()
    crc = zlib.crc32(header + body) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)
        fh.write(struct.pack(">I", crc))


def read_coeffs(path):
    """Read a JCNS container back into JpegCoefficients."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 15:
        raise TruncationError("file shorter than the fixed header")
    if buf[:4] != _MAGIC:
        raise FormatError("bad magic")
    version, role_idx, bh, bw, qf = struct.unpack(">BBIIB", buf[4:15])
    if version != _VERSION:
        raise FormatError(f"unsupported version {version}")
    if role_idx >= len(_ROLES):
        raise FormatError(f"unknown role byte {role_idx}")
    expected = 15 + bh * bw * 64 * 2 + 4
    if len(buf) < expected:
        raise TruncationError(f"expected {expected} bytes, found {len(buf)}")
    if len(buf) > expected:
        raise FormatError("trailing bytes after checksum")
    crc_stored = struct.unpack(">I", buf[-4:])[0]
    if zlib.crc32(buf[:-4]) & 0xFFFFFFFF != crc_stored:
        raise ChecksumError("CRC32 mismatch")
    plane = np.frombuffer(buf[15:-4], dtype=">i2").reshape(bh * 8, bw * 8)
    return JpegCoefficients.from_plane(
        plane.astype(np.int32), quant_table(qf), role=_ROLES[role_idx])

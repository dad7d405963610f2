"""Intensity rasters and the shared resampling substrate.

Images are single-channel float64 arrays with intensities in [0, 255].
Transforms act on center-origin coordinates; this module owns the
conversion to raster indices (origin at the top-left pixel center).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DimensionMismatch, EmptyOverlap, ImageTooSmall
from .geometry import Homography

_MIN_PYRAMID_SIDE = 32


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Immutable single-channel raster, row-major, intensities in [0, 255]."""

    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError(f"expected a 2-D raster, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("non-finite intensity")
        if d.min() < 0.0 or d.max() > 255.0:
            raise ValueError("intensity outside [0, 255]")

    @classmethod
    def from_array(cls, a) -> "GrayImage":
        d = np.ascontiguousarray(a, dtype=np.float64)
        d.setflags(write=False)
        return cls(d)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def center(self) -> tuple[float, float]:
        """Center of the pixel grid, raster coordinates."""
        return (self.width - 1) / 2.0, (self.height - 1) / 2.0


@dataclass(frozen=True, eq=False)
class WarpedImage:
    """A resampled raster plus its validity mask (True where the source
    footprint was fully inside the source domain).  Intensities under
    False entries are zero and must never enter similarity sums."""

    image: GrayImage
    mask: np.ndarray

    def __post_init__(self):
        if self.mask.shape != self.image.data.shape:
            raise DimensionMismatch("mask and image dimensions differ")

    @property
    def valid_count(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True, eq=False)
class JointHistogram:
    """B x B joint intensity counts with the sample total."""

    bins: np.ndarray
    total: int

    def marginal_a(self) -> np.ndarray:
        return self.bins.sum(axis=1)

    def marginal_b(self) -> np.ndarray:
        return self.bins.sum(axis=0)


def sample_bilinear(img: GrayImage, x: float, y: float):
    """Bilinear blend of the 4 neighbors at raster point (x, y), or None
    when the neighborhood is not fully inside the domain."""
    vals, _, _, ok = kernels.sample_points(
        img.data, np.array([x], dtype=np.float64),
        np.array([y], dtype=np.float64))
    return float(vals[0]) if ok[0] else None


def centered_to_raster(h: Homography, out_w: int, out_h: int,
                       src_w: int, src_h: int) -> np.ndarray:
    """Raster-space 3x3 for a centered-coordinates map from an out_w x
    out_h frame into a src_w x src_h frame."""
    t_out = np.array([[1.0, 0.0, -(out_w - 1) / 2.0],
                      [0.0, 1.0, -(out_h - 1) / 2.0],
                      [0.0, 0.0, 1.0]])
    t_src = np.array([[1.0, 0.0, (src_w - 1) / 2.0],
                      [0.0, 1.0, (src_h - 1) / 2.0],
                      [0.0, 0.0, 1.0]])
    return t_src @ h.m @ t_out


def warp(src: GrayImage, h: Homography, out_w: int, out_h: int) -> WarpedImage:
    """Resample `src` over an out_w x out_h output grid.

    `h` maps output coordinates to source coordinates (center-origin on
    both sides).  Output pixels whose source position is degenerate or
    outside the source domain are masked False and set to zero.
    """
    m = centered_to_raster(h, out_w, out_h, src.width, src.height)
    out, mask = kernels.warp_bilinear(src.data, np.ascontiguousarray(m),
                                      out_h, out_w)
    return WarpedImage(image=GrayImage.from_array(out), mask=mask)


def gradient(img: GrayImage) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel intensity derivatives (gx, gy): central differences in
    the interior, one-sided at the borders."""
    if img.width < 3 or img.height < 3:
        raise ImageTooSmall("gradient needs at least 3x3")
    gy, gx = np.gradient(img.data, edge_order=1)
    return gx, gy


def _binomial_blur(data: np.ndarray) -> np.ndarray:
    """Separable [1, 4, 6, 4, 1]/16 blur with edge replication."""
    out = data
    for axis in (0, 1):
        p = np.moveaxis(np.pad(np.moveaxis(out, axis, 0), ((2, 2), (0, 0)),
                               mode="edge"), 0, axis)
        s = [np.moveaxis(np.moveaxis(p, axis, 0)[k:k + data.shape[axis]], 0, axis)
             for k in range(5)]
        out = (s[0] + 4.0 * s[1] + 6.0 * s[2] + 4.0 * s[3] + s[4]) / 16.0
    return out


def pyramid(img: GrayImage, levels: int) -> list[GrayImage]:
    """Coarse-to-fine stack: level 0 is the input, each further level is
    binomially blurred and decimated by 2.  Raster index i at level l+1
    corresponds to index 2*i at level l."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    w, h = img.width, img.height
    for _ in range(levels - 1):
        w = (w + 1) // 2
        h = (h + 1) // 2
    if w < _MIN_PYRAMID_SIDE or h < _MIN_PYRAMID_SIDE:
        raise ImageTooSmall(
            f"coarsest level {w}x{h} below {_MIN_PYRAMID_SIDE}x{_MIN_PYRAMID_SIDE}")
    out = [img]
    for _ in range(levels - 1):
        blurred = _binomial_blur(out[-1].data)
        out.append(GrayImage.from_array(blurred[::2, ::2]))
    return out


def joint_histogram(a: GrayImage, b: WarpedImage, bins: int = 64) -> JointHistogram:
    """Joint counts of (a, b.image) over b's validity mask."""
    if a.data.shape != b.image.data.shape:
        raise DimensionMismatch("images differ in size")
    total = b.valid_count
    if total == 0:
        raise EmptyOverlap("no valid pixel in overlap")
    counts = kernels.joint_hist(a.data, b.image.data, b.mask, bins)
    return JointHistogram(bins=counts, total=total)


# ---------------------------------------------------------------------------
# File I/O.  Binary PGM (P5, maxval 255) is the canonical fixture format;
# grayscale or color PNG is accepted on input (color reduced by the fixed
# luminance combination 0.299 R + 0.587 G + 0.114 B).

def to_uint8(img: GrayImage) -> np.ndarray:
    return np.clip(np.rint(img.data), 0, 255).astype(np.uint8)


def write_pgm(path, img: GrayImage) -> None:
    raw = to_uint8(img)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.width} {img.height}\n255\n".encode("ascii"))
        fh.write(raw.tobytes())


def _read_pgm(path) -> GrayImage:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # Header: magic, width, height, maxval; '#' comments allowed.
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = tokens
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    return GrayImage.from_array(raster.reshape(h, w))


def _read_png(path) -> GrayImage:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("L", "I;16", "I"):
            arr = np.asarray(im.convert("L"), dtype=np.float64)
        else:
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
            arr = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return GrayImage.from_array(np.clip(arr, 0.0, 255.0))


def read_image(path) -> GrayImage:
    p = Path(path)
    suffix = p.suffix.lower()
    if suffix == ".pgm":
        return _read_pgm(p)
    if suffix == ".png":
        return _read_png(p)
    raise ValueError(f"{path}: unsupported image format (PGM/PNG only)")


def write_png(path, img: GrayImage) -> None:
    from PIL import Image

    Image.fromarray(to_uint8(img), mode="L").save(path)


def write_image(path, img: GrayImage) -> None:
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        write_pgm(path, img)
    elif suffix == ".png":
        write_png(path, img)
    else:
        raise ValueError(f"{path}: unsupported image format (PGM/PNG only)")

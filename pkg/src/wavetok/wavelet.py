"""Color transform and multi-level 2D Haar analysis/synthesis.

The transform is the orthonormal Haar butterfly on disjoint 2x2 blocks
``{a b; c d}``:

    ll = (a + b + c + d) / 2      lh = (a + b - c - d) / 2
    hl = (a - b + c - d) / 2      hh = (a - b - c + d) / 2

which is orthogonal (the 4x4 matrix is a Hadamard matrix over 2), so
reconstruction is exact and coefficient energy equals pixel energy.
Dimensions must be divisible by 2^levels; there is no boundary padding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError

# ITU-R BT.601 luma weights.
_KR, _KG, _KB = 0.299, 0.587, 0.114


@dataclass(frozen=True)
class YCbCrImage:
    """Luma plus two zero-centered chroma planes of equal shape."""

    y: np.ndarray
    cb: np.ndarray
    cr: np.ndarray

    def __post_init__(self):
        if not (self.y.ndim == self.cb.ndim == self.cr.ndim == 2):
            raise DimensionError("YCbCrImage planes must be 2-D")
        if not (self.y.shape == self.cb.shape == self.cr.shape):
            raise DimensionError(
                f"YCbCrImage planes disagree: {self.y.shape}, {self.cb.shape}, {self.cr.shape}"
            )

    @property
    def height(self) -> int:
        return self.y.shape[0]

    @property
    def width(self) -> int:
        return self.y.shape[1]

    def stack(self) -> np.ndarray:
        """Planes as one (3, H, W) array, order (y, cb, cr)."""
        return np.stack([self.y, self.cb, self.cr])

    @classmethod
    def from_stack(cls, stack: np.ndarray) -> "YCbCrImage":
        if stack.ndim != 3 or stack.shape[0] != 3:
            raise DimensionError(f"expected (3, H, W) stack, got {stack.shape}")
        return cls(stack[0], stack[1], stack[2])


@dataclass(frozen=True)
class DetailBands:
    """Channel-stacked LH/HL/HH coefficient planes of one level, each (3, h, w)."""

    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray

    def __post_init__(self):
        if not (self.lh.shape == self.hl.shape == self.hh.shape):
            raise DimensionError("detail bands disagree in shape")


@dataclass(frozen=True)
class SubbandPyramid:
    """L-level decomposition: one LL stack at the coarsest scale plus per-level details.

    ``details[0]`` is level 1 (finest); ``details[levels-1]`` is the coarsest.
    The subband at level l has spatial dims (height/2^l, width/2^l).
    """

    levels: int
    ll: np.ndarray
    details: tuple[DetailBands, ...]
    height: int
    width: int

    def detail(self, level: int) -> DetailBands:
        """Detail bands of wavelet level ``level`` (1 = finest)."""
        if not 1 <= level <= self.levels:
            raise ValueError(f"level {level} outside 1..{self.levels}")
        return self.details[level - 1]


def _as_plane_stack(rgb) -> np.ndarray:
    try:
        arr = np.asarray(rgb, dtype=float) if not isinstance(rgb, np.ndarray) else rgb
    except ValueError as exc:
        raise DimensionError(f"planes do not stack: {exc}") from exc
    if arr.dtype == object:
        raise DimensionError("planes do not share dimensions")
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise DimensionError(f"expected three planes, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("plane values must be finite")
    return arr


def rgb_to_ycbcr(rgb) -> YCbCrImage:
    """BT.601 RGB -> YCbCr with zero-centered chroma (no +0.5 offset).

    Keeping chroma centered keeps the map linear, so detail subbands of an
    achromatic image vanish exactly.
    """
    arr = _as_plane_stack(rgb)
    r, g, b = arr[0], arr[1], arr[2]
    y = _KR * r + _KG * g + _KB * b
    cb = 0.5 * (b - y) / (1.0 - _KB)
    cr = 0.5 * (r - y) / (1.0 - _KR)
    return YCbCrImage(y, cb, cr)


def ycbcr_to_rgb(image: YCbCrImage) -> np.ndarray:
    """Inverse of :func:`rgb_to_ycbcr`; returns a (3, H, W) stack."""
    y, cb, cr = image.y, image.cb, image.cr
    r = y + 2.0 * (1.0 - _KR) * cr
    b = y + 2.0 * (1.0 - _KB) * cb
    g = (y - _KR * r - _KB * b) / _KG
    return np.stack([r, g, b])


def dwt2_level(plane: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """One orthonormal Haar analysis step on the last two axes.

    Accepts any leading axes (a (3, h, w) channel stack transforms channel-wise).
    Height and width must be even.
    """
    plane = np.asarray(plane)
    h, w = plane.shape[-2], plane.shape[-1]
    if h % 2 or w % 2:
        raise DimensionError(f"dwt2_level needs even dims, got {h}x{w}")
    a = plane[..., 0::2, 0::2]
    b = plane[..., 0::2, 1::2]
    c = plane[..., 1::2, 0::2]
    d = plane[..., 1::2, 1::2]
    ll = (a + b + c + d) * 0.5
    lh = (a + b - c - d) * 0.5
    hl = (a - b + c - d) * 0.5
    hh = (a - b - c + d) * 0.5
    return ll, lh, hl, hh


def idwt2_level(
    ll: np.ndarray, lh: np.ndarray, hl: np.ndarray, hh: np.ndarray
) -> np.ndarray:
    """Exact inverse of :func:`dwt2_level`."""
    ll, lh, hl, hh = (np.asarray(x) for x in (ll, lh, hl, hh))
    if not (ll.shape == lh.shape == hl.shape == hh.shape):
        raise DimensionError(
            f"subband shapes disagree: {ll.shape}, {lh.shape}, {hl.shape}, {hh.shape}"
        )
    a = (ll + lh + hl + hh) * 0.5
    b = (ll + lh - hl - hh) * 0.5
    c = (ll - lh + hl - hh) * 0.5
    d = (ll - lh - hl + hh) * 0.5
    out_shape = ll.shape[:-2] + (2 * ll.shape[-2], 2 * ll.shape[-1])
    plane = np.empty(out_shape, dtype=a.dtype)
    plane[..., 0::2, 0::2] = a
    plane[..., 0::2, 1::2] = b
    plane[..., 1::2, 0::2] = c
    plane[..., 1::2, 1::2] = d
    return plane


def check_divisibility(height: int, width: int, levels: int) -> None:
    """Raise unless both dims are divisible by 2^levels, naming the failing level."""
    for level in range(1, levels + 1):
        div = 1 << level
        if height % div or width % div:
            raise ConfigurationError(
                f"level {level} needs dims divisible by {div}, got {height}x{width}"
            )


def decompose(image: YCbCrImage, levels: int, dtype=np.float32) -> SubbandPyramid:
    """Recursive channel-wise Haar analysis of the LL band, ``levels`` deep."""
    if levels < 1:
        raise ConfigurationError(f"levels must be >= 1, got {levels}")
    stack = image.stack().astype(dtype, copy=True)
    if not np.isfinite(stack).all():
        raise ValueError("image values must be finite")
    h, w = stack.shape[-2], stack.shape[-1]
    check_divisibility(h, w, levels)
    details = []
    ll = stack
    for _ in range(levels):
        ll, lh, hl, hh = dwt2_level(ll)
        details.append(DetailBands(lh=lh, hl=hl, hh=hh))
    return SubbandPyramid(levels=levels, ll=ll, details=tuple(details), height=h, width=w)


def reconstruct(pyramid: SubbandPyramid) -> YCbCrImage:
    """Exact synthesis back to the source resolution."""
    ll = pyramid.ll
    for level in range(pyramid.levels, 0, -1):
        bands = pyramid.detail(level)
        ll = idwt2_level(ll, bands.lh, bands.hl, bands.hh)
    if ll.shape[-2:] != (pyramid.height, pyramid.width):
        raise DimensionError(
            f"pyramid dims inconsistent: got {ll.shape[-2:]}, "
            f"expected {(pyramid.height, pyramid.width)}"
        )
    return YCbCrImage.from_stack(ll)


def coefficient_energy(pyramid: SubbandPyramid) -> float:
    """Sum of squared coefficients over every subband."""
    total = float((pyramid.ll.astype(np.float64) ** 2).sum())
    for bands in pyramid.details:
        for sub in (bands.lh, bands.hl, bands.hh):
            total += float((sub.astype(np.float64) ** 2).sum())
    return total

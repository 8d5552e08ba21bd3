"""Dense kernels used by the encoder: matmul, masked softmax, layernorm, GELU.

Everything here delegates to numpy. On a fixed machine the BLAS behind
``np.matmul`` picks its kernel from operand shapes alone, so repeated runs on
identical inputs are byte-identical, which is the determinism contract the
rest of the package (and its selfcheck) relies on.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .errors import DimensionError, NumericError

LAYERNORM_EPS = 1e-5


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit inner-dimension check."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim < 1 or b.ndim < 1 or a.shape[-1] != b.shape[-2 if b.ndim > 1 else -1]:
        raise DimensionError(f"matmul: inner dims disagree, {a.shape} x {b.shape}")
    return np.matmul(a, b)


def softmax(x: np.ndarray, mask: np.ndarray | None = None, axis: int = -1) -> np.ndarray:
    """Softmax along ``axis`` with max-subtraction; masked entries are exactly 0.

    ``mask`` is boolean, True where attention is allowed; it broadcasts against
    ``x``. A row with no allowed entry is an error rather than NaN.
    """
    x = np.asarray(x)
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        if not mask.any(axis=axis).all():
            raise NumericError("softmax: a row is fully masked")
        x = np.where(mask, x, -np.inf)
    m = np.max(x, axis=axis, keepdims=True)
    e = np.exp(x - m)  # masked lanes: exp(-inf) == +0.0 exactly
    return e / e.sum(axis=axis, keepdims=True)


def softmax_row(v: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Softmax of a single row vector; see :func:`softmax`."""
    v = np.asarray(v)
    if v.ndim != 1:
        raise DimensionError(f"softmax_row expects a 1-D row, got shape {v.shape}")
    return softmax(v, mask=mask, axis=-1)


def layernorm(
    x: np.ndarray,
    gain: np.ndarray,
    bias: np.ndarray,
    eps: float = LAYERNORM_EPS,
) -> np.ndarray:
    """Normalize the last axis to zero mean / unit variance, then apply affine."""
    x = np.asarray(x)
    gain = np.asarray(gain)
    bias = np.asarray(bias)
    if gain.shape != (x.shape[-1],) or bias.shape != (x.shape[-1],):
        raise DimensionError(
            f"layernorm: gain/bias {gain.shape}/{bias.shape} do not match dim {x.shape[-1]}"
        )
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * gain + bias


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact-erf GELU, x * Phi(x). No tanh approximation."""
    x = np.asarray(x)
    # 1/sqrt(2) as a python float so float32 inputs stay float32
    return x * 0.5 * (1.0 + erf(x * 0.7071067811865476))


def l2_norm(v: np.ndarray, axis: int = -1) -> np.ndarray:
    """Euclidean norm along ``axis``."""
    v = np.asarray(v)
    return np.sqrt((v * v).sum(axis=axis))


def unit_rows(m: np.ndarray) -> np.ndarray:
    """Rows of ``m`` scaled to unit norm; zero rows are an error."""
    m = np.asarray(m)
    norms = l2_norm(m, axis=-1)
    if np.any(norms == 0):
        raise NumericError("unit_rows: zero-norm row")
    return m / norms[..., None]

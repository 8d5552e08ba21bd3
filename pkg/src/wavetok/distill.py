"""Cosine-distance distillation objective: value, closed-form gradient, and a
desk-scale projection fit showing the objective is trainable.

The loss sums 1 - cos(v, v_T) over every per-level readout, so it is
invariant to positive rescaling of either side, and its gradient in v is
always orthogonal to v.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

DIVERGENCE_PATIENCE = 5


def _cosine(v: np.ndarray, t: np.ndarray) -> float:
    nv = float(np.sqrt(v @ v))
    nt = float(np.sqrt(t @ t))
    if nv == 0.0 or nt == 0.0:
        raise NumericError("cosine distance of a zero-norm vector")
    return float(v @ t) / (nv * nt)


def distill_loss(readouts: np.ndarray, teacher: np.ndarray) -> float:
    """Sum over readout rows of 1 - cos(row, teacher); in [0, 2 * rows]."""
    readouts = np.atleast_2d(np.asarray(readouts, dtype=np.float64))
    teacher = np.asarray(teacher, dtype=np.float64)
    return float(sum(1.0 - _cosine(row, teacher) for row in readouts))


def distill_loss_grad(v: np.ndarray, t: np.ndarray) -> np.ndarray:
    """d/dv of 1 - cos(v, t): -(t / (|v||t|) - (v.t / (|v|^3 |t|)) v).

    Always satisfies <grad, v> = 0 (the cosine is scale-free in v).
    """
    v = np.asarray(v, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    nv = float(np.sqrt(v @ v))
    nt = float(np.sqrt(t @ t))
    if nv == 0.0 or nt == 0.0:
        raise NumericError("gradient of cosine at a zero-norm vector")
    return -(t / (nv * nt) - (float(v @ t) / (nv**3 * nt)) * v)


@dataclass
class FitResult:
    weight: np.ndarray
    history: list[float]  # loss before training, then after each step
    diverged: bool


def fit_projection(
    hidden: np.ndarray,
    targets: np.ndarray,
    steps: int,
    learning_rate: float,
    init_weight: np.ndarray | None = None,
) -> FitResult:
    """Plain gradient descent of the summed cosine loss over a linear map.

    Rows of ``hidden`` (n, d) project through W (d, d_out) onto rows of
    ``targets``. Only W trains. Five consecutive loss increases flag
    divergence; the run still completes.
    """
    hidden = np.asarray(hidden, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if hidden.ndim != 2 or targets.ndim != 2 or hidden.shape[0] != targets.shape[0]:
        raise ValueError(
            f"need matching row counts, got {hidden.shape} and {targets.shape}"
        )
    d, d_out = hidden.shape[1], targets.shape[1]
    w = np.eye(d, d_out) if init_weight is None else np.array(init_weight, dtype=np.float64)
    if w.shape != (d, d_out):
        raise ValueError(f"init weight must be {(d, d_out)}, got {w.shape}")

    def batch_loss(weight: np.ndarray) -> float:
        return float(
            sum(
                1.0 - _cosine(h @ weight, t)
                for h, t in zip(hidden, targets)
            )
        )

    history = [batch_loss(w)]
    rising = 0
    diverged = False
    for _ in range(steps):
        grad = np.zeros_like(w)
        for h, t in zip(hidden, targets):
            grad += np.outer(h, distill_loss_grad(h @ w, t))
        w = w - learning_rate * grad
        loss = batch_loss(w)
        rising = rising + 1 if loss > history[-1] else 0
        if rising >= DIVERGENCE_PATIENCE:
            diverged = True
        history.append(loss)
    return FitResult(weight=w, history=history, diverged=diverged)

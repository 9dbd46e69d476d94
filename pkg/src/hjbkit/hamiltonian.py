"""Pointwise evaluation and maximization of the HJB nonlinearity.

``H(y, u, p) = max over the control list of  i(y,d).p + h(y,d) u + f(y,d)``.

The maximum is an exact scan over the model's finite control list; ties go
to the lowest control index so policies are bit-reproducible.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = ["HamiltonianValue", "eval_H", "scan"]


@dataclass(frozen=True)
class HamiltonianValue:
    value: float
    argmax: np.ndarray
    argmax_index: int
    runner_up_gap: float


def candidate_values(model, y, u, p):
    """Per-control values i.p + h*u + f, shape (n_controls, ...)."""
    y = np.asarray(y, float)
    p = np.asarray(p, float)
    out = []
    for delta in model.controls:
        iv = model.eval_checked("drift", y, delta)
        hv = model.eval_checked("discount_rate", y, delta)
        fv = model.eval_checked("running_reward", y, delta)
        out.append(np.sum(iv * p, axis=-1) + hv * u + fv)
    return np.array(out)


def eval_H(model, y, u, p):
    """Maximize the HJB candidate over the control list at one point."""
    y = np.asarray(y, float)
    p = np.asarray(p, float)
    if y.shape != (model.dim,) or p.shape != (model.dim,):
        raise ParameterError(f"y and p must have length {model.dim}")
    if not np.isfinite(u):
        raise ParameterError("u must be finite")
    values = candidate_values(model, y, float(u), p)
    j = int(np.argmax(values))  # first max wins: lowest control index
    if len(values) > 1:
        gap = float(values[j] - np.partition(values, -2)[-2])
    else:
        gap = np.inf
    return HamiltonianValue(
        value=float(values[j]),
        argmax=model.controls[j].copy(),
        argmax_index=j,
        runner_up_gap=gap,
    )


def scan(model, y_batch, u_batch, p_batch):
    """Vectorized control scan over a batch of (y, u, p) points.

    Returns ``(values, argmax_indices)``; used by the grid solvers and the
    residual operator.
    """
    cand = candidate_values(model, y_batch, np.asarray(u_batch, float),
                            np.asarray(p_batch, float))
    idx = np.argmax(cand, axis=0)
    return np.max(cand, axis=0), idx

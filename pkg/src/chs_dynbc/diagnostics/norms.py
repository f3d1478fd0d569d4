"""Discrete norms.

Space norms use the lumped mass for L2 and the stiffness for the gradient
part.  Space-time norms weight each recorded step by its own time step
(right-endpoint rule).
"""
from __future__ import annotations

import numpy as np

from ..discretization import Operators


def _check(ops: Operators, v: np.ndarray, boundary: bool = False) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    size = ops.nb if boundary else ops.n
    if v.shape[-1] != size:
        raise ValueError(f"expected {size} entries, got {v.shape[-1]}")
    return v


def l2(ops: Operators, v) -> float:
    v = _check(ops, v)
    return float(np.sqrt(np.sum(ops.ML * v * v)))


def l2_boundary(ops: Operators, w) -> float:
    w = _check(ops, w, boundary=True)
    return float(np.sqrt(np.sum(ops.MGL * w * w)))


def h1_seminorm(ops: Operators, v) -> float:
    v = _check(ops, v)
    return float(np.sqrt(max(v @ (ops.K @ v), 0.0)))


def h1_seminorm_boundary(ops: Operators, w) -> float:
    w = _check(ops, w, boundary=True)
    return float(np.sqrt(max(w @ (ops.KG @ w), 0.0)))


def linf(v) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.max(np.abs(v))) if v.size else 0.0


def discrete_laplacian_l2(ops: Operators, v) -> float:
    """L2 norm of the lumped discrete Laplacian M_L^{-1} K v (an H^2-type seminorm)."""
    v = _check(ops, v)
    lap = (ops.K @ v) / ops.ML
    return l2(ops, lap)


def l2_Q(ops: Operators, fields, dts) -> float:
    """sqrt(sum_k dt_k |v_k|^2) over the rows of ``fields``."""
    fields = np.atleast_2d(fields)
    return float(np.sqrt(sum(dt * l2(ops, v) ** 2 for v, dt in zip(fields, dts))))


def l2_Sigma(ops: Operators, fields, dts) -> float:
    fields = np.atleast_2d(fields)
    return float(np.sqrt(sum(dt * l2_boundary(ops, w) ** 2 for w, dt in zip(fields, dts))))


def linf_H(ops: Operators, fields) -> float:
    """max over steps of the lumped L2 norm."""
    return max((l2(ops, v) for v in np.atleast_2d(fields)), default=0.0)


def l2_V(ops: Operators, fields, dts) -> float:
    """sqrt(sum_k dt_k (v^T M v + v^T K v))."""
    total = 0.0
    for v, dt in zip(np.atleast_2d(fields), dts):
        v = _check(ops, v)
        total += dt * max(v @ (ops.M @ v) + v @ (ops.K @ v), 0.0)
    return float(np.sqrt(total))


def lp_series(ops: Operators, v, kmax: int = 8) -> np.ndarray:
    """L^{2k} norms for k = 1..kmax; growth in k flags an unbounded field."""
    v = np.abs(_check(ops, v))
    scale = linf(v)
    if scale == 0.0:
        return np.zeros(kmax)
    w = v / scale
    ks = np.arange(1, kmax + 1)
    return np.array([scale * np.sum(ops.ML * w ** (2 * k)) ** (1.0 / (2 * k)) for k in ks])


def norms(ops: Operators, v) -> dict:
    """The scalar norm family of one bulk field."""
    return {"l2": l2(ops, v), "h1_seminorm": h1_seminorm(ops, v), "linf": linf(v)}


def space_time_norms(ops: Operators, fields, dts) -> dict:
    return {"l2_Q": l2_Q(ops, fields, dts), "linf_H": linf_H(ops, fields),
            "l2_V": l2_V(ops, fields, dts)}

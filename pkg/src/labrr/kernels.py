"""Radial-basis kernels with per-support-point bandwidths.

The kernel value between a probe point ``t`` and a support point ``x`` whose
bandwidth vector is ``theta`` is::

    k(t, x) = exp(-sum_m (theta[m] * (t[m] - x[m]))**2)

Each support point owns its bandwidths, so entry ``(i, j)`` of any kernel
matrix weights the difference ``rows[i] - cols[j]`` with the bandwidths of
*column* point ``j``.  A square matrix over a non-constant bandwidth set is
therefore generally asymmetric.  The classic RBF matrix is the special case
of a single bandwidth vector shared by every column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import DimensionMismatch, as_matrix, as_vector

__all__ = [
    "COLUMN_OWNS_BANDWIDTH",
    "BandwidthSet",
    "lab_entry",
    "lab_entry_grad_theta",
    "lab_matrix",
    "rbf_matrix",
]

#: Orientation convention, recorded once: kernel-matrix entry (i, j) uses the
#: bandwidths of the column (support) point j.  Probe rows never need one.
COLUMN_OWNS_BANDWIDTH = True

# Rows of the probe set are processed in blocks of this size so that the
# (block, n_support, dim) difference tensor stays cache-friendly.
_ROW_BLOCK = 256


@dataclass(frozen=True)
class BandwidthSet:
    """One strictly positive bandwidth vector per support point.

    Attributes
    ----------
    values : numpy.ndarray, shape (n_points, dim)
        Row ``i`` holds the per-dimension bandwidths of support point ``i``.
        The array is copied on construction and treated as immutable.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        vals = as_matrix(self.values, "bandwidths").copy()
        if not bool((vals > 0.0).all()):
            raise ValueError("bandwidths must be strictly positive")
        object.__setattr__(self, "values", vals)

    @property
    def n_points(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @classmethod
    def uniform(cls, n_points: int, dim: int, value: float) -> "BandwidthSet":
        """Constant bandwidths — the usual warm start before training."""
        if n_points < 1 or dim < 1:
            raise ValueError("n_points and dim must be at least 1")
        if not (value > 0.0):
            raise ValueError(f"bandwidth value must be positive, got {value}")
        return cls(np.full((n_points, dim), float(value)))

    def clipped(self, low: float, high: float) -> "BandwidthSet":
        """Entrywise clamp into ``[low, high]``."""
        return BandwidthSet(np.clip(self.values, low, high))


def _bandwidth_values(theta, cols: np.ndarray) -> np.ndarray:
    """Validate bandwidths (``BandwidthSet`` or raw array) against ``cols``."""
    if not isinstance(theta, BandwidthSet):
        theta = BandwidthSet(theta)
    if theta.values.shape != cols.shape:
        raise DimensionMismatch(
            f"bandwidths have shape {theta.values.shape}, "
            f"support points have shape {cols.shape}"
        )
    return theta.values


def lab_entry(t, x, theta) -> float:
    """Kernel value between one probe point and one support point.

    Always in ``(0, 1]``, and exactly 1 when ``t == x``.
    """
    t = as_vector(t, "t")
    x = as_vector(x, "x")
    th = as_vector(theta, "theta")
    if not (t.shape == x.shape == th.shape):
        raise DimensionMismatch(
            f"t, x, theta must share a shape; got {t.shape}, {x.shape}, {th.shape}"
        )
    if not bool((th > 0.0).all()):
        raise ValueError("bandwidths must be strictly positive")
    diff = th * (t - x)
    return float(np.exp(-(diff @ diff)))


def lab_entry_grad_theta(t, x, theta) -> np.ndarray:
    """Derivative of :func:`lab_entry` with respect to each bandwidth entry.

    Component ``m`` equals ``-2 * k(t, x) * theta[m] * (t[m] - x[m])**2``;
    the zero vector exactly at ``t == x``.
    """
    t = as_vector(t, "t")
    x = as_vector(x, "x")
    th = as_vector(theta, "theta")
    k = lab_entry(t, x, th)
    return (-2.0 * k) * th * (t - x) ** 2


def lab_matrix(rows, cols, theta) -> np.ndarray:
    """Kernel matrix between probe ``rows`` and support ``cols``.

    Parameters
    ----------
    rows : array_like, shape (n_rows, dim)
        Probe points; they carry no bandwidths.
    cols : array_like, shape (n_cols, dim)
        Support points.
    theta : BandwidthSet or array_like, shape (n_cols, dim)
        Bandwidths owned by the support points.

    Returns
    -------
    numpy.ndarray, shape (n_rows, n_cols)
        Entry ``(i, j) = exp(-||theta_j * (rows_i - cols_j)||^2)``.
        Column ``j`` depends only on ``theta_j``.
    """
    rows = as_matrix(rows, "rows")
    cols = as_matrix(cols, "cols")
    if rows.shape[1] != cols.shape[1]:
        raise DimensionMismatch(
            f"rows have dim {rows.shape[1]} but support points have dim {cols.shape[1]}"
        )
    th = _bandwidth_values(theta, cols)

    n_rows = rows.shape[0]
    out = np.empty((n_rows, cols.shape[0]))
    for lo in range(0, n_rows, _ROW_BLOCK):
        hi = min(lo + _ROW_BLOCK, n_rows)
        diff = (rows[lo:hi, None, :] - cols[None, :, :]) * th[None, :, :]
        out[lo:hi] = np.exp(-np.einsum("ijk,ijk->ij", diff, diff))
    return out


def rbf_matrix(x1, x2, sigma) -> np.ndarray:
    """Classic RBF matrix: one bandwidth vector shared by every column.

    ``sigma`` may be a positive scalar (replicated across dimensions) or a
    positive vector of length ``dim``.  With ``x1 is x2`` the result is
    symmetric with a unit diagonal.
    """
    x2 = as_matrix(x2, "x2")
    sig = np.asarray(sigma, dtype=np.float64)
    if sig.ndim == 0:
        sig = np.full(x2.shape[1], float(sig))
    elif sig.ndim != 1 or sig.shape[0] != x2.shape[1]:
        raise DimensionMismatch(
            f"sigma must be a scalar or length-{x2.shape[1]} vector, got shape {sig.shape}"
        )
    if not bool((sig > 0.0).all()):
        raise ValueError("sigma must be strictly positive")
    return lab_matrix(x1, x2, np.tile(sig, (x2.shape[0], 1)))

"""Fit-quality metrics, output clamping, and the support-sparsity count."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import as_vector
from .ridgeless import LabModel

__all__ = [
    "DegenerateLabels",
    "EvalReport",
    "ZERO_COEF_TOL",
    "make_report",
    "mse",
    "project",
    "r_squared",
    "sparsity_r0",
]

#: Coefficients at or below this magnitude count as zero: comfortably below
#: double-precision solve noise on normalized data.
ZERO_COEF_TOL = 1e-12


class DegenerateLabels(ValueError):
    """All reference labels are identical, so R-squared is undefined."""


def _paired(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    yt = as_vector(y_true, "y_true")
    yp = as_vector(y_pred, "y_pred")
    if yt.shape[0] != yp.shape[0]:
        raise ValueError(f"length mismatch: {yt.shape[0]} vs {yp.shape[0]}")
    return yt, yp


def mse(y_true, y_pred) -> float:
    """Mean squared error."""
    yt, yp = _paired(y_true, y_pred)
    if yt.shape[0] == 0:
        raise ValueError("mse needs at least one point")
    return float(np.mean((yt - yp) ** 2))


def r_squared(y_true, y_pred) -> float:
    """Coefficient of determination, ``1 - SS_res / SS_tot``.

    Raises :class:`DegenerateLabels` when the reference labels are constant.
    """
    yt, yp = _paired(y_true, y_pred)
    if yt.shape[0] < 2:
        raise ValueError("r_squared needs at least two points")
    ss_tot = float(np.sum((yt - yt.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateLabels("all reference labels are equal")
    ss_res = float(np.sum((yt - yp) ** 2))
    return 1.0 - ss_res / ss_tot


def project(values, bound: float):
    """Clamp into ``[-bound, bound]``; idempotent and monotone.

    Accepts a scalar (returns float) or an array (returns an array).
    """
    if not (bound > 0.0):
        raise ValueError(f"bound must be positive, got {bound}")
    arr = np.asarray(values, dtype=np.float64)
    clipped = np.clip(arr, -bound, bound)
    return float(clipped) if arr.ndim == 0 else clipped


def sparsity_r0(model: LabModel, tol: float = ZERO_COEF_TOL) -> int:
    """Number of support points with a nonzero coefficient (|alpha| > tol)."""
    return int(np.count_nonzero(np.abs(model.alpha) > tol))


@dataclass
class EvalReport:
    """One evaluation of a trained model on a held-out set."""

    r_squared: float
    mse: float
    n_test: int
    n_support: int
    r0: int
    max_train_sq_error: float | None = None
    wall_clock_seconds: float | None = None

    def to_dict(self) -> dict:
        return {
            "r_squared": self.r_squared,
            "mse": self.mse,
            "n_test": self.n_test,
            "n_support": self.n_support,
            "r0": self.r0,
            "max_train_sq_error": self.max_train_sq_error,
            "wall_clock_seconds": self.wall_clock_seconds,
        }


def make_report(
    y_true,
    y_pred,
    model: LabModel,
    max_train_sq_error: float | None = None,
    wall_clock_seconds: float | None = None,
) -> EvalReport:
    """Bundle the standard metrics for one (model, test set) pair."""
    yt, yp = _paired(y_true, y_pred)
    return EvalReport(
        r_squared=r_squared(yt, yp),
        mse=mse(yt, yp),
        n_test=yt.shape[0],
        n_support=model.n_support,
        r0=sparsity_r0(model),
        max_train_sq_error=max_train_sq_error,
        wall_clock_seconds=wall_clock_seconds,
    )

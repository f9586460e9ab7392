"""Closed-form kernel solvers: the adaptive-bandwidth interpolant and the
stationary-point regressor pair of asymmetric kernel ridge regression.

The interpolant is ``f(t) = sum_i alpha_i * k_theta_i(t, x_i)`` with ``alpha``
obtained from a (optionally jittered) linear solve against the asymmetric
Gram matrix of the support set.  For a general square kernel matrix ``K`` the
asymmetric problem has two natural regressors; their dual vectors equal the
respective training residuals, which is the identity the tests pin down.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import NormMeta
from .kernels import BandwidthSet, lab_matrix
from .numerics import DimensionMismatch, as_matrix, as_vector, solve_regularized

__all__ = [
    "DEFAULT_JITTER",
    "AsymDualSolution",
    "LabModel",
    "fit_asym_duals",
    "fit_lab",
    "load_model",
    "predict",
    "predict_f1",
    "predict_f2",
    "save_model",
]

#: Default diagonal regularization: small enough to keep the fit effectively
#: interpolating, large enough to keep near-singular Gram matrices solvable.
DEFAULT_JITTER = 1e-5

_MODEL_FORMAT = "labrr.model"
_MODEL_VERSION = 1


@dataclass
class LabModel:
    """Interpolant over a fixed support set with learned bandwidths.

    Attributes
    ----------
    support_x : numpy.ndarray, shape (n_support, dim)
        Support inputs, in normalized space when ``norm_meta`` is set.
    theta : BandwidthSet
        Per-support-point bandwidths.
    alpha : numpy.ndarray, shape (n_support,)
        Combination coefficients solving ``(K + jitter*I) alpha = y``.
    jitter : float
        The diagonal regularization used at fit time.
    norm_meta : NormMeta or None
        Original-unit ranges, kept so predictions can be de-normalized.
    """

    support_x: np.ndarray
    theta: BandwidthSet
    alpha: np.ndarray
    jitter: float = DEFAULT_JITTER
    norm_meta: NormMeta | None = None

    def __post_init__(self) -> None:
        self.support_x = as_matrix(self.support_x, "support_x")
        self.alpha = as_vector(self.alpha, "alpha")
        if not isinstance(self.theta, BandwidthSet):
            self.theta = BandwidthSet(self.theta)
        if self.theta.values.shape != self.support_x.shape:
            raise DimensionMismatch(
                f"bandwidths shape {self.theta.values.shape} does not match "
                f"support shape {self.support_x.shape}"
            )
        if self.alpha.shape[0] != self.support_x.shape[0]:
            raise DimensionMismatch(
                f"{self.alpha.shape[0]} coefficients for {self.support_x.shape[0]} support points"
            )
        if not (self.jitter >= 0.0):
            raise ValueError(f"jitter must be nonnegative, got {self.jitter}")

    @property
    def n_support(self) -> int:
        return self.support_x.shape[0]

    @property
    def dim(self) -> int:
        return self.support_x.shape[1]


def fit_lab(
    support_x,
    support_y,
    theta,
    jitter: float = DEFAULT_JITTER,
    norm_meta: NormMeta | None = None,
) -> LabModel:
    """Solve for the interpolation coefficients of a support set.

    ``alpha`` solves ``(K + jitter*I) alpha = y`` where ``K`` is the
    (generally asymmetric) Gram matrix of the support points under their own
    bandwidths.  With ``jitter=0`` and a nonsingular ``K`` the model
    interpolates the support labels exactly.

    Raises
    ------
    SingularSystem
        Propagated from the solve; signals duplicate support points or a
        degenerate bandwidth set.
    """
    support_x = as_matrix(support_x, "support_x")
    support_y = as_vector(support_y, "support_y")
    if support_y.shape[0] != support_x.shape[0]:
        raise DimensionMismatch(
            f"{support_y.shape[0]} labels for {support_x.shape[0]} support points"
        )
    gram = lab_matrix(support_x, support_x, theta)
    alpha = solve_regularized(gram, support_y, jitter)
    return LabModel(support_x, theta, alpha, jitter, norm_meta)


def predict(model: LabModel, t):
    """Evaluate the interpolant at one point ``(dim,)`` or a batch ``(m, dim)``.

    Returns a float for a single point, a vector for a batch.  Operates in
    the model's own (normalized) input space.
    """
    arr = np.asarray(t, dtype=np.float64)
    single = arr.ndim == 1
    points = as_matrix(arr[None, :] if single else arr, "t")
    if points.shape[1] != model.dim:
        raise DimensionMismatch(
            f"points have dim {points.shape[1]}, model has dim {model.dim}"
        )
    values = lab_matrix(points, model.support_x, model.theta) @ model.alpha
    return float(values[0]) if single else values


# ---------------------------------------------------------------------------
# General asymmetric kernel ridge regression


@dataclass(frozen=True)
class AsymDualSolution:
    """Dual vectors of the two stationary-point regressors.

    ``alpha = lam * (K + lam*I)^-1 y`` and ``beta = lam * (K^T + lam*I)^-1 y``;
    each equals the training residuals of its regressor entrywise.
    """

    alpha: np.ndarray
    beta: np.ndarray
    lam: float


def fit_asym_duals(gram, y, lam: float) -> AsymDualSolution:
    """Solve both dual systems of an asymmetric square kernel matrix."""
    gram = as_matrix(gram, "gram")
    if gram.shape[0] != gram.shape[1]:
        raise DimensionMismatch(f"gram must be square, got {gram.shape}")
    y = as_vector(y, "y")
    if y.shape[0] != gram.shape[0]:
        raise DimensionMismatch(f"{y.shape[0]} labels for {gram.shape[0]}x{gram.shape[1]} gram")
    if not (lam > 0.0):
        raise ValueError(f"lam must be strictly positive, got {lam}")
    alpha = lam * solve_regularized(gram, y, lam)
    beta = lam * solve_regularized(gram.T, y, lam)
    return AsymDualSolution(alpha=alpha, beta=beta, lam=lam)


def _dual_coefficients(duals: AsymDualSolution, which: str) -> np.ndarray:
    dual = duals.alpha if which == "alpha" else duals.beta
    return as_vector(dual, which) / duals.lam


def predict_f1(kernel_rows, duals: AsymDualSolution) -> np.ndarray:
    """First regressor: rows are kernel values ``k(t_i, x_j)`` against training points."""
    kernel_rows = as_matrix(kernel_rows, "kernel_rows")
    coef = _dual_coefficients(duals, "alpha")
    if kernel_rows.shape[1] != coef.shape[0]:
        raise DimensionMismatch(
            f"kernel rows have {kernel_rows.shape[1]} columns, expected {coef.shape[0]}"
        )
    return kernel_rows @ coef


def predict_f2(kernel_rows, duals: AsymDualSolution) -> np.ndarray:
    """Second regressor: rows are transposed kernel values ``k(x_j, t_i)``."""
    kernel_rows = as_matrix(kernel_rows, "kernel_rows")
    coef = _dual_coefficients(duals, "beta")
    if kernel_rows.shape[1] != coef.shape[0]:
        raise DimensionMismatch(
            f"kernel rows have {kernel_rows.shape[1]} columns, expected {coef.shape[0]}"
        )
    return kernel_rows @ coef


# ---------------------------------------------------------------------------
# Serialization

def model_to_dict(model: LabModel) -> dict:
    """Self-describing document; float lists round-trip bit-exactly via JSON."""
    return {
        "format": _MODEL_FORMAT,
        "version": _MODEL_VERSION,
        "dim": model.dim,
        "n_support": model.n_support,
        "jitter": model.jitter,
        "support_x": model.support_x.tolist(),
        "bandwidths": model.theta.values.tolist(),
        "alpha": model.alpha.tolist(),
        "normalization": model.norm_meta.to_dict() if model.norm_meta else None,
    }


def model_from_dict(doc: dict) -> LabModel:
    if not isinstance(doc, dict) or doc.get("format") != _MODEL_FORMAT:
        raise ValueError("not a model document")
    if doc.get("version") != _MODEL_VERSION:
        raise ValueError(f"unsupported model version: {doc.get('version')!r}")
    norm = doc.get("normalization")
    model = LabModel(
        support_x=np.asarray(doc["support_x"], dtype=np.float64),
        theta=BandwidthSet(np.asarray(doc["bandwidths"], dtype=np.float64)),
        alpha=np.asarray(doc["alpha"], dtype=np.float64),
        jitter=float(doc["jitter"]),
        norm_meta=NormMeta.from_dict(norm) if norm is not None else None,
    )
    if model.dim != int(doc["dim"]) or model.n_support != int(doc["n_support"]):
        raise ValueError("model document is inconsistent with its declared shape")
    return model


def save_model(model: LabModel, path) -> None:
    """Write the model as deterministic JSON (stable bytes for fixed inputs)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path) -> LabModel:
    """Load a model saved by :func:`save_model`; predictions are bit-identical."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not a valid model file ({exc})") from None
    return model_from_dict(doc)

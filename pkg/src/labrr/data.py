"""Dataset ingestion, [-1, 1] scaling, seeded splits, and synthetic generators.

CSV convention: comma-separated UTF-8, decimal-point reals, an optional
single header line (skipped when any cell is non-numeric), last column is
the label.  Normalization maps every feature column and the label to
``[-1, 1]`` affinely; the statistics are recorded so the map can be applied
to new data and inverted exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numerics import as_matrix, as_vector

__all__ = [
    "Dataset",
    "EmptyDataset",
    "InsufficientData",
    "NormMeta",
    "ParseError",
    "SplitSpec",
    "UnknownFunction",
    "load_csv",
    "load_matrix_csv",
    "normalize",
    "save_csv",
    "split",
    "synth",
]


class ParseError(ValueError):
    """A CSV cell could not be parsed; carries its 1-based file position."""

    def __init__(self, row: int, col: int, message: str) -> None:
        super().__init__(f"row {row}, column {col}: {message}")
        self.row = row
        self.col = col


class EmptyDataset(ValueError):
    """The file contains no data rows."""


class UnknownFunction(ValueError):
    """The requested synthetic function id does not exist."""


class InsufficientData(ValueError):
    """Too few samples for the requested operation."""


@dataclass(frozen=True)
class NormMeta:
    """Per-column affine ranges in original units.

    A degenerate (constant) column has ``max == min`` and normalizes to 0.
    """

    feature_min: np.ndarray
    feature_max: np.ndarray
    label_min: float
    label_max: float

    def __post_init__(self) -> None:
        fmin = as_vector(self.feature_min, "feature_min").copy()
        fmax = as_vector(self.feature_max, "feature_max").copy()
        if fmin.shape != fmax.shape:
            raise ValueError("feature_min and feature_max must have equal length")
        object.__setattr__(self, "feature_min", fmin)
        object.__setattr__(self, "feature_max", fmax)
        object.__setattr__(self, "label_min", float(self.label_min))
        object.__setattr__(self, "label_max", float(self.label_max))

    def to_dict(self) -> dict:
        return {
            "feature_min": self.feature_min.tolist(),
            "feature_max": self.feature_max.tolist(),
            "label_min": self.label_min,
            "label_max": self.label_max,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NormMeta":
        return cls(
            feature_min=np.asarray(doc["feature_min"], dtype=np.float64),
            feature_max=np.asarray(doc["feature_max"], dtype=np.float64),
            label_min=float(doc["label_min"]),
            label_max=float(doc["label_max"]),
        )


@dataclass
class Dataset:
    """Feature matrix with an aligned label vector.

    ``norm_meta`` is ``None`` for raw data and records the original-unit
    ranges once :func:`normalize` has mapped everything into ``[-1, 1]``.
    """

    x: np.ndarray
    y: np.ndarray
    norm_meta: NormMeta | None = None
    name: str = ""

    def __post_init__(self) -> None:
        self.x = as_matrix(self.x, "x")
        self.y = as_vector(self.y, "y")
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError(
                f"{self.x.shape[0]} feature rows but {self.y.shape[0]} labels"
            )

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]


# ---------------------------------------------------------------------------
# CSV


def _read_numeric_table(path) -> tuple[np.ndarray, int]:
    """Parse a numeric CSV into a matrix.

    Returns the matrix and the 1-based file line of the first data row.
    A header line is detected by any non-numeric cell and skipped.
    """

    def parse_row(lineno: int, cells: list[str], expect: int | None) -> list[float]:
        if expect is not None and len(cells) != expect:
            bad_col = min(len(cells), expect) + 1
            raise ParseError(
                lineno, bad_col, f"expected {expect} columns, found {len(cells)}"
            )
        values = []
        for j, cell in enumerate(cells):
            try:
                values.append(float(cell))
            except ValueError:
                raise ParseError(lineno, j + 1, f"not a number: {cell.strip()!r}") from None
        return values

    with open(path, newline="", encoding="utf-8") as fh:
        lines = [
            (lineno, row)
            for lineno, row in enumerate(csv.reader(fh), start=1)
            if any(cell.strip() for cell in row)
        ]
    if not lines:
        raise EmptyDataset(f"{path}: no data rows")

    first_lineno, first_cells = lines[0]
    try:
        first_values = parse_row(first_lineno, first_cells, None)
        data_lines = lines[1:]
        rows = [first_values]
    except ParseError:
        # Non-numeric first line: treat it as the header.
        data_lines = lines[1:]
        rows = []
    if not rows and not data_lines:
        raise EmptyDataset(f"{path}: no data rows")

    expect = len(rows[0]) if rows else len(data_lines[0][1])
    start_lineno = first_lineno if rows else data_lines[0][0]
    for lineno, cells in data_lines:
        rows.append(parse_row(lineno, cells, expect))
    return np.asarray(rows, dtype=np.float64), start_lineno


def load_matrix_csv(path) -> np.ndarray:
    """Load a numeric CSV as a plain matrix (no label split)."""
    matrix, _ = _read_numeric_table(path)
    return matrix


def load_csv(path, name: str | None = None) -> Dataset:
    """Load an un-normalized dataset; the last column is the label."""
    matrix, first_row = _read_numeric_table(path)
    if matrix.shape[1] < 2:
        raise ParseError(
            first_row, matrix.shape[1] + 1, "need at least two columns (features + label)"
        )
    return Dataset(matrix[:, :-1], matrix[:, -1], None, name or str(path))


def save_csv(dataset: Dataset, path) -> None:
    """Write a dataset as CSV with an ``x1..xd,y`` header.

    Floats are written with ``repr`` so a reload reproduces them bit-exactly.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(dataset.dim)] + ["y"])
        for row, label in zip(dataset.x, dataset.y):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(label))])


# ---------------------------------------------------------------------------
# Normalization


def _scale_columns(values: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Affine map ``v -> 2(v - lo)/(hi - lo) - 1``; constant columns go to 0."""
    span = hi - lo
    safe = np.where(span == 0.0, 1.0, span)
    scaled = 2.0 * (values - lo) / safe - 1.0
    return np.where(span == 0.0, 0.0, scaled)


def normalize(dataset: Dataset) -> Dataset:
    """Scale every feature column and the label into ``[-1, 1]``.

    Statistics come from the dataset as given (callers normalize before
    splitting), and are recorded in ``norm_meta`` for later inversion.
    """
    if dataset.norm_meta is not None:
        raise ValueError("dataset is already normalized")
    meta = NormMeta(
        feature_min=dataset.x.min(axis=0),
        feature_max=dataset.x.max(axis=0),
        label_min=float(dataset.y.min()),
        label_max=float(dataset.y.max()),
    )
    return Dataset(
        apply_feature_scaling(meta, dataset.x),
        apply_label_scaling(meta, dataset.y),
        meta,
        dataset.name,
    )


def apply_feature_scaling(meta: NormMeta, x) -> np.ndarray:
    """Apply recorded feature ranges to (possibly new) raw feature rows."""
    x = as_matrix(x, "x")
    if x.shape[1] != meta.feature_min.shape[0]:
        raise ValueError(
            f"features have dim {x.shape[1]}, normalization has dim {meta.feature_min.shape[0]}"
        )
    return _scale_columns(x, meta.feature_min, meta.feature_max)


def apply_label_scaling(meta: NormMeta, y) -> np.ndarray:
    """Apply the recorded label range to raw labels."""
    y = as_vector(y, "y")
    lo = np.asarray([meta.label_min])
    hi = np.asarray([meta.label_max])
    return _scale_columns(y[:, None], lo, hi)[:, 0]


def invert_label_scaling(meta: NormMeta, y_norm) -> np.ndarray:
    """Map normalized labels back to original units (exact inverse)."""
    y_norm = as_vector(y_norm, "y_norm")
    span = meta.label_max - meta.label_min
    if span == 0.0:
        return np.full_like(y_norm, meta.label_min)
    return (y_norm + 1.0) / 2.0 * span + meta.label_min


# ---------------------------------------------------------------------------
# Splitting


@dataclass(frozen=True)
class SplitSpec:
    """Seeded train/test partition; deterministic per (seed, trial_index)."""

    seed: int
    trial_index: int = 0
    train_fraction: float = 0.8

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.seed < 0 or self.trial_index < 0:
            raise ValueError("seed and trial_index must be nonnegative")


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded permutation split: first ``floor(fraction * n)`` rows train."""
    rng = np.random.default_rng([spec.seed, spec.trial_index])
    perm = rng.permutation(dataset.n)
    n_train = int(spec.train_fraction * dataset.n)
    if n_train == 0 or n_train == dataset.n:
        raise InsufficientData(
            f"split of {dataset.n} rows at fraction {spec.train_fraction} "
            "leaves an empty side"
        )
    train_idx, test_idx = perm[:n_train], perm[n_train:]
    make = lambda idx: Dataset(dataset.x[idx], dataset.y[idx], dataset.norm_meta, dataset.name)
    return make(train_idx), make(test_idx)


# ---------------------------------------------------------------------------
# Synthetic benchmark functions


def _synth_f1(x: np.ndarray) -> np.ndarray:
    a, b = x[:, 0], x[:, 1]
    return (1.0 + np.sin(2.0 * a + 3.0 * b)) / (3.5 + np.sin(a - b))


def _synth_f2(x: np.ndarray) -> np.ndarray:
    # The sixth input is deliberately inert (zero coefficient).
    return (
        10.0 * np.sin(np.pi * x[:, 0] * x[:, 1])
        + 20.0 * (x[:, 2] - 0.5) ** 2
        + 5.0 * x[:, 3]
        + 10.0 * x[:, 4]
        + 0.0 * x[:, 5]
    )


def _synth_f3(x: np.ndarray) -> np.ndarray:
    return np.exp(2.0 * np.pi * x[:, 0] * np.sin(x[:, 3]) + np.sin(x[:, 1] * x[:, 2]))


_SYNTH_FUNCTIONS: dict[str, tuple[Callable[[np.ndarray], np.ndarray], float, float, int]] = {
    "f1": (_synth_f1, -2.0, 2.0, 2),
    "f2": (_synth_f2, -1.0, 1.0, 6),
    "f3": (_synth_f3, -0.25, 0.25, 4),
}


def synth(function_id: str, n: int, noise_ratio: float = 0.0, seed: int = 0) -> Dataset:
    """Sample a synthetic regression dataset.

    Inputs are drawn uniformly on the function's domain box; labels are the
    clean function values plus zero-mean Gaussian noise whose variance is
    ``noise_ratio`` times the variance of the clean labels.  Fully
    deterministic for a fixed seed (features drawn first, then noise).
    """
    if function_id not in _SYNTH_FUNCTIONS:
        raise UnknownFunction(f"unknown function: {function_id!r} (choose from f1, f2, f3)")
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if noise_ratio < 0.0:
        raise ValueError(f"noise_ratio must be nonnegative, got {noise_ratio}")
    fn, lo, hi, dim = _SYNTH_FUNCTIONS[function_id]
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo, hi, size=(n, dim))
    y = fn(x)
    if noise_ratio > 0.0:
        std = math.sqrt(noise_ratio * float(np.var(y)))
        y = y + rng.normal(0.0, std, size=n)
    return Dataset(x, y, None, function_id)

"""Bandwidth learning with dynamic support growth.

The training loop alternates two phases until every held-out training
residual drops below the error budget ``B``:

1. A round of ``L`` SGD steps on the bandwidths.  Each step draws a fresh
   mini-batch from the non-support training points and descends the exact
   gradient of the batch squared error *through* the interpolating solve —
   the coefficients ``alpha`` are themselves a function of the bandwidths.
2. A growth step that promotes the ``k`` worst-predicted non-support points
   into the support set.

Support only ever grows; all randomness flows from the config seed, so a
fixed (dataset, config) pair reproduces the model bitwise.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, InsufficientData
from .kernels import BandwidthSet, lab_matrix
from .numerics import FactorizedMatrix, as_matrix, as_vector
from .ridgeless import DEFAULT_JITTER, LabModel, fit_lab, predict

__all__ = [
    "SELECTION_STRATEGIES",
    "RoundRecord",
    "TrainConfig",
    "TrainTrace",
    "batch_loss_and_grad",
    "grow_support",
    "select_initial_support",
    "sgd_round",
    "train",
]

SELECTION_STRATEGIES = ("y_uniform", "x_kmeans", "extreme_y")

_KMEANS_SWEEPS = 50


@dataclass
class TrainConfig:
    """All knobs of the training loop.

    Attributes
    ----------
    error_budget : float
        Stop once every non-support training squared error is at or below
        this value (normalized-label units squared).
    grow_count : int
        Support points promoted per growth step.
    learning_rate : float
        SGD step size for the bandwidths.
    inner_steps : int
        SGD steps per round.
    initial_support : int
        Size of the initial support set.
    init_bandwidth : float
        Constant initial bandwidth value.
    batch_size : int
        Mini-batch size (capped at the number of non-support points).
    bandwidth_min, bandwidth_max : float
        Bandwidths are clipped into this interval after every step.
    max_rounds : int
        Hard cap on outer rounds.
    max_support_ratio : float
        Support may grow to at most this fraction of the training set.
    selection : str
        Initial-support strategy: ``y_uniform`` (evenly spaced label ranks),
        ``x_kmeans`` (points nearest seeded k-means centers), or
        ``extreme_y`` (largest labels; diagnostic).
    seed : int
        Drives initial selection and batch sampling.
    jitter : float
        Diagonal regularization used in every interpolating solve.
    momentum : float
        Optional heavy-ball coefficient; 0 (the default) is plain SGD.
    """

    error_budget: float
    grow_count: int = 10
    learning_rate: float = 0.01
    inner_steps: int = 20
    initial_support: int = 20
    init_bandwidth: float = 1.0
    batch_size: int = 64
    bandwidth_min: float = 1e-4
    bandwidth_max: float = 1e4
    max_rounds: int = 200
    max_support_ratio: float = 0.8
    selection: str = "y_uniform"
    seed: int = 0
    jitter: float = DEFAULT_JITTER
    momentum: float = 0.0

    def validate(self) -> None:
        if not (self.error_budget > 0.0):
            raise ValueError(f"error_budget must be positive, got {self.error_budget}")
        if self.grow_count < 1:
            raise ValueError(f"grow_count must be at least 1, got {self.grow_count}")
        if not (self.learning_rate >= 0.0):
            raise ValueError(f"learning_rate must be nonnegative, got {self.learning_rate}")
        if self.inner_steps < 0:
            raise ValueError(f"inner_steps must be nonnegative, got {self.inner_steps}")
        if self.initial_support < 1:
            raise ValueError(f"initial_support must be at least 1, got {self.initial_support}")
        if not (0.0 < self.bandwidth_min <= self.bandwidth_max):
            raise ValueError(
                f"need 0 < bandwidth_min <= bandwidth_max, got "
                f"[{self.bandwidth_min}, {self.bandwidth_max}]"
            )
        if not (self.bandwidth_min <= self.init_bandwidth <= self.bandwidth_max):
            raise ValueError(
                f"init_bandwidth {self.init_bandwidth} outside "
                f"[{self.bandwidth_min}, {self.bandwidth_max}]"
            )
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.max_rounds < 1:
            raise ValueError(f"max_rounds must be at least 1, got {self.max_rounds}")
        if not (0.0 < self.max_support_ratio <= 1.0):
            raise ValueError(
                f"max_support_ratio must be in (0, 1], got {self.max_support_ratio}"
            )
        if self.selection not in SELECTION_STRATEGIES:
            raise ValueError(
                f"unknown selection strategy {self.selection!r}; "
                f"choose from {', '.join(SELECTION_STRATEGIES)}"
            )
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")
        if not (self.jitter >= 0.0):
            raise ValueError(f"jitter must be nonnegative, got {self.jitter}")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")


@dataclass
class RoundRecord:
    """Diagnostics of one outer round."""

    round_index: int
    n_support: int
    max_sq_error: float
    mean_sq_error: float
    inner_losses: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "round": self.round_index,
            "n_support": self.n_support,
            "max_sq_error": self.max_sq_error,
            "mean_sq_error": self.mean_sq_error,
            "inner_losses": self.inner_losses,
        }


@dataclass
class TrainTrace:
    """Per-round history plus the stop condition.

    ``converged`` is False when a cap stopped training while the worst
    residual still exceeded the budget — reported, never raised.
    """

    rounds: list[RoundRecord]
    converged: bool
    stop_reason: str
    n_train: int
    wall_clock_seconds: float

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)


# ---------------------------------------------------------------------------
# Initial support selection


def _rank_spaced(order: np.ndarray, count: int) -> np.ndarray:
    """Indices at evenly spaced ranks of a sorted order (rank 0 always included)."""
    n = order.shape[0]
    if count == 1:
        ranks = np.zeros(1, dtype=np.intp)
    else:
        ranks = (np.arange(count) * (n - 1)) // (count - 1)
    return order[ranks]


def _kmeans_representatives(x: np.ndarray, count: int, seed: int) -> list[int]:
    """Nearest data index to each center of a seeded fixed-sweep k-means."""
    rng = np.random.default_rng(seed)
    centers = x[rng.choice(x.shape[0], size=count, replace=False)].copy()
    x_sq = (x * x).sum(axis=1)
    for _ in range(_KMEANS_SWEEPS):
        d2 = x_sq[:, None] + (centers * centers).sum(axis=1)[None, :] - 2.0 * (x @ centers.T)
        assign = d2.argmin(axis=1)
        counts = np.bincount(assign, minlength=count)
        sums = np.zeros_like(centers)
        np.add.at(sums, assign, x)
        occupied = counts > 0
        centers[occupied] = sums[occupied] / counts[occupied, None]
    d2 = x_sq[:, None] + (centers * centers).sum(axis=1)[None, :] - 2.0 * (x @ centers.T)
    return [int(i) for i in d2.argmin(axis=0)]


def select_initial_support(dataset: Dataset, count: int, strategy: str, seed: int) -> np.ndarray:
    """Pick the initial support indices.

    ``y_uniform`` sorts by label and takes evenly spaced ranks; ``x_kmeans``
    returns the data points nearest seeded k-means centers (deduplicated,
    topped up by label-rank spacing); ``extreme_y`` takes the largest labels.
    """
    if strategy not in SELECTION_STRATEGIES:
        raise ValueError(
            f"unknown selection strategy {strategy!r}; choose from {', '.join(SELECTION_STRATEGIES)}"
        )
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    if count > dataset.n:
        raise InsufficientData(
            f"requested {count} initial support points from {dataset.n} samples"
        )
    order = np.argsort(dataset.y, kind="stable")
    if strategy == "y_uniform":
        return _rank_spaced(order, count).astype(np.intp)
    if strategy == "extreme_y":
        return order[::-1][:count].astype(np.intp)
    # x_kmeans: dedupe the representatives, then fill from rank spacing.
    chosen = list(dict.fromkeys(_kmeans_representatives(dataset.x, count, seed)))
    if len(chosen) < count:
        pool = set(chosen)
        for idx in _rank_spaced(order, count):
            if int(idx) not in pool:
                chosen.append(int(idx))
                pool.add(int(idx))
            if len(chosen) == count:
                break
        for idx in order:  # extreme fallback: dedupe collapsed the rank candidates too
            if len(chosen) == count:
                break
            if int(idx) not in pool:
                chosen.append(int(idx))
                pool.add(int(idx))
    return np.asarray(chosen[:count], dtype=np.intp)


# ---------------------------------------------------------------------------
# The gradient


def batch_loss_and_grad(
    support_x,
    support_y,
    theta: BandwidthSet,
    jitter: float,
    batch_x,
    batch_y,
) -> tuple[float, np.ndarray]:
    """Batch squared error and its exact bandwidth gradient.

    The loss is ``sum_b (k_theta(x_b, X_sv) @ alpha - y_b)**2`` with
    ``alpha = (K + jitter*I)^-1 y_sv`` recomputed from the current
    bandwidths, so the gradient carries two terms per bandwidth entry: the
    direct dependence of the cross-kernel row and the dependence of
    ``alpha`` on the support Gram matrix.  The latter is evaluated with one
    adjoint (transposed) solve instead of per-entry solves.

    Returns
    -------
    (float, numpy.ndarray)
        The scalar loss and a gradient with one row per support point.
    """
    sx = as_matrix(support_x, "support_x")
    sy = as_vector(support_y, "support_y")
    bx = as_matrix(batch_x, "batch_x")
    by = as_vector(batch_y, "batch_y")
    if not isinstance(theta, BandwidthSet):
        theta = BandwidthSet(theta)
    th = theta.values

    gram = lab_matrix(sx, sx, theta)
    solver = FactorizedMatrix(
        gram if jitter == 0.0 else gram + jitter * np.eye(gram.shape[0])
    )
    alpha = solver.solve(sy)

    cross = lab_matrix(bx, sx, theta)
    resid = cross @ alpha - by
    loss = float(resid @ resid)

    # Adjoint of the solve: u solves (K + jitter*I)^T u = cross^T resid.
    u = solver.solve(cross.T @ resid, transpose=True)

    grad = np.empty_like(th)
    for m in range(th.shape[1]):
        batch_diff_sq = (bx[:, m, None] - sx[None, :, m]) ** 2
        support_diff_sq = (sx[:, m, None] - sx[None, :, m]) ** 2
        direct = (resid[:, None] * cross * batch_diff_sq).sum(axis=0)
        through_alpha = (u[:, None] * gram * support_diff_sq).sum(axis=0)
        grad[:, m] = direct - through_alpha
    grad *= -4.0 * th * alpha[:, None]
    return loss, grad


def sgd_round(
    support_x,
    support_y,
    theta: BandwidthSet,
    remainder_x,
    remainder_y,
    config: TrainConfig,
    rng: np.random.Generator,
) -> tuple[BandwidthSet, list[float]]:
    """One round of ``inner_steps`` SGD updates on the bandwidths.

    Each step samples a fresh mini-batch uniformly without replacement from
    the remainder (non-support) points, descends the exact gradient, and
    clips into the bandwidth bounds.  Returns the updated bandwidths and the
    per-step loss curve.  With ``inner_steps=0``, ``learning_rate=0``, or an
    empty remainder the bandwidths come back unchanged.
    """
    remainder_x = as_matrix(remainder_x, "remainder_x")
    remainder_y = as_vector(remainder_y, "remainder_y")
    n_rem = remainder_x.shape[0]
    th = theta.values.copy()
    losses: list[float] = []
    if n_rem == 0:
        return BandwidthSet(th), losses
    velocity = np.zeros_like(th) if config.momentum > 0.0 else None
    batch = min(config.batch_size, n_rem)
    for _ in range(config.inner_steps):
        picks = rng.choice(n_rem, size=batch, replace=False)
        loss, grad = batch_loss_and_grad(
            support_x, support_y, BandwidthSet(th), config.jitter,
            remainder_x[picks], remainder_y[picks],
        )
        losses.append(loss)
        if velocity is not None:
            velocity *= config.momentum
            velocity -= config.learning_rate * grad
            th += velocity
        else:
            th -= config.learning_rate * grad
        np.clip(th, config.bandwidth_min, config.bandwidth_max, out=th)
    return BandwidthSet(th), losses


def grow_support(sq_errors, count: int) -> np.ndarray:
    """Positions of the ``count`` largest squared errors.

    Ties break toward the lower position; asking for more than available
    returns every position (largest first).
    """
    errors = as_vector(sq_errors, "sq_errors")
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    order = np.lexsort((np.arange(errors.shape[0]), -errors))
    return order[: min(count, errors.shape[0])]


# ---------------------------------------------------------------------------
# The outer loop


def train(dataset: Dataset, config: TrainConfig) -> tuple[LabModel, TrainTrace]:
    """Run the full loop: select support, learn bandwidths, grow, refit.

    Expects a normalized dataset.  Stops when the worst non-support squared
    error is at or below ``config.error_budget``; a round cap, the support
    ratio cap, or running out of non-support points stop early with
    ``converged=False`` flagged in the trace.  The returned model is always
    refit on the final support set with the config jitter.
    """
    config.validate()
    started = time.perf_counter()
    n = dataset.n
    support_cap = max(int(config.max_support_ratio * n), 1)

    support = list(
        int(i)
        for i in select_initial_support(
            dataset, config.initial_support, config.selection, config.seed
        )
    )
    in_support = np.zeros(n, dtype=bool)
    in_support[support] = True
    theta = BandwidthSet.uniform(len(support), dataset.dim, config.init_bandwidth)
    rng = np.random.default_rng([config.seed, 1])

    rounds: list[RoundRecord] = []
    converged = False
    stop_reason = "max_rounds"
    for round_index in range(config.max_rounds):
        remainder = np.flatnonzero(~in_support)
        theta, losses = sgd_round(
            dataset.x[support], dataset.y[support], theta,
            dataset.x[remainder], dataset.y[remainder], config, rng,
        )
        model = fit_lab(
            dataset.x[support], dataset.y[support], theta,
            config.jitter, dataset.norm_meta,
        )
        # Error check per the growth rule: non-support points, or the support
        # itself once everything has been absorbed.
        eval_idx = remainder if remainder.shape[0] else np.asarray(support)
        sq_errors = (predict(model, dataset.x[eval_idx]) - dataset.y[eval_idx]) ** 2
        max_err = float(sq_errors.max())
        rounds.append(
            RoundRecord(round_index, len(support), max_err, float(sq_errors.mean()), losses)
        )
        if max_err <= config.error_budget:
            converged = True
            stop_reason = "error_budget_met"
            break
        if remainder.shape[0] == 0:
            stop_reason = "all_data_in_support"
            break
        if round_index == config.max_rounds - 1:
            stop_reason = "max_rounds"
            break
        room = support_cap - len(support)
        if room <= 0:
            stop_reason = "support_cap"
            break
        add_count = min(config.grow_count, room, remainder.shape[0])
        worst = grow_support(sq_errors, add_count)
        new_indices = remainder[worst]
        # Newcomers inherit the current mean bandwidth profile.
        mean_profile = theta.values.mean(axis=0)
        theta = BandwidthSet(
            np.vstack([theta.values, np.tile(mean_profile, (new_indices.shape[0], 1))])
        )
        support.extend(int(i) for i in new_indices)
        in_support[new_indices] = True

    model = fit_lab(
        dataset.x[support], dataset.y[support], theta, config.jitter, dataset.norm_meta
    )
    trace = TrainTrace(
        rounds=rounds,
        converged=converged,
        stop_reason=stop_reason,
        n_train=n,
        wall_clock_seconds=time.perf_counter() - started,
    )
    return model, trace

"""Assignment-matrix generators for the four experimental designs."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InfeasibleWeightsError, InvalidDesignError, InvalidInputError

_EQ11_ATOL = 1e-9


class DesignKind(str, Enum):
    SW = "SW"  # switchback: one Bernoulli(p) flip per period, shared by all items
    IR = "IR"  # item-level: one Bernoulli(p) flip per item, fixed over the horizon
    PR = "PR"  # pairwise: independent Bernoulli(p) per item-period cell
    SR = "SR"  # staggered rollout: monotone control-to-treatment switch per item


@dataclass(frozen=True, eq=False)
class DesignSpec:
    """A design kind with its treatment probability and, for SR, the
    distribution of the last control period (weights indexed h = 1..H)."""

    kind: DesignKind
    p: float
    sr_weights: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DesignKind(self.kind))
        # Degenerate p in {0, 1} is allowed for generation; the IPW estimator
        # enforces the open interval itself.
        if not 0.0 <= self.p <= 1.0:
            raise InvalidDesignError("p must lie in [0, 1]")
        if self.sr_weights is not None:
            w = np.asarray(self.sr_weights, dtype=float)
            validate_sr_weights(w, self.p)
            object.__setattr__(self, "sr_weights", w)

    @property
    def label(self) -> str:
        return self.kind.value


def validate_sr_weights(weights: np.ndarray, p: float) -> None:
    if weights.ndim != 1 or weights.size < 1:
        raise InvalidDesignError("sr_weights must be a length-H vector")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > _EQ11_ATOL:
        raise InvalidDesignError("sr_weights must be nonnegative and sum to 1")
    horizon = weights.size
    mean_last_control = float(np.arange(1, horizon + 1) @ weights)
    if abs(mean_last_control / horizon - (1.0 - p)) > _EQ11_ATOL:
        raise InvalidDesignError(
            "sr_weights imply a treated fraction of "
            f"{1.0 - mean_last_control / horizon:.6f}, not the requested p={p}"
        )


@dataclass(frozen=True, eq=False)
class AssignmentMatrix:
    """An (N, H) binary treatment matrix together with its design."""

    w: np.ndarray
    design: DesignSpec

    def __post_init__(self):
        w = np.asarray(self.w)
        if w.ndim != 2:
            raise InvalidInputError("assignment matrix must be 2-D")
        object.__setattr__(self, "w", w.astype(np.int8))

    @property
    def shape(self) -> tuple[int, int]:
        return self.w.shape


def generate(design: DesignSpec, n_items: int, horizon: int, rng: np.random.Generator) -> AssignmentMatrix:
    """Draw one assignment matrix for the design."""
    if n_items < 1 or horizon < 1:
        raise InvalidInputError("need n_items >= 1 and horizon >= 1")
    kind, p = design.kind, design.p
    if kind is DesignKind.SW:
        cols = (rng.random(horizon) < p).astype(np.int8)
        w = np.broadcast_to(cols, (n_items, horizon)).copy()
    elif kind is DesignKind.IR:
        rows = (rng.random(n_items) < p).astype(np.int8)
        w = np.broadcast_to(rows[:, None], (n_items, horizon)).copy()
    elif kind is DesignKind.PR:
        w = (rng.random((n_items, horizon)) < p).astype(np.int8)
    else:
        if design.sr_weights is None:
            raise InvalidDesignError("SR design requires sr_weights")
        if design.sr_weights.size != horizon:
            raise InvalidDesignError("sr_weights length must equal the horizon")
        last_control = sample_rollout_periods(design.sr_weights, n_items, rng)
        t = np.arange(1, horizon + 1)
        w = (t[None, :] > last_control[:, None]).astype(np.int8)
    return AssignmentMatrix(w=w, design=design)


def sample_rollout_periods(weights: np.ndarray, n_items: int, rng: np.random.Generator) -> np.ndarray:
    """Draw each item's last control period from the rollout distribution."""
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, rng.random(n_items), side="right") + 1


def sr_distribution(p: float, horizon: int, shape: str = "uniform", points=None) -> np.ndarray:
    """Build rollout weights whose treated-cell fraction equals p.

    ``shape="uniform"`` spreads mass evenly over a contiguous period range;
    ``shape="two-point"`` splits mass between ``points=(h1, h2)`` (default
    ``(1, H)``, which minimizes the estimator's boundary-period weighting
    among two-point shapes). Raises InfeasibleWeightsError, carrying the
    feasible p-range, when the target is unattainable for the shape.
    """
    if horizon < 1:
        raise InvalidInputError("horizon must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError("p must lie in [0, 1]")
    target = horizon * (1.0 - p)  # required mean last control period
    weights = np.zeros(horizon)
    if shape == "uniform":
        doubled = 2.0 * target
        rounded = round(doubled)
        if abs(doubled - rounded) > 1e-9 or not 2 <= rounded <= 2 * horizon:
            p_min, p_max = 1.0 / (2 * horizon), 1.0 - 1.0 / horizon
            raise InfeasibleWeightsError(
                "no uniform period range has mean last-control period "
                f"{target:g}; feasible p are 1 - M/(2H) for integer M, "
                f"within [{p_min:g}, {p_max:g}]",
                p_min=p_min,
                p_max=p_max,
            )
        lo = max(1, int(rounded) - horizon)
        hi = int(rounded) - lo
        weights[lo - 1 : hi] = 1.0 / (hi - lo + 1)
        return weights
    if shape == "two-point":
        h1, h2 = points if points is not None else (1, horizon)
        if not (1 <= h1 <= h2 <= horizon and int(h1) == h1 and int(h2) == h2):
            raise InvalidInputError("two-point periods must be integers with 1 <= h1 <= h2 <= H")
        h1, h2 = int(h1), int(h2)
        p_min, p_max = 1.0 - h2 / horizon, 1.0 - h1 / horizon
        if h1 == h2:
            if abs(target - h1) > 1e-9:
                raise InfeasibleWeightsError(
                    f"point mass at {h1} fixes p = {p_min:g}", p_min=p_min, p_max=p_min
                )
            weights[h1 - 1] = 1.0
            return weights
        w2 = (target - h1) / (h2 - h1)
        if not -1e-12 <= w2 <= 1.0 + 1e-12:
            raise InfeasibleWeightsError(
                f"two-point weights on ({h1}, {h2}) reach only p in "
                f"[{p_min:g}, {p_max:g}]",
                p_min=p_min,
                p_max=p_max,
            )
        w2 = min(max(w2, 0.0), 1.0)
        weights[h2 - 1] = w2
        weights[h1 - 1] = 1.0 - w2
        return weights
    raise InvalidInputError(f"unknown rollout shape {shape!r}")


def inclusion_probability(design: DesignSpec, n: int | None = None, t: int | None = None) -> float:
    """Marginal probability that a cell is treated (constant per design)."""
    if design.kind is DesignKind.SR:
        if design.sr_weights is None:
            raise InvalidDesignError("SR design requires sr_weights")
        horizon = design.sr_weights.size
        mean_last_control = float(np.arange(1, horizon + 1) @ design.sr_weights)
        return 1.0 - mean_last_control / horizon
    return design.p


def structure_ok(matrix: AssignmentMatrix) -> bool:
    """Check the structural invariant of the matrix's design kind."""
    w = matrix.w
    if not np.isin(w, (0, 1)).all():
        return False
    kind = matrix.design.kind
    if kind is DesignKind.SW:
        return bool((w == w[0, :]).all())
    if kind is DesignKind.IR:
        return bool((w == w[:, :1]).all())
    if kind is DesignKind.SR:
        return bool((np.diff(w.astype(int), axis=1) >= 0).all())
    return True

"""Demand processes: sampling, essential infima, quantiles, truncated means.

A demand value for item ``n`` (0-based) in period ``t`` (1-based) is

    D[n, t] = shift(n, t) + noise_n,   shift(n, t) = k*t + A_n*sin(2*pi*(t+phi_n)/L)

optionally clamped at zero. The noise family is shared across items but may
carry per-item location parameters (normal means, uniform lower edges).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import InvalidInputError

_TWO_PI = 2.0 * np.pi


def _as_item_array(value, n_items: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n_items, float(arr))
    if arr.shape != (n_items,):
        raise InvalidInputError(f"{name} must be a scalar or a length-{n_items} vector")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class Normal:
    """Gaussian noise with per-item means and a common standard deviation."""

    mean: np.ndarray
    std_dev: float

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        if self.std_dev <= 0:
            raise InvalidInputError("std_dev must be positive")


@dataclass(frozen=True, eq=False)
class Uniform:
    """Uniform noise on [lower_n, lower_n + width] with per-item lower edges."""

    lower: np.ndarray
    width: float

    def __post_init__(self):
        object.__setattr__(self, "lower", np.atleast_1d(np.asarray(self.lower, dtype=float)))
        if self.width <= 0:
            raise InvalidInputError("width must be positive")


@dataclass(frozen=True, eq=False)
class Discrete:
    """Finite noise support shared across items."""

    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if support.ndim != 1 or support.shape != probs.shape or support.size == 0:
            raise InvalidInputError("support and probs must be matching nonempty vectors")
        if not np.all(np.isfinite(support)) or np.any(support < 0):
            raise InvalidInputError("support must be finite and nonnegative")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise InvalidInputError("probs must be nonnegative and sum to 1")
        order = np.argsort(support)
        object.__setattr__(self, "support", support[order])
        object.__setattr__(self, "probs", probs[order])


NoiseFamily = Normal | Uniform | Discrete


@dataclass(frozen=True, eq=False)
class DemandModel:
    """Per-item demand process with trend, weekly seasonality and noise."""

    n_items: int
    noise: NoiseFamily
    trend_slope: float = 0.0
    amplitude: np.ndarray | float = 0.0
    phase: np.ndarray | float = 0.0
    season_length: int = 7
    clamp_at_zero: bool = True

    def __post_init__(self):
        if self.n_items < 1:
            raise InvalidInputError("n_items must be >= 1")
        object.__setattr__(self, "amplitude", _as_item_array(self.amplitude, self.n_items, "amplitude"))
        object.__setattr__(self, "phase", _as_item_array(self.phase, self.n_items, "phase"))
        if np.any(self.amplitude < 0):
            raise InvalidInputError("amplitude must be nonnegative")
        if self.season_length < 1:
            raise InvalidInputError("season_length must be >= 1")
        for attr in ("mean", "lower"):
            loc = getattr(self.noise, attr, None)
            if loc is not None and loc.shape not in ((1,), (self.n_items,)):
                raise InvalidInputError(f"noise {attr} must have one entry per item")

    def _loc(self, attr: str) -> np.ndarray:
        loc = getattr(self.noise, attr)
        if loc.shape == (1,) and self.n_items > 1:
            return np.full(self.n_items, loc[0])
        return loc


def mean_shift(model: DemandModel, n: int, t: int) -> float:
    """Deterministic demand shift for item n (0-based) in period t (1-based)."""
    if t < 1:
        raise InvalidInputError("period t must be >= 1")
    seasonal = model.amplitude[n] * np.sin(_TWO_PI * (t + model.phase[n]) / model.season_length)
    return float(model.trend_slope * t + seasonal)


def shift_matrix(model: DemandModel, horizon: int) -> np.ndarray:
    """Deterministic shift for every (item, period), shape (N, H)."""
    t = np.arange(1, horizon + 1, dtype=float)
    seasonal = model.amplitude[:, None] * np.sin(
        _TWO_PI * (t[None, :] + model.phase[:, None]) / model.season_length
    )
    return model.trend_slope * t[None, :] + seasonal


def sample(model: DemandModel, n: int, t: int, rng: np.random.Generator, size=None):
    """Draw demand for one cell; vector of draws when size is given."""
    shift = mean_shift(model, n, t)
    noise = model.noise
    if isinstance(noise, Normal):
        draw = rng.normal(model._loc("mean")[n], noise.std_dev, size=size)
    elif isinstance(noise, Uniform):
        lo = model._loc("lower")[n]
        draw = lo + noise.width * rng.random(size=size)
    else:
        draw = noise.support[_discrete_indices(noise.probs, rng, size)]
    value = shift + draw
    if model.clamp_at_zero:
        value = np.maximum(value, 0.0)
    return float(value) if size is None else value


def _discrete_indices(probs: np.ndarray, rng: np.random.Generator, size):
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    u = rng.random(size=size if size is not None else ())
    return np.searchsorted(cum, u, side="right")


def sample_matrix(model: DemandModel, horizon: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a full (N, H) demand trace with one rng call per family."""
    shape = (model.n_items, horizon)
    noise = model.noise
    if isinstance(noise, Normal):
        draw = model._loc("mean")[:, None] + noise.std_dev * rng.standard_normal(shape)
    elif isinstance(noise, Uniform):
        draw = model._loc("lower")[:, None] + noise.width * rng.random(shape)
    else:
        draw = noise.support[_discrete_indices(noise.probs, rng, shape)]
    value = shift_matrix(model, horizon) + draw
    if model.clamp_at_zero:
        np.maximum(value, 0.0, out=value)
    return value


def essential_infimum(model: DemandModel, n: int, t: int) -> float:
    """Largest almost-sure lower bound of D[n, t]."""
    shift = mean_shift(model, n, t)
    noise = model.noise
    if isinstance(noise, Normal):
        inf = -np.inf
    elif isinstance(noise, Uniform):
        inf = model._loc("lower")[n] + shift
    else:
        inf = noise.support[0] + shift
    if model.clamp_at_zero:
        inf = max(inf, 0.0)
    return float(inf)


def essinf_matrix(model: DemandModel, horizon: int) -> np.ndarray:
    """Essential infimum for every (item, period), shape (N, H)."""
    shifts = shift_matrix(model, horizon)
    noise = model.noise
    if isinstance(noise, Normal):
        inf = np.full_like(shifts, -np.inf)
    elif isinstance(noise, Uniform):
        inf = model._loc("lower")[:, None] + shifts
    else:
        inf = noise.support[0] + shifts
    if model.clamp_at_zero:
        inf = np.maximum(inf, 0.0)
    return inf


def _partial_expectation_normal(x, m, sigma):
    # E(x - Y)^+ for Y ~ N(m, sigma^2), vectorized in x.
    z = (np.asarray(x, dtype=float) - m) / sigma
    return (x - m) * stats.norm.cdf(z) + sigma * stats.norm.pdf(z)


def _partial_expectation_uniform(x, lo, hi):
    # E(x - Y)^+ for Y ~ U[lo, hi], vectorized in x.
    x = np.asarray(x, dtype=float)
    mid = (x - lo) ** 2 / (2.0 * (hi - lo))
    out = np.where(x <= lo, 0.0, np.where(x >= hi, x - 0.5 * (lo + hi), mid))
    return out


def overage_curve(model: DemandModel, n: int, t: int, levels) -> np.ndarray:
    """E(s - D[n, t])^+ for an array of levels s >= 0 (analytic)."""
    levels = np.asarray(levels, dtype=float)
    if np.any(levels < 0):
        raise InvalidInputError("levels must be nonnegative")
    shift = mean_shift(model, n, t)
    noise = model.noise
    if isinstance(noise, Normal):
        m = model._loc("mean")[n] + shift
        raw = _partial_expectation_normal(levels, m, noise.std_dev)
        if model.clamp_at_zero:
            raw = raw - _partial_expectation_normal(0.0, m, noise.std_dev)
        return raw
    if isinstance(noise, Uniform):
        lo = model._loc("lower")[n] + shift
        hi = lo + noise.width
        raw = _partial_expectation_uniform(levels, lo, hi)
        if model.clamp_at_zero:
            raw = raw - _partial_expectation_uniform(0.0, lo, hi)
        return raw
    values = noise.support + shift
    if model.clamp_at_zero:
        values = np.maximum(values, 0.0)
    gaps = np.maximum(levels[..., None] - values, 0.0)
    return gaps @ noise.probs


def expected_overage(model: DemandModel, n: int, t: int, level: float) -> float:
    """E(s - D[n, t])^+ at a single level s >= 0."""
    return float(overage_curve(model, n, t, np.asarray(level, dtype=float)))


def overage_grid(model: DemandModel, levels: np.ndarray) -> np.ndarray:
    """E(levels[n, t] - D[n, t])^+ for an (N, H) grid of levels.

    Vectorized across all cells; used by the closed-form bias oracles where
    per-cell scalar calls would dominate the runtime.
    """
    levels = np.asarray(levels, dtype=float)
    if np.any(levels < 0):
        raise InvalidInputError("levels must be nonnegative")
    horizon = levels.shape[1]
    shifts = shift_matrix(model, horizon)
    noise = model.noise
    if isinstance(noise, Normal):
        m = model._loc("mean")[:, None] + shifts
        raw = _partial_expectation_normal(levels, m, noise.std_dev)
        if model.clamp_at_zero:
            raw = raw - _partial_expectation_normal(np.zeros_like(levels), m, noise.std_dev)
        return raw
    if isinstance(noise, Uniform):
        lo = model._loc("lower")[:, None] + shifts
        hi = lo + noise.width
        raw = _partial_expectation_uniform(levels, lo, hi)
        if model.clamp_at_zero:
            raw = raw - _partial_expectation_uniform(np.zeros_like(levels), lo, hi)
        return raw
    values = shifts[:, :, None] + noise.support[None, None, :]
    if model.clamp_at_zero:
        values = np.maximum(values, 0.0)
    gaps = np.maximum(levels[:, :, None] - values, 0.0)
    return gaps @ noise.probs


def quantile(model: DemandModel, n: int, t: int, q: float) -> float:
    """Inverse c.d.f. of D[n, t] at q in (0, 1)."""
    if not 0.0 < q < 1.0:
        raise InvalidInputError("q must lie strictly inside (0, 1)")
    shift = mean_shift(model, n, t)
    noise = model.noise
    if isinstance(noise, Normal):
        x = model._loc("mean")[n] + shift + noise.std_dev * stats.norm.ppf(q)
    elif isinstance(noise, Uniform):
        x = model._loc("lower")[n] + shift + noise.width * q
    else:
        values = noise.support + shift
        if model.clamp_at_zero:
            values = np.maximum(values, 0.0)
        cum = np.cumsum(noise.probs)
        idx = int(np.searchsorted(cum, q - 1e-12, side="left"))
        return float(values[min(idx, values.size - 1)])
    if model.clamp_at_zero:
        x = max(x, 0.0)
    return float(x)


def quantile_grid(model: DemandModel, horizon: int, q: np.ndarray) -> np.ndarray:
    """Per-item quantiles for every period, shape (N, H); q has shape (N,)."""
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0) or np.any(q >= 1):
        raise InvalidInputError("q must lie strictly inside (0, 1)")
    shifts = shift_matrix(model, horizon)
    noise = model.noise
    if isinstance(noise, Normal):
        x = model._loc("mean")[:, None] + shifts + noise.std_dev * stats.norm.ppf(q)[:, None]
    elif isinstance(noise, Uniform):
        x = model._loc("lower")[:, None] + shifts + noise.width * q[:, None]
    else:
        cum = np.cumsum(noise.probs)
        idx = np.searchsorted(cum, q - 1e-12, side="left")
        idx = np.minimum(idx, noise.support.size - 1)
        x = shifts + noise.support[idx][:, None]
    if model.clamp_at_zero:
        x = np.maximum(x, 0.0)
    return x


def cdf(model: DemandModel, n: int, t: int, x: float) -> float:
    """P(D[n, t] <= x)."""
    if model.clamp_at_zero and x < 0:
        return 0.0
    # For clamped models at x >= 0 the unclamped c.d.f. already counts the
    # mass collapsed onto zero.
    shift = mean_shift(model, n, t)
    noise = model.noise
    if isinstance(noise, Normal):
        p = stats.norm.cdf(x, loc=model._loc("mean")[n] + shift, scale=noise.std_dev)
    elif isinstance(noise, Uniform):
        lo = model._loc("lower")[n] + shift
        p = np.clip((x - lo) / noise.width, 0.0, 1.0)
    else:
        p = noise.probs[noise.support + shift <= x + 1e-12].sum()
    return float(p)

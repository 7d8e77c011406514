"""Hawkes processes: cluster and thinning simulators, intensity, binning.

The cluster simulator follows the branching description: immigrants arrive
as a homogeneous Poisson process of rate ``η`` and every event, immigrant or
not, has Poisson(K) children displaced by the density ``h / K``. The thinning
simulator is Ogata's accept/reject scheme on the conditional intensity and is
kept as an independent oracle.
"""

from __future__ import annotations

import bisect
import functools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import _io
from .core import (
    GRID_SNAP,
    CountSeries,
    Exponential,
    PointPattern,
    ReproductionKernel,
    RngLike,
    as_generator,
    kernel_mass,
)
from .errors import ConfigInvalid, MassNotSubcritical, MisalignedWindow

LOOKBACK_TOL = 1e-3

IMMIGRANT = -1
# offspring whose parent was born before the window
OUTSIDE_PARENT = -2


@dataclass(frozen=True)
class HawkesModel:
    """Immigration intensity ``eta`` and reproduction kernel ``kernel``."""

    eta: float
    kernel: ReproductionKernel

    def __post_init__(self):
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ConfigInvalid(f"eta must be positive, got {self.eta}")
        if kernel_mass(self.kernel) >= 1:
            raise MassNotSubcritical(f"kernel mass {kernel_mass(self.kernel)} is not below 1")

    @property
    def K(self) -> float:
        return kernel_mass(self.kernel)

    @property
    def mean_rate(self) -> float:
        return self.eta / (1.0 - self.K)


@dataclass(frozen=True, eq=False)
class ClusterRealization:
    """A window of a cluster simulation with its family tree.

    ``parent_index[i]`` is the position of the parent inside ``pattern.times``,
    ``-1`` for immigrants and ``-2`` when the parent lies before the window.
    """

    pattern: PointPattern
    parent_index: np.ndarray
    generation: np.ndarray

    def to_csv(self, path=None) -> str:
        rows = zip(self.pattern.times, self.parent_index, self.generation)
        text = _io.csv_text(("time", "parent_index", "generation"), rows)
        if path is not None:
            _io.atomic_write(path, text)
        return text


def missed_events_bound(model: HawkesModel, lookback: float) -> float:
    """Bound on the expected events after ``a`` descended from immigrants before ``a - L``.

    With ``ψ = Σ_n h^{*n}`` the mean descendant density of one immigrant, the
    missed count is ``η ∫ (v - L)_+ ψ(v) dv``. Since ``x_+ <= e^{θx} / (eθ)``
    and ``∫ e^{θv} ψ = m / (1 - m)`` with ``m(θ) = ∫ e^{θt} h < 1``, it is at most
    ``η e^{-θL} m / (eθ (1 - m))``; the bound is the minimum over ``θ``.
    """
    kernel = model.kernel
    if model.K == 0:
        return 0.0

    def log_bound(theta):
        m = kernel.exp_moment(theta)
        if not m < 1:
            return math.inf
        return math.log(model.eta * m / (math.e * theta * (1.0 - m))) - theta * lookback

    theta_max = _critical_theta(kernel)
    res = minimize_scalar(log_bound, bounds=(theta_max * 1e-6, theta_max * (1 - 1e-9)), method="bounded")
    return math.exp(min(res.fun, log_bound(0.5 * theta_max)))


def _critical_theta(kernel: ReproductionKernel) -> float:
    """The ``θ`` at which ``∫ e^{θt} h`` reaches one."""
    if isinstance(kernel, Exponential):
        return kernel.b - kernel.a
    hi = 1.0
    while kernel.exp_moment(hi) < 1:
        hi *= 2.0
    return brentq(lambda th: kernel.exp_moment(th) - 1.0, 0.0, hi, xtol=1e-12)


@functools.lru_cache(maxsize=256)
def default_lookback(model: HawkesModel, tol: float = LOOKBACK_TOL) -> float:
    """Smallest ``L`` (to bisection precision) whose missed-event bound is below ``tol``."""
    if missed_events_bound(model, 0.0) < tol:
        return 0.0
    hi = 1.0
    while missed_events_bound(model, hi) >= tol:
        hi *= 2.0
    lo = hi / 2.0 if hi > 1.0 else 0.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if missed_events_bound(model, mid) < tol:
            hi = mid
        else:
            lo = mid
    return hi


def _cascade(kernel: ReproductionKernel, times: np.ndarray, t_end: float, gen: np.random.Generator):
    """Grow all descendants of ``times`` up to ``t_end``.

    Returns flat arrays ``(times, parent, generation)`` over every event with
    ``parent`` the flat index of the parent (``-1`` for the roots).
    """
    K = kernel.mass
    all_t = [times]
    all_parent = [np.full(times.size, -1, dtype=np.int64)]
    all_gen = [np.zeros(times.size, dtype=np.int64)]
    current_t = times
    current_idx = np.arange(times.size, dtype=np.int64)
    offset = times.size
    g = 0
    while current_t.size and K > 0:
        n_kids = gen.poisson(K, size=current_t.size)
        total = int(n_kids.sum())
        if total == 0:
            break
        parent = np.repeat(current_idx, n_kids)
        child_t = np.repeat(current_t, n_kids) + kernel.sample_displacement(gen, total)
        # offspring past t_end cannot affect the window, nor can their descendants
        keep = child_t <= t_end
        child_t = child_t[keep]
        parent = parent[keep]
        g += 1
        all_t.append(child_t)
        all_parent.append(parent)
        all_gen.append(np.full(child_t.size, g, dtype=np.int64))
        current_t = child_t
        current_idx = offset + np.arange(child_t.size, dtype=np.int64)
        offset += child_t.size
    return np.concatenate(all_t), np.concatenate(all_parent), np.concatenate(all_gen)


def _resolve_lookback(model: HawkesModel, lookback: float | None) -> float:
    if lookback is None:
        return default_lookback(model)
    if lookback < 0:
        raise ValueError("lookback must be >= 0")
    return float(lookback)


def simulate_hawkes_cluster(
    model: HawkesModel,
    window: tuple[float, float],
    lookback: float | None = None,
    rng: RngLike = None,
) -> ClusterRealization:
    """One Hawkes realization on ``(a, b]`` from the cluster representation."""
    gen = as_generator(rng)
    a, b = (float(x) for x in window)
    start = a - _resolve_lookback(model, lookback)
    n_imm = gen.poisson(model.eta * (b - start))
    immigrants = np.sort(gen.uniform(start, b, size=n_imm))
    t, parent, generation = _cascade(model.kernel, immigrants, b, gen)

    inside = t > a
    order = np.flatnonzero(inside)[np.argsort(t[inside], kind="stable")]
    # flat index -> position in the returned pattern
    position = np.full(t.size, OUTSIDE_PARENT, dtype=np.int64)
    position[order] = np.arange(order.size)
    par = parent[order]
    parent_index = np.where(par < 0, IMMIGRANT, position[np.maximum(par, 0)])
    return ClusterRealization(PointPattern((a, b), t[order]), parent_index, generation[order])


def simulate_hawkes_cluster_batch(
    model: HawkesModel,
    window: tuple[float, float],
    reps: int,
    lookback: float | None = None,
    rng: RngLike = None,
) -> tuple[np.ndarray, np.ndarray]:
    """``reps`` independent cluster realizations simulated together.

    Returns ``(times, labels)`` sorted by replicate then time, restricted to
    the window; ``labels[i]`` is the replicate of event ``i``.
    """
    gen = as_generator(rng)
    a, b = (float(x) for x in window)
    start = a - _resolve_lookback(model, lookback)
    n_imm = gen.poisson(model.eta * (b - start), size=reps)
    immigrants = gen.uniform(start, b, size=int(n_imm.sum()))
    imm_labels = np.repeat(np.arange(reps, dtype=np.int64), n_imm)
    t, parent, generation = _cascade(model.kernel, immigrants, b, gen)
    # a child's replicate is its root's; events are stored generation by generation
    labels = np.empty(t.size, dtype=np.int64)
    bounds = np.searchsorted(generation, np.arange(generation[-1] + 2)) if t.size else [0]
    labels[: immigrants.size] = imm_labels
    for lo, hi in zip(bounds[1:-1], bounds[2:]):
        labels[lo:hi] = labels[parent[lo:hi]]
    inside = t > a
    t, labels = t[inside], labels[inside]
    order = np.lexsort((t, labels))
    return t[order], labels[order]


def split_batch(times: np.ndarray, labels: np.ndarray, reps: int, window) -> list[PointPattern]:
    """Turn a ``(times, labels)`` batch into a list of patterns."""
    cuts = np.searchsorted(labels, np.arange(1, reps))
    return [PointPattern(window, part) for part in np.split(times, cuts)]


# --------------------------------------------------------------------------
# thinning


class _ExpExcitation:
    """Excitation ``Σ a e^{-b(t-s)}`` carried forward recursively."""

    def __init__(self, kernel: Exponential):
        self.a, self.b = kernel.a, kernel.b
        self.value_at_ref = 0.0
        self.ref = -math.inf

    def value(self, t: float) -> float:
        if self.value_at_ref == 0.0:
            return 0.0
        return self.value_at_ref * math.exp(-self.b * (t - self.ref))

    envelope = value

    def add(self, t: float) -> None:
        self.value_at_ref = self.value(t) + self.a
        self.ref = t


class _FiniteExcitation:
    """Excitation for kernels with bounded support, summed over live events."""

    def __init__(self, kernel: ReproductionKernel):
        self.kernel = kernel
        self.width = kernel.support_end
        self.events: list[float] = []

    def _live(self, t: float) -> np.ndarray:
        lo = bisect.bisect_left(self.events, t - self.width)
        return t - np.asarray(self.events[lo:])

    def value(self, t: float) -> float:
        lags = self._live(t)
        return float(np.sum(self.kernel(lags))) if lags.size else 0.0

    def envelope(self, t: float) -> float:
        lags = self._live(t)
        return float(np.sum(self.kernel.envelope(lags))) if lags.size else 0.0

    def add(self, t: float) -> None:
        self.events.append(t)


def simulate_hawkes_thinning(
    model: HawkesModel,
    window: tuple[float, float],
    lookback: float | None = None,
    rng: RngLike = None,
) -> PointPattern:
    """Ogata thinning on ``(a - lookback, b]``, returning the events in ``(a, b]``.

    The dominating rate at time ``t`` is ``η + Σ_s sup_{u >= t-s} h(u)``, which
    bounds the intensity until the next event for every kernel family, and is
    recomputed after every proposal.
    """
    gen = as_generator(rng)
    a, b = (float(x) for x in window)
    t = a - _resolve_lookback(model, lookback)
    kernel = model.kernel
    exc = _ExpExcitation(kernel) if isinstance(kernel, Exponential) else _FiniteExcitation(kernel)
    events = []
    while True:
        bound = model.eta + exc.envelope(t)
        t += gen.exponential(1.0 / bound)
        if t > b:
            break
        lam = model.eta + exc.value(t)
        if gen.random() * bound < lam:
            exc.add(t)
            if t > a:
                events.append(t)
    return PointPattern((a, b), np.array(events))


# --------------------------------------------------------------------------
# intensity and binning


def intensity(model: HawkesModel, pattern: PointPattern | Sequence[float], t: float) -> float:
    """``λ(t) = η + Σ_{s < t} h(t - s)``."""
    times = np.asarray(pattern.times if isinstance(pattern, PointPattern) else pattern, dtype=float)
    if times.size == 0:
        return float(model.eta)
    return float(model.eta + np.sum(model.kernel(t - times)))


def _grid_index(x: float, delta: float, what: str) -> int:
    k = x / delta
    n = round(k)
    if abs(k - n) > GRID_SNAP * max(1.0, abs(n)):
        raise MisalignedWindow(f"{what}={x} is not a multiple of delta={delta}")
    return int(n)


def bin_index(times, delta: float) -> np.ndarray:
    """Bin ``n`` with ``(n-1)Δ < t <= nΔ``, snapping ratios within ``GRID_SNAP`` of an integer."""
    k = np.asarray(times, dtype=float) / delta
    r = np.round(k)
    snapped = np.abs(k - r) <= GRID_SNAP * np.maximum(1.0, np.abs(r))
    return np.where(snapped, r, np.ceil(k)).astype(np.int64)


def bin_counts(
    pattern: PointPattern, delta: float, window: tuple[float, float] | None = None
) -> CountSeries:
    """Counts per bin ``((n-1)Δ, nΔ]`` over a grid-aligned window."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    a, b = pattern.window if window is None else (float(window[0]), float(window[1]))
    n_a = _grid_index(a, delta, "window start")
    n_b = _grid_index(b, delta, "window end")
    if n_b <= n_a:
        raise MisalignedWindow("window must span at least one bin")
    t = pattern.times[(pattern.times > a) & (pattern.times <= b)]
    # clipping keeps the total when rounding moves an edge event by one bin
    idx = np.clip(bin_index(t, delta), n_a + 1, n_b)
    counts = np.bincount(idx - n_a - 1, minlength=n_b - n_a)
    return CountSeries(delta, n_a + 1, counts)


# --------------------------------------------------------------------------
# Laplace functional


@dataclass(frozen=True, eq=False)
class StepFunction:
    """``f(t) = values[i]`` on ``(edges[i], edges[i+1]]``, zero elsewhere."""

    edges: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if edges.ndim != 1 or values.shape != (edges.size - 1,):
            raise ValueError("need len(edges) == len(values) + 1")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be strictly increasing")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "values", values)

    @classmethod
    def on_grid(cls, delta: float, values, start_index: int = 1) -> "StepFunction":
        """Value ``values[i]`` on bin ``start_index + i``."""
        values = np.asarray(values, dtype=float)
        n = np.arange(start_index - 1, start_index + values.size)
        return cls(n * delta, values)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        i = np.searchsorted(self.edges, t, side="left") - 1
        ok = (i >= 0) & (i < self.values.size)
        return np.where(ok, self.values[np.clip(i, 0, self.values.size - 1)], 0.0)


class LaplaceEstimate(tuple):
    """``(mean, se)`` of a Monte Carlo Laplace functional."""

    __slots__ = ()

    def __new__(cls, mean: float, se: float):
        return super().__new__(cls, (float(mean), float(se)))

    mean = property(lambda self: self[0])
    se = property(lambda self: self[1])


def laplace_mc(
    patterns: Sequence[PointPattern],
    f: StepFunction | Callable,
    window: tuple[float, float] | None = None,
) -> LaplaceEstimate:
    """Monte Carlo mean of ``exp(-Σ f(t_i))`` with its standard error.

    ``f`` must be nonnegative with support inside ``window``; events outside
    the window are ignored.
    """
    if not patterns:
        raise ValueError("need at least one pattern")
    if isinstance(f, StepFunction):
        if np.any(f.values < 0):
            raise ValueError("f must be nonnegative")
        if window is not None and (f.edges[0] < window[0] - 1e-12 or f.edges[-1] > window[1] + 1e-12):
            raise ValueError("f must be supported inside the window")
    vals = np.empty(len(patterns))
    for i, pat in enumerate(patterns):
        t = pat.times
        if window is not None:
            t = t[(t > window[0]) & (t <= window[1])]
        vals[i] = math.exp(-float(np.sum(f(t)))) if t.size else 1.0
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    return LaplaceEstimate(vals.mean(), se)

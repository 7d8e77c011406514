"""The discretized process N^(Δ) and a Monte Carlo convergence harness.

``build_approx`` turns a Hawkes model into INAR parameters on a Δ-grid;
``convergence_sweep`` compares window counts of the two processes for a
sequence of Δ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _io
from .core import InarParams, ReproductionKernel, RngLike, as_generator, discretize, k_delta
from .errors import EmptySamples, MisalignedWindow
from .hawkes import HawkesModel, bin_index, simulate_hawkes_cluster_batch
from .inar import autocovariance, default_burn_in, inar_mean, simulate_inar_paths

DEFAULT_WINDOWS = ((0.0, 1.0), (1.0, 2.0))
BOOTSTRAP_DRAWS = 200


def build_approx(
    model: HawkesModel | tuple[float, ReproductionKernel],
    delta: float,
    trunc_horizon: float | None = None,
    **kwargs,
) -> InarParams:
    """INAR parameters ``α0 = Δη``, ``α_k = Δh(kΔ)`` of the approximating process.

    ``model`` may also be a plain ``(eta, kernel)`` pair: only ``K(Δ) < 1`` is
    needed here, not ``∫h < 1``.
    """
    eta, kernel = (model.eta, model.kernel) if isinstance(model, HawkesModel) else model
    return discretize(eta, kernel, delta, trunc_horizon, **kwargs)


def count_distribution_distance(samples_a, samples_b) -> float:
    """Wasserstein-1 distance between two empirical laws on the integers.

    Computed as ``Σ_x |F_a(x) - F_b(x)|`` over the joint integer range.
    """
    a = np.asarray(samples_a, dtype=np.int64).reshape(-1)
    b = np.asarray(samples_b, dtype=np.int64).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise EmptySamples("both sample sets must be nonempty")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    cdf_a = np.cumsum(np.bincount(a - lo, minlength=hi - lo + 1)) / a.size
    cdf_b = np.cumsum(np.bincount(b - lo, minlength=hi - lo + 1)) / b.size
    return float(np.abs(cdf_a - cdf_b).sum())


def bootstrap_se(samples_a, samples_b, rng: RngLike = None, draws: int = BOOTSTRAP_DRAWS) -> float:
    """Bootstrap standard error of ``count_distribution_distance``."""
    gen = as_generator(rng)
    a = np.asarray(samples_a)
    b = np.asarray(samples_b)
    stats = [
        count_distribution_distance(a[gen.integers(0, a.size, a.size)], b[gen.integers(0, b.size, b.size)])
        for _ in range(draws)
    ]
    return float(np.std(stats, ddof=1))


@dataclass(frozen=True)
class SweepRow:
    delta: float
    k_delta: float
    mean_gap: float
    w1: tuple[float, ...]
    w1_se: tuple[float, ...]
    var_gap: float
    reps: int


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-Δ gaps and distances between Hawkes bin counts and INAR counts.

    ``hawkes_counts[i]`` and ``inar_counts[i]`` hold the ``(reps, n_windows)``
    window counts behind row ``i``.
    """

    windows: tuple[tuple[float, float], ...]
    rows: tuple[SweepRow, ...]
    hawkes_counts: tuple[np.ndarray, ...] = field(repr=False, default=())
    inar_counts: tuple[np.ndarray, ...] = field(repr=False, default=())

    HEADER = ("delta", "k_delta", "mean_gap", "w1_window1", "w1_window2", "var_gap", "reps")

    def _records(self):
        for r in self.rows:
            w = list(r.w1) + [math.nan] * (2 - len(r.w1))
            yield (r.delta, r.k_delta, r.mean_gap, w[0], w[1], r.var_gap, r.reps)

    def to_csv(self, path=None) -> str:
        text = _io.csv_text(self.HEADER, self._records())
        if path is not None:
            _io.atomic_write(path, text)
        return text

    def to_json(self, path=None) -> str:
        doc = {
            "windows": [list(w) for w in self.windows],
            "rows": [
                dict(zip(self.HEADER, rec), w1_se=list(r.w1_se))
                for rec, r in zip(self._records(), self.rows)
            ],
        }
        text = _io.json_text(doc)
        if path is not None:
            _io.atomic_write(path, text)
        return text


def _window_bins(window, delta):
    """Bin indices ``n_a+1 .. n_b`` covering a grid-aligned window."""
    out = []
    for x in window:
        k = x / delta
        n = round(k)
        if abs(k - n) > 1e-9 * max(1.0, abs(n)):
            raise MisalignedWindow(f"window edge {x} is not on the Δ={delta} grid")
        out.append(int(n))
    return out[0] + 1, out[1]


def hawkes_window_counts(model, windows, reps, rng=None, lookback=None) -> np.ndarray:
    """Event counts of ``reps`` cluster-simulated paths in each window."""
    a = min(w[0] for w in windows)
    b = max(w[1] for w in windows)
    times, labels = simulate_hawkes_cluster_batch(model, (a, b), reps, lookback, rng)
    out = np.zeros((reps, len(windows)), dtype=np.int64)
    for j, (lo, hi) in enumerate(windows):
        inside = (times > lo) & (times <= hi)
        out[:, j] = np.bincount(labels[inside], minlength=reps)
    return out


def hawkes_binned_window_counts(model, windows, delta, reps, rng=None, lookback=None) -> np.ndarray:
    """Window counts after binning at Δ: an event counts for window ``(a, b]``
    when its bin ``((n-1)Δ, nΔ]`` lies inside the window."""
    spans = [_window_bins(w, delta) for w in windows]
    a = (min(s[0] for s in spans) - 1) * delta
    b = max(s[1] for s in spans) * delta
    times, labels = simulate_hawkes_cluster_batch(model, (a, b), reps, lookback, rng)
    idx = bin_index(times, delta)
    out = np.zeros((reps, len(windows)), dtype=np.int64)
    for j, (n0, n1) in enumerate(spans):
        inside = (idx >= n0) & (idx <= n1)
        out[:, j] = np.bincount(labels[inside], minlength=reps)
    return out


def inar_window_counts(params: InarParams, windows, delta, reps, rng=None, burn_in=None) -> np.ndarray:
    """Sums of INAR counts over the bins of each window, after a stationary burn-in."""
    spans = [_window_bins(w, delta) for w in windows]
    first = min(s[0] for s in spans)
    last = max(s[1] for s in spans)
    if burn_in is None:
        burn_in = default_burn_in(params)
    paths = simulate_inar_paths(params, last - first + 1, reps, burn_in, rng)
    # column 0 of `paths` is bin `first`
    return np.stack([paths[:, n0 - first : n1 - first + 1].sum(axis=1) for n0, n1 in spans], axis=1)


def convergence_sweep(
    model: HawkesModel,
    deltas: Sequence[float],
    windows: Sequence[tuple[float, float]] = DEFAULT_WINDOWS,
    reps: int = 10_000,
    rng: RngLike = None,
    trunc_horizon: float | None = None,
) -> ConvergenceReport:
    """Compare Hawkes bin counts with INAR counts for each Δ.

    ``mean_gap`` is ``|Δ⁻¹ E X - η/(1-K)|`` from closed forms, ``w1`` the
    Wasserstein-1 distance per window with bootstrap standard errors and
    ``var_gap`` the absolute difference of sample variances on the first window.
    """
    gen = as_generator(rng)
    windows = tuple((float(a), float(b)) for a, b in windows)
    target = model.mean_rate
    rows, hawkes_all, inar_all = [], [], []
    for delta in deltas:
        g_h, g_x, g_b = gen.spawn(3)
        kd = k_delta(model.kernel, delta)
        params = build_approx(model, delta, trunc_horizon)
        hc = hawkes_binned_window_counts(model, windows, delta, reps, g_h)
        xc = inar_window_counts(params, windows, delta, reps, g_x)
        w1 = tuple(count_distribution_distance(hc[:, j], xc[:, j]) for j in range(len(windows)))
        se = tuple(bootstrap_se(hc[:, j], xc[:, j], g_b) for j in range(len(windows)))
        rows.append(
            SweepRow(
                delta=float(delta),
                k_delta=kd,
                mean_gap=abs(inar_mean(params) / delta - target),
                w1=w1,
                w1_se=se,
                var_gap=abs(float(hc[:, 0].var(ddof=1)) - float(xc[:, 0].var(ddof=1))),
                reps=reps,
            )
        )
        hawkes_all.append(hc)
        inar_all.append(xc)
    return ConvergenceReport(windows, tuple(rows), tuple(hawkes_all), tuple(inar_all))


# --------------------------------------------------------------------------
# second-order identities


def yule_walker_residual(params: InarParams, max_lag: int, tol: float = 1e-10) -> float:
    """``max_n |R(n) - Σ_k α_k R(|n-k|)|`` over ``n = 1..max_lag``."""
    p = params.p
    if p == 0 or max_lag < 1:
        return 0.0
    R = autocovariance(params, max_lag + p, tol)
    worst = 0.0
    for n in range(1, max_lag + 1):
        lags = np.abs(n - np.arange(1, p + 1))
        worst = max(worst, abs(R[n] - float(params.alphas @ R[lags])))
    return worst


def variance_identity_residual(params: InarParams, eta: float, delta: float, tol: float = 1e-10) -> float:
    """``|R^(Δ)(0) - η/(Δ(1-K)) - Σ_k Δh(kΔ) R^(Δ)(k)|`` with ``R^(Δ) = R / Δ²``.

    ``params`` must come from ``discretize(eta, kernel, delta)`` so that
    ``α0 = Δη`` and ``α_k = Δh(kΔ)``.
    """
    if not math.isclose(params.alpha0, delta * eta, rel_tol=1e-12, abs_tol=1e-15):
        raise ValueError("params.alpha0 must equal delta * eta")
    p = params.p
    R = autocovariance(params, p, tol) / delta**2
    rhs = eta / (delta * (1.0 - params.K))
    if p:
        rhs += float(params.alphas @ R[1 : p + 1])
    return abs(R[0] - rhs)

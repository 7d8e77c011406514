"""Least-squares INAR(p) fits to count series and the implied kernel estimate.

Bin counts of a Hawkes process are approximately INAR with ``α0 = Δη`` and
``α_k = Δh(kΔ)``, so an autoregression on the bins gives ``η̂ = α̂0/Δ`` and
``ĥ(kΔ) = α̂_k/Δ``. Coefficients are not constrained to be nonnegative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import _io
from .core import CountSeries
from .errors import SeriesTooShort, SingularDesign

MIN_MARGIN = 10


class InarFit(tuple):
    """``(alpha0, alphas, residual_variance)`` from an LS fit."""

    __slots__ = ()

    def __new__(cls, alpha0: float, alphas: np.ndarray, residual_variance: float):
        return super().__new__(cls, (float(alpha0), np.asarray(alphas, dtype=float), float(residual_variance)))

    alpha0 = property(lambda self: self[0])
    alphas = property(lambda self: self[1])
    residual_variance = property(lambda self: self[2])


def _counts(series) -> np.ndarray:
    x = series.counts if isinstance(series, CountSeries) else series
    return np.asarray(x, dtype=float).reshape(-1)


def fit_inar_ls(series: CountSeries | np.ndarray, p: int) -> InarFit:
    """Ordinary least squares of ``X_n`` on ``(1, X_{n-1}, ..., X_{n-p})``.

    The residual variance divides the residual sum of squares by
    ``m - p - 1`` for ``m`` fitted rows.
    """
    if p < 0:
        raise ValueError("p must be >= 0")
    x = _counts(series)
    if len(x) <= p + MIN_MARGIN:
        raise SeriesTooShort(f"need more than {p + MIN_MARGIN} values for p={p}, got {len(x)}")
    # row i holds X_{i}, ..., X_{i+p}; lags are read newest first
    win = sliding_window_view(x, p + 1)
    y = win[:, -1]
    design = np.column_stack((np.ones(len(y)), win[:, -2::-1] if p else np.empty((len(y), 0))))
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < p + 1:
        raise SingularDesign(f"design matrix has rank {rank} < {p + 1}")
    resid = y - design @ coef
    dof = len(y) - p - 1
    return InarFit(coef[0], coef[1:], float(resid @ resid) / dof)


@dataclass(frozen=True, eq=False)
class KernelEstimate:
    """``η̂`` and ``ĥ(kΔ)`` for ``k = 1..p``."""

    delta: float
    eta_hat: float
    h_hat: np.ndarray
    residual_variance: float

    @property
    def p(self) -> int:
        return len(self.h_hat)

    @property
    def times(self) -> np.ndarray:
        return self.delta * np.arange(1, self.p + 1)

    @property
    def mean_rate(self) -> float:
        """Plug-in ``η̂ / (1 - Δ Σ ĥ)``."""
        return self.eta_hat / (1.0 - self.delta * float(self.h_hat.sum()))

    def to_csv(self, path=None) -> str:
        rows = ((k, t, h) for k, t, h in zip(range(1, self.p + 1), self.times, self.h_hat))
        text = _io.csv_text(("k", "t", "h_hat"), rows)
        if path is not None:
            _io.atomic_write(path, text)
        return text

    def header(self) -> dict:
        return {"delta": self.delta, "eta_hat": self.eta_hat, "residual_variance": self.residual_variance}

    def header_json(self, path=None) -> str:
        text = _io.json_text(self.header())
        if path is not None:
            _io.atomic_write(path, text)
        return text


def estimate_kernel(series: CountSeries | np.ndarray, delta: float | None = None, p: int = 1) -> KernelEstimate:
    """Kernel estimate from an LS fit on bin counts of width ``delta``."""
    if delta is None:
        if not isinstance(series, CountSeries):
            raise ValueError("delta is required for a plain array")
        delta = series.delta
    fit = fit_inar_ls(series, p)
    return KernelEstimate(float(delta), fit.alpha0 / delta, fit.alphas / delta, fit.residual_variance)

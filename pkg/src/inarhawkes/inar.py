"""INAR(∞) sequences: thinning, simulation, second-order structure and MGF.

The counts solve

    X_n = ε_n + Σ_{k>=1} α_k ∘ X_{n-k},     ε_n ~ Poisson(α0),

where ``α ∘ y`` is a sum of ``y`` independent Poisson(α) draws. Because a sum
of independent Poisson variables is Poisson, ``X_n`` given the past is
Poisson(α0 + Σ α_k X_{n-k}); the simulators draw from that law directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.signal import lfilter

from . import _io
from .core import CountSeries, InarParams, RngLike, as_generator
from .errors import InvalidProbability, SeriesTooShort, UnsupportedArgument

DEFAULT_TOL = 1e-9
LOOKBACK_TOL = 1e-6


# --------------------------------------------------------------------------
# thinning


def thin(alpha: float, y, rng: RngLike = None, size=None):
    """Poisson thinning ``α ∘ y``: the sum of ``y`` i.i.d. Poisson(α) draws."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    gen = as_generator(rng)
    return gen.poisson(alpha * np.asarray(y, dtype=float), size=size)


def thin_bernoulli(alpha: float, y, rng: RngLike = None, size=None):
    """Bernoulli thinning: the sum of ``y`` i.i.d. Bernoulli(α) draws."""
    if not 0 <= alpha <= 1:
        raise InvalidProbability(f"Bernoulli thinning needs 0 <= alpha <= 1, got {alpha}")
    gen = as_generator(rng)
    return gen.binomial(np.asarray(y, dtype=np.int64), alpha, size=size)


class PmfComparison(NamedTuple):
    ratio: float
    poisson_pmf: float
    bernoulli_pmf: float


def counting_pmf_ratio(alpha: float, delta: float, n: int) -> PmfComparison:
    """Compare Poisson(Δα) and Bernoulli(Δα) counting laws at ``n``.

    For ``n >= 2`` the Bernoulli mass is zero and ``ratio`` is ``inf``; the
    Poisson mass is still reported.
    """
    x = delta * alpha
    if not 0 <= x <= 1:
        raise InvalidProbability(f"Δα must lie in [0, 1], got {x}")
    if n < 0:
        raise ValueError("n must be >= 0")
    pois = math.exp(-x) * x**n / math.factorial(n)
    if n == 0:
        bern = 1.0 - x
        ratio = math.exp(-x) / bern if bern > 0 else math.inf
    elif n == 1:
        bern = x
        # x e^{-x} / x, continuous at x = 0
        ratio = math.exp(-x)
    else:
        bern = 0.0
        ratio = math.inf
    return PmfComparison(ratio, pois, bern)


# --------------------------------------------------------------------------
# moving-average weights and derived constants


def inar_mean(params: InarParams) -> float:
    """Stationary mean ``α0 / (1 - K)``."""
    return params.alpha0 / (1.0 - params.K)


def beta_coeffs(params: InarParams, n_max: int) -> np.ndarray:
    """MA(∞) weights ``β_0 = 1``, ``β_k = Σ_i α_i β_{k-i}`` for ``k <= n_max``."""
    impulse = np.zeros(n_max + 1)
    impulse[0] = 1.0
    if params.p == 0:
        return impulse
    # the recursion is the impulse response of 1 / (1 - Σ α_k z^k)
    return lfilter([1.0], np.concatenate(([1.0], -params.alphas)), impulse)


def beta_tail(params: InarParams, beta: np.ndarray) -> float:
    """``Σ_{k>n} β_k`` for ``n = len(beta) - 1``, from the last ``p`` weights.

    Summing the recursion over ``k > n`` gives
    ``T_n (1 - K) = Σ_i α_i Σ_{m=n-i+1}^{n} β_m`` whenever ``n >= p - 1``.
    """
    p = params.p
    n = len(beta) - 1
    if p == 0:
        return 0.0
    if n < p - 1:
        raise ValueError(f"need at least p={p} weights, got {n + 1}")
    # A_r = Σ_{i>r} α_i, paired with β_{n-r}
    upper = np.cumsum(params.alphas[::-1])[::-1]
    recent = beta[n - p + 1 :][::-1]
    k_explicit = float(params.alphas.sum())
    return float(upper @ recent) / (1.0 - k_explicit)


def beta_until(params: InarParams, tail_tol: float, start: int = 64, cap: int = 10**8) -> np.ndarray:
    """β weights, extended until ``beta_tail`` drops below ``tail_tol``."""
    n = max(start, params.p)
    while True:
        beta = beta_coeffs(params, n)
        if beta_tail(params, beta) < tail_tol:
            return beta
        if n >= cap:
            raise RuntimeError(f"β tail did not reach {tail_tol} within {cap} terms")
        n *= 2


def branching_lookback(params: InarParams, tol: float = LOOKBACK_TOL) -> int:
    """Smallest ``L`` with ``Σ_{k>L} β_k < tol``."""
    beta = beta_until(params, tol)
    total = beta_tail(params, beta) + np.cumsum(beta[::-1])[::-1]
    # total[j] = Σ_{k>=j} β_k, so the tail beyond L is total[L+1]
    below = np.nonzero(total[1:] < tol)[0]
    return int(below[0]) if below.size else len(beta) - 1


def default_burn_in(params: InarParams) -> int:
    """``max(1000, 50/(1-K))``, lengthened to the branching lookback when longer."""
    return max(1000, int(math.ceil(50.0 / (1.0 - params.K))), branching_lookback(params))


def autocovariance(params: InarParams, max_lag: int, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``R(j) = α0/(1-K) Σ_k β_k β_{k+j}`` for ``j = 0..max_lag``.

    The β series is cut at ``M`` where the neglected part, bounded by
    ``α0/(1-K) T_M²`` with ``T_M = Σ_{k>M} β_k``, is below ``tol``.
    """
    scale = inar_mean(params)
    if scale == 0:
        return np.zeros(max_lag + 1)
    beta = beta_until(params, math.sqrt(tol / scale))
    M = len(beta) - 1
    beta = beta_coeffs(params, M + max_lag)
    head = beta[: M + 1]
    return scale * np.array([head @ beta[j : j + M + 1] for j in range(max_lag + 1)])


def truncate(params: InarParams, p: int) -> InarParams:
    """Keep ``α_1..α_p`` and drop everything beyond, including the tail bound."""
    if p < 0:
        raise ValueError("p must be >= 0")
    if p >= params.p:
        return params
    return InarParams(params.alpha0, params.alphas[:p], 0.0)


def mean_truncation_order(params: InarParams, tol: float) -> int:
    """Smallest ``p`` whose predicted mean error ``α0 T_p / (1-K)^2`` is <= tol.

    ``T_p`` is the reproduction mass dropped by ``truncate(params, p)``.
    """
    dropped = np.concatenate((np.cumsum(params.alphas[::-1])[::-1], [0.0])) + params.tail_bound
    predicted = params.alpha0 * dropped / (1.0 - params.K) ** 2
    ok = np.nonzero(predicted <= tol)[0]
    if ok.size == 0:
        raise ValueError(f"the tail bound {params.tail_bound} alone exceeds tolerance {tol}")
    return int(ok[0])


# --------------------------------------------------------------------------
# simulation


def simulate_inar_paths(
    params: InarParams,
    n_steps: int,
    reps: int = 1,
    burn_in: int | None = None,
    rng: RngLike = None,
    counting: str = "poisson",
) -> np.ndarray:
    """Independent INAR paths via the difference equations, shape ``(reps, n_steps)``.

    Each path starts from an all-zero history and discards ``burn_in`` steps.
    ``counting="bernoulli"`` swaps the Poisson counting sequences for
    Bernoulli ones (requires every ``α_k <= 1``).
    """
    if counting not in ("poisson", "bernoulli"):
        raise ValueError(f"unknown counting law {counting!r}")
    if counting == "bernoulli" and np.any(params.alphas > 1):
        raise InvalidProbability("Bernoulli counting needs every α_k <= 1")
    gen = as_generator(rng)
    if burn_in is None:
        burn_in = default_burn_in(params)
    p = params.p
    out = np.empty((n_steps, reps), dtype=np.int64)
    if p == 0:
        out[:] = gen.poisson(params.alpha0, size=(n_steps, reps))
        return out.T.copy()

    rev = params.alphas[::-1].copy()
    # history ring buffer, kept to roughly 10^7 entries; draws do not depend on its size
    chunk = max(p, min(1024, 10**7 // max(reps, 1)), 1)
    buf = np.zeros((p + chunk, reps))
    pos = p
    bernoulli = counting == "bernoulli"
    if bernoulli:
        rev_col = rev[:, None]
    for n in range(burn_in + n_steps):
        if pos == p + chunk:
            buf[:p] = buf[chunk:]
            pos = p
        window = buf[pos - p : pos]
        if bernoulli:
            x = gen.poisson(params.alpha0, size=reps) + gen.binomial(
                window.astype(np.int64), rev_col
            ).sum(axis=0)
        else:
            x = gen.poisson(params.alpha0 + rev @ window)
        buf[pos] = x
        if n >= burn_in:
            out[n - burn_in] = x
        pos += 1
    return out.T.copy()


def simulate_inar(
    params: InarParams,
    n_steps: int,
    burn_in: int | None = None,
    rng: RngLike = None,
    delta: float = 1.0,
    counting: str = "poisson",
) -> CountSeries:
    """One INAR path from the difference equations (see ``simulate_inar_paths``)."""
    path = simulate_inar_paths(params, n_steps, 1, burn_in, rng, counting)[0]
    return CountSeries(delta, 0, path)


def _offspring_mean(params: InarParams, prev: np.ndarray) -> np.ndarray:
    """``Σ_k α_k prev[..., n-k]`` along the last axis (causal, zero history)."""
    b = np.concatenate(([0.0], params.alphas))
    return np.maximum(lfilter(b, [1.0], prev, axis=-1), 0.0)


@dataclass(frozen=True, eq=False)
class FamilyRealization:
    """One immigrant's descendants on steps ``0..horizon``."""

    horizon: int
    per_generation: list[np.ndarray]
    family: np.ndarray
    total_size: int
    generation_sizes: np.ndarray

    def to_csv(self, path=None) -> str:
        rows = (
            (n, g, int(G[n]))
            for g, G in enumerate(self.per_generation)
            for n in range(self.horizon + 1)
        )
        text = _io.csv_text(("n", "generation", "count"), rows)
        if path is not None:
            _io.atomic_write(path, text)
        return text


def _simulate_generations(params: InarParams, start: np.ndarray, gen: np.random.Generator) -> list[np.ndarray]:
    """Run the generation recursion from ``start`` until a generation dies out."""
    gens = [start]
    current = start
    # generation g only lives at offsets >= g, so at most `length` rounds
    for _ in range(start.shape[-1]):
        if params.p == 0 or not current.any():
            break
        current = gen.poisson(_offspring_mean(params, current))
        if not current.any():
            break
        gens.append(current)
    return gens


def simulate_family(params: InarParams, horizon: int, rng: RngLike = None) -> FamilyRealization:
    """Branching family of a single immigrant born at step 0."""
    gen = as_generator(rng)
    start = np.zeros(horizon + 1, dtype=np.int64)
    start[0] = 1
    gens = [g.astype(np.int64) for g in _simulate_generations(params, start, gen)]
    family = np.sum(gens, axis=0)
    return FamilyRealization(
        horizon=horizon,
        per_generation=gens,
        family=family,
        total_size=int(family.sum()),
        generation_sizes=np.array([int(g.sum()) for g in gens], dtype=np.int64),
    )


def simulate_families(
    params: InarParams, horizon: int, reps: int, rng: RngLike = None
) -> tuple[np.ndarray, np.ndarray]:
    """Many independent families at once.

    Returns ``(F, Y)`` with ``F`` of shape ``(reps, horizon+1)`` holding the
    family processes and ``Y`` of shape ``(reps, g_max+1)`` holding the
    generation totals (zero-padded).
    """
    gen = as_generator(rng)
    start = np.zeros((reps, horizon + 1), dtype=np.int64)
    start[:, 0] = 1
    gens = _simulate_generations(params, start, gen)
    F = np.sum(gens, axis=0).astype(np.int64)
    Y = np.stack([g.sum(axis=1) for g in gens], axis=1).astype(np.int64)
    return F, Y


def simulate_inar_branching_paths(
    params: InarParams,
    n_steps: int,
    reps: int = 1,
    lookback: int | None = None,
    rng: RngLike = None,
) -> np.ndarray:
    """INAR paths as superpositions of immigrant families, shape ``(reps, n_steps)``.

    Immigrants arrive on steps ``-lookback..n_steps-1``. Families are run
    generation by generation; all immigrants are advanced together since the
    generation recursion is additive over independent families.
    """
    gen = as_generator(rng)
    if lookback is None:
        lookback = branching_lookback(params)
    immigrants = gen.poisson(params.alpha0, size=(reps, lookback + n_steps))
    X = np.sum(_simulate_generations(params, immigrants, gen), axis=0)
    return np.asarray(X[:, lookback:], dtype=np.int64)


def simulate_inar_branching(
    params: InarParams,
    n_steps: int,
    lookback: int | None = None,
    rng: RngLike = None,
    delta: float = 1.0,
) -> CountSeries:
    path = simulate_inar_branching_paths(params, n_steps, 1, lookback, rng)[0]
    return CountSeries(delta, 0, path)


# --------------------------------------------------------------------------
# residuals


def residuals(series: CountSeries | np.ndarray, params: InarParams) -> np.ndarray:
    """``u_n = X_n - Σ α_k X_{n-k} - α0`` for every ``n`` with a full lag window."""
    x = np.asarray(series.counts if isinstance(series, CountSeries) else series, dtype=float)
    p = params.p
    if len(x) <= p:
        raise SeriesTooShort(f"series of length {len(x)} cannot hold a lag window of {p}")
    fitted = _offspring_mean(params, x)
    return (x - fitted - params.alpha0)[p:]


# --------------------------------------------------------------------------
# moment-generating function


@dataclass(frozen=True)
class FiniteSupportSeq:
    """Argument ``(t_0, ..., t_d)`` of a joint MGF, zero beyond index ``d``."""

    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def support(self) -> int:
        nz = [i for i, v in enumerate(self.values) if v != 0]
        return nz[-1] if nz else 0


def mgf(params: InarParams, t_seq: FiniteSupportSeq | Sequence[float], tol: float = DEFAULT_TOL) -> float:
    """Joint MGF ``E exp(Σ t_n X_n)`` for nonpositive arguments.

    Writes ``m(j)`` for the family MGF at the argument shifted by ``j``. Then
    ``m(j) = exp(t_j + Σ_k α_k (m(j+k) - 1))`` with ``m(j) = 1`` for ``j > d``,
    which is solved backwards from ``j = d``. The MGF of the series is
    ``exp(α0 Σ_{j<=d} (m(j) - 1))``; the sum over ``j < J`` is bounded by
    ``B_J / (1 - K)`` with ``B_J = Σ_i α_i Σ_{m=J}^{J+i-1} (1 - m(m))``, and the
    recursion stops once ``α0 B_J / (1 - K) < tol``.
    """
    values = np.asarray(t_seq.values if isinstance(t_seq, FiniteSupportSeq) else t_seq, dtype=float)
    if np.any(values > 0):
        raise UnsupportedArgument("only nonpositive arguments are supported")
    if values.size == 0 or not np.any(values):
        return 1.0
    d = int(np.nonzero(values)[0][-1])
    t = values[: d + 1]
    alphas = params.alphas
    p = params.p
    if params.alpha0 == 0:
        return 1.0

    # a[r] = 1 - m(d - r); a[r] = 0 for r < 0 is represented by p leading zeros
    size = p + d + 1 + 1024
    a = np.zeros(size)
    upper = np.cumsum(alphas[::-1])[::-1] if p else np.zeros(0)
    k_explicit = float(alphas.sum())
    total = 0.0
    r = 0
    while True:
        idx = p + r
        if idx >= size:
            a = np.concatenate((a, np.zeros(size)))
            size = len(a)
        j = d - r
        tj = t[j] if j >= 0 else 0.0
        # a[idx-k] = 1 - m(j+k) for k = 1..p
        excite = float(alphas @ a[idx - p : idx][::-1]) if p else 0.0
        a[idx] = -math.expm1(tj - excite)
        total += a[idx]
        r += 1
        if j <= 0:
            if p == 0:
                break
            # window a_{J..J+p-1} sits at positions idx, idx-1, ..., idx-p+1
            window = a[idx - p + 1 : idx + 1][::-1]
            bound = params.alpha0 * float(upper @ window) / (1.0 - k_explicit)
            if bound < tol:
                break
    return math.exp(-params.alpha0 * total)

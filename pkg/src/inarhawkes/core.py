"""Parameter objects, reproduction kernels and the Δ-grid discretization.

Kernels are closed families (exponential, step, piecewise-linear table) so
that the total mass ``K = ∫ h`` and the Riemann sum ``K(Δ) = Δ Σ_k h(kΔ)``
are available in closed form, together with exact tail masses.

Grid convention: the count ``X_n`` sits at time ``nΔ`` and bin ``n`` covers
``((n-1)Δ, nΔ]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.integrate import quad

from . import _io
from .errors import (
    ConfigInvalid,
    DiscretizationSupercritical,
    MassNotSubcritical,
    TailTooHeavy,
)

# relative tolerance used when snapping ratios such as w/Δ onto integers
GRID_SNAP = 1e-9

DEFAULT_TAIL_TOL = 1e-10
MAX_COEFFS = 10**6


def _grid_count(length: float, delta: float) -> int:
    """Number of k >= 1 with kΔ <= length, robust to float round-off."""
    if length <= 0:
        return 0
    return int(math.floor(length / delta + GRID_SNAP))


# --------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class Exponential:
    """``h(t) = a exp(-b t)`` for ``t > 0``."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a >= 0 and math.isfinite(self.a)):
            raise ConfigInvalid(f"exponential kernel needs a >= 0, got {self.a}")
        if not (self.b > 0 and math.isfinite(self.b)):
            raise ConfigInvalid(f"exponential kernel needs b > 0, got {self.b}")

    family = "exponential"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t > 0, self.a * np.exp(-self.b * np.maximum(t, 0.0)), 0.0)
        return out if out.ndim else float(out)

    @property
    def mass(self) -> float:
        return self.a / self.b

    @property
    def discontinuities(self) -> tuple[float, ...]:
        return (0.0,) if self.a > 0 else ()

    @property
    def support_end(self) -> float:
        return math.inf if self.a > 0 else 0.0

    @property
    def sup(self) -> float:
        return self.a

    def tail_mass(self, x: float) -> float:
        return self.mass * math.exp(-self.b * max(x, 0.0))

    def envelope(self, x):
        """``sup_{u >= x} h(u)``, a nonincreasing majorant."""
        x = np.asarray(x, dtype=float)
        out = self.a * np.exp(-self.b * np.maximum(x, 0.0))
        return out if out.ndim else float(out)

    def grid(self, delta: float, n: int) -> np.ndarray:
        k = np.arange(1, n + 1, dtype=float)
        return self.a * np.exp(-self.b * delta * k)

    def grid_tail(self, delta: float, n: int) -> float:
        """``Δ Σ_{k>n} h(kΔ)`` in closed form."""
        if self.a == 0:
            return 0.0
        # r**(n+1)/(1-r) with r = exp(-bΔ); expm1 keeps small bΔ accurate
        return delta * self.a * math.exp(-self.b * delta * (n + 1)) / -math.expm1(-self.b * delta)

    def exp_moment(self, theta: float) -> float:
        """``∫ e^{θt} h(t) dt`` (infinite for ``θ >= b``)."""
        if self.a == 0:
            return 0.0
        return self.a / (self.b - theta) if theta < self.b else math.inf

    def sample_displacement(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.exponential(1.0 / self.b, size=size)

    def to_dict(self) -> dict:
        return {"family": "exponential", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Step:
    """``h(t) = c`` on ``0 < t <= w``, zero elsewhere."""

    c: float
    w: float

    def __post_init__(self):
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise ConfigInvalid(f"step kernel needs c >= 0, got {self.c}")
        if not (self.w > 0 and math.isfinite(self.w)):
            raise ConfigInvalid(f"step kernel needs w > 0, got {self.w}")

    family = "step"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where((t > 0) & (t <= self.w), self.c, 0.0)
        return out if out.ndim else float(out)

    @property
    def mass(self) -> float:
        return self.c * self.w

    @property
    def discontinuities(self) -> tuple[float, ...]:
        return (0.0, self.w) if self.c > 0 else ()

    @property
    def support_end(self) -> float:
        return self.w if self.c > 0 else 0.0

    @property
    def sup(self) -> float:
        return self.c

    def tail_mass(self, x: float) -> float:
        return self.c * min(max(self.w - max(x, 0.0), 0.0), self.w)

    def envelope(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x <= self.w, self.c, 0.0)
        return out if out.ndim else float(out)

    def grid(self, delta: float, n: int) -> np.ndarray:
        inside = _grid_count(self.w, delta)
        out = np.zeros(n)
        out[: min(n, inside)] = self.c
        return out

    def grid_tail(self, delta: float, n: int) -> float:
        inside = _grid_count(self.w, delta)
        return delta * self.c * max(inside - n, 0)

    def exp_moment(self, theta: float) -> float:
        if theta == 0:
            return self.mass
        return self.c * math.expm1(theta * self.w) / theta

    def sample_displacement(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # (0, w]: the point 0 itself is excluded
        return self.w * (1.0 - rng.random(size))

    def to_dict(self) -> dict:
        return {"family": "step", "c": self.c, "w": self.w}


@dataclass(frozen=True)
class Table:
    """Piecewise-linear kernel through ``knots = ((t_1, h_1), ..., (t_m, h_m))``.

    On ``(0, t_1]`` the kernel is flat at ``h_1``; between knots it is linear;
    beyond ``t_m`` it is zero.
    """

    knots: tuple[tuple[float, float], ...]
    _t: np.ndarray = field(init=False, repr=False, compare=False)
    _h: np.ndarray = field(init=False, repr=False, compare=False)
    _cum: np.ndarray = field(init=False, repr=False, compare=False)
    _suffix_max: np.ndarray = field(init=False, repr=False, compare=False)

    family = "table"

    def __post_init__(self):
        knots = tuple((float(t), float(h)) for t, h in self.knots)
        if not knots:
            raise ConfigInvalid("table kernel needs at least one knot")
        t = np.array([k[0] for k in knots])
        h = np.array([k[1] for k in knots])
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(h)):
            raise ConfigInvalid("table knots must be finite")
        if t[0] <= 0 or np.any(np.diff(t) <= 0):
            raise ConfigInvalid("table knot times must be positive and strictly increasing")
        if np.any(h < 0):
            raise ConfigInvalid("table knot heights must be nonnegative")
        object.__setattr__(self, "knots", knots)
        # segment 0 is the flat piece (0, t_1]
        seg_mass = np.concatenate(([h[0] * t[0]], 0.5 * (h[1:] + h[:-1]) * np.diff(t)))
        cum = np.concatenate(([0.0], np.cumsum(seg_mass)))
        suffix = np.maximum.accumulate(h[::-1])[::-1]
        for name, arr in (("_t", t), ("_h", h), ("_cum", cum), ("_suffix_max", np.append(suffix, 0.0))):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t > 0) & (t <= self._t[-1])
        out = np.where(inside, np.interp(t, self._t, self._h), 0.0)
        return out if out.ndim else float(out)

    @property
    def mass(self) -> float:
        return float(self._cum[-1])

    @property
    def discontinuities(self) -> tuple[float, ...]:
        jumps = []
        if self._h[0] > 0:
            jumps.append(0.0)
        if self._h[-1] > 0:
            jumps.append(float(self._t[-1]))
        return tuple(jumps)

    @property
    def support_end(self) -> float:
        nz = np.nonzero(self._h > 0)[0]
        if nz.size == 0:
            return 0.0
        last = nz[-1]
        # linear decay to the next knot when the last positive knot is interior
        return float(self._t[min(last + 1, len(self._t) - 1)])

    @property
    def sup(self) -> float:
        return float(self._h.max())

    def _cdf(self, x: float) -> float:
        """``∫_0^x h``."""
        if x <= 0:
            return 0.0
        if x >= self._t[-1]:
            return self.mass
        if x <= self._t[0]:
            return self._h[0] * x
        i = int(np.searchsorted(self._t, x, side="right")) - 1
        hx = float(np.interp(x, self._t, self._h))
        return float(self._cum[i + 1] + 0.5 * (self._h[i] + hx) * (x - self._t[i]))

    def tail_mass(self, x: float) -> float:
        return max(self.mass - self._cdf(x), 0.0)

    def envelope(self, x):
        x = np.asarray(x, dtype=float)
        later = self._suffix_max[np.searchsorted(self._t, x, side="right")]
        here = np.where(x <= self._t[-1], np.interp(np.maximum(x, 0.0), self._t, self._h), 0.0)
        out = np.maximum(later, here)
        return out if out.ndim else float(out)

    def _grid_points(self, delta: float) -> int:
        return _grid_count(float(self._t[-1]), delta)

    def grid(self, delta: float, n: int) -> np.ndarray:
        inside = self._grid_points(delta)
        out = np.zeros(n)
        m = min(n, inside)
        if m:
            tk = np.minimum(delta * np.arange(1, m + 1), self._t[-1])
            out[:m] = np.interp(tk, self._t, self._h)
        return out

    def grid_tail(self, delta: float, n: int) -> float:
        inside = self._grid_points(delta)
        if inside <= n:
            return 0.0
        return float(delta * self.grid(delta, inside)[n:].sum())

    def exp_moment(self, theta: float) -> float:
        edges = np.concatenate(([0.0], self._t))
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            total += quad(lambda u: math.exp(theta * u) * float(self(u)), lo, hi)[0]
        return total

    def sample_displacement(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.mass <= 0:
            raise ValueError("cannot sample displacements from a zero kernel")
        r = rng.random(size) * self.mass
        seg = np.clip(np.searchsorted(self._cum, r, side="right") - 1, 0, len(self._t) - 1)
        left_t = np.where(seg == 0, 0.0, self._t[np.maximum(seg - 1, 0)])
        right_t = self._t[seg]
        left_h = np.where(seg == 0, self._h[0], self._h[np.maximum(seg - 1, 0)])
        right_h = self._h[seg]
        slope = (right_h - left_h) / (right_t - left_t)
        rem = r - self._cum[seg]
        # solve left_h*y + slope*y^2/2 = rem in the cancellation-free form
        disc = np.sqrt(np.maximum(left_h**2 + 2.0 * slope * rem, 0.0))
        denom = left_h + disc
        with np.errstate(divide="ignore", invalid="ignore"):
            y = np.where(denom > 0, 2.0 * rem / denom, 0.0)
        y = np.clip(y, 0.0, right_t - left_t)
        out = left_t + y
        # displacement must be strictly positive
        return np.where(out > 0, out, np.nextafter(0.0, 1.0))

    def to_dict(self) -> dict:
        return {"family": "table", "knots": [list(k) for k in self.knots]}


ReproductionKernel = Union[Exponential, Step, Table]


def kernel_from_dict(doc: dict) -> ReproductionKernel:
    try:
        family = doc["family"]
        if family == "exponential":
            return Exponential(float(doc["a"]), float(doc["b"]))
        if family == "step":
            return Step(float(doc["c"]), float(doc["w"]))
        if family == "table":
            return Table(tuple(tuple(k) for k in doc["knots"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigInvalid):
            raise
        raise ConfigInvalid(f"bad kernel document {doc!r}: {exc}") from exc
    raise ConfigInvalid(f"unknown kernel family {doc.get('family')!r}")


def zero_kernel() -> Exponential:
    return Exponential(0.0, 1.0)


def kernel_eval(kernel: ReproductionKernel, t):
    """Evaluate ``h(t)``; exactly zero for ``t <= 0``."""
    return kernel(t)


def kernel_mass(kernel: ReproductionKernel, require_subcritical: bool = False) -> float:
    """Total mass ``K = ∫_0^∞ h(t) dt`` from the family's closed form."""
    K = kernel.mass
    if require_subcritical and K >= 1:
        raise MassNotSubcritical(f"kernel mass K={K} is not below 1")
    return K


def k_delta(kernel: ReproductionKernel, delta: float) -> float:
    """Riemann sum ``K(Δ) = Δ Σ_{k>=1} h(kΔ)`` with an exact tail.

    Raises DiscretizationSupercritical when ``K(Δ) >= 1``.
    """
    if not delta > 0:
        raise ConfigInvalid(f"delta must be positive, got {delta}")
    kd = kernel.grid_tail(delta, 0)
    if kd >= 1:
        raise DiscretizationSupercritical(
            f"K(Δ)={kd} >= 1 for Δ={delta}; the grid is too coarse for this kernel"
        )
    return kd


# --------------------------------------------------------------------------
# parameter containers


@dataclass(frozen=True, eq=False)
class InarParams:
    """Immigration parameter ``alpha0`` and reproduction coefficients.

    ``alphas[k-1]`` holds ``α_k``. ``tail_bound`` covers the mass of any
    coefficients beyond the stored vector; it enters ``K`` but not the
    simulators.
    """

    alpha0: float
    alphas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tail_bound: float = 0.0

    def __post_init__(self):
        alphas = np.array(self.alphas, dtype=float).reshape(-1)
        alphas.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "alpha0", float(self.alpha0))
        object.__setattr__(self, "tail_bound", float(self.tail_bound))
        if not (self.alpha0 >= 0 and math.isfinite(self.alpha0)):
            raise ConfigInvalid(f"alpha0 must be >= 0, got {self.alpha0}")
        if np.any(~np.isfinite(alphas)) or np.any(alphas < 0):
            raise ConfigInvalid("reproduction coefficients must be finite and >= 0")
        if not self.tail_bound >= 0:
            raise ConfigInvalid(f"tail_bound must be >= 0, got {self.tail_bound}")
        if self.K >= 1:
            raise MassNotSubcritical(f"reproduction mean K={self.K} is not below 1")

    @property
    def K(self) -> float:
        return float(self.alphas.sum()) + self.tail_bound

    @property
    def p(self) -> int:
        return len(self.alphas)

    def __eq__(self, other):
        if not isinstance(other, InarParams):
            return NotImplemented
        return (
            self.alpha0 == other.alpha0
            and self.tail_bound == other.tail_bound
            and np.array_equal(self.alphas, other.alphas)
        )

    def __hash__(self):
        return hash((self.alpha0, self.tail_bound, self.alphas.tobytes()))

    def to_dict(self) -> dict:
        return {
            "alpha0": self.alpha0,
            "alphas": [float(a) for a in self.alphas],
            "tail_bound": self.tail_bound,
        }


def default_coefficient_count(
    kernel: ReproductionKernel, delta: float, tail_tol: float = DEFAULT_TAIL_TOL, max_coeffs: int = MAX_COEFFS
) -> int:
    """Smallest ``p`` whose dropped grid mass is below ``tail_tol * K(Δ)``."""
    total = kernel.grid_tail(delta, 0)
    if total == 0:
        return 0
    target = tail_tol * total
    if isinstance(kernel, Exponential):
        # tail(p) = K(Δ) exp(-b Δ p)
        p = max(int(math.ceil(-math.log(tail_tol) / (kernel.b * delta))), 0)
        while p > 0 and kernel.grid_tail(delta, p - 1) < target:
            p -= 1
        while kernel.grid_tail(delta, p) >= target:
            p += 1
    else:
        p = _grid_count(kernel.support_end, delta)
        if isinstance(kernel, Table):
            p = kernel._grid_points(delta)
    if p > max_coeffs:
        raise TailTooHeavy(f"needs {p} coefficients (> cap {max_coeffs}) to reach tail tolerance {tail_tol}")
    return p


def discretize(
    eta: float,
    kernel: ReproductionKernel,
    delta: float,
    trunc_horizon: float | None = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
    max_coeffs: int = MAX_COEFFS,
) -> InarParams:
    """INAR parameters ``α0 = Δη``, ``α_k = Δ h(kΔ)`` for ``kΔ <= horizon``.

    Without ``trunc_horizon`` the horizon is the shortest one whose dropped
    mass is below ``tail_tol`` relative to ``K(Δ)``. The dropped mass is kept
    exactly in ``tail_bound``.
    """
    if not eta >= 0:
        raise ConfigInvalid(f"eta must be >= 0, got {eta}")
    k_delta(kernel, delta)
    if trunc_horizon is None:
        p = default_coefficient_count(kernel, delta, tail_tol, max_coeffs)
    else:
        p = _grid_count(trunc_horizon, delta)
        if p > max_coeffs:
            raise TailTooHeavy(f"horizon {trunc_horizon} needs {p} coefficients (> cap {max_coeffs})")
    alphas = delta * kernel.grid(delta, p)
    # trailing zeros carry no information
    nz = np.nonzero(alphas)[0]
    alphas = alphas[: nz[-1] + 1] if nz.size else alphas[:0]
    tail = kernel.grid_tail(delta, p)
    try:
        return InarParams(delta * eta, alphas, tail)
    except MassNotSubcritical as exc:
        raise DiscretizationSupercritical(str(exc)) from exc


# --------------------------------------------------------------------------
# data containers


@dataclass(frozen=True, eq=False)
class CountSeries:
    """Counts ``X_{n0}, X_{n0+1}, ...`` on a grid of width ``delta``."""

    delta: float
    start_index: int
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1:
            raise ValueError("counts must be one-dimensional")
        if counts.size and (counts.dtype.kind not in "iu"):
            if not np.all(counts == np.round(counts)):
                raise ValueError("counts must be integers")
        counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "start_index", int(self.start_index))
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    def __len__(self):
        return len(self.counts)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start_index, self.start_index + len(self.counts))

    def to_csv(self, path=None) -> str:
        text = _io.csv_text(("index", "count"), zip(self.indices, self.counts))
        if path is not None:
            _io.atomic_write(path, text)
        return text

    @classmethod
    def from_csv(cls, path, delta: float) -> "CountSeries":
        header, rows = _io.read_csv(path)
        if header != ["index", "count"]:
            raise ValueError(f"unexpected header {header}")
        idx = np.array([int(r[0]) for r in rows], dtype=np.int64)
        if idx.size and np.any(np.diff(idx) != 1):
            raise ValueError("indices must be consecutive")
        start = int(idx[0]) if idx.size else 0
        return cls(delta, start, np.array([int(r[1]) for r in rows], dtype=np.int64))


@dataclass(frozen=True, eq=False)
class PointPattern:
    """Sorted event times inside the half-open window ``(a, b]``."""

    window: tuple[float, float]
    times: np.ndarray

    def __post_init__(self):
        a, b = (float(x) for x in self.window)
        if not a < b:
            raise ValueError(f"window must satisfy a < b, got {self.window}")
        times = np.asarray(self.times, dtype=float).reshape(-1)
        if np.any(np.diff(times) < 0):
            raise ValueError("event times must be sorted")
        if times.size and (times[0] <= a or times[-1] > b):
            raise ValueError("event times must lie in the window (a, b]")
        times.setflags(write=False)
        object.__setattr__(self, "window", (a, b))
        object.__setattr__(self, "times", times)

    def __len__(self):
        return len(self.times)

    def to_csv(self, path=None) -> str:
        text = _io.csv_text(("time",), ((t,) for t in self.times))
        if path is not None:
            _io.atomic_write(path, text)
        return text

    @classmethod
    def from_csv(cls, path, window) -> "PointPattern":
        header, rows = _io.read_csv(path)
        if header != ["time"]:
            raise ValueError(f"unexpected header {header}")
        return cls(window, np.array([float(r[0]) for r in rows]))


# --------------------------------------------------------------------------
# random streams


@dataclass(frozen=True)
class RngStream:
    """A reproducible random substream identified by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, j: int) -> "RngStream":
        # stream ids are spread so that substreams of different parents do not collide
        return RngStream(self.seed, self.stream_id * 1_000_003 + 1 + int(j))


RngLike = Union[np.random.Generator, RngStream, int, None]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


# --------------------------------------------------------------------------
# JSON model document


def model_from_json(doc: dict) -> tuple[float, ReproductionKernel, float | None]:
    """Parse ``{"eta": ..., "kernel": {...}, "delta": ...}``."""
    if not isinstance(doc, dict):
        raise ConfigInvalid("model document must be a JSON object")
    try:
        eta = float(doc["eta"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"missing or invalid 'eta': {exc}") from exc
    if "kernel" not in doc:
        raise ConfigInvalid("missing 'kernel'")
    kernel = kernel_from_dict(doc["kernel"])
    delta = doc.get("delta")
    if delta is not None:
        try:
            delta = float(delta)
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(f"invalid 'delta': {exc}") from exc
        if not delta > 0:
            raise ConfigInvalid(f"delta must be positive, got {delta}")
    return eta, kernel, delta


def model_to_json(eta: float, kernel: ReproductionKernel, delta: float | None = None) -> dict:
    doc = {"eta": eta, "kernel": kernel.to_dict()}
    if delta is not None:
        doc["delta"] = delta
    return doc

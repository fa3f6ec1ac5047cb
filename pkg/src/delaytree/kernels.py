"""Attachment kernels, lookback-delay laws, and growth configuration.

The tree model grown here adds one vertex per time step.  The newcomer at
time n+1 draws a delay xi, looks at the *snapshot* of the tree as it was at
time m = max(floor(n - n**beta * xi), 1), and picks its parent among the m
vertices alive in that snapshot with probability proportional to
f(degree in the snapshot), where f is the attachment kernel.

This module owns the two ingredient families (kernels f and delay laws xi),
the snapshot-time arithmetic, and the immutable run configuration.  All
kernel and delay objects are frozen dataclasses: they are hashable, safe to
share across threads/processes, and usable as cache keys.

Degree bookkeeping convention used throughout the package: a vertex's
weight-relevant degree is its graph degree (child count, plus one for the
edge to its own parent; the root has no parent edge).  At time 1 the lone
root is assigned degree 1 by convention; this only ever affects the
normaliser Psi(1), never a sampling decision, because the time-1 snapshot
has a single vertex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ArgumentError, StrategyError

__all__ = [
    "AttachmentKernel",
    "UniformKernel",
    "AffineKernel",
    "TabulatedKernel",
    "DelayLaw",
    "ZeroDelay",
    "ConstantDelay",
    "Uniform01Delay",
    "InversePowerDelay",
    "ParetoDelay",
    "QuantileTableDelay",
    "GrowthConfig",
    "snapshot_time",
    "snapshot_times",
]


# ---------------------------------------------------------------------------
# Attachment kernels
# ---------------------------------------------------------------------------


class AttachmentKernel:
    """Weight function f on degrees k = 1, 2, ...

    Subclasses must guarantee f(k) > 0 and at-most-linear growth
    f(k) <= a*k + b; the pair (a, b) is exposed through ``linear_bound`` and
    is what the series truncation in :mod:`delaytree.theory` certifies
    against.
    """

    kind: str = "abstract"

    def evaluate(self, k: int) -> float:
        raise NotImplementedError

    def evaluate_array(self, ks: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`evaluate` over an integer degree array."""
        return np.array([self.evaluate(int(k)) for k in np.asarray(ks).ravel()])

    def linear_bound(self) -> tuple[float, float]:
        """(a, b) with f(k) <= a*k + b for every k >= 1."""
        raise NotImplementedError

    def sup_value(self) -> float | None:
        """Finite supremum of f if the kernel is bounded, else None."""
        return None

    def _check_degree(self, k: int) -> None:
        if k < 1:
            raise ArgumentError(f"kernel argument must be a degree >= 1, got {k}")


@dataclass(frozen=True)
class UniformKernel(AttachmentKernel):
    """f(k) = 1: every visible vertex is equally attractive."""

    kind: str = field(default="uniform", init=False)
    f_star: float = field(default=1.0, init=False)
    monotone: bool = field(default=True, init=False)

    def evaluate(self, k: int) -> float:
        self._check_degree(k)
        return 1.0

    def evaluate_array(self, ks: np.ndarray) -> np.ndarray:
        return np.ones(np.asarray(ks).shape)

    def linear_bound(self) -> tuple[float, float]:
        return (0.0, 1.0)

    def sup_value(self) -> float | None:
        return 1.0


@dataclass(frozen=True)
class AffineKernel(AttachmentKernel):
    """f(k) = k + alpha with alpha >= 0 (alpha = 0 is pure proportional)."""

    alpha: float
    kind: str = field(default="affine", init=False)
    monotone: bool = field(default=True, init=False)

    def __post_init__(self) -> None:
        if not (self.alpha >= 0.0) or not math.isfinite(self.alpha):
            raise ArgumentError(f"affine offset must be finite and >= 0, got {self.alpha}")

    @property
    def f_star(self) -> float:
        return 1.0 + self.alpha

    def evaluate(self, k: int) -> float:
        self._check_degree(k)
        return float(k) + self.alpha

    def evaluate_array(self, ks: np.ndarray) -> np.ndarray:
        return np.asarray(ks, dtype=np.float64) + self.alpha

    def linear_bound(self) -> tuple[float, float]:
        return (1.0, self.alpha)


@dataclass(frozen=True)
class TabulatedKernel(AttachmentKernel):
    """Explicit table f(1..K) continued by a tail rule beyond the table.

    tail is either ``("const",)`` -- f(k) = values[-1] for k > K -- or
    ``("pow", a)`` with 0 < a < 1 -- f(k) = k**a for k > K.  The minimum
    value ``f_star`` and the ``monotone`` flag must be supplied explicitly;
    they are validated against the table but never inferred, because the
    rejection sampler's correctness rides on ``monotone`` being true.
    """

    values: tuple[float, ...]
    tail: tuple = ("const",)
    f_star: float = 0.0
    monotone: bool = False
    kind: str = field(default="tabulated", init=False)

    def __post_init__(self) -> None:
        if not self.values:
            raise ArgumentError("tabulated kernel needs at least one value")
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if any(v <= 0.0 or not math.isfinite(v) for v in vals):
            raise ArgumentError("tabulated kernel values must be positive and finite")
        if self.tail[0] not in ("const", "pow"):
            raise ArgumentError(f"unknown tail rule {self.tail!r}")
        if self.tail[0] == "pow":
            if len(self.tail) != 2 or not (0.0 < self.tail[1] < 1.0):
                raise ArgumentError("power tail rule needs exponent a with 0 < a < 1")
        if self.f_star <= 0.0:
            raise ArgumentError("explicit f_star > 0 is required")
        if self.f_star > min(vals) + 1e-12:
            raise ArgumentError("declared f_star exceeds the table minimum")
        if self.monotone:
            if any(b < a for a, b in zip(vals, vals[1:])):
                raise ArgumentError("monotone flag set but table values decrease")
            k_next = len(vals) + 1
            if self.evaluate(k_next) < vals[-1] - 1e-12:
                raise ArgumentError("monotone flag set but tail rule drops below the table")

    def evaluate(self, k: int) -> float:
        self._check_degree(k)
        if k <= len(self.values):
            return self.values[k - 1]
        if self.tail[0] == "const":
            return self.values[-1]
        return float(k) ** self.tail[1]

    def evaluate_array(self, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        table = np.asarray(self.values)
        out = table[np.minimum(ks, len(self.values)) - 1].astype(np.float64)
        if self.tail[0] == "pow":
            over = ks > len(self.values)
            if over.any():
                out[over] = ks[over].astype(np.float64) ** self.tail[1]
        return out

    def linear_bound(self) -> tuple[float, float]:
        top = max(self.values)
        if self.tail[0] == "const":
            return (0.0, top)
        # tail f(k) = k**a <= k, table part <= top
        return (1.0, top)

    def sup_value(self) -> float | None:
        if self.tail[0] == "const":
            return max(self.values)
        return None


# ---------------------------------------------------------------------------
# Snapshot times
# ---------------------------------------------------------------------------


def snapshot_time(n: int, xi: float, beta: float) -> int:
    """Time of the snapshot consulted by the vertex arriving at time n+1.

    Returns max(floor(n - n**beta * xi), 1).  The product is formed in
    double precision before flooring, so a delay that barely fails to reach
    the previous integer is not rounded down twice.
    """
    if n < 1:
        raise ArgumentError(f"current size must be >= 1, got {n}")
    if xi < 0.0:
        raise ArgumentError(f"delay must be >= 0, got {xi}")
    if not (0.0 <= beta < 1.0):
        raise ArgumentError(f"lookback exponent must lie in [0, 1), got {beta}")
    m = math.floor(n - float(n) ** beta * xi)
    return m if m > 1 else 1


def snapshot_times(ns: np.ndarray, xis: np.ndarray, beta: float) -> np.ndarray:
    """Vectorised :func:`snapshot_time` (clamping before integer cast)."""
    if not (0.0 <= beta < 1.0):
        raise ArgumentError(f"lookback exponent must lie in [0, 1), got {beta}")
    ns = np.asarray(ns, dtype=np.float64)
    raw = np.floor(ns - ns**beta * np.asarray(xis, dtype=np.float64))
    return np.maximum(raw, 1.0).astype(np.int64)


# ---------------------------------------------------------------------------
# Delay laws
# ---------------------------------------------------------------------------


class DelayLaw:
    """Law of the nonnegative delay xi, bundled with the lookback exponent.

    beta lives on the delay law because the rescaled variable
    X = xi**(1/(1-beta)) -- the horizon over which an arrival can reach back
    to time 1 -- is a joint property of the pair, and every tail diagnostic
    below is really about X.
    """

    kind: str = "abstract"
    beta: float

    # --- sampling -------------------------------------------------------
    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> float:
        return float(self.sample_many(rng, 1)[0])

    # --- distribution ---------------------------------------------------
    def quantile(self, u: float) -> float:
        """Left-continuous inverse CDF, defined for u in [0, 1)."""
        raise NotImplementedError

    def survival(self, x: float) -> float:
        """P(xi > x)."""
        raise NotImplementedError

    def survival_array(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized survival; subclasses override with closed forms."""
        flat = np.asarray(xs, dtype=np.float64).ravel()
        out = np.array([self.survival(float(x)) for x in flat])
        return out.reshape(np.shape(xs))

    def partial_mean(self, a: np.ndarray, b: np.ndarray) -> np.ndarray | None:
        """Exact E[xi; a < xi <= b], elementwise over interval arrays.

        Returns None when no closed form exists; callers fall back to
        Monte Carlo.  This is the workhorse of the delay-condition scan,
        which decomposes an expectation over the floor function into
        O(n) such slabs.
        """
        return None

    def bounded_support(self) -> float | None:
        """Supremum of the support if finite, else None."""
        return None

    def _check_beta(self) -> None:
        if not (0.0 <= self.beta < 1.0):
            raise ArgumentError(f"lookback exponent must lie in [0, 1), got {self.beta}")

    # --- the rescaled horizon X = xi**(1/(1-beta)) ----------------------
    def x_of_xi(self, xi: float) -> float:
        return float(xi) ** (1.0 / (1.0 - self.beta))

    def x_survival(self, x: float) -> float:
        """P(X > x) for the rescaled horizon."""
        if x < 0.0:
            return 1.0
        return self.survival(x ** (1.0 - self.beta))

    def x_tail_index(self) -> float | None:
        """gamma with P(X > x) ~ C * x**(-gamma); None when X is bounded."""
        return None

    def x_power_moment_finite(self, q: float) -> bool:
        """Whether E[X**q] < infinity (boundary cases count as infinite)."""
        bound = self.bounded_support()
        if bound is not None:
            return True
        gamma = self.x_tail_index()
        if gamma is None:
            return True
        return gamma > q

    def ex_x_truncated(self, n: float) -> float:
        """E[min(X, n)], exact per family (quadrature for table laws)."""
        raise NotImplementedError

    def describe(self) -> str:
        return self.kind


@dataclass(frozen=True)
class ZeroDelay(DelayLaw):
    """xi = 0: the snapshot is always the current tree (classical model)."""

    beta: float = 0.5
    kind: str = field(default="zero", init=False)

    def __post_init__(self) -> None:
        self._check_beta()

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.zeros(size)

    def quantile(self, u: float) -> float:
        return 0.0

    def survival(self, x: float) -> float:
        return 1.0 if x < 0.0 else 0.0

    def survival_array(self, xs: np.ndarray) -> np.ndarray:
        return np.where(np.asarray(xs, dtype=np.float64) < 0.0, 1.0, 0.0)

    def partial_mean(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.zeros(np.broadcast(a, b).shape)

    def bounded_support(self) -> float | None:
        return 0.0

    def ex_x_truncated(self, n: float) -> float:
        return 0.0


@dataclass(frozen=True)
class ConstantDelay(DelayLaw):
    """xi = c deterministically."""

    c: float
    beta: float = 0.5
    kind: str = field(default="constant", init=False)

    def __post_init__(self) -> None:
        self._check_beta()
        if self.c < 0.0 or not math.isfinite(self.c):
            raise ArgumentError(f"constant delay must be finite and >= 0, got {self.c}")

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, self.c)

    def quantile(self, u: float) -> float:
        return self.c

    def survival(self, x: float) -> float:
        return 1.0 if x < self.c else 0.0

    def survival_array(self, xs: np.ndarray) -> np.ndarray:
        return np.where(np.asarray(xs, dtype=np.float64) < self.c, 1.0, 0.0)

    def partial_mean(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        return np.where((a < self.c) & (self.c <= b), self.c, 0.0)

    def bounded_support(self) -> float | None:
        return self.c

    def ex_x_truncated(self, n: float) -> float:
        return min(self.x_of_xi(self.c), float(n))


@dataclass(frozen=True)
class Uniform01Delay(DelayLaw):
    """xi ~ Uniform(0, 1)."""

    beta: float = 0.5
    kind: str = field(default="uniform01", init=False)

    def __post_init__(self) -> None:
        self._check_beta()

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.random(size)

    def quantile(self, u: float) -> float:
        return float(u)

    def survival(self, x: float) -> float:
        if x < 0.0:
            return 1.0
        return max(0.0, 1.0 - x)

    def survival_array(self, xs: np.ndarray) -> np.ndarray:
        return np.clip(1.0 - np.asarray(xs, dtype=np.float64), 0.0, 1.0)

    def partial_mean(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        lo = np.clip(np.asarray(a, dtype=np.float64), 0.0, 1.0)
        hi = np.clip(np.asarray(b, dtype=np.float64), 0.0, 1.0)
        return 0.5 * (hi * hi - lo * lo)

    def bounded_support(self) -> float | None:
        return 1.0

    def ex_x_truncated(self, n: float) -> float:
        # X = U**(1/(1-beta)) <= 1, so the truncation never binds for n >= 1
        r = 1.0 / (1.0 - self.beta)
        if n >= 1.0:
            return 1.0 / (r + 1.0)
        # E[min(X, n)] = n*P(X > n) + E[X; X <= n], with X <= n iff U <= n**(1/r)
        u0 = n ** (1.0 / r)
        return n * (1.0 - u0) + u0 ** (r + 1.0) / (r + 1.0)


@dataclass(frozen=True)
class InversePowerDelay(DelayLaw):
    """xi = U**(-p) for U ~ Uniform(0,1): Pareto-type tail with index 1/p.

    The rescaled horizon X = U**(-p/(1-beta)) has tail index
    gamma = (1-beta)/p, which is what separates the light- and heavy-delay
    regimes for the root's degree.
    """

    p: float
    beta: float = 0.5
    kind: str = field(default="invpow", init=False)

    def __post_init__(self) -> None:
        self._check_beta()
        if self.p <= 0.0 or not math.isfinite(self.p):
            raise ArgumentError(f"inverse-power exponent must be > 0, got {self.p}")

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # 1 - U lies in (0, 1], avoiding a zero base under the negative power
        return (1.0 - rng.random(size)) ** (-self.p)

    def quantile(self, u: float) -> float:
        return (1.0 - u) ** (-self.p)

    def survival(self, x: float) -> float:
        if x <= 1.0:
            return 1.0
        return x ** (-1.0 / self.p)

    def survival_array(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        safe = np.where(xs > 1.0, xs, 1.0)
        return np.where(xs > 1.0, safe ** (-1.0 / self.p), 1.0)

    def partial_mean(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        lo = np.maximum(np.asarray(a, dtype=np.float64), 1.0)
        hi = np.maximum(np.asarray(b, dtype=np.float64), 1.0)
        if abs(self.p - 1.0) < 1e-12:
            return np.log(hi / lo)
        expo = (self.p - 1.0) / self.p
        return (hi**expo - lo**expo) / (self.p - 1.0)

    def x_tail_index(self) -> float | None:
        return (1.0 - self.beta) / self.p

    def ex_x_truncated(self, n: float) -> float:
        # P(X > x) = x**(-gamma) for x >= 1
        gamma = self.x_tail_index()
        if n <= 1.0:
            return float(n)
        if abs(gamma - 1.0) < 1e-12:
            return 1.0 + math.log(n)
        return 1.0 + (n ** (1.0 - gamma) - 1.0) / (1.0 - gamma)


@dataclass(frozen=True)
class ParetoDelay(DelayLaw):
    """Pareto delay: P(xi > x) = (scale/x)**tail_index for x >= scale."""

    tail_index: float
    scale: float = 1.0
    beta: float = 0.5
    kind: str = field(default="pareto", init=False)

    def __post_init__(self) -> None:
        self._check_beta()
        if self.tail_index <= 0.0 or self.scale <= 0.0:
            raise ArgumentError("pareto delay needs tail_index > 0 and scale > 0")

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.scale * (1.0 - rng.random(size)) ** (-1.0 / self.tail_index)

    def quantile(self, u: float) -> float:
        return self.scale * (1.0 - u) ** (-1.0 / self.tail_index)

    def survival(self, x: float) -> float:
        if x <= self.scale:
            return 1.0
        return (self.scale / x) ** self.tail_index

    def survival_array(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        safe = np.where(xs > self.scale, xs, self.scale)
        return np.where(xs > self.scale, (self.scale / safe) ** self.tail_index, 1.0)

    def partial_mean(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        g, s = self.tail_index, self.scale
        lo = np.maximum(np.asarray(a, dtype=np.float64), s)
        hi = np.maximum(np.asarray(b, dtype=np.float64), s)
        if abs(g - 1.0) < 1e-12:
            return s * np.log(hi / lo)
        return g * s**g * (hi ** (1.0 - g) - lo ** (1.0 - g)) / (1.0 - g)

    def x_tail_index(self) -> float | None:
        return self.tail_index * (1.0 - self.beta)

    def ex_x_truncated(self, n: float) -> float:
        gamma = self.x_tail_index()
        x0 = self.x_of_xi(self.scale)
        if n <= x0:
            return float(n)
        if abs(gamma - 1.0) < 1e-12:
            return x0 + x0 * math.log(n / x0)
        return x0 + x0**gamma * (n ** (1.0 - gamma) - x0 ** (1.0 - gamma)) / (1.0 - gamma)


@dataclass(frozen=True)
class QuantileTableDelay(DelayLaw):
    """Empirical delay law given as (u, q) quantile knots.

    Sampling is inverse-transform with linear interpolation between knots.
    The first knot must sit at u = 0 and the last at u = 1, so the law is
    fully specified and has bounded support q(1).
    """

    us: tuple[float, ...]
    qs: tuple[float, ...]
    beta: float = 0.5
    kind: str = field(default="qtable", init=False)

    def __post_init__(self) -> None:
        self._check_beta()
        us = tuple(float(u) for u in self.us)
        qs = tuple(float(q) for q in self.qs)
        object.__setattr__(self, "us", us)
        object.__setattr__(self, "qs", qs)
        if len(us) != len(qs) or len(us) < 2:
            raise ArgumentError("quantile table needs matching u/q lists with >= 2 knots")
        if us[0] != 0.0 or us[-1] != 1.0:
            raise ArgumentError("quantile table must cover u = 0 .. 1")
        if any(b < a for a, b in zip(us, us[1:])):
            raise ArgumentError("quantile table u-knots must be non-decreasing")
        if any(q < 0.0 for q in qs) or any(b < a for a, b in zip(qs, qs[1:])):
            raise ArgumentError("quantile table q-knots must be non-negative and non-decreasing")

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.interp(rng.random(size), self.us, self.qs)

    def quantile(self, u: float) -> float:
        return float(np.interp(u, self.us, self.qs))

    def survival(self, x: float) -> float:
        if x < self.qs[0]:
            return 1.0
        if x >= self.qs[-1]:
            return 0.0
        return 1.0 - float(np.interp(x, self.qs, self.us))

    def survival_array(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        mid = 1.0 - np.interp(xs, self.qs, self.us)
        return np.where(xs < self.qs[0], 1.0, np.where(xs >= self.qs[-1], 0.0, mid))

    def bounded_support(self) -> float | None:
        return self.qs[-1]

    def ex_x_truncated(self, n: float) -> float:
        r = 1.0 / (1.0 - self.beta)

        def integrand(u: float) -> float:
            return min(float(np.interp(u, self.us, self.qs)) ** r, float(n))

        val, _ = integrate.quad(integrand, 0.0, 1.0, points=list(self.us), limit=200, epsrel=1e-9)
        return val


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

_SAMPLERS = ("auto", "edge", "rejection", "scan")


@dataclass(frozen=True)
class GrowthConfig:
    """Everything a single growth run depends on.

    sampler selects the parent-sampling strategy: "edge" is the
    endpoint-list trick (exact for uniform/affine kernels only),
    "rejection" is prefix-weighted proposal with acceptance thinning (any
    monotone kernel), "scan" is the linear-scan oracle (any kernel, O(n)
    per step), and "auto" resolves to the cheapest exact choice.
    """

    kernel: AttachmentKernel
    delay: DelayLaw
    n_final: int
    seed: int = 0
    sampler: str = "auto"
    fringe_cap: int = 6

    def __post_init__(self) -> None:
        if self.n_final < 2:
            raise ArgumentError(f"n_final must be >= 2, got {self.n_final}")
        if self.sampler not in _SAMPLERS:
            raise ArgumentError(f"sampler must be one of {_SAMPLERS}, got {self.sampler!r}")
        if not (0 <= self.seed < 2**64):
            raise ArgumentError("seed must fit in an unsigned 64-bit integer")
        if self.fringe_cap < 1:
            raise ArgumentError("fringe_cap must be >= 1")
        self.resolve_sampler()

    @property
    def beta(self) -> float:
        return self.delay.beta

    def resolve_sampler(self) -> str:
        """Concrete strategy name, validating kernel/sampler compatibility."""
        kind = self.kernel.kind
        if self.sampler == "auto":
            if kind in ("uniform", "affine"):
                return "edge"
            if getattr(self.kernel, "monotone", False):
                return "rejection"
            return "scan"
        if self.sampler == "edge" and kind not in ("uniform", "affine"):
            raise StrategyError("edge-endpoint sampling is exact only for uniform/affine kernels")
        if self.sampler == "rejection" and not getattr(self.kernel, "monotone", False):
            raise StrategyError("rejection sampling requires a monotone kernel")
        return self.sampler

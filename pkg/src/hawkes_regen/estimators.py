"""Sliding-window estimators and the pair statistic.

A window functional ``f`` is evaluated on the events in ``(t - A, t]``,
shifted to ``(-A, 0]``. The window content only changes at event times ``e``
(the point enters) and ``e + A`` (it leaves), so time integrals of ``f`` are
computed exactly as finite sums over these breakpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HorizonExceeded, InsufficientCycles, SupportViolation

__all__ = [
    "WindowFunctional",
    "Constant",
    "Count",
    "CountIndicator",
    "PairKernel",
    "Clamped",
    "PairKernelW",
    "window_integral",
    "sliding_average",
    "pair_statistic",
    "f_w_functional",
    "boundary_identity",
    "boundary_identity_residual",
    "cycle_rewards",
    "estimate_pi_cycles",
]


class WindowFunctional:
    """``f(mu)`` for a finite point configuration ``mu`` on ``(-A, 0]``.

    Subclasses that depend on the configuration only through its size set
    ``count_based = True`` and implement :meth:`from_counts`.
    """

    count_based = False

    def evaluate(self, window: np.ndarray, A: float) -> float:
        raise NotImplementedError

    def from_counts(self, counts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(WindowFunctional):
    value: float = 1.0
    count_based = True

    def evaluate(self, window, A):
        return float(self.value)

    def from_counts(self, counts):
        return np.full(np.shape(counts), float(self.value))

    def describe(self):
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class Count(WindowFunctional):
    """``mu((-A, 0])``."""

    count_based = True

    def evaluate(self, window, A):
        return float(len(window))

    def from_counts(self, counts):
        return np.asarray(counts, dtype=float)

    def describe(self):
        return {"kind": "count"}


@dataclass(frozen=True)
class CountIndicator(WindowFunctional):
    """``1{mu((-A, 0]) = k}``."""

    k: int
    count_based = True

    def evaluate(self, window, A):
        return float(len(window) == self.k)

    def from_counts(self, counts):
        return (np.asarray(counts) == self.k).astype(float)

    def describe(self):
        return {"kind": "count_indicator", "k": self.k}


@dataclass(frozen=True, eq=False)
class PairKernelW:
    """Pair weight ``w`` supported on ``[-support_len, 0]``.

    Either a constant on the support or piecewise linear through
    ``(grid, values)`` with ``grid`` inside ``[-support_len, 0]``.
    """

    support_len: float
    value: float | None = 1.0
    grid: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if not self.support_len >= 0:
            raise ValueError("support_len must be >= 0")
        if self.grid is not None:
            g = np.asarray(self.grid, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if g.shape != v.shape or g.size < 2 or np.any(np.diff(g) <= 0):
                raise ValueError("grid must be increasing and match values")
            if g[0] < -self.support_len or g[-1] > 0:
                raise ValueError("grid must lie in [-support_len, 0]")
            object.__setattr__(self, "grid", g)
            object.__setattr__(self, "values", v)
            object.__setattr__(self, "value", None)

    @property
    def sup_norm(self) -> float:
        if self.grid is not None:
            return float(np.abs(self.values).max())
        return abs(float(self.value))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= -self.support_len) & (x <= 0)
        if self.grid is not None:
            return np.where(inside, np.interp(x, self.grid, self.values, left=0.0, right=0.0), 0.0)
        return np.where(inside, float(self.value), 0.0)

    def describe(self):
        if self.grid is not None:
            return {"support_len": self.support_len, "grid": self.grid.tolist(), "values": self.values.tolist()}
        return {"support_len": self.support_len, "value": self.value}


def _lagged_pairs(times, max_gap):
    """Yield ``(d, y - x)`` for index pairs ``i = j - d <= j`` with gap <= ``max_gap``.

    Times must be sorted; ``d = 0`` gives the diagonal.
    """
    n = times.size
    for d in range(n):
        diff = times[: n - d] - times[d:]
        mask = diff >= -max_gap
        if not mask.any():
            return
        yield d, diff[mask], mask


@dataclass(frozen=True, eq=False)
class PairKernel(WindowFunctional):
    """The functional ``f_w``: pair sum of ``w(y - x) / (y - x + A)``."""

    w: PairKernelW

    def evaluate(self, window, A):
        return f_w_functional(window, self.w, A)

    def describe(self):
        return {"kind": "pair_kernel", "w": self.w.describe()}


@dataclass(frozen=True, eq=False)
class Clamped(WindowFunctional):
    """``max(a, min(b, inner(mu)))``."""

    inner: WindowFunctional
    a: float
    b: float

    def __post_init__(self):
        if not self.a <= self.b:
            raise ValueError("need a <= b")

    @property
    def count_based(self):
        return self.inner.count_based

    def evaluate(self, window, A):
        return min(self.b, max(self.a, self.inner.evaluate(window, A)))

    def from_counts(self, counts):
        return np.clip(self.inner.from_counts(counts), self.a, self.b)

    def describe(self):
        return {"kind": "clamped", "inner": self.inner.describe(), "a": self.a, "b": self.b}


def _times_of(path):
    return np.asarray(path.times if hasattr(path, "times") else path, dtype=float)


def window_integral(times, f: WindowFunctional, A: float, t0: float, t1: float) -> float:
    """``int_{t0}^{t1} f(events in (t - A, t], shifted) dt``, exactly."""
    times = np.asarray(times, dtype=float)
    if t1 <= t0:
        return 0.0
    leave = times + A
    bp = np.concatenate([[t0], times, leave])
    bp = np.unique(bp[(bp >= t0) & (bp < t1)])
    lengths = np.diff(np.append(bp, t1))
    # a point e has left the window at t iff e + A <= t, tested on the same floats as the breakpoints
    lo = np.searchsorted(leave, bp, side="right")
    hi = np.searchsorted(times, bp, side="right")
    if f.count_based:
        vals = f.from_counts(hi - lo)
    else:
        vals = np.array([f.evaluate(times[l:h] - b, A) for l, h, b in zip(lo, hi, bp)])
    return float(np.dot(vals, lengths))


def sliding_average(path, f: WindowFunctional, A: float, T: float) -> float:
    """``(1/T) int_0^T f((S_t N)|_{(-A, 0]}) dt``.

    ``path`` is a :class:`~hawkes_regen.simulate.PathRecord` or a sorted array
    of event times; events in ``(-A, 0]`` are visible to early windows.
    """
    if not T > 0:
        raise ValueError("T must be > 0")
    horizon = getattr(path, "horizon", np.inf)
    if T > horizon:
        raise HorizonExceeded(f"T = {T} beyond path horizon {horizon}")
    return window_integral(_times_of(path), f, A, 0.0, T) / T


def pair_statistic(path, w: PairKernelW, A: float, T: float) -> float:
    """``(1/T) sum_{-A < y <= x <= T} w(y - x)`` over ordered event pairs, diagonal included."""
    times = _times_of(path)
    ev = times[(times > -A) & (times <= T)]
    total = 0.0
    for _, diff, _ in _lagged_pairs(ev, w.support_len):
        total += float(w(diff).sum())
    return total / T


def f_w_functional(window, w: PairKernelW, A: float) -> float:
    """``sum_{-A < y <= x <= 0} w(y - x) / (y - x + A)`` over the window's pairs."""
    if not A > w.support_len:
        raise SupportViolation(f"A = {A} must exceed the support length {w.support_len}")
    ev = np.sort(np.asarray(window, dtype=float))
    total = 0.0
    for _, diff, _ in _lagged_pairs(ev, w.support_len):
        total += float((w(diff) / (diff + A)).sum())
    return total


def boundary_identity(path, w: PairKernelW, A: float, T: float):
    """Both sides of the pair-statistic/sliding-average identity.

    Returns ``(lhs, rhs)`` where ``lhs`` is the pair statistic minus the
    sliding average of ``f_w`` and ``rhs`` is the explicit sum over pairs in
    ``(T - A, T]``, plus a correction for pairs at or before time 0 that
    vanishes when the path has no initial points.
    """
    if not A > w.support_len:
        raise SupportViolation(f"A = {A} must exceed the support length {w.support_len}")
    lhs = pair_statistic(path, w, A, T) - sliding_average(path, PairKernel(w), A, T)
    times = _times_of(path)
    ev = times[(times > -A) & (times <= T)]
    n = ev.size
    rhs = 0.0
    for d, diff, mask in _lagged_pairs(ev, w.support_len):
        y = ev[: n - d][mask]
        x = ev[d:][mask]
        wv = w(diff) / (diff + A)
        edge = y + A > T
        rhs += float((wv[edge] * (y[edge] - T + A)).sum())
        rhs += float((wv * np.maximum(-x, 0.0)).sum())
    return lhs, rhs / T


def boundary_identity_residual(path, w: PairKernelW, A: float, T: float) -> float:
    """``lhs - rhs`` of :func:`boundary_identity`; zero up to rounding."""
    lhs, rhs = boundary_identity(path, w, A, T)
    return lhs - rhs


def _cumulative_counts_integral(times, f, A, points):
    """``int_{points[0]}^{p} f dt`` at each sorted ``p``, for count-based ``f``."""
    leave = times + A
    bp = np.unique(np.concatenate([points, times, leave]))
    bp = bp[(bp >= points[0]) & (bp <= points[-1])]
    counts = np.searchsorted(times, bp[:-1], side="right") - np.searchsorted(leave, bp[:-1], side="right")
    cum = np.concatenate([[0.0], np.cumsum(f.from_counts(counts) * np.diff(bp))])
    return cum[np.searchsorted(bp, points)]


def cycle_rewards(cycles, f: WindowFunctional, A: float):
    """Per-cycle rewards ``int_0^{tau_k} f dt`` and cycle lengths."""
    lengths = np.array([c.length for c in cycles], dtype=float)
    if not f.count_based or len(cycles) < 2:
        rewards = np.array([window_integral(c.times, f, A, 0.0, c.length) for c in cycles])
        return rewards, lengths
    # lay the cycles end to end, each preceded by a gap A for its head
    starts = np.concatenate([[0.0], np.cumsum(lengths + A)[:-1]]) + A
    times = np.concatenate([c.times + o for c, o in zip(cycles, starts)])
    points = np.sort(np.concatenate([starts, starts + lengths]))
    F = _cumulative_counts_integral(times, f, A, points)
    at = dict(zip(points.tolist(), F.tolist()))
    rewards = np.array([at[e] - at[b] for b, e in zip(starts.tolist(), (starts + lengths).tolist())])
    return rewards, lengths


def estimate_pi_cycles(cycles, f: WindowFunctional, A: float):
    """Renewal-reward estimate of the long-run mean of ``f``.

    Returns ``(estimate, std_error)``: the ratio of total reward to total
    cycle length, with a delta-method standard error.
    """
    cycles = [c for c in cycles if c.index != 0]
    n = len(cycles)
    if n < 2:
        raise InsufficientCycles(f"need at least 2 complete cycles, got {n}")
    R, tau = cycle_rewards(cycles, f, A)
    est = R.sum() / tau.sum()
    z = R - est * tau
    se = float(np.sqrt(np.sum(z**2) / (n - 1) / n) / tau.mean())
    return float(est), se

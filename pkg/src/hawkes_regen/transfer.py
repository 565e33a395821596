"""Transfer functions h >= 0 of a linear Hawkes process.

Four kernel families are built in: :class:`Zero`, :class:`Exponential`,
:class:`UniformBox` and :class:`Tabulated` (piecewise linear, zero outside its
grid). All are immutable. Besides pointwise evaluation each kernel knows its
L1 norm, first moment, exponential moments and tail masses, and can sample
offspring delays from the normalised density ``h / ||h||_1``.

Divergent exponential moments are returned as ``math.inf``; this is a regular
value, not an error.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NotSubcritical, ZeroKernel

INFINITE = math.inf

__all__ = [
    "INFINITE",
    "TransferFunction",
    "Zero",
    "Exponential",
    "UniformBox",
    "Tabulated",
    "l1_norm",
    "mean_moment",
    "exp_moment",
    "theta_star",
    "sample_delay",
    "truncated_offspring",
    "require_subcritical",
    "transfer_from_config",
]


class TransferFunction:
    """Common interface of the kernel families."""

    kind: str = "abstract"

    def __call__(self, t):
        raise NotImplementedError

    def l1_norm(self) -> float:
        raise NotImplementedError

    def mean_moment(self) -> float:
        raise NotImplementedError

    def exp_moment(self, theta: float) -> float:
        raise NotImplementedError

    def integrated(self, x):
        """Return ``int_0^x h(u) du`` (vectorised in ``x``)."""
        raise NotImplementedError

    def tail_mass(self, depth: float) -> float:
        """Return ``int_depth^inf h(u) du``."""
        return self.l1_norm() - float(self.integrated(depth))

    def _sample(self, rng, size):
        raise NotImplementedError

    def _sample_tail(self, depth, rng, size):
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Zero(TransferFunction):
    """The null kernel: no self-excitation, the process is Poisson."""

    kind = "zero"

    def __call__(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def l1_norm(self):
        return 0.0

    def mean_moment(self):
        return 0.0

    def exp_moment(self, theta):
        return 0.0

    def integrated(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def tail_mass(self, depth):
        return 0.0

    def _sample(self, rng, size):
        raise ZeroKernel("cannot sample a delay from the zero kernel")

    _sample_tail = _sample

    def to_config(self):
        return {"kind": "zero"}


@dataclass(frozen=True)
class Exponential(TransferFunction):
    """``h(t) = alpha * exp(-beta * t)``."""

    alpha: float
    beta: float
    kind = "exponential"

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError("alpha must be >= 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, self.alpha * np.exp(-self.beta * np.maximum(t, 0.0)), 0.0)

    def l1_norm(self):
        return self.alpha / self.beta

    def mean_moment(self):
        return self.alpha / self.beta**2

    def exp_moment(self, theta):
        if theta >= self.beta:
            return 0.0 if self.alpha == 0 else INFINITE
        return self.alpha / (self.beta - theta)

    def integrated(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return -self.alpha / self.beta * np.expm1(-self.beta * x)

    def tail_mass(self, depth):
        return self.alpha / self.beta * math.exp(-self.beta * max(depth, 0.0))

    def _sample(self, rng, size):
        return rng.exponential(1.0 / self.beta, size)

    def _sample_tail(self, depth, rng, size):
        # memoryless: U - depth given U > depth is again Exp(beta)
        return rng.exponential(1.0 / self.beta, size)

    def to_config(self):
        return {"kind": "exponential", "alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True)
class UniformBox(TransferFunction):
    """``h(t) = c * 1{0 < t <= b}``."""

    c: float
    b: float
    kind = "uniform_box"

    def __post_init__(self):
        if not self.c >= 0:
            raise ValueError("c must be >= 0")
        if not self.b > 0:
            raise ValueError("b must be > 0")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t > 0) & (t <= self.b), self.c, 0.0)

    def l1_norm(self):
        return self.c * self.b

    def mean_moment(self):
        return self.c * self.b**2 / 2

    def exp_moment(self, theta):
        if theta == 0:
            return self.l1_norm()
        return self.c * math.expm1(theta * self.b) / theta

    def integrated(self, x):
        x = np.asarray(x, dtype=float)
        return self.c * np.clip(x, 0.0, self.b)

    def _sample(self, rng, size):
        # 1 - U lies in (0, 1], so draws land in (0, b]
        return self.b * (1.0 - rng.random(size))

    def _sample_tail(self, depth, rng, size):
        return (self.b - depth) * (1.0 - rng.random(size))

    def to_config(self):
        return {"kind": "uniform_box", "c": self.c, "b": self.b}


def _phi2(x):
    """``((x - 1) e^x + 1) / x**2``, stable near 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-2
    xs = np.where(small, x, 0.0)
    series = 0.5 + xs / 3 + xs**2 / 8 + xs**3 / 30 + xs**4 / 144 + xs**5 / 840
    xl = np.where(small, 1.0, x)
    with np.errstate(over="ignore", invalid="ignore"):
        direct = ((xl - 1.0) * np.exp(xl) + 1.0) / xl**2
    return np.where(small, series, direct)


@dataclass(frozen=True, eq=False)
class Tabulated(TransferFunction):
    """Piecewise-linear kernel through ``(grid[i], values[i])``.

    The kernel vanishes outside ``[grid[0], grid[-1]]``. All integrals are
    exact for this interpolation.
    """

    grid: np.ndarray
    values: np.ndarray
    source: str | None = None
    _cum: np.ndarray = field(init=False, repr=False)
    kind = "tabulated"

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        values = np.array(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise ValueError("grid and values must be 1-d of equal length >= 2")
        if grid[0] < 0 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be nonnegative and strictly increasing")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("values must be finite and nonnegative")
        grid.setflags(write=False)
        values.setflags(write=False)
        seg = 0.5 * (values[1:] + values[:-1]) * np.diff(grid)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        cum.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def from_csv(cls, path):
        """Load a two-column ``t,h(t)`` CSV; a non-numeric header row is skipped."""
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    if rows:
                        raise
        arr = np.array(rows, dtype=float)
        return cls(arr[:, 0], arr[:, 1], source=str(Path(path)))

    @classmethod
    def from_function(cls, func, grid):
        grid = np.asarray(grid, dtype=float)
        return cls(grid, np.asarray(func(grid), dtype=float))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.interp(t, self.grid, self.values, left=0.0, right=0.0)

    def l1_norm(self):
        return float(self._cum[-1])

    def _segments(self):
        t0 = self.grid[:-1]
        dt = np.diff(self.grid)
        v0 = self.values[:-1]
        slope = np.diff(self.values) / dt
        return t0, dt, v0, slope

    def mean_moment(self):
        t0, dt, v0, m = self._segments()
        # int_0^dt (t0 + u)(v0 + m u) du
        seg = t0 * (v0 * dt + m * dt**2 / 2) + v0 * dt**2 / 2 + m * dt**3 / 3
        return float(seg.sum())

    def exp_moment(self, theta):
        if theta == 0:
            return self.l1_norm()
        t0, dt, v0, m = self._segments()
        x = theta * dt
        e1 = np.expm1(x) / theta
        e2 = dt**2 * _phi2(x)
        with np.errstate(over="ignore"):
            seg = np.exp(theta * t0) * (v0 * e1 + m * e2)
            total = float(seg.sum())
        return total if math.isfinite(total) else INFINITE

    def integrated(self, x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, self.grid[0], self.grid[-1])
        j = np.clip(np.searchsorted(self.grid, xc, side="right") - 1, 0, self.grid.size - 2)
        u = xc - self.grid[j]
        m = (self.values[j + 1] - self.values[j]) / (self.grid[j + 1] - self.grid[j])
        return self._cum[j] + self.values[j] * u + 0.5 * m * u**2

    def _invert(self, target):
        """Solve ``integrated(t) = target`` for ``t``; ``target`` in (0, l1]."""
        j = np.clip(np.searchsorted(self._cum, target, side="left") - 1, 0, self.grid.size - 2)
        r = target - self._cum[j]
        v = self.values[j]
        m = (self.values[j + 1] - self.values[j]) / (self.grid[j + 1] - self.grid[j])
        disc = np.maximum(v**2 + 2.0 * m * r, 0.0)
        denom = v + np.sqrt(disc)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(denom > 0, 2.0 * r / denom, 0.0)
        dt = self.grid[j + 1] - self.grid[j]
        return self.grid[j] + np.clip(u, 0.0, dt)

    def _sample(self, rng, size):
        total = self.l1_norm()
        if total == 0:
            raise ZeroKernel("tabulated kernel has zero mass")
        target = total * (1.0 - rng.random(size))
        return self._invert(target)

    def _sample_tail(self, depth, rng, size):
        total = self.l1_norm()
        lo = float(self.integrated(depth))
        target = lo + (total - lo) * (1.0 - rng.random(size))
        return np.maximum(self._invert(target) - depth, 0.0)

    def to_config(self):
        cfg = {"kind": "tabulated"}
        if self.source is not None:
            cfg["grid_file"] = self.source
        else:
            cfg["grid"] = self.grid.tolist()
            cfg["values"] = self.values.tolist()
        return cfg


def l1_norm(h: TransferFunction) -> float:
    return h.l1_norm()


def mean_moment(h: TransferFunction) -> float:
    return h.mean_moment()


def exp_moment(h: TransferFunction, theta: float) -> float:
    """Return ``int_0^inf e^(theta t) h(t) dt``, possibly ``INFINITE``."""
    if not theta > 0:
        raise ValueError("theta must be > 0")
    return h.exp_moment(theta)


def require_subcritical(h: TransferFunction) -> float:
    p = h.l1_norm()
    if not p < 1:
        raise NotSubcritical(f"||h||_1 = {p} is not < 1")
    return p


def theta_star(h: TransferFunction, tol: float = 1e-10) -> float:
    """Largest theta with ``exp_moment(h, theta) <= 1``.

    The bracket is grown by doubling from ``tol`` and then refined by
    bisection, so only monotonicity of the exponential moment is used.
    Returns ``INFINITE`` for the zero kernel.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    p = require_subcritical(h)
    if p == 0:
        return INFINITE
    cap = h.beta if isinstance(h, Exponential) else INFINITE
    lo, hi = 0.0, tol
    for _ in range(4096):
        if h.exp_moment(hi) >= 1:
            break
        lo, hi = hi, min(2.0 * hi, cap)
    else:
        return INFINITE
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h.exp_moment(mid) <= 1:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sample_delay(h: TransferFunction, rng: np.random.Generator, size=None):
    """Draw offspring delays from the density ``h / ||h||_1``."""
    if h.l1_norm() == 0:
        raise ZeroKernel("cannot sample a delay from a kernel with zero mass")
    out = h._sample(rng, size)
    return float(out) if size is None else out


def truncated_offspring(h: TransferFunction, depth: float, rng: np.random.Generator) -> np.ndarray:
    """First-generation births on (0, inf) of a point placed at ``-depth <= 0``.

    The number of births is Poisson with mean ``int_depth^inf h``; each birth
    time is ``U - depth`` with ``U`` drawn from ``h`` restricted to
    ``(depth, inf)``.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    mass = h.tail_mass(depth)
    n = rng.poisson(mass) if mass > 0 else 0
    if n == 0:
        return np.empty(0)
    return np.sort(h._sample_tail(depth, rng, n))


def transfer_from_config(cfg: dict, base_dir=None) -> TransferFunction:
    """Build a kernel from ``{kind, alpha, beta, c, b, grid_file}``."""
    kind = str(cfg.get("kind", "")).lower()
    if kind == "zero":
        return Zero()
    if kind == "exponential":
        return Exponential(float(cfg["alpha"]), float(cfg["beta"]))
    if kind in ("uniform_box", "uniformbox", "box"):
        return UniformBox(float(cfg["c"]), float(cfg["b"]))
    if kind == "tabulated":
        if "grid_file" in cfg:
            path = Path(cfg["grid_file"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            h = Tabulated.from_csv(path)
            return Tabulated(h.grid, h.values, source=str(cfg["grid_file"]))
        return Tabulated(cfg["grid"], cfg["values"])
    raise ValueError(f"unknown transfer kind {cfg.get('kind')!r}")

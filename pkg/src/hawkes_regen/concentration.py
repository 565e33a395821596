"""Non-asymptotic deviation bound for sliding-window averages.

For a functional with values in ``[a, b]`` and a null initial condition,

    P(|avg_T f - pi f| >= eps) <= 4 exp(-x^2 / (4 (2 v + c x))),
    x = T eps - |b - a| E[tau],

with ``c = |b - a| / alpha`` and
``v = 2 (b - a)^2 / alpha^2 * floor(T / E[tau]) * E[exp(alpha tau)] * exp(alpha E[tau])``.

Inputs come either from exact (or Monte Carlo) moments of ``tau^A`` or from
the dominating M/M/infinity queue. In the second case the floor term uses the
lower bound ``E[tau^A] >= exp(lam A) / lam`` and every other factor an upper
bound, so ``v`` is an upper bound and the final probability is conservative.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import AlphaOutOfRange
from .queue import exp_moment_tau, mean_tau as _mean_tau

__all__ = [
    "EXACT",
    "BOUND",
    "ConcentrationInput",
    "bound_terms",
    "deviation_bound",
    "epsilon_eta",
]

EXACT = "exact"
BOUND = "bound"


@dataclass(frozen=True)
class ConcentrationInput:
    """Everything the bound needs.

    ``floor_mean`` is the value of ``E[tau]`` used inside ``floor(T / E[tau])``;
    it equals ``mean_tau`` in exact mode. ``alpha_cap`` is ``min(lam, theta*)``
    when known (``inf`` otherwise, leaving only ``alpha < lam`` enforced).
    """

    lam: float
    A: float
    alpha: float
    a: float
    b: float
    T: float
    mean_tau: float
    exp_moment: float
    mode: str = EXACT
    floor_mean: float | None = None
    alpha_cap: float = math.inf

    def __post_init__(self):
        if self.floor_mean is None:
            object.__setattr__(self, "floor_mean", self.mean_tau)
        if self.mode not in (EXACT, BOUND):
            raise ValueError(f"mode must be {EXACT!r} or {BOUND!r}")
        if not (self.lam > 0 and self.A >= 0 and self.T > 0):
            raise ValueError("need lam > 0, A >= 0, T > 0")
        if self.a > self.b:
            raise ValueError("need a <= b")
        lower = math.exp(self.lam * self.A) / self.lam
        if self.floor_mean < lower * (1 - 1e-12) or self.mean_tau < self.floor_mean:
            raise ValueError(
                f"need exp(lam A)/lam = {lower:.6g} <= floor_mean <= mean_tau"
            )

    @classmethod
    def from_domination(cls, lam, A, alpha, a, b, T, theta):
        """Bound mode from the ``Exp(theta)`` domination of cluster lengths."""
        if not 0 < alpha < min(lam, theta):
            raise AlphaOutOfRange(f"alpha = {alpha} not in (0, {min(lam, theta)})")
        return cls(
            lam=lam, A=A, alpha=alpha, a=a, b=b, T=T,
            mean_tau=_mean_tau(lam, 1.0 / theta, A),
            exp_moment=exp_moment_tau(lam, theta, A, alpha),
            mode=BOUND,
            floor_mean=math.exp(lam * A) / lam,
            alpha_cap=min(lam, theta),
        )

    @classmethod
    def from_cycles(cls, lam, A, alpha, a, b, T, cycle_lengths, alpha_cap=math.inf):
        """Exact mode with Monte Carlo moments of ``tau^A``."""
        taus = np.asarray(cycle_lengths, dtype=float)
        if taus.size == 0:
            raise ValueError("no cycle lengths")
        m = max(float(taus.mean()), math.exp(lam * A) / lam)
        return cls(
            lam=lam, A=A, alpha=alpha, a=a, b=b, T=T,
            mean_tau=m,
            exp_moment=float(np.mean(np.exp(alpha * taus))),
            alpha_cap=alpha_cap,
        )

    def to_dict(self) -> dict:
        return asdict(self)


def bound_terms(inp: ConcentrationInput) -> tuple[float, float]:
    """``(v, c)``."""
    if not 0 < inp.alpha < min(inp.lam, inp.alpha_cap):
        raise AlphaOutOfRange(
            f"alpha = {inp.alpha} not in (0, {min(inp.lam, inp.alpha_cap)})"
        )
    r = abs(inp.b - inp.a)
    c = r / inp.alpha
    v = (
        2.0 * r**2 / inp.alpha**2
        * math.floor(inp.T / inp.floor_mean)
        * inp.exp_moment
        * math.exp(inp.alpha * inp.mean_tau)
    )
    return v, c


def deviation_bound(inp: ConcentrationInput, eps: float, raw: bool = False) -> float:
    """Upper bound on ``P(|avg_T f - pi f| >= eps)``, capped at 1.

    With ``raw=True`` the uncapped expression is returned (4 where the
    bound is vacuous).
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    v, c = bound_terms(inp)
    x = inp.T * eps - abs(inp.b - inp.a) * inp.mean_tau
    if x <= 0:
        val = 4.0
    else:
        den = 4.0 * (2.0 * v + c * x)
        val = 0.0 if den == 0 else 4.0 * math.exp(-x * x / den)
    return val if raw else min(1.0, val)


def epsilon_eta(inp: ConcentrationInput, eta: float) -> float:
    """Deviation level at which :func:`deviation_bound` equals ``eta``."""
    if not 0 < eta < 1:
        raise ValueError("eta must be in (0, 1)")
    v, c = bound_terms(inp)
    ell = math.log(eta / 4.0)
    r = abs(inp.b - inp.a)
    return (r * inp.mean_tau - 2 * c * ell + math.sqrt(4 * c * c * ell * ell - 8 * v * ell)) / inp.T

"""Renewal time at zero of the M/G/infinity queue behind A-regeneration.

``tau^A`` is the first return to empty of an M/G/infinity queue with arrival
rate ``lam`` and service ``L + A``. Everything here is a function of the
service law through its compensator ``C(t) = int_0^t (1 - F^A(u)) du`` and of
the integral

    I(s) = int_0^inf exp(-s t - lam C(t)) dt,

from which ``E[exp(-s tau)] = 1 - 1 / ((lam + s) I(s))``.

Three service laws are supported: :class:`Degenerate` (``L = 0``),
:class:`ExpDom` (``L ~ Exp(theta)``, the dominating M/M/infinity case, with
closed forms through a Kummer-type series valid also for negative ``s``) and
:class:`Empirical` (step CDF of simulated cluster lengths, for which ``C`` is
piecewise linear and every integral is an exact finite sum).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import DegenerateDenominator, Divergent, NonConvergent, OutOfDomain, PoleAt

__all__ = [
    "ServiceCDF",
    "Degenerate",
    "ExpDom",
    "Empirical",
    "LaplaceResult",
    "compensator",
    "integral_I",
    "kummer_J",
    "laplace_tau",
    "laplace_busy",
    "laplace_busy_ratio",
    "busy_from_integral",
    "shift_relations",
    "mean_tau",
    "second_moment_tau",
    "convergence_abscissa",
    "exp_moment_tau",
    "delay_bound",
]

EPS = np.finfo(float).eps
TAIL_TOL = 1e-14
QUAD_RTOL = 1e-10
SERIES_RTOL = 1e-16
SERIES_MAX_TERMS = 10_000


@dataclass(frozen=True)
class LaplaceResult:
    value: complex | float
    abs_error_estimate: float

    def __float__(self):
        return float(np.real(self.value))

    def __complex__(self):
        return complex(self.value)


class ServiceCDF:
    """Service law ``L + A``; ``cdf`` evaluates ``F^A(x) = F(x - A)``."""

    A: float

    @property
    def mean_L(self) -> float:
        raise NotImplementedError

    @property
    def mean_service(self) -> float:
        return self.mean_L + self.A

    def cdf(self, x):
        raise NotImplementedError

    def compensator(self, t):
        raise NotImplementedError

    def tail_start(self) -> tuple[float, float]:
        """``(t_star, delta)``: beyond ``t_star``, ``1 - F^A < TAIL_TOL`` and
        ``int_{t_star}^inf (1 - F^A) <= delta``."""
        raise NotImplementedError

    def shifted(self, A: float) -> "ServiceCDF":
        raise NotImplementedError


def _check_A(A):
    if not A >= 0:
        raise ValueError("A must be >= 0")


@dataclass(frozen=True)
class Degenerate(ServiceCDF):
    A: float = 0.0

    def __post_init__(self):
        _check_A(self.A)

    @property
    def mean_L(self):
        return 0.0

    def cdf(self, x):
        return np.where(np.asarray(x, dtype=float) >= self.A, 1.0, 0.0)

    def compensator(self, t):
        return np.minimum(np.asarray(t, dtype=float), self.A)

    def tail_start(self):
        return self.A, 0.0

    def shifted(self, A):
        return Degenerate(A)


@dataclass(frozen=True)
class ExpDom(ServiceCDF):
    """Exponential cluster length ``G^theta``, the M/M/infinity service."""

    theta: float
    A: float = 0.0

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be > 0")
        _check_A(self.A)

    @property
    def mean_L(self):
        return 1.0 / self.theta

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= self.A, -np.expm1(-self.theta * np.maximum(x - self.A, 0.0)), 0.0)

    def compensator(self, t):
        t = np.asarray(t, dtype=float)
        u = np.maximum(t - self.A, 0.0)
        return np.minimum(t, self.A) - np.expm1(-self.theta * u) / self.theta

    def tail_start(self):
        t_star = self.A - math.log(TAIL_TOL) / self.theta
        return t_star, TAIL_TOL / self.theta

    def shifted(self, A):
        return ExpDom(self.theta, A)


@dataclass(frozen=True, eq=False)
class Empirical(ServiceCDF):
    """Right-continuous step CDF of a sample of cluster lengths."""

    samples: np.ndarray
    A: float = 0.0
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if x.size == 0:
            raise ValueError("Empirical needs at least one sample")
        if x[0] < 0 or not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite and >= 0")
        _check_A(self.A)
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(x)]))

    @property
    def n(self):
        return self.samples.size

    @property
    def mean_L(self):
        return float(self._cum[-1] / self.n)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(self.samples, x - self.A, side="right")
        return np.where(x >= self.A, k / self.n, 0.0)

    def compensator(self, t):
        # (1/n) sum_i min(L_i, u) = (sum_{L_i <= u} L_i + u #{L_i > u}) / n
        t = np.asarray(t, dtype=float)
        u = np.maximum(t - self.A, 0.0)
        k = np.searchsorted(self.samples, u, side="right")
        return np.minimum(t, self.A) + (self._cum[k] + u * (self.n - k)) / self.n

    def tail_start(self):
        return self.A + float(self.samples[-1]), 0.0

    def shifted(self, A):
        return Empirical(self.samples, A)

    def _segments(self):
        """Breakpoints, compensator values and slopes of the piecewise-linear C.

        Segment 0 is ``[0, A]`` with slope 1; segment ``j >= 1`` starts at
        ``A + L_(j-1)`` (``L_(0) = 0``) with slope ``(n - j + 1) / n``.
        """
        n = self.n
        x = np.concatenate([[0.0], self.samples])
        starts = np.concatenate([[0.0], self.A + x])
        stops = np.concatenate([[self.A], self.A + self.samples])
        slopes = np.concatenate([[1.0], (n - np.arange(n)) / n])
        c_start = np.concatenate([[0.0], self.A + (self._cum + x * (n - np.arange(n + 1))) / n])
        # ``starts``/``c_start`` have one more entry: the tail start
        return starts, stops, c_start, slopes


def compensator(svc: ServiceCDF, t: float) -> float:
    """``int_0^t (1 - F^A(u)) du``."""
    if not t >= 0:
        raise ValueError("t must be >= 0")
    return float(svc.compensator(t))


def _is_pole(a) -> bool:
    a = complex(a)
    return a.imag == 0 and a.real <= 0 and a.real == round(a.real)


def kummer_J(lam: float, theta: float, s) -> LaplaceResult:
    """``int_0^inf exp(-s t - (lam/theta)(1 - e^{-theta t})) dt`` via its series.

    Evaluates ``(e^{-z} / theta) sum_n z^n / (n! (s/theta + n))`` with
    ``z = lam / theta``. The series is meromorphic in ``s`` with poles at
    ``s = 0, -theta, -2 theta, ...`` and continues the integral to
    ``Re(s) <= 0``.
    """
    if not lam >= 0 or not theta > 0:
        raise ValueError("need lam >= 0 and theta > 0")
    z = lam / theta
    a = s / theta
    if _is_pole(a):
        raise PoleAt(s)
    total = 0.0
    abs_total = 0.0
    logz = math.log(z) if z > 0 else None
    for n in range(SERIES_MAX_TERMS):
        if n == 0:
            weight = math.exp(-z)
        elif logz is None:
            break
        else:
            weight = math.exp(n * logz - z - math.lgamma(n + 1))
        term = weight / (a + n)
        total += term
        abs_total += abs(term)
        if n > z + abs(a) and abs(term) < SERIES_RTOL * abs(total):
            break
    else:
        raise NonConvergent(f"Kummer series did not converge in {SERIES_MAX_TERMS} terms")
    value = total / theta
    err = (abs(term) + 8 * EPS * abs_total) / theta
    return LaplaceResult(value, err)


def _closed_degenerate(lam, A, s):
    k = lam + s
    head = A if k == 0 else -np.expm1(-k * A) / k
    return head + np.exp(-(lam + s) * A) / s


def _empirical_sum(svc: Empirical, lam, s, weighted=False):
    """Exact ``int_0^inf w(t) exp(-s t - lam C(t)) dt`` for the step CDF.

    ``w = 1`` or, with ``weighted``, ``w = F^A`` (constant on each segment).
    """
    starts, stops, c_start, slopes = svc._segments()
    n = svc.n
    k = s + lam * slopes
    dt = stops - starts[:-1]
    log_head = -s * starts[:-1] - lam * c_start[:-1]
    seg = np.exp(log_head) * (-np.expm1(-k * dt)) / k
    tail = np.exp(-s * starts[-1] - lam * c_start[-1]) / s
    if weighted:
        w = np.concatenate([[0.0], np.arange(n) / n])
        seg = seg * w
    value = seg.sum() + tail
    err = 4 * EPS * (np.abs(seg).sum() + abs(tail)) * (1 + math.log2(n + 1))
    return complex(value) if np.iscomplexobj(value) else float(value), float(err)


def _quad(svc: ServiceCDF, lam, s, weight=None):
    """Adaptive Gauss-Kronrod quadrature on ``[0, t_star]`` plus closed-form tail.

    Past ``t_star`` the integrand is ``exp(-s t - lam (m - delta(t)))`` with
    ``0 <= delta <= delta_star``, which is integrated exactly at
    ``delta = 0``; the neglected factor is folded into the error estimate.
    """
    t_star, delta = svc.tail_start()
    m = svc.mean_service

    def f(t):
        g = np.exp(-s * t - lam * svc.compensator(t))
        return g if weight is None else g * weight(t)

    pts = [svc.A] if 0 < svc.A < t_star else None
    vals, errs = [], []
    parts = (lambda t: float(np.real(f(t))), lambda t: float(np.imag(f(t)))) if np.iscomplexobj(s) else (lambda t: float(f(t)),)
    for part in parts:
        if t_star > 0:
            v, e, info = integrate.quad(part, 0.0, t_star, points=pts, epsabs=0.0,
                                        epsrel=QUAD_RTOL, limit=1000, full_output=1)[:3]
            if e > 1e-6 * abs(v) and e > 1e-12:
                raise NonConvergent(f"quadrature error estimate {e:g} too large")
        else:
            v, e = 0.0, 0.0
        vals.append(v)
        errs.append(e)
    head = vals[0] + 1j * vals[1] if len(vals) == 2 else vals[0]
    tail = np.exp(-s * t_star - lam * m) / s
    err = sum(errs) + abs(tail) * math.expm1(lam * delta) + (TAIL_TOL * abs(tail) if weight is not None else 0.0)
    return head + tail, float(err)


def _check_s(svc, s):
    if np.real(s) <= 0 and not isinstance(svc, ExpDom):
        raise Divergent(f"integral diverges for Re(s) = {np.real(s)} <= 0 without continuation")


def integral_I(svc: ServiceCDF, lam: float, s, method: str = "auto") -> LaplaceResult:
    """``I(s) = int_0^inf exp(-s t - lam C(t)) dt``.

    ``method="auto"`` uses the closed form (Degenerate), the Kummer series
    with the A-split (ExpDom, also valid for ``-theta < Re(s) <= 0``) or the
    exact segment sum (Empirical). ``method="quad"`` forces adaptive
    quadrature with an analytic tail, which requires ``Re(s) > 0``.
    """
    if not lam >= 0:
        raise ValueError("lam must be >= 0")
    _check_s(svc, s)
    if method == "quad":
        if np.real(s) <= 0:
            raise Divergent("quadrature route needs Re(s) > 0")
        return LaplaceResult(*_quad(svc, lam, s))
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    if isinstance(svc, Degenerate):
        v = _closed_degenerate(lam, svc.A, s)
        return LaplaceResult(v, 8 * EPS * abs(v))
    if isinstance(svc, ExpDom):
        J = kummer_J(lam, svc.theta, s)
        return _split_A(lam, svc.A, s, J)
    if isinstance(svc, Empirical):
        return LaplaceResult(*_empirical_sum(svc, lam, s))
    return LaplaceResult(*_quad(svc, lam, s))


def _split_A(lam, A, s, base: LaplaceResult) -> LaplaceResult:
    """``I_A = (1 - e^{-(lam+s)A}) / (lam+s) + e^{-(lam+s)A} I_0``."""
    if A == 0:
        return base
    k = lam + s
    head = A if k == 0 else -np.expm1(-k * A) / k
    damp = np.exp(-k * A)
    v = head + damp * base.value
    return LaplaceResult(v, abs(damp) * base.abs_error_estimate + 8 * EPS * abs(v))


def laplace_tau(svc: ServiceCDF, lam: float, s, method: str = "auto") -> LaplaceResult:
    """``E[exp(-s tau^A)]`` by the Takacs formula.

    Negative ``s`` is accepted only for ExpDom and only above the abscissa of
    convergence (see :func:`convergence_abscissa`).
    """
    if not lam > 0:
        raise ValueError("lam must be > 0")
    if np.real(s) <= 0:
        if not isinstance(svc, ExpDom):
            raise OutOfDomain("negative s is only available for ExpDom service")
        if s == 0:
            return LaplaceResult(1.0, 0.0)
        if np.real(s) <= convergence_abscissa(lam, svc.theta, svc.A):
            raise Divergent(f"E[exp(-s tau)] is infinite at s = {s}")
    # Work with the excess (lam + s) I - 1 = e^{-kA} ((lam + s) I_0 - 1) so that
    # tiny transforms (large s or A) keep their relative precision.
    k = lam + s
    I0 = integral_I(svc.shifted(0.0), lam, s, method)
    if isinstance(svc, Degenerate):
        ex0, ex0_err = lam / s, 4 * EPS * abs(lam / s)
    else:
        ex0 = k * I0.value - 1.0
        ex0_err = abs(k) * I0.abs_error_estimate + 4 * EPS * abs(k * I0.value)
    damp = np.exp(-k * svc.A)
    ex = damp * ex0
    denom = 1.0 + ex
    if denom == 0:
        raise DegenerateDenominator("(lam + s) I(s) vanishes")
    v = ex / denom
    err = abs(damp) * ex0_err / abs(denom) ** 2 + 4 * EPS * abs(v)
    return LaplaceResult(v, err)


def laplace_busy(svc: ServiceCDF, lam: float, s, method: str = "auto") -> LaplaceResult:
    """``E[exp(-s beta^A)] = ((lam + s) / lam) E[exp(-s tau^A)]``."""
    tau = laplace_tau(svc, lam, s, method)
    f = (lam + s) / lam
    return LaplaceResult(f * tau.value, abs(f) * tau.abs_error_estimate)


def laplace_busy_ratio(svc: ServiceCDF, lam: float, s) -> LaplaceResult:
    """Busy-period transform as ``int F^A e^{...} / int e^{...}`` (needs Re(s) > 0)."""
    if np.real(s) <= 0:
        raise OutOfDomain("ratio form needs Re(s) > 0")
    if isinstance(svc, Empirical):
        num, e_num = _empirical_sum(svc, lam, s, weighted=True)
        den, e_den = _empirical_sum(svc, lam, s)
    elif isinstance(svc, Degenerate):
        num = np.exp(-(lam + s) * svc.A) / s
        e_num = 8 * EPS * abs(num)
        den = _closed_degenerate(lam, svc.A, s)
        e_den = 8 * EPS * abs(den)
    else:
        num, e_num = _quad(svc, lam, s, weight=svc.cdf)
        den, e_den = _quad(svc, lam, s)
    v = num / den
    return LaplaceResult(v, (e_num + abs(v) * e_den) / abs(den))


def busy_from_integral(lam: float, A: float, s, I0):
    """``E[exp(-s beta^A)] = 1 - (e^{kA} - 1) / (e^{kA} - 1 + k I_0)``, ``k = lam + s``.

    ``I0`` is the ``A = 0`` integral ``int_0^inf exp(-s t - lam C_0(t)) dt``.
    """
    k = lam + s
    g = np.expm1(k * A)
    return 1.0 - g / (g + k * I0)


def shift_relations(lam: float, A: float, s, tau0, busy0=None):
    """A-shifted transforms from their ``A = 0`` counterparts.

    ``tau0`` is ``E[exp(-s tau^0)]`` and ``busy0`` is ``E[exp(-s beta^0)]``
    (derived from ``tau0`` when omitted). Returns ``(tau_A, busy_A)``.
    """
    _check_A(A)
    tau0 = complex(tau0) if np.iscomplexobj(s) or isinstance(tau0, complex) else float(tau0)
    if tau0 == 1:
        raise DegenerateDenominator("E[exp(-s tau^0)] = 1 (s = 0)")
    k = lam + s
    if busy0 is None:
        busy0 = k / lam * tau0
    g = np.exp(k * A)
    tau_A = 1.0 - g / (g - 1.0 + 1.0 / (1.0 - tau0))
    inner = -np.expm1(-k * A) / k if k != 0 else A
    busy_A = k / lam - 1.0 / (lam * (inner + np.exp(-k * A) / (k - lam * busy0)))
    return tau_A, busy_A


def mean_tau(lam: float, meanL: float, A: float) -> float:
    """``E[tau^A] = exp(lam (E[L] + A)) / lam``."""
    if not lam > 0:
        raise ValueError("lam must be > 0")
    if not meanL >= 0:
        raise ValueError("meanL must be >= 0")
    _check_A(A)
    return math.exp(lam * (meanL + A)) / lam


def _gap_integral(svc: ServiceCDF, lam: float, method: str):
    """``int_0^inf (exp(-lam C(t)) - exp(-lam m)) dt`` with ``m = E[L] + A``."""
    A = svc.A
    m = svc.mean_service
    # on [0, A] the compensator is t
    head = (-math.expm1(-lam * A) / lam if lam > 0 else A) - A * math.exp(-lam * m)
    if method == "quad" and not isinstance(svc, Degenerate):
        t_star, delta = svc.tail_start()
        f = lambda t: math.exp(-lam * float(svc.compensator(t))) - math.exp(-lam * m)
        v, e = integrate.quad(f, A, t_star, epsabs=0.0, epsrel=QUAD_RTOL, limit=1000)
        # beyond t_star the gap is at most exp(-lam m) (e^{lam delta} - 1) * ...
        return head + v, e + math.exp(-lam * m) * math.expm1(lam * delta) * t_star
    if isinstance(svc, Degenerate):
        return head, 8 * EPS * abs(head)
    if isinstance(svc, ExpDom):
        z = lam / svc.theta
        # e^{-lam A} e^{-z} / theta * sum_{n>=1} z^n / (n n!)
        total, n, w = 0.0, 1, z
        while True:
            term = w / n
            total += term
            if n > z and term < SERIES_RTOL * total:
                break
            n += 1
            w *= z / n
            if n > SERIES_MAX_TERMS:
                raise NonConvergent("exponential-integral series did not converge")
        v = head + math.exp(-lam * A - z) / svc.theta * total
        return v, 16 * EPS * abs(v)
    if isinstance(svc, Empirical):
        starts, stops, c_start, slopes = svc._segments()
        starts, stops, c_start, slopes = starts[1:-1], stops[1:], c_start[1:-1], slopes[1:]
        dt = stops - starts
        k = lam * slopes
        seg = np.exp(-lam * c_start) * (-np.expm1(-k * dt)) / k - math.exp(-lam * m) * dt
        v = head + float(seg.sum())
        return v, 8 * EPS * (abs(head) + float(np.abs(seg).sum())) * (1 + math.log2(svc.n + 1))
    return _gap_integral(svc, lam, "quad")


def second_moment_tau(lam: float, svc: ServiceCDF, method: str = "auto") -> float:
    """``E[(tau^A)^2]`` by the Takacs formula."""
    if not lam > 0:
        raise ValueError("lam must be > 0")
    m = svc.mean_service
    gap, _ = _gap_integral(svc, lam, method)
    return 2.0 / lam * math.exp(2 * lam * m) * gap + 2.0 / lam**2 * math.exp(lam * m)


def _I_expdom_real(lam, theta, A, s):
    return float(np.real(_split_A(lam, A, s, kummer_J(lam, theta, s)).value))


@functools.lru_cache(maxsize=256)
def convergence_abscissa(lam: float, theta: float, A: float = 0.0) -> float:
    """Abscissa of convergence of ``E[exp(-s tau^{theta,A})]``.

    The transform is singular at ``s = -lam`` (idle period) and at the
    largest real zero of ``I(s)`` in ``(-theta, 0)``; ``I`` tends to ``-inf``
    as ``s -> 0-`` and to ``+inf`` as ``s -> -theta+``, so such a zero always
    exists. Returns the larger of the two singular points.
    """
    if not lam > 0 or not theta > 0:
        raise ValueError("need lam > 0 and theta > 0")
    _check_A(A)
    xs = np.geomspace(1e-300, 1.0 - 1e-12, 2000)
    f = lambda x: _I_expdom_real(lam, theta, A, -x * theta)
    prev = xs[0]
    if f(prev) >= 0:
        raise NonConvergent("I(s) not negative just below 0")
    for x in xs[1:]:
        if f(x) > 0:
            root = optimize.brentq(f, prev, x, xtol=1e-300, rtol=4 * EPS, maxiter=500)
            return max(-lam, -root * theta)
        prev = x
    raise NonConvergent("no sign change of I(s) found on (-theta, 0)")


def exp_moment_tau(lam: float, theta: float, A: float, alpha: float) -> float:
    """``E[exp(alpha tau^{theta,A})]``, an upper bound for ``E[exp(alpha tau^A)]``.

    Requires ``0 < alpha < min(lam, theta)`` and ``-alpha`` above the
    abscissa of convergence; otherwise raises :class:`OutOfDomain`.
    """
    if not 0 < alpha < min(lam, theta):
        raise OutOfDomain(f"alpha = {alpha} not in (0, min(lam, theta) = {min(lam, theta)})")
    sc = convergence_abscissa(lam, theta, A)
    if -alpha <= sc:
        raise Divergent(
            f"E[exp({alpha} tau)] is infinite: abscissa of convergence is {sc:.12g}"
        )
    return float(np.real(laplace_tau(ExpDom(theta, A), lam, -alpha).value))


def delay_bound(lam: float, theta: float, A: float) -> float:
    """``E[tau^2] / (2 E[tau])`` for the ExpDom(theta, A) queue.

    ``theta = inf`` gives the Degenerate (``L = 0``) limit.
    """
    if not theta > 0 or not lam > 0:
        raise ValueError("need lam > 0 and theta > 0")
    if math.isinf(theta):
        return second_moment_tau(lam, Degenerate(A)) / (2 * mean_tau(lam, 0.0, A))
    return second_moment_tau(lam, ExpDom(theta, A)) / (2 * mean_tau(lam, 1.0 / theta, A))

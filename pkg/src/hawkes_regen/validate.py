"""Monte Carlo harness tying simulation to the closed formulas.

Every formula/simulation comparison is recorded as a :class:`Verdict` with the
tolerance rule (``|obs - exp| <= 3 SE`` or a one-sided variant) and the
realised margin in units of SE.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .errors import HawkesRegenError, InsufficientCycles, OutOfDomain
from .estimators import Count, PairKernelW, boundary_identity, cycle_rewards, estimate_pi_cycles, sliding_average
from .queue import (
    Degenerate,
    Empirical,
    ExpDom,
    ServiceCDF,
    laplace_tau,
    mean_tau,
    second_moment_tau,
)
from .regen import busy_periods, extract_cycles, regeneration_times
from .simulate import sample_cluster_stats, simulate_path, spawn_rng
from .transfer import TransferFunction, Zero, l1_norm, require_subcritical, theta_star

__all__ = [
    "N_BATCHES",
    "Verdict",
    "McReport",
    "batch_se",
    "service_sampler",
    "simulate_cycle_lengths",
    "queue_cycle_lengths",
    "mc_regen_moments",
    "domination_report",
    "clt_sigma2",
    "DEFAULT_CONFIG",
    "full_report",
]

N_BATCHES = 50
MIN_CYCLES = 100


@dataclass
class Verdict:
    name: str
    observed: float
    expected: float
    se: float
    rule: str
    passed: bool
    margin: float

    @classmethod
    def two_sided(cls, name, observed, expected, se, k=3.0):
        diff = abs(observed - expected)
        margin = diff / se if se > 0 else (0.0 if diff == 0 else math.inf)
        return cls(name, float(observed), float(expected), float(se),
                   f"|obs - exp| <= {k:g} SE", bool(diff <= k * se), float(margin))

    @classmethod
    def at_most(cls, name, observed, bound, se, k=3.0):
        excess = observed - bound
        margin = excess / se if se > 0 else (-math.inf if excess <= 0 else math.inf)
        return cls(name, float(observed), float(bound), float(se),
                   f"obs <= exp + {k:g} SE", bool(excess <= k * se), float(margin))


@dataclass
class McReport:
    """Simulation results, formula values and verdicts of one check."""

    n: int
    seed: int | None = None
    mean: tuple[float, float] | None = None
    second_moment: tuple[float, float] | None = None
    laplace_grid: list = field(default_factory=list)
    formula_grid: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def batch_se(x, n_batches: int = N_BATCHES) -> float:
    """Batch-means standard error of the mean of ``x``."""
    x = np.asarray(x, dtype=float)
    k = min(n_batches, x.size)
    if k < 2:
        return math.nan
    means = np.array([b.mean() for b in np.array_split(x, k)])
    return float(means.std(ddof=1) / math.sqrt(k))


def service_sampler(svc_or_h, rng):
    """``m -> m`` cluster lengths (without the window ``A``)."""
    if isinstance(svc_or_h, Degenerate):
        return lambda m: np.zeros(m)
    if isinstance(svc_or_h, ExpDom):
        return lambda m: rng.exponential(1.0 / svc_or_h.theta, m)
    if isinstance(svc_or_h, TransferFunction):
        require_subcritical(svc_or_h)
        return lambda m: sample_cluster_stats(svc_or_h, m, rng)[0]
    raise TypeError(f"cannot sample service from {type(svc_or_h).__name__}")


def simulate_cycle_lengths(lam: float, sampler, A: float, n: int, rng) -> np.ndarray:
    """First ``n`` renewal-cycle lengths of an M/G/infinity queue started empty.

    Jobs arrive at rate ``lam`` with service ``L + A``, ``L`` drawn by
    ``sampler``. The arrival stream is generated in chunks; the busy period
    still open at the end of a chunk is carried into the next one as a single
    job, so the result does not depend on the chunking.
    """
    if not lam > 0:
        raise ValueError("lam must be > 0")
    stops = []
    got = 0
    t = 0.0
    carry = None
    per_cycle = None
    while got < n:
        need = n - got
        m = int(min(max(1.2 * need * (per_cycle or 3.0), 1000), 5_000_000))
        arr = t + np.cumsum(rng.exponential(1.0 / lam, m))
        ends = arr + sampler(m) + A
        t = float(arr[-1])
        if carry is not None:
            arr = np.concatenate([[carry[0]], arr])
            ends = np.concatenate([[carry[1]], ends])
        starts, st = busy_periods(arr, ends)
        carry = (float(starts[-1]), float(st[-1]))
        st = st[:-1]
        stops.append(st[:need])
        got += min(st.size, need)
        if st.size:
            per_cycle = m / st.size
    stops = np.concatenate(stops)
    return np.diff(np.concatenate([[0.0], stops]))


def queue_cycle_lengths(lam: float, svc: ServiceCDF, n: int, rng) -> np.ndarray:
    """Renewal-cycle lengths for a Degenerate or ExpDom service law."""
    return simulate_cycle_lengths(lam, service_sampler(svc, rng), svc.A, n, rng)


def _split_se(values):
    v = np.asarray(values, dtype=float)
    return float(v.std(ddof=1) / math.sqrt(v.size))


def mc_regen_moments(
    lam: float,
    h: TransferFunction,
    A: float,
    n_cycles: int,
    rng: np.random.Generator,
    s_grid=(0.5, 1.0, 2.0),
    n_clusters: int | None = None,
    seed: int | None = None,
) -> McReport:
    """Moments and transforms of ``tau^A``: simulation against formulas.

    Cycle lengths come from the immigrant stream with service
    ``L + A``, ``L`` the length of an independently simulated cluster, which
    is exactly how regeneration times are located on a path started empty.
    For ``h = Zero`` the formulas are evaluated for the Degenerate law. For
    other kernels they are fed an Empirical CDF of ``n_clusters``
    independent cluster lengths (two-stage check). The SE of that stage is
    estimated by splitting the sample into 20 groups and is added in
    quadrature to the simulation SE.
    """
    if n_cycles < MIN_CYCLES:
        raise InsufficientCycles(f"n_cycles must be >= {MIN_CYCLES}")
    require_subcritical(h)
    taus = simulate_cycle_lengths(lam, service_sampler(h, rng), A, n_cycles, rng)

    rep = McReport(n=n_cycles, seed=seed)
    rep.mean = (float(taus.mean()), batch_se(taus))
    rep.second_moment = (float(np.mean(taus**2)), batch_se(taus**2))
    for s in s_grid:
        e = np.exp(-s * taus)
        rep.laplace_grid.append((float(s), float(e.mean()), batch_se(e)))

    if isinstance(h, Zero):
        svc = Degenerate(A)
        f_mean, f_m2 = mean_tau(lam, 0.0, A), second_moment_tau(lam, svc)
        f_lap = [float(laplace_tau(svc, lam, s)) for s in s_grid]
        se_mean = se_m2 = 0.0
        se_lap = [0.0] * len(s_grid)
    else:
        L = sample_cluster_stats(h, n_clusters or n_cycles, rng)[0]
        svc = Empirical(L, A)
        f_mean = mean_tau(lam, svc.mean_L, A)
        f_m2 = second_moment_tau(lam, svc)
        f_lap = [float(laplace_tau(svc, lam, s)) for s in s_grid]
        groups = [Empirical(g, A) for g in np.array_split(L, 20)]
        se_mean = _split_se([mean_tau(lam, g.mean_L, A) for g in groups])
        se_m2 = _split_se([second_moment_tau(lam, g) for g in groups])
        se_lap = [_split_se([float(laplace_tau(g, lam, s)) for g in groups]) for s in s_grid]
        rep.extra["n_clusters"] = int(L.size)

    rep.formula_grid = [(float(s), v) for s, v in zip(s_grid, f_lap)]
    rep.verdicts.append(Verdict.two_sided("mean", rep.mean[0], f_mean, math.hypot(rep.mean[1], se_mean)))
    rep.verdicts.append(
        Verdict.two_sided("second_moment", rep.second_moment[0], f_m2, math.hypot(rep.second_moment[1], se_m2))
    )
    for (s, emp, se), fv, fse in zip(rep.laplace_grid, f_lap, se_lap):
        rep.verdicts.append(Verdict.two_sided(f"laplace(s={s:g})", emp, fv, math.hypot(se, fse)))
    return rep


def domination_report(
    h: TransferFunction,
    thetas,
    n_clusters: int,
    rng: np.random.Generator,
    x_grid=(1.0, 2.0, 4.0, 8.0),
    seed: int | None = None,
) -> McReport:
    """One-sided checks ``P(L > x) <= exp(-theta x) + 3 SE``.

    The older bound ``exp(1 - p) exp(-theta x)``, ``p = ||h||_1``, is reported
    alongside in ``extra`` for comparison.
    """
    ts = theta_star(h)
    thetas = [float(t) for t in np.atleast_1d(thetas)]
    for th in thetas:
        if th > ts * (1 + 1e-9):
            raise OutOfDomain(f"theta = {th} exceeds theta* = {ts}")
    L, _ = sample_cluster_stats(h, n_clusters, rng)
    p = l1_norm(h)
    rep = McReport(n=n_clusters, seed=seed)
    rep.extra["theta_star"] = ts
    rep.extra["mean_L"] = (float(L.mean()), batch_se(L))
    rows = []
    for th in thetas:
        for x in x_grid:
            ph = float(np.mean(L > x))
            se = math.sqrt(ph * (1 - ph) / n_clusters)
            bound = math.exp(-th * x)
            rep.verdicts.append(Verdict.at_most(f"P(L>{x:g}) theta={th:g}", ph, bound, se))
            rows.append({"theta": th, "x": x, "p_hat": ph, "se": se, "bound": bound,
                         "older_bound": math.exp(1 - p) * bound})
    rep.extra["tail"] = rows
    return rep


def clt_sigma2(cycles, f, A: float, pi_hat: float):
    """Plug-in ``sigma^2(f) = E[(R - pi tau)^2] / E[tau]`` with a batch SE."""
    cycles = [c for c in cycles if c.index != 0]
    if len(cycles) < MIN_CYCLES:
        raise InsufficientCycles(f"need at least {MIN_CYCLES} complete cycles, got {len(cycles)}")
    R, tau = cycle_rewards(cycles, f, A)
    z2 = (R - pi_hat * tau) ** 2
    sigma2 = float(z2.mean() / tau.mean())
    parts = [zb.mean() / tb.mean() for zb, tb in zip(np.array_split(z2, N_BATCHES), np.array_split(tau, N_BATCHES))]
    return sigma2, _split_se(parts)


DEFAULT_CONFIG = {
    "lambda": 1.0,
    "transfer": {"kind": "exponential", "alpha": 0.5, "beta": 1.0},
    "A": 1.0,
    "T": 5000.0,
    "seed": 2024,
    "replications": 20000,
    "n_clusters": 100000,
    "s_grid": [0.5, 1.0, 2.0],
    "thetas": None,
    "x_grid": [1.0, 2.0, 4.0, 8.0],
    "identity_paths": 20,
    "identity_T": 50.0,
    "clt_paths": 500,
    "clt_T": 2000.0,
}


def _ergodic_check(lam, h, A, T, seed):
    """Time average on one path against renewal reward on an independent one."""
    f = Count()
    p1 = simulate_path(lam, h, (), T, spawn_rng(seed, 1))
    avg = sliding_average(p1, f, A, T)
    p2 = simulate_path(lam, h, (), T, spawn_rng(seed, 2))
    cycles = extract_cycles(p2, regeneration_times(p2, A))
    est, se = estimate_pi_cycles(cycles, f, A)
    sigma2, _ = clt_sigma2(cycles, f, A, est)
    se_avg = math.sqrt(sigma2 / T)
    rep = McReport(n=len(cycles), seed=seed)
    rep.verdicts.append(Verdict.two_sided("time_average vs cycles", avg, est, math.hypot(se, se_avg)))
    rep.extra.update(time_average=avg, cycle_estimate=est, cycle_se=se, sigma2=sigma2)
    return rep


def _identity_check(lam, h, A, T, n_paths, seed):
    w = PairKernelW(A / 2)
    worst = 0.0
    for i in range(n_paths):
        path = simulate_path(lam, h, (), T, spawn_rng(seed, 100 + i))
        lhs, rhs = boundary_identity(path, w, A, T)
        worst = max(worst, abs(lhs - rhs) / (1 + abs(lhs)))
    rep = McReport(n=n_paths, seed=seed)
    rep.verdicts.append(Verdict("identity residual", worst, 0.0, 0.0, "residual <= 1e-9 (1 + |lhs|)",
                                bool(worst <= 1e-9), worst))
    return rep


def _clt_check(lam, h, A, T, n_paths, seed):
    f = Count()
    # the reference run is as long as all test paths together, so pi_hat error stays small
    ref = simulate_path(lam, h, (), n_paths * T, spawn_rng(seed, 3))
    cycles = extract_cycles(ref, regeneration_times(ref, A))
    pi_hat, _ = estimate_pi_cycles(cycles, f, A)
    sigma2, _ = clt_sigma2(cycles, f, A, pi_hat)
    z = np.array([
        math.sqrt(T) * (sliding_average(simulate_path(lam, h, (), T, spawn_rng(seed, 10_000 + i)), f, A, T) - pi_hat)
        / math.sqrt(sigma2)
        for i in range(n_paths)
    ])
    pval = float(stats.kstest(z, "norm").pvalue)
    rep = McReport(n=n_paths, seed=seed)
    rep.verdicts.append(Verdict("CLT normality (KS p-value)", pval, 0.01, 0.0, "p >= 0.01", bool(pval >= 0.01), pval))
    rep.extra.update(pi_hat=pi_hat, sigma2=sigma2, z_mean=float(z.mean()), z_sd=float(z.std(ddof=1)))
    return rep


def full_report(config: dict) -> dict:
    """Run the configured battery and return a JSON-ready report.

    A failing or erroring sub-check is recorded and the remaining checks
    still run.
    """
    from .transfer import transfer_from_config

    cfg = {**DEFAULT_CONFIG, **config}
    if int(cfg["replications"]) <= 0:
        raise ValueError("replications must be > 0")
    lam, A, seed = float(cfg["lambda"]), float(cfg["A"]), int(cfg["seed"])
    h = cfg["transfer"] if isinstance(cfg["transfer"], TransferFunction) else transfer_from_config(cfg["transfer"])
    thetas = cfg["thetas"] if cfg["thetas"] is not None else [theta_star(h)]

    checks = {
        "moments": lambda: mc_regen_moments(
            lam, h, A, int(cfg["replications"]), spawn_rng(seed, 0),
            s_grid=cfg["s_grid"], n_clusters=int(cfg["n_clusters"]), seed=seed),
        "domination": lambda: domination_report(
            h, thetas, int(cfg["n_clusters"]), spawn_rng(seed, 4), x_grid=cfg["x_grid"], seed=seed),
        "identity": lambda: _identity_check(lam, h, max(A, 1e-3), float(cfg["identity_T"]),
                                            int(cfg["identity_paths"]), seed),
        "ergodic": lambda: _ergodic_check(lam, h, A, float(cfg["T"]), seed),
        "clt": lambda: _clt_check(lam, h, A, float(cfg["clt_T"]), int(cfg["clt_paths"]), seed),
    }
    out = {"schema": 1, "seed": seed, "config": _jsonable(cfg), "checks": {}}
    for name, run in checks.items():
        t0 = time.perf_counter()
        try:
            rep = run()
            entry = rep.to_dict()
        except HawkesRegenError as exc:
            entry = {"passed": False, "error": type(exc).__name__, "message": str(exc)}
        entry["seconds"] = round(time.perf_counter() - t0, 3)
        out["checks"][name] = entry
    out["passed"] = all(c["passed"] for c in out["checks"].values())
    return out


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=lambda o: o.to_config() if hasattr(o, "to_config") else str(o)))

"""Exact A-regeneration times of a simulated path.

The influence of an ancestor arriving at ``T_n`` on the window process ends at
``T_n + L_n + A``, so regeneration times are the ends of the busy periods of
an M/G/infinity queue whose customers are the ancestors with service
``L_n + A``. The initial condition enters as one extra customer at time 0
when its last point lies in ``(-A, inf)``. Because cluster membership is
needed, the times are computed from the genealogy, not from the bare event
times.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import MismatchedReport, UnsortedInput
from .simulate import IMMIGRANT, PathRecord

__all__ = [
    "busy_sweep",
    "busy_periods",
    "Cycle",
    "RegenReport",
    "regeneration_times",
    "extract_cycles",
    "certify",
]


def busy_periods(arrivals, ends):
    """Vectorised sweep: maximal busy intervals of jobs ``[arrival, end]``.

    A job arriving exactly when the running end is reached opens a new busy
    period. Returns ``(starts, stops)`` arrays.
    """
    arrivals = np.asarray(arrivals, dtype=float)
    ends = np.asarray(ends, dtype=float)
    if arrivals.size == 0:
        return np.empty(0), np.empty(0)
    if np.any(np.diff(arrivals) < 0):
        raise UnsortedInput("arrivals must be sorted ascending")
    if np.any(ends < arrivals):
        raise ValueError("service durations must be >= 0")
    running = np.maximum.accumulate(ends)
    new = np.empty(arrivals.size, dtype=bool)
    new[0] = True
    new[1:] = arrivals[1:] >= running[:-1]
    first = np.flatnonzero(new)
    last = np.r_[first[1:] - 1, arrivals.size - 1]
    return arrivals[first], running[last]


def busy_sweep(jobs):
    """Busy periods ``[(start, end)]`` of jobs ``[(arrival, service)]``."""
    if len(jobs) == 0:
        return []
    arr = np.array([j[0] for j in jobs], dtype=float)
    svc = np.array([j[1] for j in jobs], dtype=float)
    starts, stops = busy_periods(arr, arr + svc)
    return [(float(a), float(b)) for a, b in zip(starts, stops)]


@dataclass(frozen=True, eq=False)
class Cycle:
    """Events of one cycle, shifted so the cycle starts at 0.

    ``index`` is 0 for the delay (which is not shifted) and ``k >= 1`` for the
    cycle over ``(tau_{k-1} - A, tau_k]``.
    """

    index: int
    start: float
    end: float
    times: np.ndarray

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True, eq=False)
class RegenReport:
    A: float
    tau0: float
    taus: np.ndarray
    horizon: float
    incomplete_tail: bool
    cycles: list = field(default_factory=list, repr=False)
    fingerprint: tuple = field(default=(), repr=False)

    @property
    def cycle_lengths(self) -> np.ndarray:
        return np.diff(np.concatenate([[self.tau0], self.taus]))

    def to_dict(self) -> dict:
        return {
            "A": self.A,
            "tau0": self.tau0,
            "taus": self.taus.tolist(),
            "cycle_lengths": self.cycle_lengths.tolist(),
            "incomplete_tail": bool(self.incomplete_tail),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _fingerprint(path):
    return (path.n_events, path.horizon, path.lam, float(path.times.sum()) if path.n_events else 0.0)


def cluster_ends(path: PathRecord) -> np.ndarray:
    """Absolute time of the last point of each immigrant cluster."""
    if "ends" not in path._cache:
        n = path.anc_times.size
        ends = path.anc_times.copy()
        imm = path.origin == IMMIGRANT
        np.maximum.at(ends, path.cluster_id[imm], path.times[imm])
        path._cache["ends"] = ends
    return path._cache["ends"]


def regeneration_times(path: PathRecord, A: float) -> RegenReport:
    """Locate ``tau_0 < tau_1 < ...`` up to the horizon.

    ``tau_0`` is 0 when the initial condition has no point in ``(-A, inf)``,
    otherwise the end of the busy period started by the initial customer.
    Each later ``tau_k`` is the end of the next busy period. Only times
    ``<= horizon`` are reported; ``incomplete_tail`` flags the unfinished
    last cycle.
    """
    if not A >= 0:
        raise ValueError("A must be >= 0")
    arrivals = path.anc_times
    ends = cluster_ends(path) + A
    u = path.initial_last()
    has_init = u is not None and u > -A
    if has_init:
        arrivals = np.concatenate([[0.0], arrivals])
        ends = np.concatenate([[u + A], ends])
    _, stops = busy_periods(arrivals, ends)
    if has_init:
        tau0, stops = float(stops[0]), stops[1:]
    else:
        tau0 = 0.0
    taus = stops[stops <= path.horizon] if tau0 <= path.horizon else np.empty(0)
    last = taus[-1] if taus.size else tau0
    report = RegenReport(
        A=float(A),
        tau0=tau0,
        taus=taus,
        horizon=path.horizon,
        incomplete_tail=bool(last < path.horizon),
        fingerprint=_fingerprint(path),
    )
    report.cycles.extend(_split(path, report))
    return report


def _split(path, report):
    bounds = np.concatenate([[report.tau0], report.taus])
    lo = np.searchsorted(path.times + report.A, bounds[:-1], side="right")
    hi = np.searchsorted(path.times, bounds[1:], side="right")
    return [
        Cycle(k + 1, float(bounds[k]), float(bounds[k + 1]), path.times[lo[k]:hi[k]] - bounds[k])
        for k in range(bounds.size - 1)
    ]


def extract_cycles(path: PathRecord, report: RegenReport, include_delay: bool = False):
    """Cycles of ``path`` as located by ``report``.

    With ``include_delay`` the first element is the delay, the events in
    ``(-A, tau_0]`` (unshifted).
    """
    if report.fingerprint != _fingerprint(path) or report.horizon != path.horizon:
        raise MismatchedReport("report was computed on a different path")
    cycles = _split(path, report)
    if include_delay:
        delay = Cycle(0, 0.0, report.tau0, path.window(-report.A, report.tau0))
        cycles = [delay] + cycles
    return cycles


def certify(path: PathRecord, report: RegenReport) -> bool:
    """Check ``D_tau((tau - A, inf)) == 0`` at every reported time.

    Uses the genealogy directly: no point of a cluster whose ancestor arrived
    by ``tau`` (nor of the initial family) may lie in ``(tau - A, inf)``.
    Float tolerance is a few ulps of ``tau``.
    """
    A = report.A
    imm = path.origin == IMMIGRANT
    root_time = np.full(path.n_events, -np.inf)
    root_time[imm] = path.anc_times[path.cluster_id[imm]]
    order = np.argsort(root_time, kind="stable")
    prefmax = np.maximum.accumulate(path.times[order]) if order.size else np.empty(0)
    rsorted = root_time[order]
    for tau in np.concatenate([[report.tau0], report.taus]):
        i = np.searchsorted(rsorted, tau, side="right")
        if i == 0:
            continue
        if prefmax[i - 1] > tau - A + 4 * np.spacing(max(abs(tau), 1.0)):
            return False
    return True

"""Cluster (immigration-branching) simulation of linear Hawkes paths.

A path is ``N = D0 + sum_n S_{-T_n} mu_n``: Poisson(lambda) ancestor arrivals
``T_n`` on (0, T], each carrying an independent branching cluster ``mu_n``,
plus the progeny ``D0`` of a finite initial condition on (-inf, 0]. Every
event keeps its cluster id, parent and generation, and descendants born after
the horizon are kept, so that regeneration times can be located exactly.

Branching is done generation by generation for all roots at once, which keeps
the Python-level loop as short as the deepest cluster.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SizeCapExceeded
from .transfer import TransferFunction, require_subcritical, truncated_offspring

SIZE_CAP = 10**6

IMMIGRANT = 0
INITIAL = 1
ORIGIN_NAMES = {IMMIGRANT: "immigrant", INITIAL: "initial"}

CSV_HEADER = "time,cluster_id,parent_id,generation,origin"

__all__ = [
    "SIZE_CAP",
    "Cluster",
    "PathRecord",
    "sample_cluster",
    "sample_cluster_stats",
    "sample_initial_progeny",
    "simulate_path",
    "spawn_rng",
    "compensator",
]


def spawn_rng(seed: int, i: int) -> np.random.Generator:
    """Independent stream number ``i`` derived from a master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(i)]))


@dataclass(frozen=True, eq=False)
class Cluster:
    """One branching cluster, times relative to its root (``times[0] == 0``).

    ``parents[i]`` is the index of the parent of point ``i`` (-1 for the root).
    Points are sorted by time, so every parent precedes its children.
    """

    times: np.ndarray
    parents: np.ndarray

    @property
    def length(self) -> float:
        return float(self.times[-1])

    @property
    def size(self) -> int:
        return int(self.times.size)

    def generations(self) -> np.ndarray:
        gen = np.zeros(self.times.size, dtype=np.int64)
        for i in range(1, self.times.size):
            gen[i] = gen[self.parents[i]] + 1
        return gen


def _grow(h, root_times, rng, cap=SIZE_CAP):
    """Grow the full descendance of each root.

    Returns ``(times, root, parent, generation)`` with roots at indices
    ``0..m-1``; ``root`` maps every point to the index of its root and
    ``parent`` is -1 for roots.
    """
    root_times = np.asarray(root_times, dtype=float)
    m = root_times.size
    p = h.l1_norm()
    times = [root_times]
    roots = [np.arange(m)]
    parents = [np.full(m, -1, dtype=np.int64)]
    gens = [np.zeros(m, dtype=np.int64)]
    sizes = np.ones(m, dtype=np.int64)
    offset = 0
    gen = 0
    while p > 0 and times[-1].size:
        last_t, last_r = times[-1], roots[-1]
        k = rng.poisson(p, last_t.size)
        total = int(k.sum())
        if total == 0:
            break
        local = np.repeat(np.arange(last_t.size), k)
        child_r = last_r[local]
        child_t = last_t[local] + h._sample(rng, total)
        gen += 1
        times.append(child_t)
        roots.append(child_r)
        parents.append(offset + local)
        gens.append(np.full(total, gen, dtype=np.int64))
        offset += last_t.size
        sizes += np.bincount(child_r, minlength=m)
        if sizes.max() > cap:
            bad = int(np.argmax(sizes))
            t_all = np.concatenate(times)
            r_all = np.concatenate(roots)
            partial = np.sort(t_all[r_all == bad] - root_times[bad])
            raise SizeCapExceeded(
                f"cluster exceeded {cap} points (generation {gen})", partial=partial
            )
    return (
        np.concatenate(times),
        np.concatenate(roots),
        np.concatenate(parents),
        np.concatenate(gens),
    )


def _sorted_view(times, parent):
    order = np.argsort(times, kind="stable")
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    par = parent[order]
    new_par = np.where(par >= 0, inv[np.maximum(par, 0)], -1)
    return order, new_par


def sample_cluster(h: TransferFunction, rng: np.random.Generator, cap: int = SIZE_CAP) -> Cluster:
    """Sample the cluster generated by one ancestor at time 0."""
    require_subcritical(h)
    t, _, par, _ = _grow(h, np.zeros(1), rng, cap)
    order, new_par = _sorted_view(t, par)
    return Cluster(t[order], new_par)


def sample_cluster_stats(h: TransferFunction, n: int, rng: np.random.Generator, cap: int = SIZE_CAP):
    """Lengths and sizes of ``n`` independent clusters, without genealogy."""
    require_subcritical(h)
    t, r, _, _ = _grow(h, np.zeros(n), rng, cap)
    lengths = np.zeros(n)
    np.maximum.at(lengths, r, t)
    sizes = np.bincount(r, minlength=n)
    return lengths, sizes


def _initial_arrays(init_points, h, rng, cap):
    """Progeny on (0, inf) of the initial points, as flat arrays.

    Returns ``(times, family, parent, generation)`` where ``family`` indexes
    ``init_points`` and ``parent`` indexes the returned arrays, or
    ``-(j + 1)`` for a first-generation child of initial point ``j``.
    """
    first_t, first_f = [], []
    for j, s in enumerate(init_points):
        kids = truncated_offspring(h, -float(s), rng)
        first_t.append(kids)
        first_f.append(np.full(kids.size, j, dtype=np.int64))
    if not first_t or sum(a.size for a in first_t) == 0:
        empty = np.empty(0)
        return empty, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int64)
    first_t = np.concatenate(first_t)
    first_f = np.concatenate(first_f)
    t, r, par, gen = _grow(h, first_t, rng, cap)
    fam = first_f[r]
    par = np.where(par >= 0, par, -(fam + 1))
    return t, fam, par, gen + 1


def sample_initial_progeny(init_points, h: TransferFunction, rng: np.random.Generator, cap: int = SIZE_CAP):
    """Offspring on (0, inf) of a finite initial condition, with genealogy.

    Returns a list of ``(s, Cluster)`` pairs, one per initial point ``s`` that
    has at least one descendant on (0, inf); cluster times are relative to
    ``s`` and the root (index 0) is the initial point itself.
    """
    init_points = _check_init(init_points)
    t, fam, par, _ = _initial_arrays(init_points, h, rng, cap)
    out = []
    for j, s in enumerate(init_points):
        idx = np.flatnonzero(fam == j)
        if idx.size == 0:
            continue
        local = np.full(t.size, -1, dtype=np.int64)
        local[idx] = np.arange(1, idx.size + 1)
        rel = np.concatenate([[0.0], t[idx] - s])
        p = par[idx]
        p = np.concatenate([[-1], np.where(p >= 0, local[np.maximum(p, 0)], 0)])
        order, new_par = _sorted_view(rel, p)
        out.append((float(s), Cluster(rel[order], new_par)))
    return out


def _check_init(init_points):
    pts = np.sort(np.asarray(init_points if init_points is not None else [], dtype=float).ravel())
    if pts.size and pts[-1] > 0:
        raise ValueError("initial points must all be <= 0")
    return pts


@dataclass(frozen=True, eq=False)
class PathRecord:
    """A simulated Hawkes path with complete genealogy.

    Event arrays are sorted by time and include the initial points and every
    descendant, also those born after ``horizon``. Immigrant clusters carry
    ids ``0..n-1`` in arrival order; the family of initial point ``j`` has id
    ``-(j + 1)``.
    """

    lam: float
    horizon: float
    init_points: np.ndarray
    times: np.ndarray
    cluster_id: np.ndarray
    parent: np.ndarray
    generation: np.ndarray
    origin: np.ndarray
    anc_times: np.ndarray
    anc_lengths: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_events(self) -> int:
        return int(self.times.size)

    @property
    def events(self):
        """``[(time, cluster_id, parent or None, origin)]`` in time order."""
        return [
            (float(t), int(c), None if p < 0 else int(p), ORIGIN_NAMES[int(o)])
            for t, c, p, o in zip(self.times, self.cluster_id, self.parent, self.origin)
        ]

    def _cluster_of(self, mask, anchor):
        idx = np.flatnonzero(mask)
        local = np.full(self.times.size, -1, dtype=np.int64)
        local[idx] = np.arange(idx.size)
        p = self.parent[idx]
        p = np.where(p >= 0, local[np.maximum(p, 0)], -1)
        return Cluster(self.times[idx] - anchor, p)

    @property
    def ancestors(self):
        """``[(T_n, Cluster)]`` for the immigrant clusters."""
        if "ancestors" not in self._cache:
            self._cache["ancestors"] = [
                (float(tn), self._cluster_of(self.cluster_id == n, tn))
                for n, tn in enumerate(self.anc_times)
            ]
        return self._cache["ancestors"]

    @property
    def initial_progeny(self):
        """``[(s, Cluster)]`` for initial points with progeny on (0, inf)."""
        out = []
        for j, s in enumerate(self.init_points):
            mask = self.cluster_id == -(j + 1)
            if mask.sum() > 1:
                out.append((float(s), self._cluster_of(mask, s)))
        return out

    def initial_last(self):
        """Last point of the initial-condition part ``D0``, or ``None``."""
        mask = self.origin == INITIAL
        return float(self.times[mask].max()) if mask.any() else None

    def window(self, lo: float, hi: float) -> np.ndarray:
        """Event times in ``(lo, hi]``."""
        i = np.searchsorted(self.times, lo, side="right")
        j = np.searchsorted(self.times, hi, side="right")
        return self.times[i:j]

    @classmethod
    def from_clusters(cls, lam, horizon, ancestors, init_points=(), initial_progeny=()):
        """Assemble a path from explicit clusters.

        ``ancestors`` is a sequence of ``(T_n, Cluster)``; ``initial_progeny``
        a sequence of ``(s, Cluster)`` with ``s`` among ``init_points`` and
        the cluster root standing for the initial point.
        """
        init = _check_init(init_points)
        ancestors = sorted(ancestors, key=lambda a: a[0])
        t, cid, par, gen, org = [], [], [], [], []
        n_before = 0
        for n, (tn, cl) in enumerate(ancestors):
            t.append(tn + cl.times)
            cid.append(np.full(cl.size, n))
            par.append(np.where(cl.parents >= 0, cl.parents + n_before, -1))
            gen.append(cl.generations())
            org.append(np.full(cl.size, IMMIGRANT))
            n_before += cl.size
        anchored = {float(s): cl for s, cl in initial_progeny}
        for j, s in enumerate(init):
            cl = anchored.pop(float(s), None) or Cluster(np.zeros(1), np.full(1, -1))
            t.append(s + cl.times)
            cid.append(np.full(cl.size, -(j + 1)))
            par.append(np.where(cl.parents >= 0, cl.parents + n_before, -1))
            gen.append(cl.generations())
            org.append(np.full(cl.size, INITIAL))
            n_before += cl.size
        if anchored:
            raise ValueError("initial progeny anchored at points not in init_points")
        return cls._assemble(
            lam,
            horizon,
            init,
            _cat(t, float),
            _cat(cid, np.int64),
            _cat(par, np.int64),
            _cat(gen, np.int64),
            _cat(org, np.int8),
            np.array([a[0] for a in ancestors], dtype=float),
            np.array([a[1].length for a in ancestors], dtype=float),
        )

    @classmethod
    def _assemble(cls, lam, horizon, init, t, cid, par, gen, org, anc_t, anc_l):
        order, new_par = _sorted_view(t, par)
        return cls(
            lam=float(lam),
            horizon=float(horizon),
            init_points=init,
            times=t[order],
            cluster_id=cid[order],
            parent=new_par,
            generation=gen[order],
            origin=org[order],
            anc_times=anc_t,
            anc_lengths=anc_l,
        )

    def to_csv(self, fh) -> None:
        """Write ``time,cluster_id,parent_id,generation,origin`` rows."""
        fh.write(CSV_HEADER + "\n")
        for t, c, p, g, o in zip(self.times, self.cluster_id, self.parent, self.generation, self.origin):
            fh.write(f"{t:.17g},{c},{'' if p < 0 else p},{g},{ORIGIN_NAMES[int(o)]}\n")

    @classmethod
    def from_csv(cls, fh, lam, horizon):
        """Reload a path written by :meth:`to_csv`; leading ``#`` lines are skipped."""
        header = fh.readline().strip()
        while header.startswith("#"):
            header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header!r}")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
        t = np.array([float(r[0]) for r in rows])
        cid = np.array([int(r[1]) for r in rows], dtype=np.int64)
        par = np.array([int(r[2]) if r[2] else -1 for r in rows], dtype=np.int64)
        gen = np.array([int(r[3]) for r in rows], dtype=np.int64)
        names = {v: k for k, v in ORIGIN_NAMES.items()}
        org = np.array([names[r[4]] for r in rows], dtype=np.int8)
        init = np.sort(t[(org == INITIAL) & (gen == 0)])
        roots = (org == IMMIGRANT) & (gen == 0)
        n_anc = int(roots.sum())
        anc_t = np.zeros(n_anc)
        anc_t[cid[roots]] = t[roots]
        imm = org == IMMIGRANT
        ends = np.full(n_anc, -np.inf)
        np.maximum.at(ends, cid[imm], t[imm])
        return cls(
            lam=float(lam), horizon=float(horizon), init_points=init, times=t,
            cluster_id=cid, parent=par, generation=gen, origin=org,
            anc_times=anc_t, anc_lengths=ends - anc_t,
        )


def _cat(chunks, dtype):
    return np.concatenate(chunks).astype(dtype) if chunks else np.empty(0, dtype=dtype)


def simulate_path(lam: float, h: TransferFunction, init_points, T: float,
                  rng: np.random.Generator, cap: int = SIZE_CAP) -> PathRecord:
    """Simulate ``N = D0 + psi(Gamma)`` on (0, T] with full genealogy.

    Ancestors are a Poisson(lam * T) number of uniform arrivals on (0, T].
    Descendants beyond ``T`` are kept.
    """
    if not lam >= 0:
        raise ValueError("lam must be >= 0")
    if not T > 0:
        raise ValueError("T must be > 0")
    require_subcritical(h)
    init = _check_init(init_points)

    n = int(rng.poisson(lam * T))
    anc = np.sort(T * (1.0 - rng.random(n)))
    t, root, par, gen = _grow(h, anc, rng, cap)
    anc_len = np.zeros(n)
    np.maximum.at(anc_len, root, t - anc[root])

    ti, fam, pi, gi = _initial_arrays(init, h, rng, cap)
    k = init.size
    base = t.size
    # layout: immigrant points, then initial points, then initial progeny
    init_par = np.where(pi >= 0, pi + base + k, base + (-pi - 1))
    return PathRecord._assemble(
        lam,
        T,
        init,
        np.concatenate([t, init, ti]),
        np.concatenate([root, -(np.arange(k) + 1), -(fam + 1)]).astype(np.int64),
        np.concatenate([par, np.full(k, -1), init_par]).astype(np.int64),
        np.concatenate([gen, np.zeros(k, np.int64), gi]).astype(np.int64),
        np.concatenate([np.zeros(t.size, np.int8), np.ones(k + ti.size, np.int8)]),
        anc,
        anc_len,
    )


def compensator(path: PathRecord, h: TransferFunction, t) -> np.ndarray:
    """``Lambda(t) = lam * t + sum_{s < t} int_0^{t - s} h`` over all events.

    Only the part on (0, t] is integrated, so the initial points contribute
    ``H(t - s) - H(-s)``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = path.lam * t
    for s in path.times:
        if s >= t.max():
            break
        live = t > s
        out[live] += h.integrated(t[live] - s) - (h.integrated(-s) if s < 0 else 0.0)
    return out

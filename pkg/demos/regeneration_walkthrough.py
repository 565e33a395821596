"""Simulate one Hawkes path, cut it at its regeneration times and compare the
cycle statistics with the closed-form queue formulas.

    python3 demos/regeneration_walkthrough.py
"""

import numpy as np

from hawkes_regen import (
    Count,
    Empirical,
    Exponential,
    estimate_pi_cycles,
    extract_cycles,
    laplace_tau,
    mean_tau,
    regeneration_times,
    sample_cluster_stats,
    simulate_path,
    sliding_average,
    spawn_rng,
)

lam, A, T = 1.0, 1.0, 20_000.0
h = Exponential(0.5, 1.0)

path = simulate_path(lam, h, [], T, spawn_rng(1, 0))
report = regeneration_times(path, A)
lengths = report.cycle_lengths
print(f"{path.n_events} events, {lengths.size} complete cycles on (0, {T:g}]")
print("first regeneration times:", np.round(report.taus[:5], 3))

# formulas need the law of the cluster length; take it from independent clusters
L, _ = sample_cluster_stats(h, 100_000, spawn_rng(1, 1))
svc = Empirical(L, A)
print(f"mean cycle length  simulated {lengths.mean():.3f}   formula {mean_tau(lam, svc.mean_L, A):.3f}")
for s in (0.25, 1.0):
    print(f"E[exp(-{s:g} tau)]   simulated {np.exp(-s * lengths).mean():.4f}   "
          f"formula {float(laplace_tau(svc, lam, s).value):.4f}")

cycles = extract_cycles(path, report)
est, se = estimate_pi_cycles(cycles, Count(), A)
print(f"long-run window count  cycles {est:.4f} +- {se:.4f}   "
      f"time average {sliding_average(path, Count(), A, T):.4f}   exact {lam * A / 0.5:.4f}")

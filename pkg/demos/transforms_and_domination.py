"""Cluster lengths of a Hawkes kernel are dominated by an exponential law, and
so is the regeneration time. This script prints both sides of each comparison.

    python3 demos/transforms_and_domination.py
"""

import math

import numpy as np

from hawkes_regen import (
    Empirical,
    ExpDom,
    UniformBox,
    convergence_abscissa,
    delay_bound,
    exp_moment_tau,
    laplace_tau,
    sample_cluster_stats,
    spawn_rng,
    theta_star,
)

lam, A = 1.0, 0.5
h = UniformBox(0.3, 2.0)
ts = theta_star(h)
L, _ = sample_cluster_stats(h, 100_000, spawn_rng(3, 0))
print(f"theta* = {ts:.6f}")
print(" x    P(L > x)   exp(-theta* x)")
for x in (1, 2, 4, 8):
    print(f"{x:2d}   {np.mean(L > x):.5f}    {math.exp(-ts * x):.5f}")

print("\n s    E[exp(-s tau)] kernel   dominating queue")
for s in (0.1, 0.5, 1.0, 3.0):
    a = float(laplace_tau(Empirical(L, A), lam, s).value)
    b = float(laplace_tau(ExpDom(ts, A), lam, s).value)
    print(f"{s:4.1f}   {a:.6f}               {b:.6f}")

edge = convergence_abscissa(lam, ts, A)
print(f"\nE[exp(alpha tau)] of the dominating queue is finite for alpha < {-edge:.5f}")
for frac in (0.25, 0.5, 0.9):
    alpha = -frac * edge
    print(f"  alpha = {alpha:.5f}: {exp_moment_tau(lam, ts, A, alpha):.4f}")
print(f"stationary-start delay is at most {delay_bound(lam, ts, A):.4f}")

"""How long a window must be averaged before the explicit deviation bound says
anything, for a window count clamped to [0, 5].

    python3 demos/concentration_budget.py
"""

from hawkes_regen import (
    ConcentrationInput,
    Exponential,
    convergence_abscissa,
    deviation_bound,
    epsilon_eta,
    theta_star,
)

lam, A, a, b = 1.0, 1.0, 0.0, 5.0
ts = theta_star(Exponential(0.5, 1.0))
alpha = 0.5 * abs(convergence_abscissa(lam, ts, A))
print(f"theta* = {ts:.3f}, alpha = {alpha:.5f}")
print("       T    eps(0.1)   eps(0.01)")
for T in (1e3, 1e4, 1e5, 1e6, 1e7):
    inp = ConcentrationInput.from_domination(lam, A, alpha, a, b, T, ts)
    print(f"{T:8.0e}   {epsilon_eta(inp, 0.1):8.3f}   {epsilon_eta(inp, 0.01):8.3f}")

inp = ConcentrationInput.from_domination(lam, A, alpha, a, b, 1e6, ts)
for eps in (0.5, 1.0, 2.0):
    print(f"T = 1e6: P(|average - mean| >= {eps}) <= {deviation_bound(inp, eps):.3g}")

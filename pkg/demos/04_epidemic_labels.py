"""
Surveying an epidemic: the SIR model as a binomial random measure
=================================================================

The deterministic SIR curve S_t is the probability an initially
susceptible individual is still uninfected at time t.  Conditioning on
eventual infection (probability tau, the final epidemic size) makes
-dS/tau a proper infection-time density, and adding an exponential
recovery delay gives each surveyed individual an (infection, recovery)
pair.  Surveying n individuals is then a random measure with
K ~ Binomial(n, tau), and the count of individuals infected by time t is
again binomial: K_A ~ Binomial(n, 1 - S_t).
"""

import numpy as np

from ptmeasures import Binomial, SirParams, final_size, solve_sir
from ptmeasures.sir import infection_density, label_probabilities, simulate_labels
from ptmeasures.stats import chi_square_counts

params = SirParams(beta=2.0, gamma=1.0, rho=0.01)
traj = solve_sir(params)

tau = final_size(params.r0, params.rho)
print(f"R0 = {params.r0}, final size tau = {tau:.6f}")
print(f"residual of 1 - tau = exp(-R0 (tau + rho)): "
      f"{abs(1 - tau - np.exp(-params.r0 * (tau + params.rho))):.2e}")
print(f"conservation drift along the trajectory: {traj.conservation_error():.2e}")

# A few epochs of the epidemic, with per-individual label probabilities.
print("\n t     S_t     P(I)    P(R)")
for t in (0.5, 1.0, 3.0, 6.0, 10.0):
    p_s, p_i, p_r = label_probabilities(traj, t)
    print(f"{t:4.1f}  {p_s:.4f}  {p_i:.4f}  {p_r:.4f}")

# The infection-time density integrates to one and reproduces the
# survival relation nu((0, t]) = (1 - S_t)/tau.
density = infection_density(traj)
t_check = 3.0
print(f"\nnu((0, {t_check}]) = {density.mass(((0.0, t_check),)):.6f}"
      f"  vs  (1 - S_t)/tau = {(1 - traj.s_at(t_check)) / tau:.6f}")

# Survey n = 20 individuals, 1e5 replicates: the infected-by-t count
# matches Binomial(n, 1 - S_t) by chi-square, with the predicted moments.
n, t = 20, 3.0
lab = simulate_labels(n, traj, t, n_rep=100_000, seed=3)
k_a = np.add.outer(np.arange(n + 1), np.arange(n + 1))
counts = np.bincount(
    k_a.reshape(-1), weights=lab.joint.reshape(-1).astype(float), minlength=n + 1
)[: n + 1]
target = Binomial(n, 1.0 - traj.s_at(t))
gof = chi_square_counts(counts.astype(np.int64).repeat(1), target.pmf) if False else None
from ptmeasures.stats import chi_square_gof

gof = chi_square_gof(counts, np.asarray(target.pmf(np.arange(n + 1))))
print(f"\ninfected-by-t count at t = {t}: {gof}")
print(f"  mean  {lab.ka_mean:.4f} +- {lab.ka_mean_se:.4f}"
      f"  (predicted {n * (1 - traj.s_at(t)):.4f})")
print(f"  var   {lab.ka_var:.4f} +- {lab.ka_var_se:.4f}"
      f"  (predicted {n * traj.s_at(t) * (1 - traj.s_at(t)):.4f})")

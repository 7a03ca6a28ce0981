"""Repeated indirect measurement on the freshest copy.

Every step the system interacts with copy k and then copy k is measured.
Trajectories are reproducible from a single 64-bit seed, and their average
is the non-selective measured evolution.
"""

# %%
import math

import numpy as np

from qrepeat import (
    ChainSpec,
    HamiltonianChainModel,
    Observable,
    ReducedState,
    cylinder_probability,
    ensemble_average,
    evolve_direct,
    nonselective_sequence,
    sample_ensemble,
    sample_trajectory,
    trace_distance,
)

sx = np.array([[0, 1], [1, 0]])
sz = np.diag([1.0, -1.0])
c = np.array([[0.2, 1.0], [0.3j, -0.4]])
rho0 = ReducedState.pure([0.6, 0.8j])
spec = ChainSpec(2, 2, 3)
model = HamiltonianChainModel.with_preset(0.7 * sz + 0.3 * sx, c, "full-memory", lam=1.0, tau=0.4, gamma=0.4)
obs = Observable.from_matrix(sz)

# %% One trajectory
rec = sample_trajectory(model, rho0, obs, 3, seed=42, spec=spec)
print("outcomes", [obs.eigenvalues[i] for i in rec.outcomes])
print("branch probabilities", np.round(rec.branch_probs, 4))
print("purity deficits", np.round(rec.purity_deficits, 4))
print("log p (chain rule) ", rec.log_probability)
print("log p (cylinder)   ", math.log(cylinder_probability(model, rho0, obs, rec.outcomes, spec)))

# %% An ensemble and its mean
recs = sample_ensemble(model, rho0, obs, 3, count=4000, base_seed=1, spec=spec, workers=4)
summary = ensemble_average(recs)
nonsel = nonselective_sequence(model, rho0, obs, 3, spec)
unmeasured = evolve_direct(model, rho0, 3, spec).reduced
print("step  |mean - nonselective|  std.err   |mean - unmeasured|")
for k in range(4):
    m = summary.mean_reduced[k].rho
    print(
        f"{k:4d}  {trace_distance(m, nonsel[k].rho):.4f}               {summary.std_error[k]:.4f}"
        f"    {trace_distance(m, unmeasured[k].rho):.4f}"
    )
# With memory, measured copies keep interacting, so dephasing them changes
# the later dynamics: the average follows the measured evolution, not the
# unmeasured one.

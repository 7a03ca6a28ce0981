"""Reduced dynamics three ways: brute force, Nakajima-Zwanzig, and the Kraus map.

A qubit talks to a chain of fresh qubits.  With memory (every copy stays
coupled) the reduced state can only be obtained exactly by tracking the whole
chain; the projection recursion reproduces it while carrying Q mu_k along.
"""

# %%
import numpy as np

from qrepeat import (
    ChainSpec,
    HamiltonianChainModel,
    MarkovBlockModel,
    ReducedState,
    evolve_direct,
    markov_kraus,
    nz_evolve,
    nz_evolve_history,
    trace_distance,
)

sx = np.array([[0, 1], [1, 0]])
sz = np.diag([1.0, -1.0])
h0 = 0.7 * sz + 0.3 * sx
c = np.array([[0.2, 1.0], [0.3j, -0.4]])
rho0 = ReducedState.pure([0.6, 0.8j])
spec = ChainSpec(system_dim=2, copy_dim=2, window=5)
print("global dimension", spec.dim)

# %% Full memory: every copy seen so far stays coupled
model = HamiltonianChainModel.with_preset(h0, c, "full-memory", lam=1.0, tau=0.5, gamma=0.4)
direct = evolve_direct(model, rho0, 5, spec)
nz = nz_evolve(model, rho0, 5, spec)
hist = nz_evolve_history(model, rho0, 5, spec)

print("step  purity   |nz - direct|   |history - direct|")
for k, (a, b, h) in enumerate(zip(direct.reduced, nz, hist.reduced)):
    print(f"{k:4d}  {a.purity():.4f}   {trace_distance(a.rho, b.rho):.1e}         {trace_distance(a.rho, h.rho):.1e}")

# the memory shows up as nonzero history terms P L Q ... Q L P
norms = {key: np.linalg.norm(t) for key, t in hist.history.items()}
print("largest history term:", max(norms, key=norms.get), f"{max(norms.values()):.3f}")

# %% Markov case: history terms vanish and a Kraus map does the job
blocks = MarkovBlockModel.from_hamiltonian(h0, c, lam=1.0, tau=0.5, gamma=0.4)
channel = markov_kraus(blocks)
print("Kraus operators L_i = U_i0:")
for op in channel.operators:
    print(np.round(op, 3))

iterates = channel.iterate(rho0.rho, 5)
run = evolve_direct(blocks, rho0, 5, spec)
print("max |L^k(rho0) - direct|:", max(trace_distance(a, b.rho) for a, b in zip(iterates, run.reduced)))
hist = nz_evolve_history(blocks, rho0, 5, spec)
print("max history term:", max(np.linalg.norm(t) for t in hist.history.values()))

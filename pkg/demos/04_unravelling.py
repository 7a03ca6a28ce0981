"""When do measured trajectories stay pure?

Markovian interactions with a non-degenerate observable always keep a pure
state pure.  With memory purity generically fails, except for special
pairings of model and observable.  The test reduces to linear dependence of
two operators H_0(m,n), H_1(m,n) built from the second-step unitary.
"""

# %%
import numpy as np

from qrepeat import (
    ChainSpec,
    HamiltonianChainModel,
    MarkovBlockModel,
    Observable,
    asymptotic_order_scan,
    build_special_model,
    markov_purity_check,
    special_observable,
    unravel_report,
)

sx = np.array([[0, 1], [1, 0]])
sz = np.diag([1.0, -1.0])
c = np.array([[0.2, 1.0], [0.3j, -0.4]])
psi = [0.6, 0.8j]

# %% Markovian: pure for any non-degenerate observable
blocks = MarkovBlockModel.from_hamiltonian(0.7 * sz + 0.3 * sx, c, 1.0, 0.5, 0.4)
for name, a in [("sigma_z", sz), ("sigma_x", sx)]:
    d = markov_purity_check(blocks, Observable.from_matrix(a), psi, 5, range(100))
    print(f"Markov, {name}: max purity deficit {d:.1e}")

# %% Two-copy memory with a Hermitian coupling and a special observable
special = build_special_model(sx, lam=1.0, tau=0.3)
spec = ChainSpec(2, 2, 4)
for name, obs in [("special(1,-1)", special_observable(1, -1)), ("sigma_z", Observable.from_matrix(sz))]:
    rep = unravel_report(special, obs, psi, spec, steps=4, count=200, base_seed=5)
    verdicts = {k: v.verdict for k, v in rep.condition_verdicts.items()}
    print(f"special model, {name}: {rep.classification}, deficit {rep.max_purity_deficit:.2e}, {verdicts}")

# the dependence comes with a sign: H_1 = +H_0 or -H_0
rep = unravel_report(special, special_observable(1, -1), psi, spec, 2, 10, 5)
for key, (h0, h1) in rep.h_ops.items():
    s = np.vdot(h0, h1) / np.vdot(h0, h0)
    print(key, "H1 / H0 =", np.round(s, 12))

# %% Full memory with a non-Hermitian coupling mixes
full = HamiltonianChainModel.with_preset(0.7 * sz, c, "full-memory", 1.0, 0.3)
rep = unravel_report(full, special_observable(1, -1), psi, spec, 4, 200, 5)
print("full memory:", rep.classification, f"{rep.max_purity_deficit:.3f}")

# %% Small-tau structure of the two-step unitary
scan = asymptotic_order_scan(
    HamiltonianChainModel.with_preset(0.7 * sz + 0.2 * sx, c, "full-memory", 1.0, 0.1, gamma=0.3),
    [0.4, 0.2, 0.1, 0.05],
)
for label, r in scan.items():
    print(f"{label:8s} fitted order {r.observed_order:.2f} (expected {r.predicted_order})")

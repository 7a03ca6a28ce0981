import itertools
import math

import numpy as np
import pytest

from modelzoo import SX, SZ, full_memory, markov_blocks, markov_hamiltonian, rho0, two_copy
from qrepeat import (
    ChainSpec,
    GlobalState,
    MarkovBlockModel,
    MeasurementError,
    Observable,
    ReducedState,
    StepUnitary,
    WindowError,
    cylinder_probability,
    ensemble_average,
    evolve_direct,
    nonmark_reconstruct,
    nonmark_terms,
    nonselective_sequence,
    sample_ensemble,
    sample_trajectory,
    step_unitaries,
    step_unitary,
    trajectory_step,
)
from qrepeat.measurement import make_rng, substream_seed
from qrepeat.tensor import random_density, random_hermitian, random_unitary, trace_distance

DIAG = Observable.from_matrix(SZ)


def test_observable_from_matrix():
    obs = Observable.from_matrix(SX)
    assert obs.eigenvalues == (1.0, -1.0)
    assert obs.is_rank_one
    v = obs.eigenvectors()
    np.testing.assert_allclose(v[0], [1 / math.sqrt(2)] * 2, atol=1e-15)
    np.testing.assert_allclose(v[1], [1 / math.sqrt(2), -1 / math.sqrt(2)], atol=1e-15)


def test_identity_model_step_measures_ground(spec3):
    mu = GlobalState.product(rho0(), spec3)
    u = step_unitary(MarkovBlockModel.identity(2, 2), 1, spec3)
    i, p, after = trajectory_step(mu, u, DIAG, 1, make_rng(0))
    assert i == 0 and p == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(after.rho, mu.rho, atol=1e-15)


def test_swap_excitation_is_measured():
    spec = ChainSpec(2, 2, 1)
    mu = GlobalState.product(ReducedState.pure([0, 1]), spec)
    u = step_unitary(MarkovBlockModel.swap(2), 1, spec)
    i, p, _ = trajectory_step(mu, u, DIAG, 1, make_rng(5))
    assert DIAG.eigenvalues[i] == -1.0 and p == pytest.approx(1.0, abs=1e-15)


def test_step_probabilities_complete(rng):
    spec = ChainSpec(2, 2, 2)
    mu = GlobalState(spec, random_density(spec.dim, rng))
    obs = Observable.from_matrix(random_hermitian(2, rng))
    u = StepUnitary(1, random_unitary(spec.dim, rng))
    probs = [cylinder_probability_global(mu.rho, u.matrix, p, spec) for p in obs.projectors]
    assert abs(sum(probs) - 1) <= 1e-12


def cylinder_probability_global(rho, u, proj, spec):
    from qrepeat.tensor import embed_site_operator

    p = embed_site_operator(proj, 1, spec)
    return float(np.real(np.trace(p @ u @ rho @ u.conj().T @ p)))


def test_identity_trajectory_is_trivial(spec3):
    rec = sample_trajectory(MarkovBlockModel.identity(2, 2), rho0(), DIAG, 3, 9, spec3)
    assert rec.outcomes == [0, 0, 0]
    assert max(abs(x) for x in rec.purity_deficits) <= 1e-15
    assert len(rec.reduced_states) == 4 and len(rec.global_states) == 4


def test_same_seed_same_record(spec3):
    a = sample_trajectory(full_memory(), rho0(), DIAG, 3, 1234, spec3)
    b = sample_trajectory(full_memory(), rho0(), DIAG, 3, 1234, spec3)
    assert a.outcomes == b.outcomes and a.branch_probs == b.branch_probs
    for x, y in zip(a.global_states, b.global_states):
        assert np.max(np.abs(x.rho - y.rho)) <= 1e-15


def test_log_probability_matches_cylinder(spec3):
    model = full_memory()
    for seed in range(10):
        rec = sample_trajectory(model, rho0(), DIAG, 3, seed, spec3, keep_global=False)
        assert abs(rec.log_probability - math.log(cylinder_probability(model, rho0(), DIAG, rec.outcomes, spec3))) <= 1e-10


def test_empty_cylinder(spec3):
    assert cylinder_probability(full_memory(), rho0(), DIAG, [], spec3) == 1.0


@pytest.mark.parametrize("make", [markov_blocks, full_memory, two_copy])
def test_kolmogorov_consistency(make, rng):
    spec = ChainSpec(2, 2, 3)
    model = make()
    obs = Observable.from_matrix(random_hermitian(2, rng))
    us = step_unitaries(model, spec, 3)
    for n in range(0, 3):
        for prefix in itertools.product(range(2), repeat=n):
            parent = cylinder_probability(model, rho0(), obs, prefix, spec, us)
            kids = sum(cylinder_probability(model, rho0(), obs, prefix + (i,), spec, us) for i in range(2))
            assert abs(parent - kids) <= 1e-12


def test_single_step_probabilities_agree(spec3):
    model = full_memory()
    mu = GlobalState.product(rho0(), spec3)
    u = step_unitary(model, 1, spec3)
    _, p, _ = trajectory_step(mu, u, DIAG, 1, make_rng(3))
    i, _, _ = trajectory_step(mu, u, DIAG, 1, make_rng(3))
    assert abs(p - cylinder_probability(model, rho0(), DIAG, [i], spec3)) <= 1e-12


def test_zero_probability_branch_never_sampled(spec3):
    for seed in range(50):
        rec = sample_trajectory(MarkovBlockModel.identity(2, 2), rho0(), DIAG, 2, seed, spec3, keep_global=False)
        assert rec.outcomes == [0, 0]


def test_substreams_are_distinct_and_stable():
    seeds = [substream_seed(7, j) for j in range(100)]
    assert len(set(seeds)) == 100
    assert seeds == [substream_seed(7, j) for j in range(100)]
    assert substream_seed(7, 0) != substream_seed(8, 0)


def test_ensemble_independent_of_workers(spec3):
    a = sample_ensemble(full_memory(), rho0(), DIAG, 3, 40, 11, spec3, workers=1)
    b = sample_ensemble(full_memory(), rho0(), DIAG, 3, 40, 11, spec3, workers=4)
    assert [r.outcomes for r in a] == [r.outcomes for r in b]


def test_ensemble_average_single_record(spec3):
    rec = sample_trajectory(full_memory(), rho0(), DIAG, 3, 4, spec3)
    summ = ensemble_average([rec])
    for a, b in zip(summ.mean_reduced, rec.reduced_states):
        np.testing.assert_allclose(a.rho, b.rho, atol=1e-15)
    assert summ.std_error == [0.0] * 4


def test_ensemble_average_identity_model(spec3):
    recs = sample_ensemble(MarkovBlockModel.identity(2, 2), rho0(), DIAG, 3, 20, 1, spec3)
    for r in ensemble_average(recs).mean_reduced:
        np.testing.assert_allclose(r.rho, rho0().rho, atol=1e-15)


def test_ensemble_average_rejects_empty():
    with pytest.raises(ValueError):
        ensemble_average([])


def test_nonselective_equals_direct_for_markov(spec3):
    model = markov_blocks()
    direct = evolve_direct(model, rho0(), 3, spec3).reduced
    for a, b in zip(nonselective_sequence(model, rho0(), DIAG, 3, spec3), direct):
        assert trace_distance(a.rho, b.rho) <= 1e-12


def test_nonselective_is_exact_mean_of_branches(spec3):
    # enumerate all outcome strings; the probability-weighted mean is the oracle
    model = full_memory()
    us = step_unitaries(model, spec3, 3)
    mean = np.zeros((2, 2), dtype=complex)
    from qrepeat.tensor import embed_site_operator, trace_chain

    for outs in itertools.product(range(2), repeat=3):
        mu = GlobalState.product(rho0(), spec3).rho
        for k, i in enumerate(outs, start=1):
            p = embed_site_operator(DIAG.projectors[i], k, spec3)
            mu = p @ us[k - 1] @ mu @ us[k - 1].conj().T @ p
        mean += trace_chain(mu, spec3)
    assert trace_distance(mean, nonselective_sequence(model, rho0(), DIAG, 3, spec3)[3].rho) <= 1e-12


def test_ensemble_mean_converges_to_nonselective(spec3):
    model = full_memory(lam=1.0, tau=0.4)
    recs = sample_ensemble(model, rho0(), DIAG, 3, 2000, 5, spec3)
    summ = ensemble_average(recs)
    oracle = nonselective_sequence(model, rho0(), DIAG, 3, spec3)
    for m, o, se in zip(summ.mean_reduced, oracle, summ.std_error):
        assert trace_distance(m.rho, o.rho) <= max(0.03, 4 * se)


def test_nonmark_identity(spec3):
    rec = sample_trajectory(MarkovBlockModel.identity(2, 2), rho0(), DIAG, 3, 0, spec3)
    for r in nonmark_reconstruct(rec, MarkovBlockModel.identity(2, 2), DIAG, rho0(), spec3):
        np.testing.assert_allclose(r.rho, rho0().rho, atol=1e-15)


@pytest.mark.parametrize("make", [markov_blocks, markov_hamiltonian])
def test_nonmark_markov_history_vanishes(make):
    spec = ChainSpec(2, 2, 4)
    model = make()
    obs = Observable.from_matrix(SX)
    for seed in range(5):
        rec = sample_trajectory(model, rho0(), obs, 4, seed, spec)
        terms = nonmark_terms(rec, model, obs, rho0(), spec)
        assert max(terms.history_norms) <= 1e-10
        for a, b in zip(terms.reduced, rec.reduced_states):
            assert trace_distance(a.rho, b.rho) <= 1e-10


@pytest.mark.parametrize("make", [full_memory, two_copy])
def test_nonmark_reconstructs_memory_trajectories(make):
    spec = ChainSpec(2, 2, 4)
    model = make()
    seen_history = 0.0
    for seed in range(5):
        rec = sample_trajectory(model, rho0(), DIAG, 4, seed, spec)
        for a, b in zip(nonmark_reconstruct(rec, model, DIAG, rho0(), spec), rec.reduced_states):
            assert trace_distance(a.rho, b.rho) <= 1e-9
        seen_history = max(seen_history, max(nonmark_terms(rec, model, DIAG, rho0(), spec).history_norms))
    assert seen_history > 1e-6


def test_nonmark_detects_foreign_record(spec3):
    rec = sample_trajectory(full_memory(), rho0(), DIAG, 3, 0, spec3)
    with pytest.raises(MeasurementError):
        nonmark_reconstruct(rec, full_memory(tau=0.2), DIAG, rho0(), spec3)


def test_window_enforced(spec3):
    with pytest.raises(WindowError):
        sample_trajectory(full_memory(), rho0(), DIAG, 4, 0, spec3)

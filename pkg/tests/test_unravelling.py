import numpy as np
import pytest

from modelzoo import C, H0, SX, SY, SZ, full_memory, markov_blocks, markov_hamiltonian, rho0
from qrepeat import (
    ChainSpec,
    DegenerateObservable,
    HamiltonianChainModel,
    MarkovBlockModel,
    NotHermitianError,
    Observable,
    ReducedState,
    WindowError,
    asymptotic_order_scan,
    build_special_model,
    check_dependence,
    compute_H_operators,
    extract_blocks,
    markov_purity_check,
    special_observable,
    step_unitary,
    unravel_report,
)
from qrepeat.measurement import embed_site_operator
from qrepeat.models import matrix_exponential_unitary
from qrepeat.tensor import embed_system_state, random_hermitian, trace_chain
from qrepeat.unravelling import (
    BLOCK_ORDERS,
    branch_state,
    classify,
    first_step_vector,
    is_markovian,
    observable_family,
    purity_deficit,
)

SPEC2 = ChainSpec(2, 2, 2)


def test_purity_deficit_examples(rng):
    assert purity_deficit(np.diag([1.0, 0.0])) == 0.0
    assert purity_deficit(np.eye(2) / 2) == pytest.approx(0.5)
    psi = rng.normal(size=3) + 1j * rng.normal(size=3)
    assert purity_deficit(ReducedState.pure(psi)) <= 1e-12


@pytest.mark.parametrize(
    "model",
    [markov_blocks(), MarkovBlockModel.swap(2), MarkovBlockModel.from_hamiltonian(H0, C, 0.7, 0.9, 0.0)],
    ids=["generic", "swap", "gamma0"],
)
@pytest.mark.parametrize("obs", [SZ, SX, 0.3 * SX + 0.8 * SY - 0.1 * SZ], ids=["z", "x", "tilted"])
def test_markov_purity(model, obs):
    assert markov_purity_check(model, Observable.from_matrix(obs), [0.6, 0.8j], 5, range(30)) <= 1e-10


def test_markov_purity_identity():
    assert markov_purity_check(MarkovBlockModel.identity(2, 2), Observable.from_matrix(SZ), [0.6, 0.8j], 3, range(5)) == 0.0


def test_markov_purity_needs_rank_one():
    with pytest.raises(DegenerateObservable):
        markov_purity_check(MarkovBlockModel.identity(3, 3), Observable.from_matrix(np.diag([1, 1, 0])), [1, 0, 0], 2, [0])


def test_memory_mixes_trajectories():
    rot = matrix_exponential_unitary(0.4 * SY + 0.2 * SX, 1.0)
    obs = Observable.from_matrix(rot @ SZ @ rot.conj().T)
    model = full_memory(lam=1.0, tau=0.5)
    spec = ChainSpec(2, 2, 4)
    assert markov_purity_check(model, obs, [0.6, 0.8j], 4, range(20), spec) > 1e-4


def test_h_operators_for_identity_unitary():
    obs = Observable.from_matrix(random_hermitian(2, np.random.default_rng(4)))
    blocks = extract_blocks(np.eye(8), SPEC2, [1, 2])
    v = obs.eigenvectors()
    for (m, n), (h0, h1) in compute_H_operators(blocks, obs).items():
        # only U_{(i,i),(0,0)} = I survive
        np.testing.assert_allclose(h0, v[m][0] * np.conj(v[n][0]) * np.eye(2), atol=1e-15)
        np.testing.assert_allclose(h1, v[m][1] * np.conj(v[n][0]) * np.eye(2), atol=1e-15)


def test_h_operators_reproduce_branch_state(rng):
    h0 = random_hermitian(2, rng)
    table = {(k, i): rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for k in (1, 2) for i in range(1, k + 1)}
    model = HamiltonianChainModel.from_table(h0, table, lam=0.8, tau=0.6, gamma=0.3)
    obs = Observable.from_matrix(random_hermitian(2, rng))
    u1 = step_unitary(model, 1, SPEC2).matrix
    u2 = step_unitary(model, 2, SPEC2).matrix
    h_ops = compute_H_operators(extract_blocks(u2, SPEC2, [1, 2]), obs)
    u1_blocks = extract_blocks(step_unitary(model, 1, ChainSpec(2, 2, 1)).matrix, ChainSpec(2, 2, 1), [1])
    psi = np.array([0.6, 0.8j])
    for m in range(2):
        for n in range(2):
            mu = embed_system_state(np.outer(psi, psi.conj()), SPEC2)
            p1 = embed_site_operator(obs.projectors[m], 1, SPEC2)
            p2 = embed_site_operator(obs.projectors[n], 2, SPEC2)
            mu = p2 @ u2 @ p1 @ u1 @ mu @ u1.conj().T @ p1 @ u2.conj().T @ p2
            want = trace_chain(mu, SPEC2)
            want = want / np.trace(want)
            psi1 = first_step_vector(u1_blocks, obs, psi, m)
            np.testing.assert_allclose(branch_state(h_ops[(m, n)], psi1), want, atol=1e-10)


def _special_h_ops(c=SX, tau=0.3):
    model = build_special_model(c, 1.0, tau)
    u2 = step_unitary(model, 2, SPEC2).matrix
    return compute_H_operators(extract_blocks(u2, SPEC2, [1, 2]), special_observable(1, -1))


@pytest.mark.parametrize("c", [SX, 0.4 * SX + 0.7 * SZ, np.array([[0.3, 0.2 - 0.5j], [0.2 + 0.5j, -0.1]])])
def test_special_model_h_operators_are_dependent(c):
    for (m, n), (h0, h1) in _special_h_ops(c).items():
        dep = check_dependence(h0, h1)
        assert dep.verdict == "dependent", (m, n, dep)
        # the second copy keeps sigma_x conserved: H_1 = s H_0 with s = +-1 set by
        # the "-" eigenvector's sign flip between its two components
        s = 1.0 if m == 0 else -1.0
        np.testing.assert_allclose(h1, s * h0, atol=1e-12)


def test_check_dependence_examples():
    a = np.array([[1.0, 2.0], [0.5j, -1.0]])
    dep = check_dependence(a, 3 * a)
    assert dep.verdict == "dependent" and dep.residual <= 1e-14
    nu, mu = dep.coefficients
    np.testing.assert_allclose(nu * a + mu * 3 * a, 0, atol=1e-14)
    ind = check_dependence(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    assert ind.verdict == "independent" and ind.residual == pytest.approx(1.0)
    assert check_dependence(np.zeros((2, 2)), np.zeros((2, 2))).verdict == "degenerate"


def test_special_observable_examples():
    np.testing.assert_allclose(special_observable(1, -1).matrix, SX, atol=1e-15)
    np.testing.assert_allclose(special_observable(1, 0).matrix, 0.5 * np.ones((2, 2)), atol=1e-15)
    obs = Observable.from_matrix(special_observable(2.5, -0.5).matrix)
    np.testing.assert_allclose(obs.projectors[0], 0.5 * np.array([[1, 1], [1, 1]]), atol=1e-12)
    np.testing.assert_allclose(obs.projectors[1], 0.5 * np.array([[1, -1], [-1, 1]]), atol=1e-12)
    with pytest.raises(DegenerateObservable):
        special_observable(1, 1)


def test_special_model_purity():
    model = build_special_model(SX, 1.0, 0.3)
    assert model.memory_window == 2 and model.gamma == 0.0
    spec = ChainSpec(2, 2, 4)
    assert markov_purity_check(model, special_observable(1, -1), [0.6, 0.8j], 4, range(200), spec) <= 1e-8
    assert markov_purity_check(model, Observable.from_matrix(SZ), [0.6, 0.8j], 4, range(50), spec) > 1e-4


def test_special_model_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        build_special_model(SX + 0.2j * SZ, 1.0, 0.3)


def test_order_scan_zero_coupling():
    model = HamiltonianChainModel.with_preset(H0, C, "full-memory", 0.0, 0.1)
    report = asymptotic_order_scan(model, [0.4, 0.2, 0.1, 0.05])
    for label in ("U0100", "U1000", "U0010", "U1110", "U0101", "U1010"):
        assert report[label].zero_block and report[label].observed_order == float("inf")


def test_order_scan_generic():
    model = HamiltonianChainModel.with_preset(0.7 * SZ + 0.2 * SX, C, "full-memory", 1.0, 0.1, gamma=0.3)
    report = asymptotic_order_scan(model, [0.4, 0.2, 0.1, 0.05])
    assert abs(report["U0100"].observed_order - 1) <= 0.2
    assert abs(report["U1010"].observed_order - 2) <= 0.3
    assert set(report) == set(BLOCK_ORDERS)


def test_order_scan_needs_three_points():
    with pytest.raises(ValueError):
        asymptotic_order_scan(full_memory(), [0.1, 0.2])


def test_condition_coherence():
    # all pairs dependent at step 2 -> the measured second-step states are pure
    model = build_special_model(0.4 * SX + 0.7 * SZ, 1.0, 0.5)
    obs = special_observable(1, -1)
    rep = unravel_report(model, obs, [0.6, 0.8j], SPEC2, 2, 100, 3)
    assert all(d.verdict == "dependent" for d in rep.condition_verdicts.values())
    assert rep.max_purity_deficit <= 1e-8
    assert rep.classification == "special-pure"


def test_ground_projector_dichotomy():
    # P_0 = |X0><X0| and C_1(2) != 0: the (0,0) pair is independent at small tau
    obs = Observable.from_matrix(SZ)
    for tau in (0.05, 0.1):
        model = HamiltonianChainModel.with_preset(H0, C, "full-memory", 1.0, tau)
        u2 = step_unitary(model, 2, SPEC2).matrix
        h = compute_H_operators(extract_blocks(u2, SPEC2, [1, 2]), obs)
        assert check_dependence(*h[(0, 0)]).verdict == "independent"


def test_unravel_report_classifications():
    obs_x = special_observable(1, -1)
    rep = unravel_report(markov_blocks(), obs_x, [0.6, 0.8j], ChainSpec(2, 2, 3), 3, 30, 1)
    assert rep.classification == "markov-pure" and rep.tau is None
    rep = unravel_report(full_memory(), Observable.from_matrix(SZ), [0.6, 0.8j], ChainSpec(2, 2, 3), 3, 30, 1)
    assert rep.classification == "mixing"
    assert any(d.verdict == "independent" for d in rep.condition_verdicts.values())
    with pytest.raises(WindowError):
        unravel_report(full_memory(), obs_x, [1, 0], ChainSpec(2, 2, 1), 1, 5, 0)


def test_classify_bands():
    assert classify(1e-12, True) == "markov-pure"
    assert classify(1e-12, False) == "special-pure"
    assert classify(1e-6, False) == "inconclusive"
    assert classify(1e-2, False) == "mixing"


def test_observable_family():
    assert observable_family(special_observable(3, -2)) == "special-form"
    assert observable_family(Observable.from_matrix(SZ)) == "other"
    assert observable_family(Observable.from_matrix(SY)) == "inconclusive"


def test_is_markovian():
    assert is_markovian(markov_blocks(), 3)
    assert is_markovian(markov_hamiltonian(), 3)
    assert not is_markovian(full_memory(), 3)
    assert not is_markovian(build_special_model(SX, 1.0, 0.3), 3)

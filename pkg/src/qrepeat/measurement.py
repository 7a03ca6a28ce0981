"""Repeated indirect measurement on the freshest chain copy.

After the interaction ``U_{k+1}`` the observable is measured on copy ``k+1``;
the conditioned global states form a Markov chain whose reduced part is, in
general, not Markovian.

Random numbers come from numpy's PCG64 bit generator.  Trajectory ``j`` of an
ensemble with base seed ``s`` uses the 64-bit seed
``SeedSequence(s, spawn_key=(j,)).generate_state(1, uint64)[0]``, and a single
trajectory with seed ``t`` draws from ``Generator(PCG64(SeedSequence(t)))``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateObservable, DimensionError, MeasurementError, WindowError
from .models import InteractionModel, StepUnitary, step_unitaries
from .projection import project_P, project_Q
from .tensor import (
    ChainSpec,
    GlobalState,
    ReducedState,
    as_matrix,
    dagger,
    embed_site_operator,
    spectral,
    trace_chain,
)

RNG_ALGORITHM = "numpy.random.PCG64 via SeedSequence; substream seed = SeedSequence(base, spawn_key=(index,)).generate_state(1, uint64)[0]"
ZERO_PROBABILITY = 1e-14


@dataclass(frozen=True)
class Observable:
    """A Hermitian operator on one chain copy with its spectral projectors."""

    matrix: np.ndarray = field(repr=False)
    eigenvalues: tuple
    projectors: tuple = field(repr=False)

    @classmethod
    def from_matrix(cls, matrix) -> "Observable":
        m = as_matrix(matrix)
        w, projs = spectral(m)
        return cls(m, tuple(w), tuple(projs))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_rank_one(self) -> bool:
        return len(self.projectors) == self.dim

    def eigenvectors(self) -> list[np.ndarray]:
        """Unit vectors ``v_m`` with ``P_m = |v_m><v_m|``.

        The phase is fixed so that the first nonzero component is real positive.
        """
        if not self.is_rank_one:
            raise DegenerateObservable("observable has an eigenprojector of rank > 1")
        vecs = []
        for p in self.projectors:
            col = p[:, int(np.argmax(np.linalg.norm(p, axis=0)))]
            v = col / np.linalg.norm(col)
            lead = v[np.flatnonzero(np.abs(v) > 1e-12)[0]]
            vecs.append(v * (abs(lead) / lead))
        return vecs


@dataclass
class TrajectoryRecord:
    """One sampled measurement run.

    ``outcomes[k]`` and ``branch_probs[k]`` belong to the measurement after
    step ``k+1``; the state lists start with the initial state, so they are
    one longer.  ``global_states`` is empty when the run was sampled with
    ``keep_global=False``.
    """

    seed: int
    outcomes: list
    branch_probs: list
    reduced_states: list = field(repr=False)
    purity_deficits: list
    global_states: list = field(default_factory=list, repr=False)

    @property
    def log_probability(self) -> float:
        return float(sum(math.log(p) for p in self.branch_probs))


@dataclass(frozen=True)
class EnsembleSummary:
    count: int
    mean_reduced: list = field(repr=False)
    std_error: list


def substream_seed(base_seed: int, index: int) -> int:
    ss = np.random.SeedSequence(base_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def site_projectors(obs: Observable, site: int, spec: ChainSpec) -> list[np.ndarray]:
    if obs.dim != spec.copy_dim:
        raise DimensionError(f"observable acts on dimension {obs.dim}, copies have {spec.copy_dim}")
    return [embed_site_operator(p, site, spec) for p in obs.projectors]


def _branches(rho: np.ndarray, u: np.ndarray, projs: Sequence[np.ndarray]):
    moved = u @ rho @ dagger(u)
    cands = [p @ moved @ p for p in projs]
    probs = np.array([float(np.real(np.trace(c))) for c in cands])
    return cands, probs


def _sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    live = np.flatnonzero(probs >= ZERO_PROBABILITY)
    if live.size == 0:
        raise MeasurementError(f"all branch probabilities below {ZERO_PROBABILITY}: {probs}")
    cdf = np.cumsum(probs[live])
    u = rng.random() * cdf[-1]
    pos = int(np.searchsorted(cdf, u, side="right"))
    return int(live[min(pos, live.size - 1)])


def trajectory_step(rho_k: GlobalState, u_next: StepUnitary, obs: Observable, site: int, rng: np.random.Generator):
    """One interaction followed by one measurement on ``site``.

    Returns the outcome index, its probability and the renormalised state.
    """
    spec = rho_k.spec
    spec.check_site(site)
    cands, probs = _branches(rho_k.rho, u_next.matrix, site_projectors(obs, site, spec))
    i = _sample_index(probs, rng)
    rho = cands[i] / probs[i]
    return i, float(probs[i]), GlobalState(spec, 0.5 * (rho + dagger(rho)))


def _purity_deficit(rho: np.ndarray) -> float:
    return float(1.0 - np.real(np.vdot(rho, rho)))


def _run(
    us: Sequence[np.ndarray],
    projs: Sequence[Sequence[np.ndarray]],
    rho0: np.ndarray,
    spec: ChainSpec,
    seed: int,
    keep_global: bool,
) -> TrajectoryRecord:
    rng = make_rng(seed)
    rho = rho0
    red = trace_chain(rho, spec)
    outcomes, probs_out = [], []
    reduced, deficits = [red], [_purity_deficit(red)]
    globals_ = [rho] if keep_global else []
    for k, u in enumerate(us):
        cands, probs = _branches(rho, u, projs[k])
        i = _sample_index(probs, rng)
        rho = cands[i] / probs[i]
        rho = 0.5 * (rho + dagger(rho))
        red = trace_chain(rho, spec)
        outcomes.append(i)
        probs_out.append(float(probs[i]))
        reduced.append(red)
        deficits.append(_purity_deficit(red))
        if keep_global:
            globals_.append(rho)
    return TrajectoryRecord(
        seed=seed,
        outcomes=outcomes,
        branch_probs=probs_out,
        reduced_states=[ReducedState(r) for r in reduced],
        purity_deficits=deficits,
        global_states=[GlobalState(spec, g) for g in globals_],
    )


def _prepare(model, obs, steps, spec, unitaries):
    if steps > spec.window:
        raise WindowError(f"{steps} steps exceed the chain window {spec.window}")
    us = list(unitaries)[:steps] if unitaries is not None else step_unitaries(model, spec, steps)
    projs = [site_projectors(obs, k, spec) for k in range(1, steps + 1)]
    return us, projs


def sample_trajectory(
    model: InteractionModel,
    initial_system: ReducedState,
    obs: Observable,
    steps: int,
    seed: int,
    spec: ChainSpec,
    keep_global: bool = True,
    unitaries: Optional[Sequence[np.ndarray]] = None,
) -> TrajectoryRecord:
    """Sample one discrete quantum trajectory; fully determined by ``seed``."""
    us, projs = _prepare(model, obs, steps, spec, unitaries)
    rho0 = GlobalState.product(initial_system, spec).rho
    return _run(us, projs, rho0, spec, int(seed), keep_global)


def sample_ensemble(
    model: InteractionModel,
    initial_system: ReducedState,
    obs: Observable,
    steps: int,
    count: int,
    base_seed: int,
    spec: ChainSpec,
    keep_global: bool = False,
    workers: int = 1,
    unitaries: Optional[Sequence[np.ndarray]] = None,
) -> list[TrajectoryRecord]:
    """``count`` independent trajectories on substreams of ``base_seed``.

    The result does not depend on ``workers``.
    """
    us, projs = _prepare(model, obs, steps, spec, unitaries)
    rho0 = GlobalState.product(initial_system, spec).rho

    def one(j):
        return _run(us, projs, rho0, spec, substream_seed(base_seed, j), keep_global)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(count)))
    return [one(j) for j in range(count)]


def cylinder_probability(
    model: InteractionModel,
    initial_system: ReducedState,
    obs: Observable,
    outcomes: Sequence[int],
    spec: ChainSpec,
    unitaries: Optional[Sequence[np.ndarray]] = None,
) -> float:
    """``Tr[ Pbar_{i_k} L_k ... Pbar_{i_1} L_1 (mu) ]`` without renormalisation."""
    outcomes = list(outcomes)
    if not outcomes:
        return 1.0
    us, _ = _prepare(model, obs, len(outcomes), spec, unitaries)
    mu = GlobalState.product(initial_system, spec).rho
    for k, i in enumerate(outcomes, start=1):
        p = embed_site_operator(obs.projectors[i], k, spec)
        u = us[k - 1]
        mu = p @ u @ mu @ dagger(u) @ p
    return float(np.real(np.trace(mu)))


def ensemble_average(records: Sequence[TrajectoryRecord]) -> EnsembleSummary:
    """Mean reduced state per step.

    ``std_error[k]`` estimates the expected trace-distance error of the mean,
    ``sqrt(d) / 2 * sqrt(sum_ij Var(rho_ij) / M)`` (trace norm bounded by
    ``sqrt(d)`` times the Frobenius norm).
    """
    if not records:
        raise ValueError("ensemble_average needs at least one record")
    lengths = {len(r.reduced_states) for r in records}
    if len(lengths) != 1:
        raise ValueError(f"records have different lengths {sorted(lengths)}")
    stack = np.stack([[s.rho for s in r.reduced_states] for r in records])
    m = stack.shape[0]
    d = stack.shape[-1]
    mean = stack.mean(axis=0)
    if m > 1:
        var = (np.abs(stack - mean) ** 2).sum(axis=0) / (m - 1)
        se = [0.5 * math.sqrt(d) * math.sqrt(float(v.sum()) / m) for v in var]
    else:
        se = [0.0] * stack.shape[1]
    return EnsembleSummary(m, [ReducedState(0.5 * (x + dagger(x))) for x in mean], se)


@dataclass(frozen=True)
class NonMarkovTerms:
    """Step-by-step ``P``/``Q`` decomposition of a conditioned trajectory.

    ``history_norms[k]`` is the Frobenius norm of the contribution of
    ``Q rho_k`` to ``P rho_{k+1}``; ``probabilities[k]`` is the branch
    probability recomputed from the ``P``/``Q`` split.
    """

    reduced: list = field(repr=False)
    probabilities: list
    history_norms: list
    q_norms: list


def nonmark_terms(
    record: TrajectoryRecord,
    model: InteractionModel,
    obs: Observable,
    initial_system: ReducedState,
    spec: ChainSpec,
    unitaries: Optional[Sequence[np.ndarray]] = None,
) -> NonMarkovTerms:
    steps = len(record.outcomes)
    us, projs = _prepare(model, obs, steps, spec, unitaries)
    p_rho = GlobalState.product(initial_system, spec).rho
    q_rho = np.zeros_like(p_rho)
    reduced = [ReducedState(trace_chain(p_rho, spec))]
    probs, hist, qn = [], [], [0.0]
    for k, i in enumerate(record.outcomes):
        u, proj = us[k], projs[k][i]
        from_p = proj @ u @ p_rho @ dagger(u) @ proj
        from_q = proj @ u @ q_rho @ dagger(u) @ proj
        pp, pq = project_P(from_p, spec), project_P(from_q, spec)
        prob = float(np.real(np.trace(pp) + np.trace(pq)))
        if prob < ZERO_PROBABILITY:
            raise MeasurementError(f"outcome {i} at step {k + 1} has probability {prob:.3e}")
        probs.append(prob)
        hist.append(float(np.linalg.norm(pq)) / prob)
        p_rho = (pp + pq) / prob
        q_rho = (project_Q(from_p, spec) + project_Q(from_q, spec)) / prob
        qn.append(float(np.linalg.norm(q_rho)))
        red = trace_chain(p_rho, spec)
        reduced.append(ReducedState(0.5 * (red + dagger(red))))
    return NonMarkovTerms(reduced, probs, hist, qn)


def nonmark_reconstruct(
    record: TrajectoryRecord,
    model: InteractionModel,
    obs: Observable,
    initial_system: ReducedState,
    spec: ChainSpec,
    prob_tol: float = 1e-10,
) -> list[ReducedState]:
    """Rebuild the reduced trajectory along the recorded outcomes from the P/Q split.

    Raises :class:`MeasurementError` when a recomputed branch probability
    differs from the recorded one by more than ``prob_tol``.
    """
    terms = nonmark_terms(record, model, obs, initial_system, spec)
    for k, (a, b) in enumerate(zip(terms.probabilities, record.branch_probs)):
        if abs(a - b) > prob_tol:
            raise MeasurementError(f"step {k + 1}: split probability {a:.15g} != recorded {b:.15g}")
    return terms.reduced


def nonselective_sequence(
    model: InteractionModel,
    initial_system: ReducedState,
    obs: Observable,
    steps: int,
    spec: ChainSpec,
    unitaries: Optional[Sequence[np.ndarray]] = None,
) -> list[ReducedState]:
    """Reduced states of ``mu_{k+1} = sum_i Pbar_i^(k+1) L_{k+1}(mu_k)``.

    This is the exact mean of the conditioned reduced states.  It coincides
    with the unmeasured evolution when measured copies never interact again
    (Markovian models) but not in general: dephasing a copy that keeps
    interacting changes the later dynamics.
    """
    us, projs = _prepare(model, obs, steps, spec, unitaries)
    mu = GlobalState.product(initial_system, spec).rho
    out = [ReducedState(trace_chain(mu, spec))]
    for u, ps in zip(us, projs):
        moved = u @ mu @ dagger(u)
        mu = sum(p @ moved @ p for p in ps)
        red = trace_chain(mu, spec)
        out.append(ReducedState(0.5 * (red + dagger(red))))
    return out

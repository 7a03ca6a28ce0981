"""Purity of reduced quantum trajectories and the two-interaction unravelling test.

After two interactions and two measurements with outcomes ``(m, n)`` the
reduced state is proportional to ``sum_i |H_i(m,n) psi_1><H_i(m,n) psi_1|``,
where ``i`` runs over the basis of the first (unmeasured again) copy.  It is
pure for every ``psi_1`` exactly when the ``H_i(m,n)`` are pairwise linearly
dependent, which :func:`check_dependence` certifies.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DegenerateObservable, DimensionError, NotHermitianError, WindowError
from .measurement import Observable, sample_ensemble, sample_trajectory
from .models import (
    HamiltonianChainModel,
    InteractionModel,
    MarkovBlockModel,
    extract_blocks,
    step_unitaries,
    step_unitary,
)
from .tensor import ChainSpec, ReducedState, as_matrix, dagger, hermiticity_error

PURE_TOL = 1e-8
MIXING_TOL = 1e-4
DEPENDENCE_TOL = 1e-8
ZERO_BLOCK = 1e-14


def purity_deficit(rho) -> float:
    """``1 - Tr[rho^2]``."""
    m = rho.rho if isinstance(rho, ReducedState) else np.asarray(rho)
    return float(1.0 - np.real(np.vdot(m, m)))


def _as_pure_state(state) -> ReducedState:
    if isinstance(state, ReducedState):
        return state
    return ReducedState.pure(state)


def markov_purity_check(
    model: InteractionModel,
    obs: Observable,
    initial_state,
    steps: int,
    seeds: Iterable[int],
    spec: Optional[ChainSpec] = None,
) -> float:
    """Largest purity deficit of the reduced trajectory over all seeds and steps.

    For Markovian interactions and an observable with rank-one eigenprojectors
    a pure initial state stays pure, so the result is at round-off level.
    """
    if not obs.is_rank_one:
        raise DegenerateObservable("purity preservation needs rank-one eigenprojectors")
    rho0 = _as_pure_state(initial_state)
    if purity_deficit(rho0) > 1e-12:
        raise ValueError("initial state is not pure")
    if spec is None:
        spec = ChainSpec(rho0.dim, obs.dim, steps)
    us = step_unitaries(model, spec, steps)
    worst = 0.0
    for seed in seeds:
        rec = sample_trajectory(model, rho0, obs, steps, seed, spec, keep_global=False, unitaries=us)
        worst = max(worst, max(rec.purity_deficits))
    return worst


def compute_H_operators(u2_blocks: dict, obs: Observable) -> dict:
    """Branch operators after the second measurement.

    ``H_i(m, n) = sum_{u,v} <X_u, v_m> <v_n, X_v> U_{(i,u),(v,0)}`` where
    ``v_m`` is the eigenvector of the first outcome (left on copy 1) and
    ``v_n`` that of the second (measured on copy 2).  Returns
    ``{(m, n): (H_0, H_1, ...)}``.
    """
    vecs = obs.eigenvectors()
    c = obs.dim
    out = {}
    for m, vm in enumerate(vecs):
        for n, vn in enumerate(vecs):
            ops = []
            for i in range(c):
                ops.append(
                    sum(
                        vm[u] * np.conj(vn[v]) * u2_blocks[((i, u), (v, 0))]
                        for u in range(c)
                        for v in range(c)
                    )
                )
            out[(m, n)] = tuple(ops)
    return out


def first_step_vector(u1_blocks: dict, obs: Observable, psi, m: int) -> np.ndarray:
    """Unnormalised ``psi_1(m) = sum_i <v_m, X_i> U_{i0} psi``."""
    vm = obs.eigenvectors()[m]
    psi = np.asarray(psi, dtype=complex)
    return sum(np.conj(vm[i]) * (u1_blocks[((i, 0),)] @ psi) for i in range(obs.dim))


def branch_state(h_ops: Sequence[np.ndarray], psi1) -> np.ndarray:
    """Normalised ``sum_i |H_i psi1><H_i psi1|``."""
    psi1 = np.asarray(psi1, dtype=complex)
    rho = sum(np.outer(h @ psi1, np.conj(h @ psi1)) for h in h_ops)
    return rho / np.trace(rho)


@dataclass(frozen=True)
class Dependence:
    verdict: str
    residual: float
    coefficients: tuple


def check_dependence(h0, h1, tol: float = DEPENDENCE_TOL) -> Dependence:
    """Linear-dependence certificate for two operators.

    ``residual`` is the ratio of the smallest to the largest singular value of
    ``[vec h0, vec h1]``; ``coefficients`` is the null direction ``(nu, mu)``
    with ``nu h0 + mu h1 ~ 0``.
    """
    h0, h1 = as_matrix(h0), as_matrix(h1)
    if h0.shape != h1.shape:
        raise DimensionError(f"shapes differ: {h0.shape} vs {h1.shape}")
    stacked = np.column_stack([h0.ravel(), h1.ravel()])
    _, s, vh = np.linalg.svd(stacked, full_matrices=False)
    if s[0] == 0.0:
        return Dependence("degenerate", 0.0, (0.0, 0.0))
    residual = float(s[-1] / s[0])
    null = np.conj(vh[-1])
    verdict = "dependent" if residual <= tol else "independent"
    return Dependence(verdict, residual, (complex(null[0]), complex(null[1])))


def special_observable(lambda0: float, lambda1: float) -> Observable:
    """``lambda0 |+><+| + lambda1 |-><-|`` with ``|+-> = (X_0 +- X_1)/sqrt 2``."""
    if lambda0 == lambda1:
        raise DegenerateObservable("lambda0 == lambda1 gives a degenerate observable")
    plus = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
    minus = 0.5 * np.array([[1, -1], [-1, 1]], dtype=complex)
    return Observable(lambda0 * plus + lambda1 * minus, (float(lambda0), float(lambda1)), (plus, minus))


def build_special_model(c, lam: float, tau: float, h0=None) -> HamiltonianChainModel:
    """Two-copy memory window, no free chain evolution, Hermitian coupling ``c``."""
    c = as_matrix(c)
    if hermiticity_error(c) > 1e-12:
        raise NotHermitianError("the special model needs a Hermitian coupling operator")
    if h0 is None:
        h0 = np.zeros_like(c)
    model = HamiltonianChainModel.with_preset(h0, c, "two-copy", lam, tau, gamma=0.0)
    return dataclasses.replace(model, label="special")


# label -> ((copy-1 row, col), (copy-2 row, col)), predicted order in tau
BLOCK_ORDERS = {
    "U0000-I": (((0, 0), (0, 0)), 1),
    "U1100-I": (((1, 1), (0, 0)), 1),
    "U0100": (((0, 1), (0, 0)), 1),
    "U1000": (((1, 0), (0, 0)), 1),
    "U0010": (((0, 0), (1, 0)), 1),
    "U1110": (((1, 1), (1, 0)), 1),
    "U0101": (((0, 1), (0, 1)), 2),
    "U1010": (((1, 0), (1, 0)), 2),
}


@dataclass(frozen=True)
class BlockOrder:
    label: str
    norms: tuple
    observed_order: float
    predicted_order: int
    zero_block: bool


def asymptotic_order_scan(model: HamiltonianChainModel, taus: Sequence[float]) -> dict:
    """Fit the leading power of ``tau`` in the blocks of the second-step unitary.

    Returns ``{label: BlockOrder}``; a block whose norm never exceeds 1e-14 is
    reported as a zero block with order ``inf``.
    """
    taus = [float(t) for t in taus]
    if len(taus) < 3:
        raise ValueError("need at least three tau values for an order fit")
    spec = ChainSpec(model.system_dim, 2, 2)
    eye = np.eye(model.system_dim)
    norms = {label: [] for label in BLOCK_ORDERS}
    for tau in taus:
        u2 = step_unitary(dataclasses.replace(model, tau=tau), 2, spec).matrix
        blocks = extract_blocks(u2, spec, [1, 2])
        for label, (key, _) in BLOCK_ORDERS.items():
            b = blocks[key] - (eye if label.endswith("-I") else 0)
            norms[label].append(float(np.linalg.norm(b)))
    report = {}
    for label, (_, predicted) in BLOCK_ORDERS.items():
        ns = norms[label]
        if max(ns) <= ZERO_BLOCK:
            report[label] = BlockOrder(label, tuple(ns), math.inf, predicted, True)
            continue
        slope = np.polyfit(np.log(taus), np.log(ns), 1)[0]
        report[label] = BlockOrder(label, tuple(ns), float(slope), predicted, False)
    return report


def is_markovian(model: InteractionModel, steps: int) -> bool:
    """True when no step couples the system to an older copy."""
    if isinstance(model, MarkovBlockModel):
        return True
    return all(model.coupling(k, i) is None for k in range(1, steps + 1) for i in range(1, k))


def observable_family(obs: Observable) -> str:
    """``special-form``, ``other`` or ``inconclusive`` (complex or non-qubit eigenvectors)."""
    if obs.dim != 2 or not obs.is_rank_one:
        return "inconclusive"
    vecs = obs.eigenvectors()
    if any(np.max(np.abs(v.imag)) > 1e-12 for v in vecs):
        return "inconclusive"
    special = all(abs(v[0].real ** 2 - v[1].real ** 2) <= 1e-10 for v in vecs)
    return "special-form" if special else "other"


@dataclass(frozen=True)
class UnravelReport:
    model: str
    observable: np.ndarray = field(repr=False)
    tau: Optional[float]
    h_ops: dict = field(repr=False)
    condition_verdicts: dict
    max_purity_deficit: float
    classification: str
    observable_family: str


def classify(max_deficit: float, markovian: bool, pure_tol: float = PURE_TOL, mixing_tol: float = MIXING_TOL) -> str:
    if max_deficit <= pure_tol:
        return "markov-pure" if markovian else "special-pure"
    if max_deficit > mixing_tol:
        return "mixing"
    return "inconclusive"


def unravel_report(
    model: InteractionModel,
    obs: Observable,
    initial_state,
    spec: ChainSpec,
    steps: int,
    count: int,
    base_seed: int,
    tol: float = DEPENDENCE_TOL,
    workers: int = 1,
    pure_tol: float = PURE_TOL,
    mixing_tol: float = MIXING_TOL,
) -> UnravelReport:
    if spec.window < 2 or steps < 2:
        raise WindowError("the unravelling analysis needs at least two interactions")
    rho0 = _as_pure_state(initial_state)
    u2 = step_unitary(model, 2, spec).matrix
    h_ops = compute_H_operators(extract_blocks(u2, spec, [1, 2]), obs)
    verdicts = {}
    for key, ops in h_ops.items():
        worst = None
        for a in range(len(ops)):
            for b in range(a + 1, len(ops)):
                dep = check_dependence(ops[a], ops[b], tol)
                if worst is None or dep.residual > worst.residual:
                    worst = dep
        verdicts[key] = worst
    records = sample_ensemble(model, rho0, obs, steps, count, base_seed, spec, workers=workers)
    max_def = max(max(r.purity_deficits) for r in records)
    label = model.label if isinstance(model, HamiltonianChainModel) else "markov-blocks"
    tau = model.tau if isinstance(model, HamiltonianChainModel) else None
    return UnravelReport(
        label,
        obs.matrix,
        tau,
        h_ops,
        verdicts,
        max_def,
        classify(max_def, is_markovian(model, steps), pure_tol, mixing_tol),
        observable_family(obs),
    )

"""Projection-operator descriptions of the reduced dynamics.

``P a = Tr_chain(a) (x) beta^{(x)N}`` and ``Q = I - P``.  Two exact
reconstructions of ``P mu_k`` are provided:

* the Nakajima-Zwanzig recursion, which carries ``Q mu_k`` forward (production
  path) or re-sums the whole history of ``P mu_i`` (validation path);
* the time-convolutionless equation, which recovers ``Q mu_k`` from ``P mu_k``
  alone through the memory kernel ``K_k`` and a solve with ``I - K_k``.

Superoperators act in the column-stacking convention, see :func:`qrepeat.tensor.vec`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import IllConditionedKernel, NotUnitaryError, WindowError
from .models import InteractionModel, MarkovBlockModel, step_unitaries
from .tensor import (
    ChainSpec,
    GlobalState,
    ReducedState,
    dagger,
    embed_system_state,
    matrix_unit,
    trace_chain,
    unvec,
    vec,
)

DEFAULT_MAX_CONDITION = 1e8


def project_P(alpha: np.ndarray, spec: ChainSpec) -> np.ndarray:
    return embed_system_state(trace_chain(alpha, spec), spec)


def project_Q(alpha: np.ndarray, spec: ChainSpec) -> np.ndarray:
    return alpha - project_P(alpha, spec)


def _sandwich(u: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    return u @ alpha @ dagger(u)


def _to_reduced(p_alpha: np.ndarray, spec: ChainSpec) -> ReducedState:
    rho = trace_chain(p_alpha, spec)
    return ReducedState(0.5 * (rho + dagger(rho)))


def _initial_p(initial_system: ReducedState, spec: ChainSpec) -> np.ndarray:
    return GlobalState.product(initial_system, spec).rho


def nz_evolve(model: InteractionModel, initial_system: ReducedState, steps: int, spec: ChainSpec) -> list[ReducedState]:
    """Reduced states from the two-term recursion on ``(P mu_k, Q mu_k)``."""
    if steps > spec.window:
        raise WindowError(f"{steps} steps exceed the chain window {spec.window}")
    us = step_unitaries(model, spec, steps)
    p = _initial_p(initial_system, spec)
    q = np.zeros_like(p)
    out = [_to_reduced(p, spec)]
    for u in us:
        moved = _sandwich(u, p + q)
        p, q = project_P(moved, spec), project_Q(moved, spec)
        out.append(_to_reduced(p, spec))
    return out


def history_term(unitaries: Sequence[np.ndarray], spec: ChainSpec, k: int, i: int, p_state: np.ndarray) -> np.ndarray:
    """``P L_{k+1} Q L_k ... Q L_{i+1} (p_state)`` for ``i < k``.

    ``unitaries[p - 1]`` is ``U_p``.
    """
    if not 0 <= i < k:
        raise ValueError(f"history terms need 0 <= i < k, got i={i}, k={k}")
    x = p_state
    for j in range(i + 1, k + 1):
        x = project_Q(_sandwich(unitaries[j - 1], x), spec)
    return project_P(_sandwich(unitaries[k], x), spec)


@dataclass(frozen=True)
class NZHistory:
    """Output of the explicit history-sum form of the recursion.

    ``history[(k, i)]`` is the contribution of ``P mu_i`` to ``P mu_{k+1}``.
    """

    p_states: list = field(repr=False)
    history: dict = field(repr=False)
    reduced: list = field(repr=False)


def nz_evolve_history(
    model: InteractionModel, initial_system: ReducedState, steps: int, spec: ChainSpec
) -> NZHistory:
    """Same sequence as :func:`nz_evolve`, re-summing every history term.

    Quadratic in ``steps``; used to cross-check the carried-Q recursion.
    """
    if steps > spec.window:
        raise WindowError(f"{steps} steps exceed the chain window {spec.window}")
    us = step_unitaries(model, spec, steps)
    ps = [_initial_p(initial_system, spec)]
    history = {}
    for k in range(steps):
        nxt = project_P(_sandwich(us[k], ps[k]), spec)
        for i in range(k):
            term = history_term(us, spec, k, i, ps[i])
            history[(k, i)] = term
            nxt = nxt + term
        ps.append(nxt)
    return NZHistory(ps, history, [_to_reduced(p, spec) for p in ps])


def check_plqlp_zero(
    model: InteractionModel, spec: ChainSpec, k: int, i: int, gamma_state: GlobalState
) -> float:
    """Frobenius norm of ``P L_{k+1} Q L_k ... Q L_{i+1} P gamma``.

    Vanishes for Markovian interactions; generically nonzero with memory.
    """
    if not 0 <= i < k:
        raise ValueError(f"need 0 <= i < k, got i={i}, k={k}")
    if k + 1 > spec.window:
        raise WindowError(f"L_{k + 1} needs a window of at least {k + 1}, have {spec.window}")
    us = step_unitaries(model, spec, k + 1)
    term = history_term(us, spec, k, i, project_P(gamma_state.rho, spec))
    return float(np.linalg.norm(term))


@dataclass(frozen=True)
class KrausChannel:
    """``rho -> sum_i L_i rho L_i^*`` on H0."""

    operators: tuple = field(repr=False)

    def __post_init__(self):
        ops = tuple(np.asarray(op, dtype=complex) for op in self.operators)
        object.__setattr__(self, "operators", ops)
        dim = ops[0].shape[0]
        err = np.linalg.norm(sum(dagger(op) @ op for op in ops) - np.eye(dim))
        if err > 1e-10:
            raise NotUnitaryError(f"Kraus operators are not trace preserving (error {err:.3e})")

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return sum(op @ rho @ dagger(op) for op in self.operators)

    def iterate(self, rho: np.ndarray, n: int) -> list[np.ndarray]:
        """``[rho, L(rho), ..., L^n(rho)]``."""
        out = [np.asarray(rho, dtype=complex)]
        for _ in range(n):
            out.append(self(out[-1]))
        return out


def markov_kraus(model: MarkovBlockModel) -> KrausChannel:
    """One-step reduced channel with Kraus operators ``L_i = U_{i0}``."""
    return KrausChannel(tuple(model.blocks[i, 0] for i in range(model.copy_dim)))


@dataclass(frozen=True)
class MemoryKernel:
    """The superoperator ``K_{k+1}`` in low-rank form ``K = F G``.

    Every term of ``K`` passes through ``P``, whose range is the
    ``d^2``-dimensional space ``{r (x) beta}``, so ``rank K <= (k+1) d^2``.
    ``I - K`` is inverted via the capacitance matrix ``I - G F``, which is
    singular exactly when ``I - K`` is; ``condition_estimate`` is its
    2-norm condition number.
    """

    k: int
    spec: ChainSpec
    left: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)
    condition_estimate: float

    @property
    def matrix(self) -> np.ndarray:
        """Dense ``D^2 x D^2`` matrix acting on ``vec(alpha)``."""
        return self.left @ self.right

    def apply(self, alpha: np.ndarray) -> np.ndarray:
        return unvec(self.left @ (self.right @ vec(alpha)), self.spec.dim)

    def capacitance(self) -> np.ndarray:
        return np.eye(self.right.shape[0]) - self.right @ self.left

    def solve_q(self, p_alpha: np.ndarray) -> np.ndarray:
        """``(I - K)^{-1} K (p_alpha)`` via ``F (I - G F)^{-1} G``."""
        try:
            y = np.linalg.solve(self.capacitance(), self.right @ vec(p_alpha))
        except np.linalg.LinAlgError:
            raise IllConditionedKernel(self.k + 1, np.inf, np.inf) from None
        return unvec(self.left @ y, self.spec.dim)


def tcl_build_kernel(
    model: Optional[InteractionModel],
    spec: ChainSpec,
    k: int,
    history_unitaries: Optional[Sequence[np.ndarray]] = None,
) -> MemoryKernel:
    """Materialise ``K_{k+1}`` from its operational definition.

    ``K_{k+1}(a) = sum_{i=0}^{k} [Q L_{k+1} ... Q L_{i+1}] P [L_{i+1}^{-1} ... L_{k+1}^{-1}](a)``
    where ``L_p^{-1}(a) = U_p^* a U_p`` is applied first for ``p = k+1``.
    """
    if history_unitaries is None:
        history_unitaries = step_unitaries(model, spec, k + 1)
    us = list(history_unitaries)[: k + 1]
    if len(us) < k + 1:
        raise WindowError(f"K_{k + 1} needs U_1..U_{k + 1}, got {len(us)} unitaries")
    d, dim = spec.system_dim, spec.dim
    lefts, rights = [], []
    eye_chain = np.eye(spec.chain_dim)
    for i in range(k + 1):
        w = np.eye(dim, dtype=complex)
        for p in range(i + 1, k + 2):
            w = us[p - 1] @ w
        left = np.empty((dim * dim, d * d), dtype=complex)
        right = np.empty((d * d, dim * dim), dtype=complex)
        for b in range(d):
            for a in range(d):
                r = a + b * d
                m = w @ np.kron(matrix_unit(b, a, d), eye_chain) @ dagger(w)
                right[r] = m.ravel()
                x = embed_system_state(matrix_unit(a, b, d), spec)
                for p in range(i + 1, k + 2):
                    x = project_Q(_sandwich(us[p - 1], x), spec)
                left[:, r] = vec(x)
        lefts.append(left)
        rights.append(right)
    f, g = np.hstack(lefts), np.vstack(rights)
    cap = np.eye(g.shape[0]) - g @ f
    return MemoryKernel(k, spec, f, g, float(np.linalg.cond(cap)))


def apply_kernel_operational(us: Sequence[np.ndarray], spec: ChainSpec, k: int, alpha: np.ndarray) -> np.ndarray:
    """``K_{k+1}(alpha)`` evaluated term by term, without materialising anything."""
    total = np.zeros_like(alpha, dtype=complex)
    for i in range(k + 1):
        x = alpha
        for p in range(k + 1, i, -1):
            x = dagger(us[p - 1]) @ x @ us[p - 1]
        x = project_P(x, spec)
        for p in range(i + 1, k + 2):
            x = project_Q(_sandwich(us[p - 1], x), spec)
        total = total + x
    return total


@dataclass(frozen=True)
class TCLRun:
    reduced: list = field(repr=False)
    conditions: list
    p_states: list = field(repr=False)


def tcl_run(
    model: InteractionModel,
    initial_system: ReducedState,
    steps: int,
    spec: ChainSpec,
    max_condition: float = DEFAULT_MAX_CONDITION,
) -> TCLRun:
    """Time-local propagation ``P mu_{k+1} = P L_{k+1}[P mu_k + (I - K_k)^{-1} K_k P mu_k]``.

    ``conditions[k]`` is the condition estimate of ``I - K_k`` (1.0 for
    ``K_0 = 0``).  Raises :class:`IllConditionedKernel` when it exceeds
    ``max_condition``.
    """
    if steps > spec.window:
        raise WindowError(f"{steps} steps exceed the chain window {spec.window}")
    us = step_unitaries(model, spec, steps)
    p = _initial_p(initial_system, spec)
    ps, reduced, conds = [p], [_to_reduced(p, spec)], []
    for k in range(steps):
        if k == 0:
            q = np.zeros_like(p)
            conds.append(1.0)
        else:
            kernel = tcl_build_kernel(model, spec, k - 1, us)
            conds.append(kernel.condition_estimate)
            if not kernel.condition_estimate <= max_condition:
                raise IllConditionedKernel(k, kernel.condition_estimate, max_condition)
            q = kernel.solve_q(p)
        p = project_P(_sandwich(us[k], p + q), spec)
        ps.append(p)
        reduced.append(_to_reduced(p, spec))
    return TCLRun(reduced, conds, ps)


def tcl_evolve(
    model: InteractionModel,
    initial_system: ReducedState,
    steps: int,
    spec: ChainSpec,
    max_condition: float = DEFAULT_MAX_CONDITION,
) -> list[ReducedState]:
    return tcl_run(model, initial_system, steps, spec, max_condition).reduced

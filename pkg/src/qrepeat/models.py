"""Step unitaries U_k for the homogeneous Markov block model and the spin-chain
Hamiltonian model with memory.

Both model types are immutable; :func:`step_unitary` dispatches on the type.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import DimensionError, NotHermitianError, NotUnitaryError, WindowError
from .tensor import (
    ChainSpec,
    as_matrix,
    dagger,
    embed_site_operator,
    embed_system_operator,
    hermiticity_error,
    is_hermitian,
    matrix_unit,
    unitarity_error,
)

UNITARY_TOL = 1e-10

CouplingFn = Callable[[int, int], Optional[np.ndarray]]


@dataclass(frozen=True)
class MarkovBlockModel:
    """``U = sum_ij U_ij (x) a_ij`` acting on H0 (x) H_k at every step.

    ``blocks[i, j]`` is the operator ``U_ij`` on H0, so ``blocks`` has shape
    ``(copy_dim, copy_dim, system_dim, system_dim)``.
    """

    blocks: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=complex)
        if b.ndim != 4 or b.shape[0] != b.shape[1] or b.shape[2] != b.shape[3]:
            raise DimensionError(f"blocks must have shape (c, c, d, d), got {b.shape}")
        b.setflags(write=False)
        object.__setattr__(self, "blocks", b)
        err = unitarity_error(self.local_unitary())
        if err > UNITARY_TOL:
            raise NotUnitaryError(f"assembled interaction is not unitary (error {err:.3e})")

    @property
    def copy_dim(self) -> int:
        return self.blocks.shape[0]

    @property
    def system_dim(self) -> int:
        return self.blocks.shape[2]

    def local_unitary(self) -> np.ndarray:
        """The single-interaction unitary on H0 (x) H."""
        c = self.copy_dim
        return sum(
            np.kron(self.blocks[i, j], matrix_unit(i, j, c))
            for i in range(c)
            for j in range(c)
        )

    @classmethod
    def from_unitary(cls, u, system_dim: int, copy_dim: int) -> "MarkovBlockModel":
        u = as_matrix(u)
        d, c = system_dim, copy_dim
        if u.shape != (d * c, d * c):
            raise DimensionError(f"expected a {d * c}x{d * c} unitary on H0 (x) H, got {u.shape}")
        t = u.reshape(d, c, d, c)
        return cls(np.transpose(t, (1, 3, 0, 2)).copy())

    @classmethod
    def identity(cls, system_dim: int, copy_dim: int) -> "MarkovBlockModel":
        return cls.from_unitary(np.eye(system_dim * copy_dim), system_dim, copy_dim)

    @classmethod
    def swap(cls, dim: int) -> "MarkovBlockModel":
        """Exchange of H0 and the fresh copy: ``U_ij = a_ji``."""
        blocks = np.zeros((dim, dim, dim, dim), dtype=complex)
        for i in range(dim):
            for j in range(dim):
                blocks[i, j] = matrix_unit(j, i, dim)
        return cls(blocks)

    @classmethod
    def from_hamiltonian(cls, h0, c, lam: float, tau: float, gamma: float = 0.0) -> "MarkovBlockModel":
        """Qubit-copy model ``exp(i tau (h0 + gamma a00 + lam (C a10 + C^* a01)))``."""
        h0, c = as_matrix(h0), as_matrix(c)
        h = (
            np.kron(h0, np.eye(2))
            + gamma * np.kron(np.eye(h0.shape[0]), matrix_unit(0, 0, 2))
            + lam * (np.kron(c, matrix_unit(1, 0, 2)) + np.kron(dagger(c), matrix_unit(0, 1, 2)))
        )
        return cls.from_unitary(matrix_exponential_unitary(h, tau), h0.shape[0], 2)


def _preset_coupling(name: str, c: np.ndarray) -> tuple[CouplingFn, Optional[int]]:
    if name == "full-memory":
        return (lambda k, i: c), None
    if name == "two-copy":
        return (lambda k, i: c if i >= k - 1 else None), 2
    if name == "markov":
        return (lambda k, i: c if i == k else None), 1
    raise ValueError(f"unknown coupling preset {name!r}; use full-memory, two-copy or markov")


COUPLING_PRESETS = ("full-memory", "two-copy", "markov")


@dataclass(frozen=True)
class HamiltonianChainModel:
    """Spin-chain interaction with memory.

    At step ``k`` the generator is ``h0 + gamma sum_{i<=k} a00^(i) +
    lam sum_i (C_i(k) a10^(i) + C_i(k)^* a01^(i))``, the sum running over the
    sites ``i <= k`` inside the memory window, and ``U_k = exp(i tau H)``.

    ``couplings(k, i)`` returns ``C_i(k)`` or ``None`` for a zero coupling.
    ``memory_window=w`` keeps only sites ``i > k - w``; ``None`` keeps all.
    """

    h0: np.ndarray = field(repr=False)
    gamma: float
    lam: float
    tau: float
    couplings: CouplingFn = field(repr=False)
    memory_window: Optional[int] = None
    label: str = "custom"

    def __post_init__(self):
        h0 = as_matrix(self.h0)
        if h0.shape[0] != h0.shape[1]:
            raise DimensionError(f"h0 must be square, got {h0.shape}")
        if hermiticity_error(h0) > 1e-12:
            raise NotHermitianError("h0 must be Hermitian")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.memory_window is not None and self.memory_window < 1:
            raise ValueError("memory_window must be >= 1 or None")
        h0.setflags(write=False)
        object.__setattr__(self, "h0", h0)

    @property
    def system_dim(self) -> int:
        return self.h0.shape[0]

    @classmethod
    def with_preset(
        cls, h0, c, preset: str, lam: float, tau: float, gamma: float = 0.0
    ) -> "HamiltonianChainModel":
        c = as_matrix(c)
        fn, window = _preset_coupling(preset, c)
        return cls(h0=h0, gamma=gamma, lam=lam, tau=tau, couplings=fn, memory_window=window, label=preset)

    @classmethod
    def from_table(cls, h0, table: dict, lam: float, tau: float, gamma: float = 0.0) -> "HamiltonianChainModel":
        """Explicit couplings ``{(k, i): C_i(k)}``; missing entries are zero."""
        table = {key: as_matrix(v) for key, v in table.items()}
        return cls(h0=h0, gamma=gamma, lam=lam, tau=tau, couplings=lambda k, i: table.get((k, i)), label="table")

    def coupling(self, k: int, i: int) -> Optional[np.ndarray]:
        if self.memory_window is not None and i <= k - self.memory_window:
            return None
        c = self.couplings(k, i)
        return None if c is None else as_matrix(c)


InteractionModel = Union[MarkovBlockModel, HamiltonianChainModel]


@dataclass(frozen=True)
class StepUnitary:
    k: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        err = unitarity_error(self.matrix)
        if err > UNITARY_TOL:
            raise NotUnitaryError(f"U_{self.k} is not unitary (error {err:.3e})")


def build_markov_unitary(model: MarkovBlockModel, k: int, spec: ChainSpec) -> StepUnitary:
    """``U_k = sum_ij U_ij (x) a_ij^(k)`` on the truncated global space."""
    if model.system_dim != spec.system_dim or model.copy_dim != spec.copy_dim:
        raise DimensionError(
            f"model blocks ({model.system_dim}, {model.copy_dim}) do not match "
            f"spec ({spec.system_dim}, {spec.copy_dim})"
        )
    spec.check_site(k)
    c = spec.copy_dim
    u = np.zeros((spec.dim, spec.dim), dtype=complex)
    for i, j in itertools.product(range(c), repeat=2):
        if np.any(model.blocks[i, j]):
            u += embed_system_operator(model.blocks[i, j], spec) @ embed_site_operator(
                matrix_unit(i, j, c), k, spec
            )
    return StepUnitary(k, u)


def build_chain_hamiltonian(model: HamiltonianChainModel, k: int, spec: ChainSpec) -> np.ndarray:
    if spec.copy_dim != 2:
        raise DimensionError("the chain Hamiltonian is defined for two-level copies only")
    if model.system_dim != spec.system_dim:
        raise DimensionError(f"h0 has dimension {model.system_dim}, spec.system_dim={spec.system_dim}")
    spec.check_site(k)
    a00, a10, a01 = matrix_unit(0, 0, 2), matrix_unit(1, 0, 2), matrix_unit(0, 1, 2)
    h = embed_system_operator(model.h0, spec)
    for i in range(1, k + 1):
        if model.gamma:
            h = h + model.gamma * embed_site_operator(a00, i, spec)
        c = model.coupling(k, i)
        if c is None or not model.lam:
            continue
        c_glob = embed_system_operator(c, spec)
        h = h + model.lam * (
            c_glob @ embed_site_operator(a10, i, spec)
            + dagger(c_glob) @ embed_site_operator(a01, i, spec)
        )
    return h


def matrix_exponential_unitary(h, tau: float) -> np.ndarray:
    """``exp(i tau h)`` for Hermitian ``h`` via its eigendecomposition."""
    h = as_matrix(h)
    if not is_hermitian(h, 1e-10):
        raise NotHermitianError(f"generator is not Hermitian (error {hermiticity_error(h):.3e})")
    w, v = np.linalg.eigh(0.5 * (h + dagger(h)))
    return (v * np.exp(1j * tau * w)) @ dagger(v)


def step_unitary(model: InteractionModel, k: int, spec: ChainSpec) -> StepUnitary:
    if k > spec.window:
        raise WindowError(f"step {k} exceeds the chain window {spec.window}")
    if isinstance(model, MarkovBlockModel):
        return build_markov_unitary(model, k, spec)
    if isinstance(model, HamiltonianChainModel):
        h = build_chain_hamiltonian(model, k, spec)
        return StepUnitary(k, matrix_exponential_unitary(h, model.tau))
    raise TypeError(f"unsupported interaction model {type(model).__name__}")


def step_unitaries(model: InteractionModel, spec: ChainSpec, steps: int) -> list[np.ndarray]:
    """Matrices of ``U_1 .. U_steps``."""
    if steps > spec.window:
        raise WindowError(f"{steps} steps exceed the chain window {spec.window}")
    return [step_unitary(model, k, spec).matrix for k in range(1, steps + 1)]


def locality_error(u: np.ndarray, spec: ChainSpec, sites: Sequence[int]) -> float:
    """Largest commutator of ``u`` with matrix units on ``sites``.

    Zero exactly when ``u`` acts as the identity on those sites.
    """
    c = spec.copy_dim
    worst = 0.0
    for s in sites:
        for i, j in itertools.product(range(c), repeat=2):
            e = embed_site_operator(matrix_unit(i, j, c), s, spec)
            worst = max(worst, float(np.linalg.norm(u @ e - e @ u)))
    return worst


def extract_blocks(u, spec: ChainSpec, sites: Sequence[int]) -> dict:
    """Operator-valued matrix elements of ``u`` on the listed chain sites.

    Returns ``{((i1, j1), (i2, j2), ...): U}`` with
    ``U = (I (x) <X_i1| (x) <X_i2| ...) u (I (x) |X_j1> (x) |X_j2> ...)``.
    ``u`` is either local to ``H0 (x) sites`` or global; for a global ``u`` the
    unlisted sites are contracted with ``<X_0| . |X_0>``.
    """
    u = as_matrix(u)
    sites = list(sites)
    if len(set(sites)) != len(sites):
        raise DimensionError(f"duplicate sites in {sites}")
    d, c, m = spec.system_dim, spec.copy_dim, len(sites)
    local_dim = d * c**m
    if u.shape == (local_dim, local_dim):
        t = u.reshape([d] + [c] * m + [d] + [c] * m)
        positions = list(range(m))
        n_axes = m
    elif u.shape == (spec.dim, spec.dim):
        for s in sites:
            spec.check_site(s)
        t = u.reshape(spec.dims + spec.dims)
        positions = [s - 1 for s in sites]
        n_axes = spec.window
    else:
        raise DimensionError(f"operator of shape {u.shape} acts neither on H0 (x) {m} sites nor globally")
    blocks = {}
    for rows in itertools.product(range(c), repeat=m):
        for cols in itertools.product(range(c), repeat=m):
            row_idx = [0] * n_axes
            col_idx = [0] * n_axes
            for p, r, q in zip(positions, rows, cols):
                row_idx[p], col_idx[p] = r, q
            index = (slice(None), *row_idx, slice(None), *col_idx)
            blocks[tuple(zip(rows, cols))] = np.array(t[index])
    return blocks


def assemble_blocks(blocks: dict, system_dim: int, copy_dim: int) -> np.ndarray:
    """Inverse of :func:`extract_blocks` for a local operator."""
    out = None
    for key, b in blocks.items():
        term = as_matrix(b)
        for i, j in key:
            term = np.kron(term, matrix_unit(i, j, copy_dim))
        out = term if out is None else out + term
    return out

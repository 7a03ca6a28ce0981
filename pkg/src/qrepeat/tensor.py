"""Dense linear algebra on the truncated space H0 (x) H_1 (x) ... (x) H_N.

Global basis ordering is ``system (x) copy_1 (x) ... (x) copy_N`` with the
system index slowest.  Every operator is a plain ``complex128`` ndarray.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, NotHermitianError, StateError

DEFAULT_CAP = 4096
STATE_ATOL = 1e-10
DEGENERACY_GAP = 1e-9


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-d matrix, got shape {m.shape}")
    return m


def matrix_unit(i: int, j: int, dim: int) -> np.ndarray:
    """The basis operator ``|X_i><X_j|``."""
    e = np.zeros((dim, dim), dtype=complex)
    e[i, j] = 1.0
    return e


def ket(i: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[i] = 1.0
    return v


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def hermiticity_error(a: np.ndarray) -> float:
    return float(np.linalg.norm(a - dagger(a)))


def is_hermitian(a: np.ndarray, tol: float = 1e-10) -> bool:
    a = np.asarray(a)
    return a.shape[0] == a.shape[1] and hermiticity_error(a) <= tol


def unitarity_error(u: np.ndarray) -> float:
    return float(np.linalg.norm(dagger(u) @ u - np.eye(u.shape[0])))


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    u = np.asarray(u)
    return u.shape[0] == u.shape[1] and unitarity_error(u) <= tol


def commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a @ b - b @ a))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of ``a - b``."""
    return 0.5 * float(np.linalg.norm(np.asarray(a) - np.asarray(b), ord="nuc"))


def vec(a: np.ndarray) -> np.ndarray:
    """Column-stacking vectorisation, ``vec(A B C) = (C^T (x) A) vec(B)``."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    return np.asarray(v).reshape((dim, dim), order="F")


def kron(a, b, cap: int = DEFAULT_CAP) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    rows, cols = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    if max(rows, cols) > cap:
        raise DimensionError(f"kron result {rows}x{cols} exceeds the dimension cap {cap}")
    return np.kron(a, b)


def kron_all(ops: Iterable, cap: int = DEFAULT_CAP) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = kron(out, op, cap=cap)
    return out


@dataclass(frozen=True)
class ChainSpec:
    """Dimensions of the system and of the retained window of chain copies."""

    system_dim: int
    copy_dim: int
    window: int
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.system_dim < 2 or self.copy_dim < 2 or self.window < 1:
            raise DimensionError(
                "need system_dim >= 2, copy_dim >= 2 and window >= 1, got "
                f"({self.system_dim}, {self.copy_dim}, {self.window})"
            )
        if self.dim > self.cap:
            raise DimensionError(
                f"global dimension {self.dim} exceeds the cap {self.cap}"
            )

    @property
    def chain_dim(self) -> int:
        return self.copy_dim**self.window

    @property
    def dim(self) -> int:
        return self.system_dim * self.chain_dim

    @property
    def dims(self) -> list[int]:
        return [self.system_dim] + [self.copy_dim] * self.window

    def check_site(self, site: int) -> None:
        if not 1 <= site <= self.window:
            raise DimensionError(f"site {site} outside the window 1..{self.window}")

    def check_operator(self, op: np.ndarray) -> None:
        if op.shape != (self.dim, self.dim):
            raise DimensionError(
                f"operator of shape {op.shape} does not act on the global space of dimension {self.dim}"
            )

    def chain_ground(self) -> np.ndarray:
        """``beta^{(x)N}`` with ``beta = |X_0><X_0|``."""
        return matrix_unit(0, 0, self.chain_dim)


def _check_density(rho: np.ndarray, atol: float) -> None:
    if rho.shape[0] != rho.shape[1]:
        raise StateError(f"density matrix must be square, got {rho.shape}")
    herm = hermiticity_error(rho)
    if herm > atol:
        raise StateError(f"density matrix not Hermitian (error {herm:.3e})")
    tr = np.trace(rho)
    if abs(tr - 1.0) > atol:
        raise StateError(f"density matrix trace {tr:.12g} != 1")
    lo = float(np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))[0])
    if lo < -atol:
        raise StateError(f"density matrix has negative eigenvalue {lo:.3e}")


@dataclass(frozen=True)
class ReducedState:
    """A density operator on the system H0."""

    rho: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = as_matrix(self.rho)
        _check_density(rho, STATE_ATOL)
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def pure(cls, psi) -> "ReducedState":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))


@dataclass(frozen=True)
class GlobalState:
    """A density operator on the truncated global space."""

    spec: ChainSpec
    rho: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = as_matrix(self.rho)
        self.spec.check_operator(rho)
        _check_density(rho, STATE_ATOL)
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def product(cls, system: ReducedState, spec: ChainSpec) -> "GlobalState":
        """``rho (x) beta^{(x)N}``, the canonical initial state."""
        if system.dim != spec.system_dim:
            raise DimensionError(
                f"system state of dimension {system.dim} does not match spec.system_dim={spec.system_dim}"
            )
        return cls(spec, embed_system_state(system.rho, spec))


def embed_system_state(rho: np.ndarray, spec: ChainSpec) -> np.ndarray:
    """``rho (x) beta^{(x)N}`` for any operator ``rho`` on H0 (not only states)."""
    d, n = spec.system_dim, spec.chain_dim
    out = np.zeros((d, n, d, n), dtype=complex)
    out[:, 0, :, 0] = rho
    return out.reshape(spec.dim, spec.dim)


def embed_site_operator(op, site: int, spec: ChainSpec) -> np.ndarray:
    """``I (x) I^{(x)(k-1)} (x) op (x) I^{(x)(N-k)}`` on the global space."""
    op = as_matrix(op)
    spec.check_site(site)
    if op.shape != (spec.copy_dim, spec.copy_dim):
        raise DimensionError(
            f"site operator must be {spec.copy_dim}x{spec.copy_dim}, got {op.shape}"
        )
    left = spec.system_dim * spec.copy_dim ** (site - 1)
    right = spec.copy_dim ** (spec.window - site)
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


def embed_system_operator(op, spec: ChainSpec) -> np.ndarray:
    """``op (x) I`` on the global space."""
    op = as_matrix(op)
    if op.shape != (spec.system_dim, spec.system_dim):
        raise DimensionError(
            f"system operator must be {spec.system_dim}x{spec.system_dim}, got {op.shape}"
        )
    return np.kron(op, np.eye(spec.chain_dim))


def partial_trace(op: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every tensor factor whose position is not in ``keep``.

    ``dims`` lists the factor dimensions in order; kept factors retain their
    relative order in the result.
    """
    dims = list(dims)
    keep = sorted(set(keep))
    n = len(dims)
    total = int(np.prod(dims))
    if op.shape != (total, total):
        raise DimensionError(f"operator shape {op.shape} does not match dims {dims}")
    if any(not 0 <= q < n for q in keep):
        raise DimensionError(f"keep positions {keep} outside 0..{n - 1}")
    t = op.reshape(dims + dims)
    rows = list(range(n))
    cols = [q + n if q in keep else q for q in range(n)]
    out = keep + [q + n for q in keep]
    reduced = np.einsum(t, rows + cols, out)
    kept = int(np.prod([dims[q] for q in keep])) if keep else 1
    return reduced.reshape(kept, kept)


def trace_chain(op: np.ndarray, spec: ChainSpec) -> np.ndarray:
    """``Tr_chain`` of an arbitrary global operator."""
    spec.check_operator(op)
    d, n = spec.system_dim, spec.chain_dim
    return np.trace(op.reshape(d, n, d, n), axis1=1, axis2=3)


def partial_trace_chain(state: GlobalState) -> ReducedState:
    return ReducedState(trace_chain(state.rho, state.spec))


def partial_trace_keep(state, keep_sites: Iterable[int], spec: ChainSpec | None = None) -> np.ndarray:
    """Trace out every chain site not in ``keep_sites``; H0 is always kept.

    ``state`` may be a :class:`GlobalState` or a bare global operator, in which
    case ``spec`` is required.
    """
    if isinstance(state, GlobalState):
        op, spec = state.rho, state.spec
    else:
        if spec is None:
            raise TypeError("spec is required when passing a bare operator")
        op = as_matrix(state)
    keep_sites = set(keep_sites)
    for s in keep_sites:
        spec.check_site(s)
    return partial_trace(op, spec.dims, [0] + sorted(keep_sites))


def spectral(h, tol: float = 1e-10, gap: float = DEGENERACY_GAP):
    """Spectral decomposition ``h = sum_i lambda_i P_i`` of a Hermitian matrix.

    Eigenvalues are returned in decreasing order; eigenvalues closer than
    ``gap`` are merged into a single projector.

    Returns
    -------
    eigenvalues : list of float
    projectors : list of ndarray
    """
    h = as_matrix(h)
    if not is_hermitian(h, tol):
        raise NotHermitianError(f"spectral() needs a Hermitian matrix (error {hermiticity_error(h):.3e})")
    w, v = np.linalg.eigh(0.5 * (h + dagger(h)))
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    groups: list[list[int]] = []
    for idx in range(len(w)):
        if groups and abs(w[groups[-1][-1]] - w[idx]) < gap:
            groups[-1].append(idx)
        else:
            groups.append([idx])
    eigenvalues = [float(np.mean(w[g])) for g in groups]
    projectors = [v[:, g] @ dagger(v[:, g]) for g in groups]
    return eigenvalues, projectors


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (a + dagger(a))


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))

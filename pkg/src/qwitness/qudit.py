"""Dense qudit states, unitary channels and Born-rule probabilities.

Matrices are plain complex ``numpy`` arrays; the small frozen dataclasses
below only attach dimension bookkeeping and check invariants on
construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Tolerance hierarchy: constructor invariants, derived checks, user input.
ATOL_INVARIANT = 1e-12
ATOL_DERIVED = 1e-10
ATOL_INPUT = 1e-9
PSD_FLOOR = -1e-10


class DimensionError(ValueError):
    """Operands live in Hilbert spaces of different dimension."""


class InvariantError(ValueError):
    """A value fails one of its structural invariants (unitarity, trace, ...)."""


def as_matrix(data, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    m = np.array(data, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-d array, got shape {m.shape}")
    if rows is not None and m.shape[0] != rows or cols is not None and m.shape[1] != cols:
        raise DimensionError(f"expected shape ({rows}, {cols}), got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvariantError("matrix has non-finite entries")
    m.setflags(write=False)
    return m


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def _check_square(m: np.ndarray, dim: int) -> None:
    if m.shape != (dim, dim):
        raise DimensionError(f"expected {dim}x{dim} matrix, got {m.shape}")


def _require_same_dim(a: int, b: int) -> None:
    if a != b:
        raise DimensionError(f"dimension mismatch: {a} != {b}")


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if v.size == 0 or not np.all(np.isfinite(v)):
            raise InvariantError("amplitudes must be a non-empty finite vector")
        norm = np.vdot(v, v).real
        if abs(norm - 1.0) > ATOL_INVARIANT:
            raise InvariantError(f"state is not normalized (|psi|^2 = {norm!r})")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> "QuantumState":
        r = np.outer(self.amplitudes, self.amplitudes.conj())
        # Symmetrize so the matrix is exactly Hermitian (FMA can break a_i a_j^* = (a_j a_i^*)^*).
        return QuantumState((r + dagger(r)) / 2)

    def projector(self) -> "Projector":
        return Projector(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Density operator of an N-level system."""

    rho: np.ndarray

    def __post_init__(self):
        rho = as_matrix(self.rho)
        _check_square(rho, rho.shape[0])
        if not np.allclose(rho, dagger(rho), rtol=0, atol=ATOL_INVARIANT):
            raise InvariantError("density matrix is not Hermitian")
        tr = np.trace(rho)
        if abs(tr - 1.0) > ATOL_INVARIANT:
            raise InvariantError(f"density matrix has trace {tr!r}")
        if np.linalg.eigvalsh(rho).min() < PSD_FLOOR:
            raise InvariantError("density matrix is not positive semidefinite")
        object.__setattr__(self, "rho", rho)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def maximally_mixed(cls, dim: int) -> "QuantumState":
        return cls(np.eye(dim, dtype=complex) / dim)


@dataclass(frozen=True, eq=False)
class UnitaryChannel:
    matrix: np.ndarray

    def __post_init__(self):
        u = as_matrix(self.matrix)
        _check_square(u, u.shape[0])
        err = np.abs(dagger(u) @ u - np.eye(u.shape[0])).max()
        if err > ATOL_INVARIANT:
            raise InvariantError(f"matrix is not unitary (max |U^dag U - I| = {err:.3e})")
        object.__setattr__(self, "matrix", u)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "UnitaryChannel":
        return cls(np.eye(dim, dtype=complex))


@dataclass(frozen=True, eq=False)
class Projector:
    matrix: np.ndarray

    def __post_init__(self):
        p = as_matrix(self.matrix)
        _check_square(p, p.shape[0])
        if not np.allclose(p, dagger(p), rtol=0, atol=ATOL_INVARIANT):
            raise InvariantError("projector is not Hermitian")
        if not np.allclose(p @ p, p, rtol=0, atol=ATOL_INVARIANT):
            raise InvariantError("projector is not idempotent")
        object.__setattr__(self, "matrix", p)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def onto_basis_state(cls, dim: int, index: int) -> "Projector":
        p = np.zeros((dim, dim), dtype=complex)
        p[index, index] = 1.0
        return cls(p)


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """Preferred (fixed-point) basis; ``vectors[:, i]`` is the i-th basis state."""

    vectors: np.ndarray

    def __post_init__(self):
        v = as_matrix(self.vectors)
        _check_square(v, v.shape[0])
        if not np.allclose(dagger(v) @ v, np.eye(v.shape[0]), rtol=0, atol=ATOL_INVARIANT):
            raise InvariantError("basis vectors are not orthonormal")
        object.__setattr__(self, "vectors", v)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def state(self, i: int) -> PureState:
        return PureState(self.vectors[:, i])

    def states(self) -> list[PureState]:
        return [self.state(i) for i in range(self.dim)]

    @classmethod
    def computational(cls, dim: int) -> "OrthonormalBasis":
        return cls(np.eye(dim, dtype=complex))


def make_superposition(basis: OrthonormalBasis, coefficients: Sequence[complex]) -> PureState:
    """Return sum_i alpha_i |psi_i>.

    Coefficients whose squared norm is within ``ATOL_INPUT`` of one are
    renormalized; anything further off is rejected.
    """
    alpha = np.asarray(coefficients, dtype=complex).reshape(-1)
    _require_same_dim(alpha.size, basis.dim)
    norm = np.vdot(alpha, alpha).real
    if abs(norm - 1.0) > ATOL_INPUT:
        raise InvariantError(f"superposition coefficients have squared norm {norm!r}, expected 1")
    if norm != 1.0:
        alpha = alpha / np.sqrt(norm)
    return PureState(basis.vectors @ alpha)


def apply_unitary(state: QuantumState, u: UnitaryChannel) -> QuantumState:
    _require_same_dim(state.dim, u.dim)
    out = u.matrix @ state.rho @ dagger(u.matrix)
    # Re-Hermitize to keep accumulated round-off inside the constructor tolerance.
    return QuantumState((out + dagger(out)) / 2)


def dephase_blocks(rho: np.ndarray, basis: np.ndarray, groups: Sequence[Sequence[int]]) -> np.ndarray:
    """Block dephasing: keep coherences inside each group, erase those between groups."""
    in_basis = dagger(basis) @ rho @ basis
    mask = np.zeros(in_basis.shape, dtype=bool)
    for g in groups:
        idx = np.asarray(g, dtype=int)
        mask[np.ix_(idx, idx)] = True
    return basis @ np.where(mask, in_basis, 0) @ dagger(basis)


def apply_dephasing(state: QuantumState, basis: OrthonormalBasis) -> QuantumState:
    """Completely dephasing channel in ``basis``: sum_m <m|rho|m> |m><m|."""
    _require_same_dim(state.dim, basis.dim)
    singletons = [[i] for i in range(basis.dim)]
    out = dephase_blocks(state.rho, basis.vectors, singletons)
    return QuantumState((out + dagger(out)) / 2)


def born_probability(state: QuantumState, projector: Projector) -> float:
    _require_same_dim(state.dim, projector.dim)
    p = np.trace(projector.matrix @ state.rho).real
    if p < -ATOL_INVARIANT or p > 1 + ATOL_INVARIANT:
        raise InvariantError(f"Born probability {p!r} outside [0, 1]")
    return float(min(max(p, 0.0), 1.0))


def random_unitary(dim: int, seed: int) -> UnitaryChannel:
    """Haar-random unitary from the QR decomposition of a complex Ginibre matrix."""
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    # One polar-style cleanup step keeps U^dag U - I well under 1e-12 for N <= 32.
    q = q @ (1.5 * np.eye(dim) - 0.5 * dagger(q) @ q)
    return UnitaryChannel(q)


def random_pure_state(dim: int, rng: np.random.Generator) -> PureState:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return PureState(v / np.linalg.norm(v))

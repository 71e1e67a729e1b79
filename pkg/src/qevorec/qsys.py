"""Quantum states and evolutions.

Qubit ordering is big-endian: qubit 0 is the leftmost Kronecker factor, and
subsystem A of a bipartition is always the leading block of qubits.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ArgumentError, DimensionError, DomainError
from .numkern import I2, SIGMA_X, dagger, eigvalsh, expm_i, kron
from .rng import Rng

STATE_TOL = 1e-10
UNITARY_TOL = 1e-9
BURES_READING = "rho = R R^dagger / Tr[R R^dagger], R = (1 + U) A"


def n_qubits_of(dim: int) -> int:
    n = int(round(np.log2(dim))) if dim > 0 else -1
    if n < 0 or 2**n != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    mat: np.ndarray
    n_q: int
    ket: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        m = np.asarray(self.mat, dtype=np.complex128)
        object.__setattr__(self, "mat", m)
        if m.shape != (2**self.n_q, 2**self.n_q):
            raise DimensionError(f"expected {2**self.n_q}x{2**self.n_q} matrix, got {m.shape}")
        validate_state(m)

    @classmethod
    def from_ket(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=np.complex128).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), n_qubits_of(psi.size), ket=psi)

    @classmethod
    def from_array(cls, mat) -> "DensityMatrix":
        mat = np.asarray(mat, dtype=np.complex128)
        return cls(mat, n_qubits_of(mat.shape[0]))

    @property
    def dim(self):
        return self.mat.shape[0]

    def purity(self) -> float:
        return float(np.real(np.trace(self.mat @ self.mat)))


def validate_state(m, tol=STATE_TOL):
    if np.max(np.abs(m - dagger(m))) > tol:
        raise DomainError("density matrix is not Hermitian")
    tr = np.trace(m)
    if abs(tr - 1.0) > tol:
        raise DomainError(f"density matrix trace is {tr.real:.12g}, expected 1")
    lo = float(eigvalsh(m)[0])
    if lo < -tol:
        raise DomainError(f"density matrix has negative eigenvalue {lo:.3e}")


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    mat: np.ndarray
    n_q: int
    tag: Optional[str] = None

    def __post_init__(self):
        m = np.asarray(self.mat, dtype=np.complex128)
        object.__setattr__(self, "mat", m)
        d = 2**self.n_q
        if m.shape != (d, d):
            raise DimensionError(f"expected {d}x{d} matrix, got {m.shape}")
        dev = np.max(np.abs(dagger(m) @ m - np.eye(d)))
        if dev > UNITARY_TOL:
            raise DomainError(f"matrix is not unitary (max |U^H U - 1| = {dev:.3e})")

    @property
    def dim(self):
        return self.mat.shape[0]


def _check_nq(n_q):
    if int(n_q) != n_q or n_q < 1:
        raise ArgumentError(f"qubit count must be a positive integer, got {n_q!r}")


# -- random generation -------------------------------------------------------


def random_ket(n_q: int, rng: Rng) -> np.ndarray:
    _check_nq(n_q)
    psi = rng.complex_normal(2**n_q)
    return psi / np.linalg.norm(psi)


def random_pure_state(n_q: int, rng: Rng) -> DensityMatrix:
    """Haar-random pure state: Gaussian amplitudes, then normalized."""
    return DensityMatrix.from_ket(random_ket(n_q, rng))


def random_unitary_matrix(n_q: int, rng: Rng, scale: float = 1.0) -> np.ndarray:
    _check_nq(n_q)
    if not scale > 0:
        raise ArgumentError(f"generator scale must be positive, got {scale!r}")
    d = 2**n_q
    m = rng.complex_normal((d, d))
    # U = exp(G), G = scale (M - M^H)/2 anti-Hermitian, so U = exp(i H) with H = -i G
    h = -0.5j * scale * (m - m.conj().T)
    return expm_i(h)


def random_unitary(n_q: int, rng: Rng, scale: float = 1.0) -> UnitaryOp:
    """exp of a random anti-Hermitian generator scale*(M - M^H)/2, M Ginibre."""
    return UnitaryOp(random_unitary_matrix(n_q, rng, scale), n_q, tag="random")


def random_bures_matrix(n_q: int, rng: Rng, scale: float = 1.0) -> np.ndarray:
    _check_nq(n_q)
    d = 2**n_q
    for _ in range(4):
        u = random_unitary_matrix(n_q, rng, scale)
        a = rng.complex_normal((d, d))
        r = (np.eye(d) + u) @ a
        rr = r @ r.conj().T
        tr = float(np.real(np.trace(rr)))
        if tr >= 1e-14:
            rho = rr / tr
            return 0.5 * (rho + rho.conj().T)
    raise DomainError("degenerate Bures draw: Tr(R R^H) < 1e-14 after 3 redraws")


def random_mixed_state_bures(n_q: int, rng: Rng, scale: float = 1.0) -> DensityMatrix:
    """Bures-measure mixed state R R^H / Tr(R R^H) with R = (1 + U) A."""
    return DensityMatrix(random_bures_matrix(n_q, rng, scale), n_q)


# -- partial operations ---------------------------------------------------------


def _check_keep(keep, n_q):
    keep = [int(k) for k in keep]
    if not keep:
        raise ArgumentError("keep must name at least one qubit")
    if len(set(keep)) != len(keep):
        raise ArgumentError(f"duplicate qubit indices in {keep}")
    if any(k < 0 or k >= n_q for k in keep):
        raise ArgumentError(f"qubit indices {keep} out of range for {n_q} qubits")
    return keep


def ptrace_array(rho, n_q: int, keep: Sequence[int]) -> np.ndarray:
    """Reduced state(s) of qubits ``keep`` (in that order); works on stacks."""
    keep = _check_keep(keep, n_q)
    rho = np.asarray(rho)
    lead = rho.shape[:-2]
    nl = len(lead)
    t = rho.reshape(lead + (2,) * (2 * n_q))
    lead_ids = list(range(2 * n_q, 2 * n_q + nl))
    rows = list(range(n_q))
    cols = [n_q + q if q in keep else q for q in range(n_q)]
    out = lead_ids + [rows[q] for q in keep] + [cols[q] for q in keep]
    red = np.einsum(t, lead_ids + rows + cols, out)
    dk = 2 ** len(keep)
    return red.reshape(lead + (dk, dk))


def ptrace_kets(psis, n_q: int, keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrices of pure states given as kets ``(..., 2**n_q)``."""
    keep = _check_keep(keep, n_q)
    psis = np.asarray(psis)
    lead = psis.shape[:-1]
    nl = len(lead)
    t = psis.reshape(lead + (2,) * n_q)
    rest = [q for q in range(n_q) if q not in keep]
    t = np.transpose(t, list(range(nl)) + [nl + q for q in keep + rest])
    m = t.reshape(lead + (2 ** len(keep), 2 ** len(rest)))
    return m @ np.conj(np.swapaxes(m, -1, -2))


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    keep = _check_keep(keep, rho.n_q)
    if keep == list(range(rho.n_q)):
        return rho
    red = ptrace_array(rho.mat, rho.n_q, keep)
    return DensityMatrix(red, len(keep))


def ptranspose_array(rho, n_q: int, split: int, subsystem: str = "A") -> np.ndarray:
    if not (1 <= split <= n_q - 1):
        raise ArgumentError(f"split must be in [1, {n_q - 1}], got {split}")
    if subsystem not in ("A", "B"):
        raise ArgumentError(f"subsystem must be 'A' or 'B', got {subsystem!r}")
    rho = np.asarray(rho)
    lead = rho.shape[:-2]
    da, db = 2**split, 2 ** (n_q - split)
    t = rho.reshape(lead + (da, db, da, db))
    nl = len(lead)
    ax = list(range(nl))
    if subsystem == "A":
        perm = ax + [nl + 2, nl + 1, nl + 0, nl + 3]
    else:
        perm = ax + [nl + 0, nl + 3, nl + 2, nl + 1]
    return np.transpose(t, perm).reshape(rho.shape)


def partial_transpose(rho: DensityMatrix, subsystem: str = "A", split: int = 1) -> np.ndarray:
    """Partial transpose as a plain Hermitian matrix (not necessarily PSD)."""
    return ptranspose_array(rho.mat, rho.n_q, split, subsystem)


def evolve_array(rhos, u) -> np.ndarray:
    u = np.asarray(u)
    return u @ rhos @ dagger(u)


def apply_unitary(rho: DensityMatrix, u: UnitaryOp) -> DensityMatrix:
    if rho.dim != u.dim:
        raise ArgumentError(f"dimension mismatch: state {rho.dim}, unitary {u.dim}")
    out = evolve_array(rho.mat, u.mat)
    out = 0.5 * (out + dagger(out))
    ket = u.mat @ rho.ket if rho.ket is not None else None
    return DensityMatrix(out, rho.n_q, ket=ket)


# -- named states and gates ---------------------------------------------------------

KET0 = np.array([1, 0], dtype=np.complex128)
KET1 = np.array([0, 1], dtype=np.complex128)
KET_MINUS = (KET0 - KET1) / np.sqrt(2)


def _check_eps(eps):
    if not (0.0 <= eps <= 1.0):
        raise ArgumentError(f"epsilon must lie in [0, 1], got {eps!r}")


def cnot() -> UnitaryOp:
    p0 = np.outer(KET0, KET0)
    p1 = np.outer(KET1, KET1)
    return UnitaryOp(kron(p0, I2) + kron(p1, SIGMA_X), 2, tag="cnot")


def singlet() -> DensityMatrix:
    return DensityMatrix.from_ket((np.kron(KET0, KET1) - np.kron(KET1, KET0)) / np.sqrt(2))


def bell_phi_plus() -> DensityMatrix:
    return DensityMatrix.from_ket((np.kron(KET0, KET0) + np.kron(KET1, KET1)) / np.sqrt(2))


def rho_minus(eps: float) -> DensityMatrix:
    """(1 - eps) 1/4 + eps |-><-| (x) |1><1|; separable for every eps."""
    _check_eps(eps)
    proj = np.outer(np.kron(KET_MINUS, KET1), np.kron(KET_MINUS, KET1).conj())
    return DensityMatrix((1 - eps) * np.eye(4) / 4 + eps * proj, 2)


def werner(eps: float) -> DensityMatrix:
    """(1 - eps) 1/4 + eps |S0><S0| with the singlet S0."""
    _check_eps(eps)
    return DensityMatrix((1 - eps) * np.eye(4) / 4 + eps * singlet().mat, 2)


def local_product(*factors: UnitaryOp) -> UnitaryOp:
    mat = kron(*(f.mat for f in factors))
    return UnitaryOp(mat, sum(f.n_q for f in factors), tag="local-product")


def named(kind: str, eps: Optional[float] = None):
    """Look up a named state or gate: rho_minus, werner, cnot, singlet, bell_phi_plus."""
    table = {"cnot": cnot, "singlet": singlet, "bell_phi_plus": bell_phi_plus}
    if kind in table:
        return table[kind]()
    if kind in ("rho_minus", "werner"):
        if eps is None:
            raise ArgumentError(f"{kind} requires epsilon")
        return rho_minus(eps) if kind == "rho_minus" else werner(eps)
    raise ArgumentError(f"unknown named state or gate {kind!r}")
